#include "rach/cli/commands.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

#include <boost/math/distributions/binomial.hpp>
#include <json.hpp>

#include "rach/analytics.hpp"
#include "rach/barring.hpp"
#include "rach/oracle.hpp"
#include "rach/stats.hpp"
#include "rach/timing.hpp"

#ifndef RACH_VERSION
#define RACH_VERSION "0.0.0"
#endif

namespace rach::cli {

std::string tool_version() {
    return RACH_VERSION;
}

namespace {

// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
// into pre-sized slots, so the outcome does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t count, unsigned workers, F&& fn) {
    const auto threads = std::min<std::size_t>(std::max(1u, workers), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count && !failed; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        if (!failed.exchange(true)) {
                            failure = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::string num(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string num(const std::optional<double>& x) {
    return x ? num(*x) : std::string{};
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (const auto s : seeds) {
        out += (out.empty() ? "" : " ") + std::to_string(s);
    }
    return out;
}

std::ofstream open_output(const std::filesystem::path& out_dir, const std::string& name) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / name);
    if (!f) {
        throw std::runtime_error("cannot write " + (out_dir / name).string());
    }
    return f;
}

void write_metadata(std::ostream& out, const std::string& command, const ScenarioFile& cfg,
                    const std::vector<std::uint64_t>& seeds) {
    out << "# tool: rachsim " << tool_version() << '\n';
    out << "# command: " << command << '\n';
    out << "# seeds: base " << cfg.seed;
    if (!seeds.empty()) {
        out << "; replications " << join_seeds(seeds);
    }
    out << '\n';
    out << "# config: " << to_yaml_line(cfg) << '\n';
}

std::string class_name(const ScenarioFile& cfg, ClassId cls) {
    return cfg.classes.at(class_index(cls)).name;
}

struct Pooled {
    std::vector<std::vector<double>> by_class;
    std::vector<std::vector<double>> rep_means;  // [class][replication]
};

Pooled pool_samples(const std::vector<ReplicationResult>& reps, std::size_t classes) {
    Pooled p;
    p.by_class.resize(classes);
    p.rep_means.resize(classes);
    for (const auto& r : reps) {
        const auto& m = r.metrics;
        for (std::size_t i = 0; i < m.service_time_samples.size(); ++i) {
            p.by_class[class_index(m.sample_classes[i])].push_back(m.service_time_samples[i]);
        }
        for (std::size_t c = 0; c < classes && c < m.per_class.size(); ++c) {
            if (m.per_class[c].count > 0) {
                p.rep_means[c].push_back(m.per_class[c].mean_s);
            }
        }
    }
    return p;
}

std::vector<ReplicationResult> run_replications(const ScenarioFile& cfg, const SweepPoint& point) {
    const auto seeds = replication_seeds(cfg);
    std::vector<ReplicationResult> reps(seeds.size());
    parallel_for(seeds.size(), cfg.workers, [&](std::size_t r) {
        reps[r].seed = seeds[r];
        reps[r].metrics = sim::run(build_scenario(cfg, point, seeds[r]));
    });
    return reps;
}

double exact_singletons(std::int64_t n, std::int64_t m) {
    if (n == 0) {
        return 0.0;
    }
    // Each preamble's occupancy is Binomial(n, 1/M).
    const boost::math::binomial_distribution<double> occupancy(static_cast<double>(n), 1.0 / static_cast<double>(m));
    return static_cast<double>(m) * boost::math::pdf(occupancy, 1.0);
}

}  // namespace

std::vector<AnalyzeRow> analyze_grid(const ScenarioFile& cfg) {
    std::vector<AnalyzeRow> rows;
    for (const int k : cfg.analyze.slots) {
        for (const double ratio : cfg.analyze.r_over_r3) {
            const auto bccr = BccrConfig::with_slots(k, ratio * cfg.resources.msg3);
            for (auto n = cfg.analyze.n_min; n <= cfg.analyze.n_max; ++n) {
                const SlotLoad load{n, cfg.preambles};
                AnalyzeRow row{n, cfg.preambles, k, ratio, 0.0, 0.0, std::nullopt};
                if (n > 0) {
                    const auto nd = static_cast<double>(n);
                    row.success_ratio_base = analytics::expected_success(load) / nd;
                    row.success_ratio_bccr = analytics::expected_success_bccr(load, bccr) / nd;
                    if (analytics::effective_throughput(load, std::nullopt, cfg.resources) > 0.0) {
                        row.gain = analytics::throughput_gain(load, bccr, cfg.resources);
                    }
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<ValidateRow> validate_grid(const ScenarioFile& cfg) {
    const auto& v = cfg.validate;
    std::vector<ValidateRow> rows;
    for (const int k : v.slots) {
        for (auto n = v.n_min; n <= v.n_max; n += v.n_step) {
            ValidateRow row;
            row.n = n;
            row.preambles = cfg.preambles;
            row.slots = k;
            rows.push_back(row);
        }
    }
    parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
        auto& row = rows[i];
        const SlotLoad load{row.n, row.preambles};
        const auto bccr = BccrConfig::with_slots(row.slots, 0.0);
        row.closed_form = analytics::expected_success_bccr(load, bccr);
        if (row.slots == 0) {
            row.oracle = exact_singletons(row.n, row.preambles);
            row.tolerance = 1e-9;
        } else {
            const auto est = oracle::mc_slot_parallel(load, bccr, v.trials, derive_seed(cfg.seed, i), 1);
            row.oracle = est.mean;
            row.oracle_std_error = est.std_error;
            row.tolerance = v.tolerance;
        }
        const double diff = std::abs(row.closed_form - row.oracle);
        row.abs_error_ratio = row.n > 0 ? diff / static_cast<double>(row.n) : diff;
        row.pass = row.abs_error_ratio <= row.tolerance;
    });
    return rows;
}

std::vector<std::uint64_t> replication_seeds(const ScenarioFile& cfg) {
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < cfg.replications; ++r) {
        seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    }
    return seeds;
}

std::vector<PointResult> simulate_sweep(const ScenarioFile& cfg) {
    const auto points = sweep_points(cfg);
    const auto seeds = replication_seeds(cfg);
    std::vector<PointResult> results(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
        results[p].point = points[p];
        results[p].replications.resize(seeds.size());
    }
    // Scenarios are built up front so configuration errors surface before
    // any simulation starts.
    std::vector<sim::Scenario> scenarios;
    for (const auto& point : points) {
        for (const auto seed : seeds) {
            scenarios.push_back(build_scenario(cfg, point, seed));
        }
    }
    parallel_for(scenarios.size(), cfg.workers, [&](std::size_t job) {
        auto& rep = results[job / seeds.size()].replications[job % seeds.size()];
        rep.seed = seeds[job % seeds.size()];
        rep.metrics = sim::run(scenarios[job]);
    });
    return results;
}

std::vector<SimulateRow> aggregate(const ScenarioFile& cfg, const std::vector<PointResult>& results) {
    std::vector<SimulateRow> rows;
    for (const auto& pr : results) {
        std::vector<double> mean, median, p99, throughput, ratio, completion;
        for (const auto& r : pr.replications) {
            const auto& m = r.metrics;
            if (!m.service_time_samples.empty()) {
                mean.push_back(m.mean_service_time_s);
                median.push_back(m.median_service_time_s);
                p99.push_back(m.p99_service_time_s);
            }
            throughput.push_back(m.effective_throughput);
            ratio.push_back(m.success_ratio());
            completion.push_back(m.completion_fraction);
        }
        auto avg = [](const std::vector<double>& x) { return x.empty() ? 0.0 : stats::mean(x); };
        SimulateRow all;
        all.point = pr.point;
        all.class_name = "all";
        all.replications = static_cast<int>(pr.replications.size());
        all.mean_service_time_s = avg(mean);
        all.ci95_halfwidth = stats::ci95_halfwidth(mean);
        all.median_service_time_s = avg(median);
        all.p99_service_time_s = avg(p99);
        all.p99_ci95_halfwidth = stats::ci95_halfwidth(p99);
        all.effective_throughput = avg(throughput);
        all.throughput_ci95_halfwidth = stats::ci95_halfwidth(throughput);
        all.success_ratio = avg(ratio);
        all.completion_fraction = avg(completion);
        rows.push_back(all);

        if (cfg.classes.size() < 2) {
            continue;
        }
        for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
            std::vector<double> cm, cmed, cp99, ccomp;
            for (const auto& r : pr.replications) {
                const auto& s = r.metrics.per_class.at(c);
                if (s.count > 0) {
                    cm.push_back(s.mean_s);
                    cmed.push_back(s.median_s);
                    cp99.push_back(s.p99_s);
                }
            }
            SimulateRow row;
            row.point = pr.point;
            row.class_name = cfg.classes[c].name;
            row.replications = all.replications;
            row.mean_service_time_s = avg(cm);
            row.ci95_halfwidth = stats::ci95_halfwidth(cm);
            row.median_service_time_s = avg(cmed);
            row.p99_service_time_s = avg(cp99);
            row.p99_ci95_halfwidth = stats::ci95_halfwidth(cp99);
            row.completion_fraction = all.completion_fraction;
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<PrioritizeResult> prioritize(const ScenarioFile& cfg, std::ostream* progress) {
    if (cfg.classes.size() != 2) {
        throw ConfigError("prioritize needs exactly two classes (the first is prioritized)");
    }
    const auto& p = cfg.prioritize;
    const auto devices = cfg.sweep.devices.empty() ? std::vector<std::int64_t>{cfg.traffic.devices} : cfg.sweep.devices;

    std::vector<PrioritizeResult> out;
    for (const auto n : devices) {
        PrioritizeResult res;
        res.devices = n;

        ScenarioFile bccr_cfg = cfg;
        bccr_cfg.priority = "bands";
        bccr_cfg.barring.probabilities.clear();
        bccr_cfg.barring.static_scale = p.static_scale;
        const SweepPoint bccr_point{n, p.slots, cfg.bccr.r_over_r3, PolicyKind::Static};
        const auto bccr_scenario = build_scenario(bccr_cfg, bccr_point, cfg.seed);
        const double common = std::get<barring::StaticPolicy>(bccr_scenario.barring).per_class.front();
        const auto bccr_pool = pool_samples(run_replications(bccr_cfg, bccr_point), 2);
        res.target_p99_s = stats::quantile(bccr_pool.by_class[0], 0.99);
        if (progress) {
            *progress << "N=" << n << ": BCCR prio p99 " << res.target_p99_s << " s at common P_b " << common << '\n';
        }

        ScenarioFile acb_cfg = cfg;
        acb_cfg.barring.table.clear();
        acb_cfg.horizon_slots = std::min(cfg.horizon_slots, p.search_horizon_slots);
        const SweepPoint acb_point{n, 0, 0.0, PolicyKind::Static};
        struct Eval {
            double barring = 0.0;
            double p99 = std::numeric_limits<double>::infinity();
            Pooled pool;
        };
        auto evaluate = [&](double pb2) {
            acb_cfg.barring.probabilities = {p.acb_prio_barring, pb2};
            Eval e;
            e.barring = pb2;
            ++res.iterations;
            try {
                e.pool = pool_samples(run_replications(acb_cfg, acb_point), 2);
                e.p99 = stats::quantile(e.pool.by_class[0], 0.99);
            } catch (const std::runtime_error&) {
                // Cut off by the search horizon: far too little barring.
            }
            if (progress) {
                *progress << "  ACB P_b2=" << pb2 << ": prio p99 " << e.p99 << " s\n";
            }
            return e;
        };
        auto error_of = [&](const Eval& e) { return std::abs(e.p99 - res.target_p99_s) / res.target_p99_s; };

        // Bisection on log(1 - P_b2): the useful range sits just below 1.
        // An unbarred other class is tried first so that a burst too small
        // to contend keeps the lightest setting that matches.
        double strong = std::log1p(-p.acb_max_barring);
        double weak = 0.0;
        Eval best = evaluate(0.0);
        bool bracketed = false;
        if (error_of(best) <= p.match_tolerance) {
            res.converged = true;
        } else if (best.p99 > res.target_p99_s) {
            Eval e = evaluate(p.acb_max_barring);
            bracketed = e.p99 < res.target_p99_s;
            if (error_of(e) < error_of(best)) {
                best = std::move(e);
            }
            res.converged = error_of(best) <= p.match_tolerance;
        }
        if (!res.converged && bracketed) {
            while (res.iterations < p.max_iterations) {
                const double mid = 0.5 * (strong + weak);
                Eval e = evaluate(-std::expm1(mid));
                const bool too_slow = e.p99 > res.target_p99_s;
                if (error_of(e) < error_of(best)) {
                    best = std::move(e);
                }
                if (error_of(best) <= p.match_tolerance) {
                    res.converged = true;
                    break;
                }
                (too_slow ? weak : strong) = mid;
            }
        }
        // Otherwise even the strongest barring of the other class leaves the
        // prioritized class slower than under BCCR: report the closest point.

        res.matched_p99_s = best.p99;
        res.match_error = error_of(best);

        auto add = [&](const std::string& scheme, const Pooled& pool, const std::vector<double>& barring) {
            for (std::size_t c = 0; c < 2; ++c) {
                SchemeClassRow row;
                row.scheme = scheme;
                row.class_name = cfg.classes[c].name;
                row.barring_probability = barring[c];
                row.mean_service_time_s = stats::mean(pool.by_class[c]);
                row.ci95_halfwidth = stats::ci95_halfwidth(pool.rep_means[c]);
                row.p99_service_time_s = stats::quantile(pool.by_class[c], 0.99);
                res.rows.push_back(row);
            }
        };
        add("bccr", bccr_pool, {common, common});
        add("acb", best.pool, {p.acb_prio_barring, best.barring});
        res.delay_ratio = res.rows[3].mean_service_time_s / res.rows[1].mean_service_time_s;
        out.push_back(std::move(res));
    }
    return out;
}

std::vector<TimingRow> timing_table(const ScenarioFile& cfg) {
    std::vector<TimingRow> rows;
    for (const double ratio : cfg.timing.transmit_ratios) {
        const timing::TimingConfig t{cfg.timing.crs_duration_s, ratio, cfg.timing.propagation_speed};
        rows.push_back({ratio, t.crs_duration_s, t.transmit_duration_s(), timing::max_hearing_distance(t)});
    }
    return rows;
}

int cmd_analyze(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto rows = analyze_grid(cfg);
    auto f = open_output(out_dir, "analyze.csv");
    write_metadata(f, "analyze", cfg, {});
    f << "n,M,k,r_over_r3,success_ratio_base,success_ratio_bccr,gain\n";
    for (const auto& r : rows) {
        f << r.n << ',' << r.preambles << ',' << r.slots << ',' << num(r.r_over_r3) << ','
          << num(r.success_ratio_base) << ',' << num(r.success_ratio_bccr) << ',' << num(r.gain) << '\n';
    }
    log << "analyze: " << rows.size() << " rows -> " << (out_dir / "analyze.csv").string() << '\n';
    return kExitOk;
}

int cmd_validate(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto rows = validate_grid(cfg);
    auto f = open_output(out_dir, "validate.csv");
    write_metadata(f, "validate", cfg, {});
    f << "n,M,k,trials,closed_form,oracle,oracle_std_error,abs_error_ratio,tolerance,verdict\n";
    std::size_t failures = 0;
    double worst = 0.0;
    for (const auto& r : rows) {
        failures += r.pass ? 0 : 1;
        worst = std::max(worst, r.abs_error_ratio);
        f << r.n << ',' << r.preambles << ',' << r.slots << ',' << (r.slots == 0 ? 0 : cfg.validate.trials) << ','
          << num(r.closed_form) << ',' << num(r.oracle) << ',' << num(r.oracle_std_error) << ','
          << num(r.abs_error_ratio) << ',' << num(r.tolerance) << ',' << (r.pass ? "pass" : "fail") << '\n';
    }
    log << "validate: " << rows.size() - failures << "/" << rows.size() << " points pass, worst |error|/n "
        << worst << '\n';
    return failures == 0 ? kExitOk : kExitValidationFailed;
}

int cmd_simulate(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto results = simulate_sweep(cfg);
    const auto rows = aggregate(cfg, results);
    const auto seeds = replication_seeds(cfg);

    auto f = open_output(out_dir, "simulate.csv");
    write_metadata(f, "simulate", cfg, seeds);
    f << "devices,k,r_over_r3,policy,class,replications,mean_service_time_s,ci95_halfwidth,median_service_time_s,"
         "p99_service_time_s,p99_ci95_halfwidth,effective_throughput,throughput_ci95_halfwidth,success_ratio,"
         "completion_fraction\n";
    for (const auto& r : rows) {
        f << r.point.devices << ',' << r.point.slots << ',' << num(r.point.r_over_r3) << ',' << to_string(r.point.policy)
          << ',' << r.class_name << ',' << r.replications << ',' << num(r.mean_service_time_s) << ','
          << num(r.ci95_halfwidth) << ',' << num(r.median_service_time_s) << ',' << num(r.p99_service_time_s) << ','
          << num(r.p99_ci95_halfwidth) << ',' << num(r.effective_throughput) << ','
          << num(r.throughput_ci95_halfwidth) << ',' << num(r.success_ratio) << ',' << num(r.completion_fraction)
          << '\n';
    }

    if (cfg.output.samples) {
        auto s = open_output(out_dir, "samples.csv");
        write_metadata(s, "simulate", cfg, seeds);
        s << "devices,k,r_over_r3,policy,replication,class,service_time_s\n";
        for (const auto& pr : results) {
            for (std::size_t r = 0; r < pr.replications.size(); ++r) {
                const auto& m = pr.replications[r].metrics;
                const std::string key = std::to_string(pr.point.devices) + ',' + std::to_string(pr.point.slots) + ',' +
                                        num(pr.point.r_over_r3) + ',' + to_string(pr.point.policy) + ',' +
                                        std::to_string(r) + ',';
                for (std::size_t i = 0; i < m.service_time_samples.size(); ++i) {
                    s << key << class_name(cfg, m.sample_classes[i]) << ',' << num(m.service_time_samples[i]) << '\n';
                }
            }
        }
    }

    if (cfg.output.trace) {
        auto t = open_output(out_dir, "trace.jsonl");
        nlohmann::json meta = {{"tool", "rachsim " + tool_version()},
                               {"command", "simulate"},
                               {"seed", cfg.seed},
                               {"replication_seeds", seeds},
                               {"config", to_yaml_line(cfg)}};
        t << meta.dump() << '\n';
        for (const auto& pr : results) {
            for (std::size_t r = 0; r < pr.replications.size(); ++r) {
                for (const auto& rec : pr.replications[r].metrics.trace) {
                    nlohmann::json j = {{"devices", pr.point.devices},
                                        {"k", pr.point.slots},
                                        {"r_over_r3", pr.point.r_over_r3},
                                        {"policy", to_string(pr.point.policy)},
                                        {"replication", r},
                                        {"slot", rec.slot},
                                        {"contenders", rec.contenders},
                                        {"activated", rec.activated},
                                        {"successes", rec.successes},
                                        {"collisions", rec.collisions},
                                        {"cr_losers", rec.cr_losers},
                                        {"barring_probability", rec.barring_probability}};
                    t << j.dump() << '\n';
                }
            }
        }
    }

    log << "simulate: " << results.size() << " sweep points x " << cfg.replications << " replications -> "
        << (out_dir / "simulate.csv").string() << '\n';
    return kExitOk;
}

int cmd_prioritize(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto results = prioritize(cfg, &log);
    auto f = open_output(out_dir, "prioritize.csv");
    write_metadata(f, "prioritize", cfg, replication_seeds(cfg));
    f << "devices,scheme,class,barring_probability,replications,mean_service_time_s,ci95_halfwidth,"
         "p99_service_time_s,match_error,iterations,converged,delay_ratio\n";
    bool all_converged = true;
    for (const auto& r : results) {
        all_converged = all_converged && r.converged;
        for (const auto& row : r.rows) {
            f << r.devices << ',' << row.scheme << ',' << row.class_name << ',' << num(row.barring_probability) << ','
              << cfg.replications << ',' << num(row.mean_service_time_s) << ',' << num(row.ci95_halfwidth) << ','
              << num(row.p99_service_time_s) << ',' << num(r.match_error) << ',' << r.iterations << ','
              << (r.converged ? "yes" : "no") << ',' << num(r.delay_ratio) << '\n';
        }
        log << "N=" << r.devices << ": " << (r.converged ? "matched" : "NOT matched") << " prio p99 within "
            << r.match_error * 100.0 << "% after " << r.iterations << " ACB evaluations; other class is "
            << r.delay_ratio << "x slower under ACB\n";
    }
    return all_converged ? kExitOk : kExitValidationFailed;
}

int cmd_timing(const ScenarioFile& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto rows = timing_table(cfg);
    auto f = open_output(out_dir, "timing.csv");
    write_metadata(f, "timing", cfg, {});
    f << "transmit_ratio,crs_duration_s,transmit_duration_s,max_hearing_distance_m\n";
    for (const auto& r : rows) {
        f << num(r.transmit_ratio) << ',' << num(r.crs_duration_s) << ',' << num(r.transmit_duration_s) << ','
          << num(r.max_hearing_distance_m) << '\n';
        log << "ratio " << r.transmit_ratio << ": UEs hear each other up to " << r.max_hearing_distance_m << " m\n";
    }
    return kExitOk;
}

}  // namespace rach::cli
