// Acceptance checks. Each criterion prints one PASS/FAIL line; the exit code
// is 0 only when every selected criterion passes.
//
//   acceptance --criterion 4     run one criterion
//   acceptance                   run all of them

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rach/analytics.hpp"
#include "rach/bccr.hpp"
#include "rach/cli/commands.hpp"
#include "rach/cli/config.hpp"
#include "rach/oracle.hpp"
#include "rach/sim.hpp"
#include "rach/stats.hpp"
#include "rach/timing.hpp"

using namespace rach;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

const std::filesystem::path kConfigs = ACCEPTANCE_CONFIG_DIR;

unsigned hardware_workers() { return std::max(1U, std::thread::hardware_concurrency()); }

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

Verdict success_ratio_anchor() {
    const SlotLoad load{50, 30};
    const double base = analytics::expected_success(load) / 50.0;
    const double bccr = analytics::expected_success_bccr(load, BccrConfig::with_slots(1, 0.08)) / 50.0;
    const bool ok = std::abs(base - 0.190) <= 0.005 && std::abs(bccr - 0.315) <= 0.010;
    return {ok, "n=50 M=30: baseline " + fmt(base) + " (0.190 +/- 0.005), k=1 " + fmt(bccr) + " (0.315 +/- 0.010)"};
}

Verdict oracle_agreement() {
    auto cfg = cli::load_config(kConfigs / "validate.yaml");
    cfg.workers = hardware_workers();
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = cli::validate_grid(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::size_t failures = 0;
    const cli::ValidateRow* worst = nullptr;
    for (const auto& r : rows) {
        failures += r.pass ? 0 : 1;
        if (!worst || r.abs_error_ratio > worst->abs_error_ratio) {
            worst = &r;
        }
    }
    const bool grid_ok = rows.size() == 194 * 3 && cfg.validate.trials == 100000 && cfg.validate.tolerance == 0.03;
    std::string detail = std::to_string(rows.size() - failures) + "/" + std::to_string(rows.size()) +
                         " points within 0.03, worst |error| " + fmt(worst ? worst->abs_error_ratio : 0.0) +
                         " at n=" + std::to_string(worst ? worst->n : 0) + " k=" +
                         std::to_string(worst ? worst->slots : 0) + ", " + fmt(secs, 3) + " s";
    return {grid_ok && failures == 0, detail};
}

Verdict gain_crossings() {
    const ResourceModel resources;
    auto gain = [&](std::int64_t n, int k, double r_over_r3) {
        const auto cfg = BccrConfig::with_slots(k, r_over_r3 * resources.msg3);
        return analytics::throughput_gain({n, 30}, cfg, resources);
    };

    // (a) Low micro-slot cost: gain above 1 for all n >= 2.
    bool low_ok = true;
    std::string low_detail;
    for (const int k : {1, 2, 4}) {
        std::vector<std::int64_t> below;
        double min_gain = 1e9;
        for (std::int64_t n = 2; n <= 195; ++n) {
            const double g = gain(n, k, 0.04);
            min_gain = std::min(min_gain, g);
            if (g <= 1.0) {
                below.push_back(n);
            }
        }
        low_ok = low_ok && below.empty();
        low_detail += " k=" + std::to_string(k) + ": min gain " + fmt(min_gain, 5);
        if (!below.empty()) {
            low_detail += " (<= 1 at n=" + std::to_string(below.front()) + ".." + std::to_string(below.back()) + ")";
        }
        low_detail += ";";
    }

    // (b) High cost: first n from which the gain stays above 1.
    std::optional<int> matched_k;
    std::string high_detail;
    for (const int k : {1, 2, 4}) {
        std::int64_t crossing = -1;
        for (std::int64_t n = 195; n >= 2; --n) {
            if (gain(n, k, 0.5) <= 1.0) {
                crossing = n + 1;
                break;
            }
        }
        high_detail += " k=" + std::to_string(k) + ": n=" + std::to_string(crossing) + ";";
        if (!matched_k && crossing >= 31 && crossing <= 41) {
            matched_k = k;
        }
    }
    const bool ok = low_ok && matched_k.has_value();
    return {ok, "(a) r/r3=0.04" + low_detail + " (b) r/r3=0.5 crossing" + high_detail +
                    (matched_k ? " 36 +/- 5 matched at k=" + std::to_string(*matched_k) : " no k within 36 +/- 5")};
}

Verdict hearing_distance() {
    const double d = timing::max_hearing_distance({66.67e-6, 0.9, 2.998e8});
    return {std::abs(d - 1000.0) <= 2.0, "66.67 us, ratio 0.9: " + fmt(d, 6) + " m (1000 +/- 2)"};
}

Verdict exhaustive_oracle() {
    int cases = 0;
    int mismatches = 0;
    for (std::int64_t n = 1; n <= 4; ++n) {
        for (std::int64_t m = 1; m <= 3; ++m) {
            for (int l = 1; l <= 4; ++l) {
                const SlotLoad load{n, m};
                const BccrConfig cfg{l, 0.0};
                const auto direct = oracle::enumerate_slot(load, cfg, oracle::Rule::MinimumUnique);
                const auto micro = oracle::enumerate_slot(load, cfg, oracle::Rule::MicroSlot);
                ++cases;
                if (direct.total_successes != micro.total_successes || direct.outcomes != micro.outcomes) {
                    ++mismatches;
                }
            }
        }
    }
    const auto pair = oracle::enumerate_slot({2, 2}, BccrConfig{2, 0.0});
    const auto pair_micro = oracle::enumerate_slot({2, 2}, BccrConfig{2, 0.0}, oracle::Rule::MicroSlot);
    const bool ok = mismatches == 0 && pair.expected() == 1.25 && pair_micro.expected() == 1.25;
    return {ok, std::to_string(cases - mismatches) + "/" + std::to_string(cases) +
                    " (n, M, l) cases identical; n=2 M=2 l=2 gives " + fmt(pair.expected()) + " and " +
                    fmt(pair_micro.expected()) + " (1.25)"};
}

Verdict simulation_shape() {
    auto cfg = cli::load_config(kConfigs / "service_time.yaml");
    cfg.workers = hardware_workers();
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = cli::aggregate(cfg, cli::simulate_sweep(cfg));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::map<int, std::vector<double>> n_by_k;
    std::map<int, std::vector<double>> delay_by_k;
    std::map<int, std::map<std::int64_t, double>> throughput_by_k;
    for (const auto& r : rows) {
        if (r.class_name != "all" || r.point.policy != cli::PolicyKind::Estimated) {
            continue;
        }
        n_by_k[r.point.slots].push_back(static_cast<double>(r.point.devices));
        delay_by_k[r.point.slots].push_back(r.mean_service_time_s);
        throughput_by_k[r.point.slots][r.point.devices] = r.effective_throughput.value_or(0.0);
    }

    bool linear = true;
    bool saturated = true;
    std::string linear_detail = "(a) R^2";
    std::string saturation_detail = "(b) increase 8000->10000";
    for (const auto& [k, xs] : n_by_k) {
        const auto fit = stats::fit_line(xs, delay_by_k[k]);
        linear = linear && fit.r_squared >= 0.95;
        linear_detail += " k=" + std::to_string(k) + ":" + fmt(fit.r_squared);
        const auto& t = throughput_by_k[k];
        const double rise = (t.at(10000) - t.at(8000)) / t.at(8000);
        saturated = saturated && rise <= 0.10;
        saturation_detail += " k=" + std::to_string(k) + ":" + fmt(100.0 * rise, 3) + "%";
    }

    const double t0k = throughput_by_k[0].at(10000);
    const double t1k = throughput_by_k[1].at(10000);
    const double t2k = throughput_by_k[2].at(10000);
    const double t4k = throughput_by_k[4].at(10000);
    const bool ordered = t4k > t2k && t2k > t1k && t1k > t0k;
    const std::string order_detail = "(c) N=10000 throughput k=4 " + fmt(t4k) + ", k=2 " + fmt(t2k) + ", k=1 " +
                                     fmt(t1k) + ", none " + fmt(t0k);

    const bool complete = n_by_k.size() == 4 && cfg.replications == 10;
    return {complete && linear && saturated && ordered,
            linear_detail + "; " + saturation_detail + "; " + order_detail + "; " + fmt(secs, 3) + " s"};
}

Verdict prioritization() {
    auto cfg = cli::load_config(kConfigs / "prioritize.yaml");
    const auto results = cli::prioritize(cfg);
    const auto& r = results.at(0);
    const double bccr_regular = r.rows.at(1).mean_service_time_s;
    const double acb_regular = r.rows.at(3).mean_service_time_s;
    const bool ok = r.devices == 10000 && r.converged && r.match_error <= 0.02 && bccr_regular <= 0.5 * acb_regular;
    return {ok, "N=" + std::to_string(r.devices) + ": prio p99 matched within " + fmt(100.0 * r.match_error, 3) +
                    "% at ACB P_b=" + fmt(r.rows.at(3).barring_probability, 6) + "; regular class mean " +
                    fmt(bccr_regular) + " s (BCCR) vs " + fmt(acb_regular) + " s (ACB), factor " +
                    fmt(r.delay_ratio, 3)};
}

// Multisets of `size` values from [0, levels) in nondecreasing order.
void for_each_multiset(int size, int levels, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> v(static_cast<std::size_t>(size), 0);
    while (true) {
        visit(v);
        int i = size - 1;
        while (i >= 0 && v[static_cast<std::size_t>(i)] == levels - 1) {
            --i;
        }
        if (i < 0) {
            return;
        }
        const int next = v[static_cast<std::size_t>(i)] + 1;
        for (int j = i; j < size; ++j) {
            v[static_cast<std::size_t>(j)] = next;
        }
    }
}

Verdict protocol_invariants() {
    std::vector<std::string> failed;

    bool round_trip = true;
    for (int k = 1; k <= 8; ++k) {
        for (int p = 0; p < (1 << k); ++p) {
            const auto seq = bccr::encode_priority(p, k);
            round_trip = round_trip && bccr::decode_priority(seq.bits) == p && seq.bits.size() == std::size_t(k);
        }
    }
    if (!round_trip) {
        failed.push_back("round trip");
    }

    // Every multiset of up to 5 contenders over up to 16 levels, in two
    // orders, through the micro-slots and through the minimum rule; the
    // traced run must also keep every dropped contender silent.
    std::int64_t multisets = 0;
    bool equivalent = true;
    bool silent = true;
    for (int levels = 1; levels <= 16; ++levels) {
        const int k = BccrConfig{levels, 0.0}.slots();
        for (int size = 1; size <= 5; ++size) {
            for_each_multiset(size, levels, [&](const std::vector<int>& sorted) {
                ++multisets;
                for (auto v : {sorted, std::vector<int>(sorted.rbegin(), sorted.rend())}) {
                    const auto trace = bccr::resolve_contention_traced(v, k);
                    equivalent = equivalent && trace.outcome == bccr::resolve_by_minimum(v) &&
                                 bccr::resolve_contention(v, k) == trace.outcome;
                    for (std::size_t i = 0; i < v.size(); ++i) {
                        if (!trace.dropped_at[i]) {
                            continue;
                        }
                        for (int j = *trace.dropped_at[i]; j < k; ++j) {
                            const auto& b = trace.broadcasters[static_cast<std::size_t>(j)];
                            silent = silent && std::find(b.begin(), b.end(), i) == b.end();
                        }
                    }
                }
            });
        }
    }
    if (!equivalent) {
        failed.push_back("min-unique equivalence");
    }
    if (!silent) {
        failed.push_back("silence after loss");
    }

    // Whole-burst runs: same seed, same result; every device ends connected
    // or dropped and is counted once.
    const auto cfg = cli::parse_config("traffic: {devices: 3000}\nretry_cap: 6\n");
    bool deterministic = true;
    bool conserved = true;
    for (const int slots : {0, 1, 4}) {
        const cli::SweepPoint point{3000, slots, 0.04, cli::PolicyKind::Estimated};
        const auto scenario = cli::build_scenario(cfg, point, 77);
        const auto a = sim::run(scenario);
        const auto b = sim::run(scenario);
        deterministic = deterministic && a.service_time_samples == b.service_time_samples && a.slots == b.slots &&
                        a.attempts == b.attempts && a.trace.size() == b.trace.size();

        sim::Simulator s(scenario);
        while (!s.finished()) {
            s.step_slot();
            std::int64_t in_flight = 0;
            std::int64_t done = 0;
            for (const auto& ue : s.ues()) {
                const bool terminal = ue.phase == sim::Phase::Connected || ue.phase == sim::Phase::Dropped;
                (terminal ? done : in_flight) += 1;
            }
            conserved = conserved && done + in_flight == 3000;
        }
        const auto m = s.metrics();
        conserved = conserved && m.connected + m.dropped == 3000 &&
                    static_cast<std::int64_t>(m.service_time_samples.size()) == m.connected &&
                    m.successes == m.connected;
    }
    if (!deterministic) {
        failed.push_back("determinism by seed");
    }
    if (!conserved) {
        failed.push_back("conservation");
    }

    std::string detail = "round trip k=1..8, " + std::to_string(multisets) +
                         " multisets (l<=16, <=5 contenders), silence after loss, determinism, conservation";
    if (!failed.empty()) {
        detail += "; failed:";
        for (const auto& f : failed) {
            detail += " " + f;
        }
    }
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks for the random access simulator"};
    std::vector<int> selected;
    app.add_option("--criterion", selected, "Criterion number (repeatable); all when omitted")
        ->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"success-ratio anchor", success_ratio_anchor},
        {"oracle agreement", oracle_agreement},
        {"gain crossings", gain_crossings},
        {"hearing distance", hearing_distance},
        {"exhaustive oracle", exhaustive_oracle},
        {"simulation shape", simulation_shape},
        {"prioritization", prioritization},
        {"protocol invariants", protocol_invariants},
    };
    if (selected.empty()) {
        for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
            selected.push_back(i);
        }
    }

    bool all = true;
    for (const int c : selected) {
        const auto& [name, check] = criteria[static_cast<std::size_t>(c - 1)];
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        all = all && v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c << " (" << name << "): " << v.detail
                  << std::endl;
    }
    return all ? 0 : 1;
}
