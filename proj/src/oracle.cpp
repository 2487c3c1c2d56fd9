#include "rach/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rach/bccr.hpp"

namespace rach::oracle {

namespace {

constexpr std::int64_t kChunkTrials = 8192;

bool shared_preamble_succeeds(std::span<const int> priorities, Rule rule, int slots) {
    if (rule == Rule::MicroSlot) {
        return bccr::resolve_contention(priorities, slots).has_winner();
    }
    const int best = *std::min_element(priorities.begin(), priorities.end());
    return std::count(priorities.begin(), priorities.end(), best) == 1;
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t count = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++count;
    }
    void merge(const Moments& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    McEstimate estimate() const {
        McEstimate e;
        e.trials = count;
        if (count == 0) {
            return e;
        }
        const double n = static_cast<double>(count);
        e.mean = sum / n;
        if (count > 1) {
            const double var = std::max(0.0, (sum_sq - n * e.mean * e.mean) / (n - 1.0));
            e.std_error = std::sqrt(var / n);
        }
        return e;
    }
};

class TrialRunner {
public:
    TrialRunner(const SlotLoad& load, const std::optional<BccrConfig>& cfg, Rule rule)
        : load_(load), cfg_(cfg), rule_(rule), counts_(static_cast<std::size_t>(load.preambles)) {
        load_.validate();
        if (cfg_) {
            cfg_->validate();
        }
        if (load_.preambles > 0xffffffffLL || (cfg_ && cfg_->levels < 1)) {
            throw std::invalid_argument("oracle load out of range");
        }
    }

    SlotTrialResult run(Rng& rng) {
        Word32Source words(rng);
        std::fill(counts_.begin(), counts_.end(), 0);
        const auto m = static_cast<std::uint32_t>(load_.preambles);
        for (std::int64_t i = 0; i < load_.contenders; ++i) {
            ++counts_[bounded(words, m)];
        }
        SlotTrialResult r;
        for (const auto c : counts_) {
            if (c == 0) {
                ++r.idle;
            } else if (c == 1) {
                ++r.singletons;
            } else {
                ++r.collided_preambles;
                if (cfg_ && cfg_->levels > 1) {
                    priorities_.resize(c);
                    for (auto& p : priorities_) {
                        p = static_cast<int>(bounded(words, static_cast<std::uint32_t>(cfg_->levels)));
                    }
                    if (shared_preamble_succeeds(priorities_, rule_, cfg_->slots())) {
                        ++r.resolved;
                    }
                }
            }
        }
        return r;
    }

private:
    SlotLoad load_;
    std::optional<BccrConfig> cfg_;
    Rule rule_;
    std::vector<std::uint32_t> counts_;
    std::vector<int> priorities_;
};

}  // namespace

SlotTrialResult mc_trial(const SlotLoad& load, const std::optional<BccrConfig>& cfg, Rng& rng, Rule rule) {
    TrialRunner runner(load, cfg, rule);
    return runner.run(rng);
}

McEstimate mc_slot(const SlotLoad& load, const std::optional<BccrConfig>& cfg, std::int64_t trials, Rng& rng,
                   Rule rule) {
    if (trials < 1) {
        throw std::invalid_argument("Monte Carlo needs at least one trial");
    }
    TrialRunner runner(load, cfg, rule);
    Moments m;
    for (std::int64_t t = 0; t < trials; ++t) {
        m.add(static_cast<double>(runner.run(rng).successes()));
    }
    return m.estimate();
}

McEstimate mc_slot_parallel(const SlotLoad& load, const std::optional<BccrConfig>& cfg, std::int64_t trials,
                            std::uint64_t seed, unsigned workers) {
    if (trials < 1) {
        throw std::invalid_argument("Monte Carlo needs at least one trial");
    }
    const std::int64_t chunks = (trials + kChunkTrials - 1) / kChunkTrials;
    std::vector<Moments> partial(static_cast<std::size_t>(chunks));
    auto work = [&](std::int64_t first, std::int64_t stride) {
        TrialRunner runner(load, cfg, Rule::MinimumUnique);
        for (std::int64_t c = first; c < chunks; c += stride) {
            auto rng = make_stream(seed, Stream::Oracle, static_cast<std::uint64_t>(c));
            const auto n = std::min(kChunkTrials, trials - c * kChunkTrials);
            for (std::int64_t t = 0; t < n; ++t) {
                partial[static_cast<std::size_t>(c)].add(static_cast<double>(runner.run(rng).successes()));
            }
        }
    };
    const auto threads = static_cast<std::int64_t>(std::max(1u, workers));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::int64_t w = 0; w < threads; ++w) {
            pool.emplace_back(work, w, threads);
        }
    }
    Moments total;
    for (const auto& p : partial) {
        total.merge(p);
    }
    return total.estimate();
}

Enumeration enumerate_slot(const SlotLoad& load, const std::optional<BccrConfig>& cfg, Rule rule) {
    load.validate();
    const auto n = static_cast<std::size_t>(load.contenders);
    const auto m = static_cast<std::uint64_t>(load.preambles);
    const std::uint64_t l = cfg ? static_cast<std::uint64_t>(cfg->levels) : 1;
    const double size = std::pow(static_cast<double>(m), static_cast<double>(n)) *
                        std::pow(static_cast<double>(l), static_cast<double>(n));
    if (size > 1e8) {
        throw std::invalid_argument("exhaustive enumeration too large");
    }

    std::vector<std::uint64_t> preamble(n, 0);
    std::vector<int> priority(n, 0);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(m));
    const int slots = cfg ? cfg->slots() : 0;

    auto advance = [](auto& digits, std::uint64_t base) {
        for (auto& d : digits) {
            if (static_cast<std::uint64_t>(++d) < base) {
                return true;
            }
            d = 0;
        }
        return false;
    };

    Enumeration out;
    do {
        std::fill(priority.begin(), priority.end(), 0);
        do {
            for (auto& g : groups) {
                g.clear();
            }
            for (std::size_t i = 0; i < n; ++i) {
                groups[preamble[i]].push_back(priority[i]);
            }
            for (const auto& g : groups) {
                if (g.size() == 1) {
                    ++out.total_successes;
                } else if (g.size() > 1 && l > 1 && shared_preamble_succeeds(g, rule, slots)) {
                    ++out.total_successes;
                }
            }
            ++out.outcomes;
        } while (advance(priority, l));
    } while (advance(preamble, m));
    return out;
}

}  // namespace rach::oracle
