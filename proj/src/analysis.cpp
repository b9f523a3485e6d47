#include "tom/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

namespace tom {

void validate(const TaiAlertConfig& config) {
    std::vector<std::string> problems;
    if (!level_in_range(config.immediacy_min)) problems.push_back("tai.immediacy_min must be in [1, 5]");
    if (config.composite_min < 20 || config.composite_min > 100) {
        problems.push_back("tai.composite_min must be in [20, 100]");
    }
    if (!problems.empty()) {
        throw Error(ErrorCode::InvalidInput, "invalid_config", "invalid TAI alert config",
                    std::move(problems));
    }
}

TaiVerdict tai_flag(const IURecord& record, const ScoreCard& card, const TaiAlertConfig& config) {
    const auto levels = levels_of(card);
    const int immediacy = levels[index_of(Criterion::ImmediacyOfImpact)];
    const int value = composite(levels).value;

    TaiVerdict v;
    const bool tagged = record.has_tag(kAiRelatedTag);
    v.tag_ok = !config.require_ai_tag || tagged;
    v.immediacy_ok = immediacy >= config.immediacy_min;
    v.composite_ok = value >= config.composite_min;
    v.flagged = v.tag_ok && v.immediacy_ok && v.composite_ok;

    auto verdict = [](bool ok) { return ok ? "pass" : "fail"; };
    v.reason = std::string("ai-related tag ") +
               (config.require_ai_tag ? (tagged ? "present" : "absent") : "not required") + ": " +
               verdict(v.tag_ok) + "; immediacy " + std::to_string(immediacy) +
               " >= " + std::to_string(config.immediacy_min) + ": " + verdict(v.immediacy_ok) +
               "; composite " + std::to_string(value) + " >= " +
               std::to_string(config.composite_min) + ": " + verdict(v.composite_ok);
    return v;
}

Json to_json(const TaiVerdict& v) {
    return Json{{"flagged", v.flagged},
                {"tag_ok", v.tag_ok},
                {"immediacy_ok", v.immediacy_ok},
                {"composite_ok", v.composite_ok},
                {"reason", v.reason}};
}

std::array<double, kCriterionCount> contribution(const ScoreCard& card) {
    const auto levels = levels_of(card);
    const double sum = std::accumulate(levels.begin(), levels.end(), 0);
    std::array<double, kCriterionCount> shares{};
    for (std::size_t i = 0; i < kCriterionCount; ++i) shares[i] = levels[i] / sum;
    return shares;
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    // splitmix64 finalizer over seed + (index + 1) * golden gamma
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

struct Scored {
    std::string id;
    std::array<int, kCriterionCount> levels;
};

// Uniform in [0, 1) from the top 53 bits; avoids the implementation-defined
// std::uniform_real_distribution.
double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

// Rank positions for `sums` (indexed like `ids`, which is sorted ascending):
// descending sum, ties by ascending id. Composite is strictly increasing in
// raw sum, so ranking by raw sum is equivalent.
void positions(const std::vector<int>& sums, std::vector<int>& order, std::vector<int>& pos) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (sums[a] != sums[b]) return sums[a] > sums[b];
        return a < b;
    });
    for (std::size_t p = 0; p < order.size(); ++p) pos[order[p]] = static_cast<int>(p);
}

}  // namespace

StabilityReport rank_stability(const std::vector<std::pair<std::string, ScoreCard>>& cards,
                               const StabilityConfig& config) {
    if (cards.size() < 2) {
        throw Error(ErrorCode::InvalidInput, "insufficient_ius",
                    "rank stability needs at least two scored IUs");
    }
    if (config.trials < 1 || !(config.noise.p >= 0.0 && config.noise.p <= 1.0) ||
        config.noise.step < 0) {
        throw Error(ErrorCode::InvalidInput, "invalid_config",
                    "stability needs trials >= 1, noise p in [0, 1], step >= 0");
    }

    std::vector<Scored> items;
    for (const auto& [id, card] : cards) items.push_back({id, levels_of(card)});
    std::sort(items.begin(), items.end(), [](const Scored& a, const Scored& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].id == items[i - 1].id) {
            throw Error(ErrorCode::InvalidInput, "invalid_input", "duplicate IU " + items[i].id);
        }
    }
    const std::size_t n = items.size();

    std::vector<int> base_sums(n), order(n), base_pos(n);
    for (std::size_t i = 0; i < n; ++i) {
        base_sums[i] = std::accumulate(items[i].levels.begin(), items[i].levels.end(), 0);
    }
    positions(base_sums, order, base_pos);

    auto run_range = [&](int first, int last, std::vector<int>& retained) {
        std::vector<int> sums(n), ord(n), pos(n);
        for (int t = first; t < last; ++t) {
            std::mt19937_64 gen(trial_seed(config.seed, static_cast<std::uint64_t>(t)));
            for (std::size_t i = 0; i < n; ++i) {
                int sum = 0;
                for (int level : items[i].levels) {
                    if (unit(gen) < config.noise.p) {
                        const int dir = (gen() >> 63) ? 1 : -1;
                        level = std::clamp(level + dir * config.noise.step, kMinLevel, kMaxLevel);
                    }
                    sum += level;
                }
                sums[i] = sum;
            }
            positions(sums, ord, pos);
            for (std::size_t i = 0; i < n; ++i) retained[i] += pos[i] == base_pos[i];
        }
    };

    const int threads = std::clamp(config.threads, 1, config.trials);
    std::vector<std::vector<int>> partial(threads, std::vector<int>(n, 0));
    if (threads == 1) {
        run_range(0, config.trials, partial[0]);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w) {
            const int first = static_cast<int>(static_cast<long long>(config.trials) * w / threads);
            const int last = static_cast<int>(static_cast<long long>(config.trials) * (w + 1) / threads);
            pool.emplace_back([&, first, last, w] { run_range(first, last, partial[w]); });
        }
    }

    StabilityReport report;
    report.seed = config.seed;
    report.trials = config.trials;
    for (int p = 0; p < static_cast<int>(n); ++p) {
        const int i = order[p];
        StabilityEntry e;
        e.iu_id = items[i].id;
        e.base_position = p;
        for (const auto& part : partial) e.retained += part[i];
        e.probability = static_cast<double>(e.retained) / config.trials;
        report.entries.push_back(std::move(e));
    }
    return report;
}

StabilityReport rank_stability(const Store& store, const StabilityConfig& config) {
    std::vector<std::pair<std::string, ScoreCard>> cards;
    for (const auto& entry : store.rank()) {
        cards.emplace_back(entry.iu_id, store.latest_score(entry.iu_id)->card);
    }
    return rank_stability(cards, config);
}

Json to_json(const StabilityReport& r) {
    Json entries = Json::array();
    for (const auto& e : r.entries) {
        entries.push_back(Json{{"iu_id", e.iu_id},
                               {"base_position", e.base_position},
                               {"retained", e.retained},
                               {"probability", e.probability}});
    }
    return Json{{"generator", r.generator},
                {"seed", r.seed},
                {"trials", r.trials},
                {"entries", entries}};
}

}  // namespace tom
