#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tom/records.hpp"
#include "tom/registry.hpp"
#include "tom/rubric.hpp"

namespace tom {

// ---------------------------------------------------------------------------
// TAI watch
// ---------------------------------------------------------------------------

/// Alert thresholds for AI-related IUs with fast impact and a high overall
/// score. None of the defaults come from the rubric itself.
struct TaiAlertConfig {
    int immediacy_min = 4;   // [1, 5]
    int composite_min = 70;  // [20, 100]
    bool require_ai_tag = true;
};

/// Throws Error{InvalidInput, "invalid_config"} for out-of-range thresholds.
void validate(const TaiAlertConfig& config);

struct TaiVerdict {
    bool flagged = false;
    bool tag_ok = false;
    bool immediacy_ok = false;
    bool composite_ok = false;
    std::string reason;
};

TaiVerdict tai_flag(const IURecord& record, const ScoreCard& card,
                    const TaiAlertConfig& config = {});

Json to_json(const TaiVerdict& verdict);

// ---------------------------------------------------------------------------
// Contribution
// ---------------------------------------------------------------------------

/// level / raw_sum per criterion, canonical order.
std::array<double, kCriterionCount> contribution(const ScoreCard& card);

// ---------------------------------------------------------------------------
// Rank stability
// ---------------------------------------------------------------------------

/// Each level independently moves by +/-`step` (sign fair) with probability
/// `p`, then is clamped to [1, 5].
struct NoiseSpec {
    double p = 0.0;
    int step = 1;
};

struct StabilityConfig {
    NoiseSpec noise;
    int trials = 1000;
    std::uint64_t seed = 0;
    int threads = 1;  // results do not depend on this
};

inline constexpr std::string_view kStabilityGenerator = "mt19937_64/splitmix64-subseed";

struct StabilityEntry {
    std::string iu_id;
    int base_position = 0;  // 0-based position in the unperturbed rank
    int retained = 0;       // trials in which the position was kept
    double probability = 0.0;
};

struct StabilityReport {
    std::string generator{kStabilityGenerator};
    std::uint64_t seed = 0;
    int trials = 0;
    std::vector<StabilityEntry> entries;  // unperturbed rank order
};

Json to_json(const StabilityReport& report);

/// Deterministic 64-bit seed for trial `index` derived from `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Throws Error{InvalidInput, "insufficient_ius"} with fewer than two cards
/// and "invalid_config" for trials < 1, p outside [0,1] or step < 0.
StabilityReport rank_stability(const std::vector<std::pair<std::string, ScoreCard>>& cards,
                               const StabilityConfig& config);

/// Uses the latest revision of every scored IU.
StabilityReport rank_stability(const Store& store, const StabilityConfig& config);

}  // namespace tom
