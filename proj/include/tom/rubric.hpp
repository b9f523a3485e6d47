#pragma once

// Six-criterion rubric: criterion descriptors with their level anchors,
// scorecard validation, composite normalization and what-if deltas.
// Everything in here is pure and header-only.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tom/error.hpp"

namespace tom {

enum class Criterion : std::uint8_t {
    Superseedness,
    EconomicImpact,
    Centralization,
    ImmediacyOfImpact,
    Uniqueness,
    CounterfactualImpact,
};

inline constexpr std::size_t kCriterionCount = 6;
inline constexpr int kMinLevel = 1;
inline constexpr int kMaxLevel = 5;
inline constexpr int kMinRawSum = kMinLevel * static_cast<int>(kCriterionCount);
inline constexpr int kMaxRawSum = kMaxLevel * static_cast<int>(kCriterionCount);

/// Canonical criterion order. Dataset columns, level arrays and the
/// store schema all follow it.
inline constexpr std::array<Criterion, kCriterionCount> kAllCriteria = {
    Criterion::Superseedness,     Criterion::EconomicImpact, Criterion::Centralization,
    Criterion::ImmediacyOfImpact, Criterion::Uniqueness,     Criterion::CounterfactualImpact,
};

constexpr bool is_known(Criterion c) noexcept {
    return static_cast<std::size_t>(c) < kCriterionCount;
}

constexpr std::size_t index_of(Criterion c) noexcept { return static_cast<std::size_t>(c); }

constexpr bool level_in_range(int level) noexcept {
    return level >= kMinLevel && level <= kMaxLevel;
}

namespace detail {

struct CriterionInfo {
    std::string_view key;
    std::string_view name;
    std::array<std::string_view, 5> anchors;
};

// Anchor texts are kept verbatim, spelling included, so they can be
// quote-matched against the published rubric.
inline constexpr std::array<CriterionInfo, kCriterionCount> kCriterionTable = {{
    {"superseedness",
     "Super-seedness Protection",
     {
         "The IU has been completely replaced by other, completely different, IU; it is useless.",
         "The IU has been mostly replaced by other IUs that take inspiration from the original one.",
         "The IU is used for its original purpose in mostly equal conjunction with other, "
         "later/contemporary IUs.",
         "The IU is, currently, the most dominant tool used for the purpose it was created for, "
         "although other IUs exist that do the same thing but are not as dominant and/or severely "
         "depend on this particular IU.",
         "The IU is, currently, the most dominant and efficient tool used for the purpose it was "
         "originally created for. No other known IU can compare.",
     }},
    {"economic_impact",
     "Magnitude of Economic Impact",
     {
         "The IU has had minimal economic impact.",
         "The economic impact of the IU is significant, but limited to a specific area of "
         "expertise/research.",
         "The economic impact of the IU is significant and wide-reaching across several areas of "
         "expertise.",
         "The IU managed to alter the way at least a generation has engaged in economic activities.",
         "The IU fundamentally changed the way humanity engages in economic activities.",
     }},
    {"centralization",
     "Centralization",
     {
         "The IU was created by several civilizations/societies over an either unspecified, or "
         "centuries-long time period.",
         "The IU was created as a decentralized effort by an entire civilization in a period no "
         "longer than a century.",
         "The IU was created as an uncoordinated effort of different people/groups of people over "
         "the span of several decades.",
         "The IU was created as a coordinated effort of different people/groups of people over the "
         "span of several decades.",
         "The IU was created as a coordinated effort of a singular person/group of people over a "
         "period no longer than a decade.",
     }},
    {"immediacy_of_impact",
     "Immediacy of impact",
     {
         "The full impact of the IU was not felt until centuries after its invention.",
         "The full impact of the IU was not felt until no more than a century after its invention.",
         "The full impact of the IU was not felt until no more than half a century after its "
         "invention.",
         "The full impact of the IU was not felt until no more than less than quarter of a century "
         "after its invention.",
         "The full impact of the IU was not felt until no more than a decade after its invention.",
     }},
    {"uniqueness",
     "Uniqueness",
     {
         "Not novel at all; similar IUs were developed more than a century before this one.",
         "Not very novel; similar IUs were developed less than a century before this one.",
         "Contemporarily novel; similar IUs were around the same time as this one.",
         "Novel; the IU shares minimal, but noticeable similarity to other contemporary IUs.",
         "Top of the line; the IU shares little to no similarity to other contemporary and "
         "previous IUs.",
     }},
    {"counterfactual_impact",
     "Counter-factual impact",
     {
         "Other, independent, unrelated peoples developed virtually the same IU at around the same "
         "time.",
         "Someone working on the same circle developed virtually the same IU at around the same "
         "time.",
         "If someone else had the same material resources as the innovator, it is very probable "
         "that it could've invented it.",
         "If someone else had the same material resources as the innovator, it is very unlikely "
         "that it could've invented it.",
         "If someone else had the same material resources as the innovator, it is impossible that "
         "it could've invented it.",
     }},
}};

inline const CriterionInfo& info(Criterion c) {
    if (!is_known(c)) {
        throw Error(ErrorCode::InvalidInput, "unknown_criterion",
                    "unknown criterion identity " + std::to_string(static_cast<int>(c)));
    }
    return kCriterionTable[index_of(c)];
}

}  // namespace detail

/// Lowercase snake-case key used by the store, the dataset and the HTTP API.
inline std::string_view key(Criterion c) { return detail::info(c).key; }

inline std::string_view display_name(Criterion c) { return detail::info(c).name; }

inline std::optional<Criterion> criterion_from_key(std::string_view k) noexcept {
    for (Criterion c : kAllCriteria) {
        if (detail::kCriterionTable[index_of(c)].key == k) return c;
    }
    return std::nullopt;
}

/// Verbatim anchor describing what `level` means for `criterion`.
/// Throws Error{InvalidInput} with kind "level_out_of_range" or "unknown_criterion".
inline std::string_view anchor_text(Criterion criterion, int level) {
    const auto& row = detail::info(criterion);
    if (!level_in_range(level)) {
        throw Error(ErrorCode::InvalidInput, "level_out_of_range",
                    "level " + std::to_string(level) + " outside [1, 5] for " +
                        std::string(row.key));
    }
    return row.anchors[static_cast<std::size_t>(level - 1)];
}

struct CriterionScore {
    Criterion criterion{};
    int level = 0;
    std::string rationale;

    friend bool operator==(const CriterionScore&, const CriterionScore&) = default;
};

/// Candidate scorecard. It may be incomplete or carry duplicate or
/// out-of-range entries; validate_scorecard() decides whether it is usable.
class ScoreCard {
public:
    ScoreCard() = default;
    explicit ScoreCard(std::vector<CriterionScore> entries) : entries_(std::move(entries)) {}

    /// Levels given in canonical criterion order, rationales empty.
    static ScoreCard from_levels(const std::array<int, kCriterionCount>& levels) {
        ScoreCard card;
        for (Criterion c : kAllCriteria) card.entries_.push_back({c, levels[index_of(c)], {}});
        return card;
    }

    const std::vector<CriterionScore>& entries() const noexcept { return entries_; }

    /// Replaces the first entry for `c`, or appends one.
    void set(Criterion c, int level, std::string rationale = {}) {
        auto it = std::find_if(entries_.begin(), entries_.end(),
                               [c](const CriterionScore& s) { return s.criterion == c; });
        if (it == entries_.end()) {
            entries_.push_back({c, level, std::move(rationale)});
        } else {
            it->level = level;
            it->rationale = std::move(rationale);
        }
    }

    void add(CriterionScore score) { entries_.push_back(std::move(score)); }

    const CriterionScore* find(Criterion c) const noexcept {
        auto it = std::find_if(entries_.begin(), entries_.end(),
                               [c](const CriterionScore& s) { return s.criterion == c; });
        return it == entries_.end() ? nullptr : &*it;
    }

    std::optional<int> level(Criterion c) const noexcept {
        const auto* s = find(c);
        return s ? std::optional<int>(s->level) : std::nullopt;
    }

    friend bool operator==(const ScoreCard&, const ScoreCard&) = default;

private:
    std::vector<CriterionScore> entries_;
};

struct Violation {
    enum class Kind { MissingCriterion, DuplicateCriterion, LevelOutOfRange, UnknownCriterion };

    Kind kind;
    Criterion criterion;
    int level = 0;

    std::string message() const {
        const std::string name = is_known(criterion)
                                     ? std::string(key(criterion))
                                     : "#" + std::to_string(static_cast<int>(criterion));
        switch (kind) {
            case Kind::MissingCriterion: return "missing criterion: " + name;
            case Kind::DuplicateCriterion: return "duplicate criterion: " + name;
            case Kind::LevelOutOfRange:
                return "level out of range: " + name + "=" + std::to_string(level);
            case Kind::UnknownCriterion: return "unknown criterion: " + name;
        }
        return "invalid scorecard";
    }

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    explicit operator bool() const noexcept { return ok(); }

    std::vector<std::string> messages() const {
        std::vector<std::string> out;
        out.reserve(violations.size());
        for (const auto& v : violations) out.push_back(v.message());
        return out;
    }
};

/// Lists every violation; never throws.
inline ValidationResult validate_scorecard(const ScoreCard& card) {
    ValidationResult result;
    std::array<int, kCriterionCount> seen{};
    for (const auto& s : card.entries()) {
        if (!is_known(s.criterion)) {
            result.violations.push_back({Violation::Kind::UnknownCriterion, s.criterion, s.level});
            continue;
        }
        if (++seen[index_of(s.criterion)] == 2) {
            result.violations.push_back({Violation::Kind::DuplicateCriterion, s.criterion, s.level});
        }
        if (!level_in_range(s.level)) {
            result.violations.push_back({Violation::Kind::LevelOutOfRange, s.criterion, s.level});
        }
    }
    for (Criterion c : kAllCriteria) {
        if (seen[index_of(c)] == 0) {
            result.violations.push_back({Violation::Kind::MissingCriterion, c, 0});
        }
    }
    return result;
}

inline void require_valid(const ScoreCard& card) {
    auto result = validate_scorecard(card);
    if (!result.ok()) {
        throw Error(ErrorCode::InvalidInput, "invalid_scorecard", "invalid scorecard",
                    result.messages());
    }
}

/// Levels in canonical order. Throws on an invalid card.
inline std::array<int, kCriterionCount> levels_of(const ScoreCard& card) {
    require_valid(card);
    std::array<int, kCriterionCount> out{};
    for (const auto& s : card.entries()) out[index_of(s.criterion)] = s.level;
    return out;
}

struct CompositeScore {
    int value = 0;    // [20, 100]
    int raw_sum = 0;  // [6, 30]

    friend bool operator==(const CompositeScore&, const CompositeScore&) = default;
};

/// round_half_up(raw_sum * 100 / 30) in integer arithmetic.
constexpr int normalize_raw_sum(int raw_sum) noexcept { return (raw_sum * 100 + 15) / 30; }

constexpr CompositeScore composite_of_sum(int raw_sum) noexcept {
    return {normalize_raw_sum(raw_sum), raw_sum};
}

constexpr CompositeScore composite(const std::array<int, kCriterionCount>& levels) noexcept {
    int sum = 0;
    for (int l : levels) sum += l;
    return composite_of_sum(sum);
}

/// Throws Error{InvalidInput, "invalid_scorecard"} when the card is not valid.
inline CompositeScore composite(const ScoreCard& card) { return composite(levels_of(card)); }

static_assert(composite_of_sum(kMinRawSum).value == 20);
static_assert(composite_of_sum(kMaxRawSum).value == 100);

/// Copy of `card` with one level replaced (rationale kept).
inline ScoreCard with_level(const ScoreCard& card, Criterion c, int new_level) {
    std::vector<CriterionScore> entries = card.entries();
    for (auto& s : entries) {
        if (s.criterion == c) s.level = new_level;
    }
    return ScoreCard(std::move(entries));
}

struct WhatIf {
    CompositeScore score;
    int delta = 0;  // new value - old value

    friend bool operator==(const WhatIf&, const WhatIf&) = default;
};

inline WhatIf whatif_delta(const ScoreCard& card, Criterion c, int new_level) {
    anchor_text(c, new_level);  // range and identity checks
    const CompositeScore before = composite(card);
    const CompositeScore after = composite(with_level(card, c, new_level));
    return {after, after.value - before.value};
}

}  // namespace tom
