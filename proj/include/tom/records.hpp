#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tom/rubric.hpp"

namespace tom {

using Json = nlohmann::ordered_json;

enum class DescriptionSource { Manual, WikipediaFixture, WikipediaLive };

std::string_view to_string(DescriptionSource source) noexcept;
std::optional<DescriptionSource> description_source_from(std::string_view text) noexcept;

inline constexpr std::string_view kAiRelatedTag = "ai-related";
inline constexpr std::string_view kRetiredTag = "retired";

/// A named Innovation Unit.
struct IURecord {
    std::string id;
    std::string name;
    std::string description;
    DescriptionSource description_source = DescriptionSource::Manual;
    std::string created_at;  // filled by the store on first insert when empty
    std::set<std::string> tags;

    bool has_tag(std::string_view tag) const { return tags.count(std::string(tag)) != 0; }

    friend bool operator==(const IURecord&, const IURecord&) = default;
};

/// Slug class: [a-z0-9]+ separated by single hyphens.
bool is_valid_slug(std::string_view id) noexcept;

/// Lists violated IURecord invariants; empty when the record is valid.
std::vector<std::string> record_violations(const IURecord& record);

struct ScoreRevision {
    std::string iu_id;
    int revision_no = 0;
    ScoreCard card;
    CompositeScore composite;
    std::string recorded_at;
    std::string note;

    friend bool operator==(const ScoreRevision&, const ScoreRevision&) = default;
};

struct RankEntry {
    std::string iu_id;
    int composite = 0;

    friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

// Wire/store encoding. Field names and order are fixed; the HTTP payloads
// and the store lines use the same shapes.

Json to_json(const IURecord& record);
Json to_json(const ScoreRevision& revision);
Json to_json(const RankEntry& entry);

/// {"superseedness": {"level": 5, "rationale": ""}, ...} in canonical order.
Json scores_to_json(const ScoreCard& card);

/// Accepts {"key": {"level": n, "rationale": "..."}} or the shorthand
/// {"key": n}. Unknown keys and non-integer levels throw
/// Error{InvalidInput, "invalid_scorecard"}; completeness and ranges are
/// left to validate_scorecard().
ScoreCard scores_from_json(const Json& scores);

/// Throws Error{InvalidInput, "invalid_record"} on missing/mistyped fields.
/// Does not check record invariants.
IURecord iu_from_json(const Json& j);

/// Throws Error{Internal, "corrupt_store"} on missing/mistyped fields.
ScoreRevision revision_from_json(const Json& j);

}  // namespace tom
