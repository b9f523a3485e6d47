#include "tom/records.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "tom/clock.hpp"

namespace tom {

std::string format_utc(std::chrono::sys_seconds t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::chrono::sys_seconds parse_utc(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char z = 0;
    if (text.size() != 20 ||
        std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &z) != 7 ||
        z != 'Z') {
        throw Error(ErrorCode::InvalidInput, "invalid_timestamp", "malformed timestamp: " + text);
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
        throw Error(ErrorCode::InvalidInput, "invalid_timestamp", "malformed timestamp: " + text);
    }
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string_view to_string(DescriptionSource source) noexcept {
    switch (source) {
        case DescriptionSource::Manual: return "manual";
        case DescriptionSource::WikipediaFixture: return "wikipedia-fixture";
        case DescriptionSource::WikipediaLive: return "wikipedia-live";
    }
    return "manual";
}

std::optional<DescriptionSource> description_source_from(std::string_view text) noexcept {
    for (auto s : {DescriptionSource::Manual, DescriptionSource::WikipediaFixture,
                   DescriptionSource::WikipediaLive}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

bool is_valid_slug(std::string_view id) noexcept {
    if (id.empty() || id.front() == '-' || id.back() == '-') return false;
    char prev = 0;
    for (char ch : id) {
        const bool alnum = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9');
        if (!alnum && ch != '-') return false;
        if (ch == '-' && prev == '-') return false;
        prev = ch;
    }
    return true;
}

std::vector<std::string> record_violations(const IURecord& record) {
    std::vector<std::string> out;
    if (record.id.empty()) {
        out.push_back("id must not be empty");
    } else if (!is_valid_slug(record.id)) {
        out.push_back("id '" + record.id + "' is not a lowercase hyphen-separated slug");
    }
    if (record.name.empty()) out.push_back("name must not be empty");
    for (const auto& tag : record.tags) {
        if (tag.empty()) out.push_back("tags must not be empty strings");
    }
    if (!record.created_at.empty()) {
        try {
            parse_utc(record.created_at);
        } catch (const Error&) {
            out.push_back("created_at '" + record.created_at + "' is not an ISO-8601 UTC timestamp");
        }
    }
    return out;
}

Json scores_to_json(const ScoreCard& card) {
    Json scores = Json::object();
    for (Criterion c : kAllCriteria) {
        if (const auto* s = card.find(c)) {
            scores[std::string(key(c))] = Json{{"level", s->level}, {"rationale", s->rationale}};
        }
    }
    return scores;
}

ScoreCard scores_from_json(const Json& scores) {
    auto fail = [](const std::string& msg) {
        return Error(ErrorCode::InvalidInput, "invalid_scorecard", "invalid scorecard", {msg});
    };
    if (!scores.is_object()) throw fail("scores must be an object");
    ScoreCard card;
    for (const auto& [k, v] : scores.items()) {
        const auto c = criterion_from_key(k);
        if (!c) throw fail("unknown criterion: " + k);
        const Json* level = &v;
        std::string rationale;
        if (v.is_object()) {
            if (!v.contains("level")) throw fail("missing level for " + k);
            level = &v.at("level");
            if (v.contains("rationale")) {
                if (!v.at("rationale").is_string()) throw fail("rationale must be text for " + k);
                rationale = v.at("rationale").get<std::string>();
            }
        }
        if (!level->is_number_integer()) throw fail("level must be an integer for " + k);
        card.add({*c, level->get<int>(), std::move(rationale)});
    }
    return card;
}

Json to_json(const IURecord& r) {
    Json tags = Json::array();
    for (const auto& t : r.tags) tags.push_back(t);
    return Json{{"kind", "iu"},
                {"id", r.id},
                {"name", r.name},
                {"description", r.description},
                {"description_source", std::string(to_string(r.description_source))},
                {"created_at", r.created_at},
                {"tags", tags}};
}

Json to_json(const ScoreRevision& r) {
    return Json{{"kind", "revision"},
                {"iu_id", r.iu_id},
                {"revision_no", r.revision_no},
                {"scores", scores_to_json(r.card)},
                {"composite", r.composite.value},
                {"raw_sum", r.composite.raw_sum},
                {"recorded_at", r.recorded_at},
                {"note", r.note}};
}

Json to_json(const RankEntry& e) { return Json{{"iu_id", e.iu_id}, {"composite", e.composite}}; }

namespace {

template <class T>
T field(const Json& j, const char* name, ErrorCode code, const char* kind) {
    if (!j.is_object() || !j.contains(name)) {
        throw Error(code, kind, std::string("missing field '") + name + "'");
    }
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(code, kind, std::string("field '") + name + "' has the wrong type");
    }
}

}  // namespace

IURecord iu_from_json(const Json& j) {
    constexpr auto code = ErrorCode::InvalidInput;
    constexpr const char* kind = "invalid_record";
    IURecord r;
    r.id = field<std::string>(j, "id", code, kind);
    r.name = field<std::string>(j, "name", code, kind);
    if (j.contains("description")) r.description = field<std::string>(j, "description", code, kind);
    if (j.contains("description_source")) {
        const auto text = field<std::string>(j, "description_source", code, kind);
        const auto src = description_source_from(text);
        if (!src) throw Error(code, kind, "unknown description_source '" + text + "'");
        r.description_source = *src;
    }
    if (j.contains("created_at")) r.created_at = field<std::string>(j, "created_at", code, kind);
    if (j.contains("tags")) {
        for (auto& t : field<std::vector<std::string>>(j, "tags", code, kind)) r.tags.insert(t);
    }
    return r;
}

ScoreRevision revision_from_json(const Json& j) {
    constexpr auto code = ErrorCode::Internal;
    constexpr const char* kind = "corrupt_store";
    ScoreRevision r;
    r.iu_id = field<std::string>(j, "iu_id", code, kind);
    r.revision_no = field<int>(j, "revision_no", code, kind);
    if (!j.contains("scores")) throw Error(code, kind, "missing field 'scores'");
    try {
        r.card = scores_from_json(j.at("scores"));
    } catch (const Error& e) {
        throw Error(code, kind, std::string("bad scores: ") + e.what(), e.details());
    }
    r.composite.value = field<int>(j, "composite", code, kind);
    r.composite.raw_sum = field<int>(j, "raw_sum", code, kind);
    r.recorded_at = field<std::string>(j, "recorded_at", code, kind);
    r.note = field<std::string>(j, "note", code, kind);
    return r;
}

}  // namespace tom
