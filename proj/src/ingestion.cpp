#include "tom/ingestion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <cctype>

#include "httplib.h"

namespace tom {

std::string_view to_string(FetchMode mode) noexcept {
    return mode == FetchMode::Live ? "live" : "fixture";
}

std::string_view to_string(FetchSource source) noexcept {
    switch (source) {
        case FetchSource::Live: return "live";
        case FetchSource::Fixture: return "fixture";
        case FetchSource::Cache: return "cache";
    }
    return "live";
}

std::optional<FetchMode> fetch_mode_from(std::string_view text) noexcept {
    if (text == "live") return FetchMode::Live;
    if (text == "fixture") return FetchMode::Fixture;
    return std::nullopt;
}

Json to_json(const FetchResult& r) {
    return Json{{"title", r.title},
                {"resolved_title", r.resolved_title},
                {"extract", r.extract},
                {"fetched_at", r.fetched_at},
                {"source", std::string(to_string(r.source))}};
}

std::string slugify(std::string_view title) {
    std::string out;
    bool pending_sep = false;
    for (unsigned char ch : title) {
        if (std::isalnum(ch) && ch < 0x80) {
            if (pending_sep && !out.empty()) out.push_back('-');
            pending_sep = false;
            out.push_back(static_cast<char>(std::tolower(ch)));
        } else {
            pending_sep = true;
        }
    }
    return out;
}

std::string encode_title(std::string_view title) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char ch : title) {
        if (ch == ' ') ch = '_';
        if (std::isalnum(ch) && ch < 0x80) {
            out.push_back(static_cast<char>(ch));
        } else if (ch == '_' || ch == '-' || ch == '.' || ch == '~') {
            out.push_back(static_cast<char>(ch));
        } else {
            out.push_back('%');
            out.push_back(kHex[ch >> 4]);
            out.push_back(kHex[ch & 0xF]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttplibTransport(std::string base_url, std::string user_agent, std::chrono::seconds timeout)
        : base_url_(std::move(base_url)), user_agent_(std::move(user_agent)), timeout_(timeout) {}

    std::optional<HttpResponse> get(const std::string& path) override {
        // One client per call: httplib::Client is not meant to be shared
        // across threads.
        httplib::Client client(base_url_);
        client.set_follow_location(true);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_default_headers({{"User-Agent", user_agent_}, {"Accept", "application/json"}});
        auto res = client.Get(path);
        if (!res) return std::nullopt;
        return HttpResponse{res->status, res->body};
    }

private:
    std::string base_url_;
    std::string user_agent_;
    std::chrono::seconds timeout_;
};

std::optional<std::string> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

/// Write-to-temp-then-rename; concurrent writers never expose partial files.
bool atomic_write(const std::filesystem::path& dest, const std::string& content) {
    std::error_code ec;
    std::filesystem::create_directories(dest.parent_path(), ec);
    std::ostringstream suffix;
    suffix << ".tmp." << ::getpid() << "." << std::this_thread::get_id();
    auto tmp = dest;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return false;
        out << content;
        if (!out.flush()) return false;
    }
    std::filesystem::rename(tmp, dest, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        return false;
    }
    return true;
}

Error not_found(const std::string& title) {
    return Error(ErrorCode::NotFound, "page_not_found", "no encyclopedia entry for '" + title + "'");
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   const std::string& user_agent,
                                                   std::chrono::seconds timeout) {
    return std::make_unique<HttplibTransport>(base_url, user_agent, timeout);
}

Pacer Pacer::real() {
    return Pacer{[] { return std::chrono::steady_clock::now(); },
                 [](duration d) { std::this_thread::sleep_for(d); }};
}

TokenBucket::TokenBucket(double rate_per_second, int burst, Pacer pacer)
    : rate_(rate_per_second), burst_(burst), pacer_(std::move(pacer)), tokens_(burst) {
    if (!(rate_ > 0.0) || burst_ < 1) {
        throw Error(ErrorCode::InvalidInput, "invalid_rate_limit",
                    "rate limit needs rate > 0 and burst >= 1");
    }
    last_ = pacer_.now();
}

void TokenBucket::acquire() {
    for (;;) {
        Pacer::duration wait{};
        {
            std::lock_guard lock(mu_);
            const auto now = pacer_.now();
            const double elapsed = std::chrono::duration<double>(now - last_).count();
            tokens_ = std::min<double>(burst_, tokens_ + elapsed * rate_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                grants_.push_back(now);
                return;
            }
            wait = std::chrono::duration_cast<Pacer::duration>(
                std::chrono::duration<double>((1.0 - tokens_) / rate_));
            if (wait <= Pacer::duration::zero()) wait = Pacer::duration(1);
        }
        pacer_.sleep(wait);
    }
}

std::vector<Pacer::time_point> TokenBucket::grants() const {
    std::lock_guard lock(mu_);
    return grants_;
}

// ---------------------------------------------------------------------------

SummaryClient::SummaryClient(IngestConfig config, std::unique_ptr<HttpTransport> transport,
                             Pacer pacer, UtcClock clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      pacer_(pacer),
      clock_(std::move(clock)),
      limiter_(config_.rate_per_second, config_.burst, pacer) {}

FetchResult SummaryClient::fetch(const std::string& title, FetchMode mode) {
    if (trim(title).empty()) {
        throw Error(ErrorCode::InvalidInput, "invalid_title", "title must not be empty");
    }
    if (!config_.refresh) {
        if (auto hit = cache_lookup(title, mode)) return *hit;
    }
    FetchResult result = mode == FetchMode::Live ? fetch_live(title) : fetch_fixture(title);
    cache_store(result, mode);
    return result;
}

FetchResult SummaryClient::fetch_fixture(const std::string& title) {
    const auto path = config_.fixture_dir / (slugify(title) + ".txt");
    auto content = read_file(path);
    if (!content) throw not_found(title);
    std::string extract = trim(std::move(*content));
    if (extract.empty()) throw not_found(title);
    return FetchResult{title, title, std::move(extract), format_utc(clock_()), FetchSource::Fixture};
}

FetchResult SummaryClient::fetch_live(const std::string& title) {
    if (config_.user_agent.empty()) {
        throw Error(ErrorCode::InvalidInput, "missing_user_agent",
                    "live mode requires a descriptive user agent (ingest.user_agent)");
    }
    std::call_once(transport_once_, [this] {
        if (!transport_) transport_ = make_http_transport(config_.base_url, config_.user_agent);
    });

    const std::string path = "/api/rest_v1/page/summary/" + encode_title(title);
    bool last_was_429 = false;
    std::string last_problem;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            pacer_.sleep(std::chrono::duration_cast<Pacer::duration>(config_.backoff_initial) *
                         (1LL << (attempt - 1)));
        }
        limiter_.acquire();
        const auto response = transport_->get(path);
        if (!response) {
            last_was_429 = false;
            last_problem = "connection failed";
            continue;
        }
        if (response->status == 200) {
            Json body;
            try {
                body = Json::parse(response->body);
            } catch (const nlohmann::json::exception&) {
                throw Error(ErrorCode::UpstreamUnavailable, "bad_upstream_payload",
                            "summary for '" + title + "' is not JSON");
            }
            std::string extract = body.contains("extract") && body["extract"].is_string()
                                      ? trim(body["extract"].get<std::string>())
                                      : std::string();
            if (extract.empty()) throw not_found(title);
            std::string resolved = title;
            if (body.contains("titles") && body["titles"].is_object() &&
                body["titles"].contains("normalized") && body["titles"]["normalized"].is_string()) {
                resolved = body["titles"]["normalized"].get<std::string>();
            } else if (body.contains("title") && body["title"].is_string()) {
                resolved = body["title"].get<std::string>();
            }
            return FetchResult{title, std::move(resolved), std::move(extract),
                               format_utc(clock_()), FetchSource::Live};
        }
        if (response->status == 404) throw not_found(title);
        if (response->status == 429) {
            last_was_429 = true;
            last_problem = "HTTP 429";
            continue;
        }
        if (response->status >= 500) {
            last_was_429 = false;
            last_problem = "HTTP " + std::to_string(response->status);
            continue;
        }
        throw Error(ErrorCode::UpstreamUnavailable, "network_error",
                    "summary request for '" + title + "' failed with HTTP " +
                        std::to_string(response->status));
    }
    const int attempts = config_.max_retries + 1;
    if (last_was_429) {
        throw Error(ErrorCode::UpstreamUnavailable, "rate_limited",
                    "upstream kept rate limiting '" + title + "' after " +
                        std::to_string(attempts) + " attempts");
    }
    throw Error(ErrorCode::UpstreamUnavailable, "network_error",
                "summary request for '" + title + "' failed after " + std::to_string(attempts) +
                    " attempts (" + last_problem + ")");
}

std::optional<FetchResult> SummaryClient::cache_lookup(const std::string& title,
                                                       FetchMode mode) const {
    if (!config_.cache_dir) return std::nullopt;
    const auto path = *config_.cache_dir / std::string(to_string(mode)) / (slugify(title) + ".json");
    auto content = read_file(path);
    if (!content) return std::nullopt;
    try {
        const Json j = Json::parse(*content);
        FetchResult r;
        r.title = title;
        r.resolved_title = j.at("resolved_title").get<std::string>();
        r.extract = j.at("extract").get<std::string>();
        r.fetched_at = j.at("fetched_at").get<std::string>();
        r.source = FetchSource::Cache;
        if (r.extract.empty()) return std::nullopt;
        return r;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;  // unreadable entry: refetch and overwrite
    }
}

void SummaryClient::cache_store(const FetchResult& result, FetchMode mode) const {
    if (!config_.cache_dir) return;
    const auto dir = *config_.cache_dir / std::string(to_string(mode));
    const std::string body = to_json(result).dump(2) + "\n";
    const std::string resolved_key = slugify(result.resolved_title);
    const std::string title_key = slugify(result.title);
    atomic_write(dir / (resolved_key + ".json"), body);
    // Alias so the requested title hits without a network round trip.
    if (title_key != resolved_key) atomic_write(dir / (title_key + ".json"), body);
}

std::vector<FetchOutcome> SummaryClient::fetch_many(const std::vector<std::string>& titles,
                                                    FetchMode mode) {
    std::vector<FetchOutcome> outcomes(titles.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < titles.size(); i = next++) {
            outcomes[i].title = titles[i];
            try {
                outcomes[i].result = fetch(titles[i], mode);
            } catch (const Error& e) {
                outcomes[i].error = e;
            }
        }
    };
    const std::size_t n_workers =
        std::min<std::size_t>(std::max(1, config_.parallelism), std::max<std::size_t>(1, titles.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    }
    return outcomes;
}

// ---------------------------------------------------------------------------
// Dataset export
// ---------------------------------------------------------------------------

std::string dataset_header() {
    std::string h = "iu_id\tdescription";
    for (Criterion c : kAllCriteria) {
        h += '\t';
        h += key(c);
    }
    h += "\tcomposite";
    return h;
}

namespace {

std::string escape_field(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

std::string unescape_field(std::string_view text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '\\') {
            out.push_back(text[i]);
            continue;
        }
        if (++i == text.size()) {
            throw Error(ErrorCode::InvalidInput, "invalid_row", "dangling escape in row");
        }
        switch (text[i]) {
            case '\\': out.push_back('\\'); break;
            case 't': out.push_back('\t'); break;
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            default: throw Error(ErrorCode::InvalidInput, "invalid_row", "unknown escape in row");
        }
    }
    return out;
}

int parse_int(std::string_view s) {
    int v = 0;
    if (s.empty() || s.size() > 4) {
        throw Error(ErrorCode::InvalidInput, "invalid_row", "bad integer column");
    }
    for (char ch : s) {
        if (ch < '0' || ch > '9') {
            throw Error(ErrorCode::InvalidInput, "invalid_row", "bad integer column");
        }
        v = v * 10 + (ch - '0');
    }
    return v;
}

}  // namespace

std::string format_row(const DatasetRow& row) {
    std::string line = escape_field(row.iu_id);
    line += '\t';
    line += escape_field(row.description);
    for (int l : row.levels) {
        line += '\t';
        line += std::to_string(l);
    }
    line += '\t';
    line += std::to_string(row.composite);
    return line;
}

DatasetRow parse_row(std::string_view line) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    if (cols.size() != 3 + kCriterionCount) {
        throw Error(ErrorCode::InvalidInput, "invalid_row",
                    "expected " + std::to_string(3 + kCriterionCount) + " columns, got " +
                        std::to_string(cols.size()));
    }
    DatasetRow row;
    row.iu_id = unescape_field(cols[0]);
    row.description = unescape_field(cols[1]);
    for (std::size_t i = 0; i < kCriterionCount; ++i) row.levels[i] = parse_int(cols[2 + i]);
    row.composite = parse_int(cols.back());
    return row;
}

std::vector<DatasetRow> dataset_rows(const Store& store) {
    std::vector<DatasetRow> rows;
    for (const auto& iu : store.ius()) {  // ordered by id
        if (iu.description.empty()) continue;
        auto latest = store.latest_score(iu.id);
        if (!latest) continue;
        rows.push_back({iu.id, iu.description, levels_of(latest->card), latest->composite.value});
    }
    return rows;
}

std::size_t write_dataset(const Store& store, std::ostream& out) {
    const auto rows = dataset_rows(store);
    for (const auto& row : rows) out << format_row(row) << '\n';
    return rows.size();
}

std::size_t export_dataset(const Store& store, const std::filesystem::path& destination) {
    std::ostringstream body;
    const std::size_t n = write_dataset(store, body);
    auto schema = destination;
    schema += ".schema";
    if (!atomic_write(destination, body.str()) || !atomic_write(schema, dataset_header() + "\n")) {
        throw Error(ErrorCode::Internal, "destination_unwritable",
                    "cannot write dataset to " + destination.string());
    }
    return n;
}

}  // namespace tom
