#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tom/clock.hpp"
#include "tom/error.hpp"
#include "tom/registry.hpp"

namespace tom {

// ---------------------------------------------------------------------------
// Description fetching
// ---------------------------------------------------------------------------

enum class FetchMode { Live, Fixture };
enum class FetchSource { Live, Fixture, Cache };

std::string_view to_string(FetchMode mode) noexcept;
std::string_view to_string(FetchSource source) noexcept;
std::optional<FetchMode> fetch_mode_from(std::string_view text) noexcept;

struct FetchResult {
    std::string title;
    std::string resolved_title;
    std::string extract;
    std::string fetched_at;
    FetchSource source = FetchSource::Live;

    friend bool operator==(const FetchResult&, const FetchResult&) = default;
};

Json to_json(const FetchResult& result);

/// Lowercase ASCII alphanumerics joined by single hyphens: "The Wheel!" -> "the-wheel".
std::string slugify(std::string_view title);

/// Title as it appears in the summary endpoint path: spaces become
/// underscores, everything outside [A-Za-z0-9_.~-] is percent-encoded.
std::string encode_title(std::string_view title);

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Minimal GET transport so tests can swap in a local server or a fake.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Returns nullopt on connection-level failure (refused, timeout, TLS).
    virtual std::optional<HttpResponse> get(const std::string& path) = 0;
};

/// cpp-httplib backed transport; follows redirects and sends `user_agent`.
std::unique_ptr<HttpTransport> make_http_transport(
    const std::string& base_url, const std::string& user_agent,
    std::chrono::seconds timeout = std::chrono::seconds(10));

/// Time source and sleeper used for rate limiting and retry backoff.
struct Pacer {
    using time_point = std::chrono::steady_clock::time_point;
    using duration = std::chrono::steady_clock::duration;

    std::function<time_point()> now;
    std::function<void(duration)> sleep;

    static Pacer real();
};

/// Token bucket: `rate` tokens per second, at most `burst` banked.
/// Every granted token is recorded so callers can audit request pacing.
class TokenBucket {
public:
    TokenBucket(double rate_per_second, int burst, Pacer pacer = Pacer::real());

    /// Blocks (through the pacer) until a token is available.
    void acquire();

    std::vector<Pacer::time_point> grants() const;
    double rate() const noexcept { return rate_; }
    int burst() const noexcept { return burst_; }

private:
    double rate_;
    int burst_;
    Pacer pacer_;
    mutable std::mutex mu_;
    double tokens_;
    Pacer::time_point last_;
    std::vector<Pacer::time_point> grants_;
};

struct IngestConfig {
    std::string base_url = "https://en.wikipedia.org";
    std::string user_agent;  // required for live mode
    std::filesystem::path fixture_dir = "fixtures";
    std::optional<std::filesystem::path> cache_dir;
    bool refresh = false;  // bypass cache reads (still writes)
    double rate_per_second = 1.0;
    int burst = 5;
    int max_retries = 3;
    std::chrono::milliseconds backoff_initial{500};
    int parallelism = 4;
};

struct FetchOutcome {
    std::string title;
    std::optional<FetchResult> result;
    std::optional<Error> error;
};

/// Summary-endpoint client: GET {base_url}/api/rest_v1/page/summary/{title}.
///
/// Error kinds: "page_not_found" (NotFound), "network_error" and
/// "rate_limited" (UpstreamUnavailable, after retries), "invalid_title",
/// "missing_user_agent" (InvalidInput).
class SummaryClient {
public:
    explicit SummaryClient(IngestConfig config, std::unique_ptr<HttpTransport> transport = nullptr,
                           Pacer pacer = Pacer::real(), UtcClock clock = system_now);

    FetchResult fetch(const std::string& title, FetchMode mode);

    /// Up to config.parallelism concurrent fetches sharing one rate limiter.
    /// Outcomes come back in input order.
    std::vector<FetchOutcome> fetch_many(const std::vector<std::string>& titles, FetchMode mode);

    const TokenBucket& limiter() const noexcept { return limiter_; }
    const IngestConfig& config() const noexcept { return config_; }

private:
    FetchResult fetch_live(const std::string& title);
    FetchResult fetch_fixture(const std::string& title);
    std::optional<FetchResult> cache_lookup(const std::string& title, FetchMode mode) const;
    void cache_store(const FetchResult& result, FetchMode mode) const;

    IngestConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    std::once_flag transport_once_;
    Pacer pacer_;
    UtcClock clock_;
    TokenBucket limiter_;
};

// ---------------------------------------------------------------------------
// Dataset export
// ---------------------------------------------------------------------------

struct DatasetRow {
    std::string iu_id;
    std::string description;
    std::array<int, kCriterionCount> levels{};
    int composite = 0;

    friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

/// Tab-separated column names, canonical order.
std::string dataset_header();

/// One line (no trailing newline). Backslash, tab, CR and LF in the
/// description are escaped as \\ \t \r \n.
std::string format_row(const DatasetRow& row);

/// Inverse of format_row; throws Error{InvalidInput, "invalid_row"}.
DatasetRow parse_row(std::string_view line);

/// IUs with a non-empty description and at least one revision, latest
/// revision used, ordered by id.
std::vector<DatasetRow> dataset_rows(const Store& store);

std::size_t write_dataset(const Store& store, std::ostream& out);

/// Writes `destination` atomically plus `destination.schema` holding the
/// header line. Throws Error{Internal, "destination_unwritable"}.
std::size_t export_dataset(const Store& store, const std::filesystem::path& destination);

}  // namespace tom
