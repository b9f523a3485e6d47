#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tom/config.hpp"
#include "tom/registry.hpp"

namespace tom {

/// Error payload shared by both facades:
/// {"error": {"code": "...", "kind": "...", "message": "...", "details": [...]}}
Json error_to_json(const Error& error);

/// Domain operations behind the CLI and HTTP facades. Both facades call
/// these and only differ in how they frame the resulting JSON, which keeps
/// their results identical for identical inputs.
class Core {
public:
    Core(Store& store, AppConfig config);

    Json criteria() const;
    Json list_ius() const;
    /// {"iu": {...}, "latest": revision-or-null}
    Json get_iu(const std::string& id) const;
    Json add_iu(const Json& body);
    /// body: {"scores": {...}, "note": "...", "expected_revision_no": n?}
    Json add_revision(const std::string& id, const Json& body);
    Json history(const std::string& id) const;
    Json rank() const;
    /// Uses the latest revision as base unless `base_levels` is given.
    Json whatif(const std::string& id, const std::string& criterion_key, int level,
                const std::optional<std::array<int, kCriterionCount>>& base_levels = {}) const;
    Json tai(const std::string& id) const;
    Json stability(const StabilityConfig& config) const;
    /// Fetches and stores the description on IU `iu_id` (default: slug of
    /// the title), creating the IU when it does not exist.
    Json ingest(const std::string& title, FetchMode mode, const std::string& iu_id = {});
    std::string export_dataset_text() const;

    const AppConfig& config() const noexcept { return config_; }
    SummaryClient& client();

private:
    Store& store_;
    AppConfig config_;
    std::unique_ptr<SummaryClient> client_;
};

/// Parses "5,5,1,1,5,1" into canonical-order levels.
std::optional<std::array<int, kCriterionCount>> parse_levels(const std::string& text);

/// Accepts either a revision payload {"scores": {...}} or a bare scores object.
ScoreCard card_from_json(const Json& j);

/// HTTP facade. Owns the writer lock on the store for its lifetime.
class HttpService {
public:
    /// Opens the store as writer. Throws Error kind "store_lock_held" when
    /// another writer is active.
    explicit HttpService(AppConfig config, StoreOptions store_options = {});
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds and starts serving on a background thread; returns the bound
    /// port (pass 0 for an ephemeral one). Throws Error kind "bind_failure".
    int start(const std::string& host, int port);

    /// Stops accepting, finishes in-flight requests and joins. Writes are
    /// fsync'd per request, so nothing else needs flushing.
    void stop();

    bool running() const;
    Store& store();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Runs `tom` with `args` (excluding argv[0]). Returns 0 on success, 1 on a
/// domain error, 2 on a usage error. Never throws.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tom
