#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tom/analysis.hpp"
#include "tom/ingestion.hpp"

namespace tom {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct AppConfig {
    std::filesystem::path store_path = "tom-store.jsonl";
    TaiAlertConfig tai;
    StabilityConfig stability;
    IngestConfig ingest;
    ServerConfig server;
};

/// Parses `key = value` lines ('#' starts a comment, blank lines ignored).
/// Throws Error{InvalidInput, "invalid_config"} on syntax errors.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Applies recognised keys onto `config`; unknown keys and bad values throw
/// Error{InvalidInput, "invalid_config"}. Recognised keys:
///   store.path
///   tai.immediacy_min, tai.composite_min, tai.require_ai_tag
///   stability.noise_p, stability.step, stability.trials, stability.seed, stability.threads
///   ingest.base_url, ingest.user_agent, ingest.fixture_dir, ingest.cache_dir,
///   ingest.rate_per_second, ingest.burst, ingest.max_retries, ingest.backoff_ms,
///   ingest.parallelism
///   server.host, server.port
void apply_config(AppConfig& config, const std::map<std::string, std::string>& values);

AppConfig load_config_file(const std::filesystem::path& path);

}  // namespace tom
