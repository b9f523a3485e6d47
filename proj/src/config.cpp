#include "tom/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tom {

namespace {

Error config_error(const std::string& msg) {
    return Error(ErrorCode::InvalidInput, "invalid_config", msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        throw config_error("bad numeric value for " + key + ": '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw config_error("bad boolean value for " + key + ": '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string k = trim(line.substr(0, eq));
        std::string v = trim(line.substr(eq + 1));
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        if (k.empty()) throw config_error("line " + std::to_string(line_no) + ": empty key");
        out[std::move(k)] = std::move(v);
    }
    return out;
}

void apply_config(AppConfig& c, const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) {
        if (k == "store.path") c.store_path = v;
        else if (k == "tai.immediacy_min") c.tai.immediacy_min = parse_number<int>(k, v);
        else if (k == "tai.composite_min") c.tai.composite_min = parse_number<int>(k, v);
        else if (k == "tai.require_ai_tag") c.tai.require_ai_tag = parse_bool(k, v);
        else if (k == "stability.noise_p") c.stability.noise.p = parse_number<double>(k, v);
        else if (k == "stability.step") c.stability.noise.step = parse_number<int>(k, v);
        else if (k == "stability.trials") c.stability.trials = parse_number<int>(k, v);
        else if (k == "stability.seed") c.stability.seed = parse_number<std::uint64_t>(k, v);
        else if (k == "stability.threads") c.stability.threads = parse_number<int>(k, v);
        else if (k == "ingest.base_url") c.ingest.base_url = v;
        else if (k == "ingest.user_agent") c.ingest.user_agent = v;
        else if (k == "ingest.fixture_dir") c.ingest.fixture_dir = v;
        else if (k == "ingest.cache_dir") c.ingest.cache_dir = std::filesystem::path(v);
        else if (k == "ingest.rate_per_second") c.ingest.rate_per_second = parse_number<double>(k, v);
        else if (k == "ingest.burst") c.ingest.burst = parse_number<int>(k, v);
        else if (k == "ingest.max_retries") c.ingest.max_retries = parse_number<int>(k, v);
        else if (k == "ingest.backoff_ms") {
            c.ingest.backoff_initial = std::chrono::milliseconds(parse_number<int>(k, v));
        } else if (k == "ingest.parallelism") c.ingest.parallelism = parse_number<int>(k, v);
        else if (k == "server.host") c.server.host = v;
        else if (k == "server.port") c.server.port = parse_number<int>(k, v);
        else throw config_error("unknown config key '" + k + "'");
    }
    validate(c.tai);
}

AppConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    AppConfig c;
    apply_config(c, parse_config_text(ss.str()));
    return c;
}

}  // namespace tom
