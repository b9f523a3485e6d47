#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tom/api.hpp"

namespace tom {

namespace {

struct GlobalOptions {
    std::string store;
    std::string config;
    std::string fixture_dir;
    bool machine = false;
};

/// Line-delimited output in machine mode: arrays become one line per element.
void emit(std::ostream& out, const Json& value) {
    if (value.is_array()) {
        for (const auto& item : value) out << item.dump() << '\n';
    } else {
        out << value.dump() << '\n';
    }
}

void print_error(std::ostream& err, const Error& e, bool machine) {
    if (machine) {
        err << error_to_json(e).dump() << '\n';
        return;
    }
    err << "error: " << e.what() << '\n';
    for (const auto& d : e.details()) err << "  - " << d << '\n';
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "unreadable_file", "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AppConfig resolve_config(const GlobalOptions& g) {
    std::string config_path = g.config;
    if (config_path.empty()) {
        if (const char* env = std::getenv("TOM_CONFIG")) config_path = env;
    }
    AppConfig config = config_path.empty() ? AppConfig{} : load_config_file(config_path);
    if (!g.store.empty()) {
        config.store_path = g.store;
    } else if (const char* env = std::getenv("TOM_STORE")) {
        config.store_path = env;
    }
    if (!g.fixture_dir.empty()) config.ingest.fixture_dir = g.fixture_dir;
    return config;
}

int serve_until_signal(const AppConfig& config, std::ostream& out) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigset_t previous;
    // Server threads inherit the blocked mask; this thread collects the signal.
    pthread_sigmask(SIG_BLOCK, &signals, &previous);
    int port = 0;
    {
        HttpService service(config);
        port = service.start(config.server.host, config.server.port);
        out << "listening on " << config.server.host << ":" << port << std::endl;
        int sig = 0;
        sigwait(&signals, &sig);
        service.stop();
    }
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    out << "stopped" << std::endl;
    return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tom: six-criterion innovation scoring registry", "tom"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--store", g.store, "Store file (env TOM_STORE)");
    app.add_option("--config", g.config, "Config file (env TOM_CONFIG)");
    app.add_option("--fixture-dir", g.fixture_dir, "Directory of <slug>.txt description fixtures");
    app.add_flag("--machine", g.machine, "Line-delimited JSON output");

    auto* init = app.add_subcommand("init", "Create an empty store");

    auto* criteria = app.add_subcommand("criteria", "List criteria and level anchors");

    IURecord new_iu;
    std::vector<std::string> tags;
    std::string source = "manual";
    auto* add_iu = app.add_subcommand("add-iu", "Create or update an innovation unit");
    add_iu->add_option("--id", new_iu.id, "Slug id")->required();
    add_iu->add_option("--name", new_iu.name, "Display name")->required();
    add_iu->add_option("--description", new_iu.description, "Description text");
    add_iu->add_option("--source", source, "manual|wikipedia-fixture|wikipedia-live");
    add_iu->add_option("--tag", tags, "Label (repeatable), e.g. ai-related");

    std::string iu_id;
    std::string card_file;
    std::string note;
    std::optional<int> expect;
    auto* score = app.add_subcommand("score", "Append a scored revision from a JSON card file");
    score->add_option("--iu", iu_id, "IU id")->required();
    score->add_option("--file", card_file, "Scorecard JSON file")->required();
    score->add_option("--note", note, "What new information prompted this revision");
    score->add_option("--expect-revision", expect, "Fail unless the latest revision_no is this");

    auto* history = app.add_subcommand("history", "Revision history of an IU");
    history->add_option("--iu", iu_id, "IU id")->required();

    auto* rank = app.add_subcommand("rank", "Scored IUs by latest composite");

    std::string criterion;
    int level = 0;
    std::string base;
    auto* whatif = app.add_subcommand("whatif", "Composite after changing one level");
    whatif->add_option("--iu", iu_id, "IU id")->required();
    whatif->add_option("--criterion", criterion, "Criterion key")->required();
    whatif->add_option("--level", level, "New level")->required();
    whatif->add_option("--base", base, "Six comma-separated levels to use instead of the latest revision");

    auto* tai = app.add_subcommand("tai", "TAI-watch flag for an IU's latest revision");
    tai->add_option("--iu", iu_id, "IU id")->required();

    std::string title;
    std::string mode_text = "fixture";
    std::string cache_dir;
    bool refresh = false;
    auto* ingest = app.add_subcommand("ingest", "Fetch an encyclopedia summary into an IU description");
    ingest->add_option("--title", title, "Page title")->required();
    ingest->add_option("--mode", mode_text, "live|fixture")->check(CLI::IsMember({"live", "fixture"}));
    ingest->add_option("--iu", iu_id, "Target IU id (default: slug of the title)");
    ingest->add_option("--cache-dir", cache_dir, "Response cache directory");
    ingest->add_flag("--refresh", refresh, "Ignore cached responses");

    std::string out_path;
    auto* export_cmd = app.add_subcommand("export", "Write the ML training dataset");
    export_cmd->add_option("--out", out_path, "Destination file ('-' for stdout)")->required();

    std::optional<std::string> host;
    std::optional<int> port;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service until SIGINT/SIGTERM");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 = ephemeral)");

    std::optional<double> noise_p;
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    auto* stability = app.add_subcommand("stability", "Rank stability under level noise");
    stability->add_option("--noise-p", noise_p, "Per-level perturbation probability");
    stability->add_option("--trials", trials, "Number of trials");
    stability->add_option("--seed", seed, "Generator seed");
    stability->add_option("--threads", threads, "Worker threads");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << "run `tom --help` for usage\n";
        return 2;
    }

    const bool m = g.machine;
    try {
        AppConfig config = resolve_config(g);
        auto open_writer = [&] { return Store::open(config.store_path, StoreMode::Writer); };
        auto open_reader = [&] { return Store::open(config.store_path, StoreMode::Reader); };

        if (*init) {
            Store::init(config.store_path);
            if (m) emit(out, Json{{"store", config.store_path.string()}});
            else out << "initialized " << config.store_path.string() << '\n';
            return 0;
        }
        if (*criteria) {
            Store store = Store::in_memory();
            const Json result = Core(store, config).criteria();
            if (m) {
                emit(out, result);
            } else {
                for (const auto& c : result) {
                    out << c["name"].get<std::string>() << " (" << c["key"].get<std::string>() << ")\n";
                    for (const auto& a : c["anchors"]) {
                        out << "  " << a["level"].get<int>() << ": " << a["text"].get<std::string>() << '\n';
                    }
                }
            }
            return 0;
        }
        if (*add_iu) {
            const auto src = description_source_from(source);
            if (!src) {
                throw Error(ErrorCode::InvalidInput, "invalid_record", "unknown --source '" + source + "'");
            }
            new_iu.description_source = *src;
            new_iu.tags.insert(tags.begin(), tags.end());
            Store store = open_writer();
            const Json result = Core(store, config).add_iu(to_json(new_iu));
            if (m) emit(out, result);
            else out << "stored " << result["id"].get<std::string>() << '\n';
            return 0;
        }
        if (*score) {
            Json body;
            try {
                body = Json::parse(read_text_file(card_file));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::InvalidInput, "invalid_json",
                            card_file + ": malformed JSON: " + e.what());
            }
            // Validate before taking the writer lock so bad cards never touch the store.
            require_valid(card_from_json(body));
            Json payload{{"scores", body.is_object() && body.contains("scores") ? body["scores"] : body},
                         {"note", note}};
            if (expect) payload["expected_revision_no"] = *expect;
            Store store = open_writer();
            const Json result = Core(store, config).add_revision(iu_id, payload);
            if (m) {
                emit(out, result);
            } else {
                out << iu_id << " revision " << result["revision_no"].get<int>() << ": composite "
                    << result["composite"].get<int>() << " (raw " << result["raw_sum"].get<int>()
                    << "/30)\n";
            }
            return 0;
        }
        if (*history) {
            Store store = open_reader();
            const Json result = Core(store, config).history(iu_id);
            if (m) {
                emit(out, result);
            } else {
                for (const auto& r : result) {
                    out << "#" << r["revision_no"].get<int>() << "  " << r["recorded_at"].get<std::string>()
                        << "  composite " << r["composite"].get<int>();
                    if (!r["note"].get<std::string>().empty()) out << "  " << r["note"].get<std::string>();
                    out << '\n';
                }
            }
            return 0;
        }
        if (*rank) {
            Store store = open_reader();
            const Json result = Core(store, config).rank();
            if (m) {
                emit(out, result);
            } else {
                int pos = 0;
                for (const auto& e : result) {
                    out << ++pos << ". " << e["iu_id"].get<std::string>() << "  "
                        << e["composite"].get<int>() << '\n';
                }
            }
            return 0;
        }
        if (*whatif) {
            std::optional<std::array<int, kCriterionCount>> base_levels;
            if (!base.empty()) {
                base_levels = parse_levels(base);
                if (!base_levels) {
                    throw Error(ErrorCode::InvalidInput, "invalid_input",
                                "--base must be six comma-separated levels");
                }
            }
            Store store = open_reader();
            const Json r = Core(store, config).whatif(iu_id, criterion, level, base_levels);
            if (m) {
                emit(out, r);
            } else {
                const int delta = r["delta"].get<int>();
                out << iu_id << " " << criterion << " " << r["from_level"].get<int>() << " -> "
                    << level << ": composite " << r["composite"].get<int>() << " ("
                    << (delta >= 0 ? "+" : "") << delta << ")\n";
            }
            return 0;
        }
        if (*tai) {
            Store store = open_reader();
            const Json r = Core(store, config).tai(iu_id);
            if (m) emit(out, r);
            else out << iu_id << ": " << (r["flagged"].get<bool>() ? "FLAGGED" : "not flagged") << " ("
                     << r["reason"].get<std::string>() << ")\n";
            return 0;
        }
        if (*ingest) {
            if (!cache_dir.empty()) config.ingest.cache_dir = cache_dir;
            config.ingest.refresh = refresh;
            Store store = open_writer();
            const Json r = Core(store, config).ingest(title, *fetch_mode_from(mode_text), iu_id);
            if (m) emit(out, r);
            else out << r["iu"]["id"].get<std::string>() << ": " << r["fetch"]["extract"].get<std::string>()
                     << " [" << r["fetch"]["source"].get<std::string>() << "]\n";
            return 0;
        }
        if (*export_cmd) {
            Store store = open_reader();
            if (out_path == "-") {
                write_dataset(store, out);
                return 0;
            }
            const std::size_t rows = export_dataset(store, out_path);
            if (m) emit(out, Json{{"rows", rows}, {"path", out_path}});
            else out << "wrote " << rows << " rows to " << out_path << '\n';
            return 0;
        }
        if (*serve) {
            if (host) config.server.host = *host;
            if (port) config.server.port = *port;
            return serve_until_signal(config, out);
        }
        if (*stability) {
            StabilityConfig sc = config.stability;
            if (noise_p) sc.noise.p = *noise_p;
            if (trials) sc.trials = *trials;
            if (seed) sc.seed = *seed;
            if (threads) sc.threads = *threads;
            Store store = open_reader();
            const Json r = Core(store, config).stability(sc);
            if (m) {
                emit(out, r);
            } else {
                out << "generator " << r["generator"].get<std::string>() << ", seed "
                    << r["seed"].get<std::uint64_t>() << ", " << r["trials"].get<int>() << " trials\n";
                for (const auto& e : r["entries"]) {
                    out << "  " << e["base_position"].get<int>() + 1 << ". " << e["iu_id"].get<std::string>()
                        << "  " << e["probability"].get<double>() << '\n';
                }
            }
            return 0;
        }
    } catch (const Error& e) {
        print_error(err, e, m);
        return 1;
    } catch (const std::exception& e) {
        print_error(err, Error(ErrorCode::Internal, "internal", e.what()), m);
        return 1;
    }
    return 2;
}

}  // namespace tom
