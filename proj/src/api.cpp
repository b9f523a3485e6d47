#include "tom/api.hpp"

#include <sstream>
#include <thread>

#include "httplib.h"

namespace tom {

Json error_to_json(const Error& e) {
    Json details = Json::array();
    for (const auto& d : e.details()) details.push_back(d);
    return Json{{"error",
                 {{"code", std::string(to_string(e.code()))},
                  {"kind", e.kind()},
                  {"message", e.what()},
                  {"details", details}}}};
}

std::optional<std::array<int, kCriterionCount>> parse_levels(const std::string& text) {
    std::array<int, kCriterionCount> out{};
    std::istringstream in(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(in, item, ',')) {
        if (i == kCriterionCount || item.size() != 1 || item[0] < '0' || item[0] > '9') {
            return std::nullopt;
        }
        out[i++] = item[0] - '0';
    }
    if (i != kCriterionCount) return std::nullopt;
    return out;
}

ScoreCard card_from_json(const Json& j) {
    if (j.is_object() && j.contains("scores")) return scores_from_json(j.at("scores"));
    return scores_from_json(j);
}

namespace {

Error bad_request(const std::string& msg) {
    return Error(ErrorCode::InvalidInput, "invalid_input", msg);
}

Error unscored(const std::string& id) {
    return Error(ErrorCode::NotFound, "unscored_iu", "IU '" + id + "' has no revisions yet");
}

}  // namespace

Core::Core(Store& store, AppConfig config) : store_(store), config_(std::move(config)) {}

SummaryClient& Core::client() {
    if (!client_) client_ = std::make_unique<SummaryClient>(config_.ingest);
    return *client_;
}

Json Core::criteria() const {
    Json out = Json::array();
    for (Criterion c : kAllCriteria) {
        Json anchors = Json::array();
        for (int level = kMinLevel; level <= kMaxLevel; ++level) {
            anchors.push_back(Json{{"level", level}, {"text", std::string(anchor_text(c, level))}});
        }
        out.push_back(Json{{"key", std::string(key(c))},
                           {"name", std::string(display_name(c))},
                           {"anchors", anchors}});
    }
    return out;
}

Json Core::list_ius() const {
    Json out = Json::array();
    for (const auto& r : store_.ius()) out.push_back(to_json(r));
    return out;
}

Json Core::get_iu(const std::string& id) const {
    const auto record = store_.get_iu(id);
    const auto latest = store_.latest_score(id);
    return Json{{"iu", to_json(record)}, {"latest", latest ? to_json(*latest) : Json(nullptr)}};
}

Json Core::add_iu(const Json& body) {
    if (body.contains("kind") && body["kind"] != "iu") throw bad_request("kind must be \"iu\"");
    return to_json(store_.upsert_iu(iu_from_json(body)));
}

Json Core::add_revision(const std::string& id, const Json& body) {
    if (!body.is_object()) throw bad_request("revision payload must be an object");
    const ScoreCard card = card_from_json(body);
    std::string note;
    if (body.contains("note")) {
        if (!body["note"].is_string()) throw bad_request("note must be text");
        note = body["note"].get<std::string>();
    }
    std::optional<int> expected;
    if (body.contains("expected_revision_no") && !body["expected_revision_no"].is_null()) {
        if (!body["expected_revision_no"].is_number_integer()) {
            throw bad_request("expected_revision_no must be an integer");
        }
        expected = body["expected_revision_no"].get<int>();
    }
    return to_json(store_.append_revision(id, card, std::move(note), expected));
}

Json Core::history(const std::string& id) const {
    Json out = Json::array();
    for (const auto& r : store_.history(id)) out.push_back(to_json(r));
    return out;
}

Json Core::rank() const {
    Json out = Json::array();
    for (const auto& e : store_.rank()) out.push_back(to_json(e));
    return out;
}

Json Core::whatif(const std::string& id, const std::string& criterion_key, int level,
                  const std::optional<std::array<int, kCriterionCount>>& base_levels) const {
    const auto c = criterion_from_key(criterion_key);
    if (!c) throw Error(ErrorCode::InvalidInput, "unknown_criterion", "unknown criterion '" + criterion_key + "'");
    ScoreCard card;
    if (base_levels) {
        card = ScoreCard::from_levels(*base_levels);
        store_.get_iu(id);  // existence check
    } else {
        const auto latest = store_.latest_score(id);
        if (!latest) throw unscored(id);
        card = latest->card;
    }
    const int from = card.level(*c).value_or(0);
    const WhatIf w = whatif_delta(card, *c, level);
    return Json{{"iu_id", id},
                {"criterion", criterion_key},
                {"from_level", from},
                {"to_level", level},
                {"composite", w.score.value},
                {"raw_sum", w.score.raw_sum},
                {"delta", w.delta}};
}

Json Core::tai(const std::string& id) const {
    const auto record = store_.get_iu(id);
    const auto latest = store_.latest_score(id);
    if (!latest) throw unscored(id);
    Json out = to_json(tai_flag(record, latest->card, config_.tai));
    out["iu_id"] = id;
    return out;
}

Json Core::stability(const StabilityConfig& config) const {
    return to_json(rank_stability(store_, config));
}

Json Core::ingest(const std::string& title, FetchMode mode, const std::string& iu_id) {
    const std::string id = iu_id.empty() ? slugify(title) : iu_id;
    if (!is_valid_slug(id)) {
        throw Error(ErrorCode::InvalidInput, "invalid_record",
                    "cannot derive an IU id from title '" + title + "'");
    }
    const FetchResult fetched = client().fetch(title, mode);
    IURecord record;
    if (store_.contains(id)) {
        record = store_.get_iu(id);
    } else {
        record.id = id;
        record.name = fetched.resolved_title;
    }
    record.description = fetched.extract;
    record.description_source =
        mode == FetchMode::Live ? DescriptionSource::WikipediaLive : DescriptionSource::WikipediaFixture;
    const IURecord stored = store_.upsert_iu(std::move(record));
    return Json{{"fetch", to_json(fetched)}, {"iu", to_json(stored)}};
}

std::string Core::export_dataset_text() const {
    std::ostringstream out;
    write_dataset(store_, out);
    return out.str();
}

// ---------------------------------------------------------------------------
// HTTP facade
// ---------------------------------------------------------------------------

struct HttpService::Impl {
    AppConfig config;
    Store store;
    Core core;
    httplib::Server server;
    std::thread thread;
    std::mutex write_mu;  // one writer: serializes every mutating request

    Impl(AppConfig cfg, StoreOptions opts)
        : config(cfg),
          store(Store::open(cfg.store_path, StoreMode::Writer, std::move(opts))),
          core(store, cfg) {
        routes();
    }

    static void send_json(httplib::Response& res, const Json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <class F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_json(res, error_to_json(e), http_status(e.code()));
            } catch (const nlohmann::json::exception& e) {
                send_json(res,
                          error_to_json(Error(ErrorCode::InvalidInput, "invalid_json",
                                              std::string("malformed JSON: ") + e.what())),
                          422);
            } catch (const std::exception& e) {
                send_json(res, error_to_json(Error(ErrorCode::Internal, "internal", e.what())), 500);
            }
        };
    }

    static int int_param(const httplib::Request& req, const char* name) {
        if (!req.has_param(name)) throw bad_request(std::string("missing query parameter ") + name);
        const auto v = req.get_param_value(name);
        try {
            std::size_t pos = 0;
            const int out = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw bad_request(std::string("query parameter ") + name + " must be an integer");
        }
    }

    void routes() {
        server.Get("/health", guarded([](const auto&, auto& res) {
                       send_json(res, Json{{"status", "ok"}});
                   }));
        server.Get("/criteria", guarded([this](const auto&, auto& res) {
                       send_json(res, core.criteria());
                   }));
        server.Get("/ius", guarded([this](const auto&, auto& res) { send_json(res, core.list_ius()); }));
        server.Post("/ius", guarded([this](const httplib::Request& req, auto& res) {
                        const Json body = Json::parse(req.body);
                        std::lock_guard lock(write_mu);
                        send_json(res, core.add_iu(body), 201);
                    }));
        server.Get(R"(/ius/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
                       send_json(res, core.get_iu(req.matches[1]));
                   }));
        server.Get(R"(/ius/([^/]+)/revisions)", guarded([this](const httplib::Request& req, auto& res) {
                       send_json(res, core.history(req.matches[1]));
                   }));
        server.Post(R"(/ius/([^/]+)/revisions)",
                    guarded([this](const httplib::Request& req, auto& res) {
                        const Json body = Json::parse(req.body);
                        std::lock_guard lock(write_mu);
                        send_json(res, core.add_revision(req.matches[1], body), 201);
                    }));
        server.Get("/rank", guarded([this](const auto&, auto& res) { send_json(res, core.rank()); }));
        server.Get(R"(/ius/([^/]+)/whatif)", guarded([this](const httplib::Request& req, auto& res) {
                       if (!req.has_param("criterion")) throw bad_request("missing query parameter criterion");
                       std::optional<std::array<int, kCriterionCount>> base;
                       if (req.has_param("base")) {
                           base = parse_levels(req.get_param_value("base"));
                           if (!base) throw bad_request("base must be six comma-separated levels");
                       }
                       send_json(res, core.whatif(req.matches[1], req.get_param_value("criterion"),
                                                  int_param(req, "level"), base));
                   }));
        server.Get(R"(/ius/([^/]+)/tai)", guarded([this](const httplib::Request& req, auto& res) {
                       send_json(res, core.tai(req.matches[1]));
                   }));
        server.Post(R"(/ingest/(.+))", guarded([this](const httplib::Request& req, auto& res) {
                        const std::string mode_text =
                            req.has_param("mode") ? req.get_param_value("mode") : "fixture";
                        const auto mode = fetch_mode_from(mode_text);
                        if (!mode) throw bad_request("mode must be live or fixture");
                        const std::string iu = req.has_param("iu") ? req.get_param_value("iu") : "";
                        std::lock_guard lock(write_mu);
                        send_json(res, core.ingest(req.matches[1], *mode, iu));
                    }));
        server.Get("/export/dataset", guarded([this](const auto&, auto& res) {
                       res.set_header("X-Dataset-Header", dataset_header());
                       res.set_content(core.export_dataset_text(), "text/tab-separated-values");
                   }));
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                send_json(res,
                          error_to_json(Error(ErrorCode::NotFound, "no_route", "no such endpoint")),
                          res.status);
            }
        });
    }
};

HttpService::HttpService(AppConfig config, StoreOptions store_options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(store_options))) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
    if (impl_->thread.joinable()) {
        throw Error(ErrorCode::Conflict, "already_running", "service already running");
    }
    // SO_REUSEADDR only, no SO_REUSEPORT
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                                : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw Error(ErrorCode::Internal, "bind_failure",
                    "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

bool HttpService::running() const { return impl_->server.is_running(); }

Store& HttpService::store() { return impl_->store; }

}  // namespace tom
