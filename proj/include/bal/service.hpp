#pragma once

// HTTP facade for human annotation sessions.
//
//   POST /sessions                         create a session from a JSON config
//   GET  /sessions/{id}/query              pending line query (issued on demand)
//   POST /sessions/{id}/annotation         {line_id, index | no_change, label}
//   GET  /sessions/{id}/curve              learning curve so far
//   GET  /sessions/{id}/strip/{line}.png   image row of a line query
//   GET  /sessions/{id}/state              counters, for debugging
//
// Writes to one session are serialised; reads of the curve and strips use
// the last committed snapshot and never wait on a retrain.

#include "bal/decoder.hpp"
#include "bal/loop.hpp"
#include "bal/png.hpp"
#include "bal/random.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace bal {

struct ServiceOptions {
    /// Directory for per-session transcripts; empty disables persistence.
    std::string state_dir;
    /// Idle sessions older than this are dropped; 0 keeps them forever.
    std::chrono::seconds session_ttl{0};
    RenderOptions render{};
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    nlohmann::json json() const { return nlohmann::json::parse(body); }
};

class AnnotationService {
public:
    using Clock = std::chrono::steady_clock;

    AnnotationService(EmbeddedDataset data, ServiceOptions options = {})
        : data_(std::make_shared<const EmbeddedDataset>(std::move(data))),
          options_(std::move(options)),
          id_rng_(std::random_device{}()) {
        validate(*data_);
        if (!options_.state_dir.empty()) std::filesystem::create_directories(options_.state_dir);
    }

    Response create_session(const std::string& body) {
        nlohmann::json cfg = nlohmann::json::object();
        if (!body.empty()) {
            try {
                cfg = nlohmann::json::parse(body);
            } catch (const nlohmann::json::exception&) {
                return error(400, "body is not valid JSON");
            }
            if (!cfg.is_object()) return error(400, "config must be a JSON object");
        }
        cfg["oracle"] = "human";
        ExperimentConfig config;
        try {
            config = config_from_json(cfg);
        } catch (const Error& e) {
            return error(422, e.what());
        }
        std::shared_ptr<Session> session;
        {
            std::lock_guard lock(registry_mutex_);
            sweep_expired();
            session = std::make_shared<Session>(new_id(), *data_, config);
            sessions_[session->id] = session;
        }
        std::lock_guard write(session->write_mutex);
        if (persisting()) {
            std::ofstream out(transcript_path(session->id), std::ios::trunc);
            out << header_json(start_transcript(session->learner)).dump() << '\n';
        }
        commit(*session);
        auto j = metrics(*session);
        j["id"] = session->id;
        return ok(j, 201);
    }

    Response get_query(const std::string& id) {
        auto session = find(id);
        if (!session) return error(404, "unknown session");
        std::lock_guard write(session->write_mutex);
        if (!session->pending) {
            if (session->learner.pool_empty()) return error(409, "pool exhausted");
            const auto idx = session->learner.select();
            session->pending = session->learner.make_query(idx);
            if (session->pending->line) {
                const auto samples = sample_line(*session->pending->line);
                auto strip = render_strip(samples, options_.render);
                std::lock_guard read(session->read_mutex);
                session->strips[session->pending->line_id] = {png_string(strip.image), strip.slots, samples};
                // keep the strip cache small: the pending line and the previous one
                while (session->strips.size() > 2) session->strips.erase(session->strips.begin());
            }
        }
        return ok(query_json(*session));
    }

    Response post_annotation(const std::string& id, const std::string& body) {
        auto session = find(id);
        if (!session) return error(404, "unknown session");
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            return error(400, "body is not valid JSON");
        }
        if (!req.is_object() || !req.contains("line_id") || !req["line_id"].is_number_unsigned())
            return error(422, "line_id is required");
        const auto line_id = req["line_id"].get<std::uint64_t>();
        const auto canonical = req.dump();

        std::lock_guard write(session->write_mutex);
        if (session->last && session->last->line_id == line_id && session->last->request == canonical)
            return session->last->response;
        if (!session->pending) return error(409, "no line query is pending");
        if (session->pending->line_id != line_id) return error(409, "stale line_id");

        if (!req.contains("label") || !req["label"].is_number_integer() || !is_label(req["label"].get<long>()))
            return error(422, "label must be -1 or +1");
        const Label label = req["label"].get<int>();
        const bool no_change = req.value("no_change", false);
        std::optional<std::size_t> index;
        if (!no_change) {
            if (!req.contains("index") || !req["index"].is_number_integer()) return error(422, "index or no_change required");
            const auto k = req["index"].get<long long>();
            const auto& line = session->pending->line;
            if (!line) return error(422, "this query has no line; submit no_change");
            if (k < 0 || static_cast<std::size_t>(k) >= sample_count(*line)) return error(422, "index out of range");
            index = static_cast<std::size_t>(k);
        }

        const Query query = *session->pending;
        AnnotationRecord rec = query.line ? human_oracle_annotate(*query.line, index, label) : AnnotationRecord{};
        rec.line_id = query.line_id;
        rec.query_label = label;
        rec.source = OracleKind::human;
        session->learner.apply(query.train_index, rec);
        session->pending.reset();
        if (persisting()) {
            std::ofstream out(transcript_path(session->id), std::ios::app);
            out << iteration_json(record_iteration(session->learner, query, rec)).dump() << '\n';
        }
        commit(*session);
        auto j = metrics(*session);
        j["no_change"] = rec.no_change();
        Response resp = ok(j);
        session->last = Applied{line_id, canonical, resp};
        return resp;
    }

    Response get_curve(const std::string& id) {
        auto session = find(id);
        if (!session) return error(404, "unknown session");
        std::lock_guard read(session->read_mutex);
        return ok(session->curve_snapshot);
    }

    Response get_state(const std::string& id) {
        auto session = find(id);
        if (!session) return error(404, "unknown session");
        std::lock_guard read(session->read_mutex);
        return ok(session->state_snapshot);
    }

    Response get_strip(const std::string& id, std::uint64_t line_id) {
        auto session = find(id);
        if (!session) return error(404, "unknown session");
        std::lock_guard read(session->read_mutex);
        const auto it = session->strips.find(line_id);
        if (it == session->strips.end()) return error(404, "unknown line");
        return {200, it->second.png, "image/png"};
    }

    /// Rebuilds sessions from transcripts in the state directory.
    std::size_t recover() {
        if (!persisting()) return 0;
        std::size_t restored = 0;
        for (const auto& entry : std::filesystem::directory_iterator(options_.state_dir)) {
            if (entry.path().extension() != ".jsonl") continue;
            std::ifstream in(entry.path());
            const auto transcript = read_transcript(in);
            auto session = std::make_shared<Session>(entry.path().stem().string(), *data_, transcript.config,
                                                     transcript.initial);
            for (const auto& r : transcript.iterations) session->learner.apply(r.query_index, r.annotation);
            commit(*session);
            std::lock_guard lock(registry_mutex_);
            sessions_[session->id] = session;
            ++restored;
        }
        return restored;
    }

    std::size_t session_count() const {
        std::lock_guard lock(registry_mutex_);
        return sessions_.size();
    }

    void mount(httplib::Server& server) {
        auto send = [](httplib::Response& res, const Response& r) {
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, create_session(req.body));
        });
        server.Get(R"(/sessions/([^/]+)/query)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_query(req.matches[1]));
        });
        server.Post(R"(/sessions/([^/]+)/annotation)",
                    [this, send](const httplib::Request& req, httplib::Response& res) {
                        send(res, post_annotation(req.matches[1], req.body));
                    });
        server.Get(R"(/sessions/([^/]+)/curve)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_curve(req.matches[1]));
        });
        server.Get(R"(/sessions/([^/]+)/state)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_state(req.matches[1]));
        });
        server.Get(R"(/sessions/([^/]+)/strip/(\d+)\.png)",
                   [this, send](const httplib::Request& req, httplib::Response& res) {
                       send(res, get_strip(req.matches[1], std::stoull(req.matches[2])));
                   });
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
    }

private:
    struct Strip {
        std::string png;
        std::vector<StripSlot> slots;
        std::vector<LineSample> samples;
    };

    struct Applied {
        std::uint64_t line_id = 0;
        std::string request;
        Response response;
    };

    struct Session {
        Session(std::string sid, const EmbeddedDataset& data, const ExperimentConfig& config)
            : id(std::move(sid)), learner(data, config), touched(Clock::now()) {}
        Session(std::string sid, const EmbeddedDataset& data, const ExperimentConfig& config,
                std::vector<std::size_t> initial)
            : id(std::move(sid)), learner(data, config, std::move(initial)), touched(Clock::now()) {}

        std::string id;
        std::mutex write_mutex;
        ActiveLearner learner;
        std::optional<Query> pending;
        std::optional<Applied> last;

        std::mutex read_mutex;
        nlohmann::json curve_snapshot;
        nlohmann::json state_snapshot;
        std::map<std::uint64_t, Strip> strips;
        Clock::time_point touched;
    };

    static Response ok(const nlohmann::json& j, int status = 200) {
        auto body = j;
        body["v"] = kSchemaVersion;
        return {status, body.dump(), "application/json"};
    }

    static Response error(int status, const std::string& message) {
        return {status, nlohmann::json{{"v", kSchemaVersion}, {"error", message}}.dump(), "application/json"};
    }

    bool persisting() const { return !options_.state_dir.empty(); }

    std::string transcript_path(const std::string& id) const {
        return (std::filesystem::path(options_.state_dir) / (id + ".jsonl")).string();
    }

    std::string new_id() {
        static constexpr char hex[] = "0123456789abcdef";
        std::string id;
        do {
            const auto bits = id_rng_();
            id.clear();
            for (int i = 0; i < 16; ++i) id.push_back(hex[(bits >> (4 * i)) & 0xf]);
        } while (sessions_.count(id) != 0);
        return id;
    }

    void sweep_expired() {
        if (options_.session_ttl.count() <= 0) return;
        const auto now = Clock::now();
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::unique_lock read(it->second->read_mutex, std::try_to_lock);
            if (read.owns_lock() && now - it->second->touched > options_.session_ttl) {
                read.unlock();
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard lock(registry_mutex_);
        sweep_expired();
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) return nullptr;
        {
            std::lock_guard read(it->second->read_mutex);
            it->second->touched = Clock::now();
        }
        return it->second;
    }

    static nlohmann::json metrics(const Session& s) {
        const auto& curve = s.learner.curve();
        return {{"iteration", s.learner.iteration()},
                {"accuracy", curve.accuracies.back()},
                {"ap", curve.average_precisions.back()},
                {"labeled", s.learner.labeled().size()},
                {"boundary_points", s.learner.annotations().size()}};
    }

    /// Publishes the learner state for readers. Caller holds write_mutex.
    static void commit(Session& s) {
        const auto& curve = s.learner.curve();
        nlohmann::json c = {{"v", kSchemaVersion},
                            {"accuracies", curve.accuracies},
                            {"average_precisions", curve.average_precisions}};
        if (curve.size() >= 2) c["aulc"] = aulc(curve);
        auto st = metrics(s);
        st["v"] = kSchemaVersion;
        st["pool"] = s.learner.pool_size();
        st["boundary"] = {{"w", to_json(s.learner.boundary().w)}, {"b", s.learner.boundary().b}};
        std::lock_guard read(s.read_mutex);
        s.curve_snapshot = std::move(c);
        s.state_snapshot = std::move(st);
    }

    static nlohmann::json query_json(Session& s) {
        const auto& q = *s.pending;
        nlohmann::json j = {{"line_id", q.line_id},
                            {"iteration", s.learner.iteration()},
                            {"query_index", q.train_index}};
        if (!q.line) {
            j["samples"] = 0;
            j["line"] = nullptr;
            return j;
        }
        std::lock_guard read(s.read_mutex);
        const auto& strip = s.strips.at(q.line_id);
        nlohmann::json ts = nlohmann::json::array();
        for (const auto& smp : strip.samples) ts.push_back(smp.t);
        nlohmann::json slots = nlohmann::json::array();
        for (const auto& slot : strip.slots)
            slots.push_back({{"index", slot.index}, {"x_begin", slot.x_begin}, {"x_end", slot.x_end}});
        j["samples"] = strip.samples.size();
        j["t"] = std::move(ts);
        j["index_map"] = std::move(slots);
        j["strip_url"] = "/sessions/" + s.id + "/strip/" + std::to_string(q.line_id) + ".png";
        j["line"] = to_json(*q.line);
        return j;
    }

    std::shared_ptr<const EmbeddedDataset> data_;
    ServiceOptions options_;
    mutable std::mutex registry_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::mt19937_64 id_rng_;
};

}  // namespace bal
