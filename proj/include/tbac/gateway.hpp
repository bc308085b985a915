#pragma once

// HTTP enforcement point in front of mock backend services. Every request to
// a service URI is turned into behavior elements and put through the monitor
// before the mock backend may answer.
//
// Endpoints:
//   POST /auth            -> open a session (consumer/key/target JSON body)
//   GET  <model uri>      -> monitored service access
//   GET  /metrics         -> per-service counters and risk snapshots
//   GET  /healthz
//   POST /admin/tbm-pad   -> inflate a consumer's TBM (scaling experiment)
//
// The gateway never trusts a client-supplied source URI: each session's
// source is tracked server-side as the last successfully accessed URI. A
// request for the initial service's URI is portal re-entry and is matched
// through the initial service's self-refresh rule.

#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tbac/config.hpp"
#include "tbac/model.hpp"
#include "tbac/monitor.hpp"
#include "tbac/policy.hpp"

namespace tbac {

struct ServiceCounters {
    std::uint64_t access_times = 0;
    std::uint64_t responded_times = 0;
    std::uint64_t latency_total_us = 0;
};

class Gateway {
public:
    Gateway(GatewayConfig cfg, std::shared_ptr<const SoaModel> model, Srm srm)
        : cfg_(std::move(cfg)),
          model_(std::move(model)),
          monitor_(model_, std::move(srm), cfg_.monitor, cfg_.blacklist_path),
          epoch_(std::chrono::steady_clock::now()) {
        if (!cfg_.decision_log_path.empty()) {
            log_file_.open(cfg_.decision_log_path, std::ios::app);
            monitor_.set_log_sink([this](const std::string& line) {
                std::lock_guard lock(log_mutex_);
                log_file_ << line << '\n';
            });
        }
        for (const auto& [sid, kind] : model_->services()) {
            (void)kind;
            counters_[model_->uri_of(sid)];  // pre-create so /metrics lists all
        }
        server_.set_tcp_nodelay(true);  // loopback benchmarks stall under Nagle
        setup_routes();
    }

    ~Gateway() { stop(); }

    Monitor& monitor() { return monitor_; }

    // Virtual monotonic clock; time_scale > 1 compresses experiments, and a
    // clock_override replaces wall time entirely for deterministic runs.
    [[nodiscard]] Millis now_ms() const {
        if (cfg_.clock_override) return cfg_.clock_override();
        auto real = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - epoch_)
                        .count();
        return static_cast<Millis>(static_cast<double>(real) * cfg_.time_scale);
    }

    // Binds and serves on a background thread. Returns the bound port.
    int start() {
        if (cfg_.listen_port == 0) {
            port_ = server_.bind_to_any_port(cfg_.listen_host);
        } else {
            if (!server_.bind_to_port(cfg_.listen_host, cfg_.listen_port))
                throw std::runtime_error("cannot bind " + cfg_.listen_host + ":" +
                                         std::to_string(cfg_.listen_port));
            port_ = cfg_.listen_port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    [[nodiscard]] int port() const { return port_; }

    // Total mock backend invocations; used to verify enforcement
    // completeness (mock hits must equal Allow decisions).
    [[nodiscard]] std::uint64_t mock_hits() const { return mock_hits_.load(); }
    [[nodiscard]] std::uint64_t allow_count() const { return allow_count_.load(); }

private:
    void setup_routes() {
        server_.Post("/auth", [this](const httplib::Request& req, httplib::Response& res) {
            handle_auth(req, res);
        });
        server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("ok\n", "text/plain");
        });
        server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(metrics_json().dump(2) + "\n", "application/json");
        });
        server_.Post("/admin/tbm-pad",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle_tbm_pad(req, res);
                     });
        server_.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
            handle_service(req, res);
        });
    }

    void handle_auth(const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            res.status = 400;
            res.set_content("malformed auth body\n", "text/plain");
            return;
        }
        if (!body.contains("consumer") || !body.contains("key") || !body.contains("target")) {
            res.status = 400;
            res.set_content("auth body needs consumer, key, target\n", "text/plain");
            return;
        }
        auto result = monitor_.open_session(body["consumer"].get<std::string>(),
                                            body["key"].get<std::string>(),
                                            body["target"].get<std::string>(), now_ms(),
                                            unix_ms());
        if (result.ok()) {
            res.set_content(nlohmann::json{{"token", result.token}}.dump() + "\n",
                            "application/json");
            return;
        }
        res.status = result.reason == Reason::OnBlacklist ? 403 : 401;
        res.set_header("X-Reason", to_string(result.reason));
        res.set_content(std::string(to_string(result.reason)) + "\n", "text/plain");
    }

    void handle_tbm_pad(const httplib::Request& req, httplib::Response& res) {
        try {
            auto body = nlohmann::json::parse(req.body);
            std::string consumer = body.at("consumer").get<std::string>();
            std::string key = body.at("key").get<std::string>();
            std::string target = body.at("target").get<std::string>();
            auto total = body.at("rules").get<std::size_t>();

            auto model = monitor_.model();
            monitor_.clear_tbm_overrides();
            auto probe = monitor_.open_session(consumer, key, target, now_ms(), unix_ms());
            if (!probe.ok()) {
                res.status = 401;
                res.set_content("cannot authenticate for pad\n", "text/plain");
                return;
            }
            Session* s = monitor_.find_session(probe.token);
            monitor_.override_tbm(target, pad_tbm(*s->tbm, total));
            res.set_content("ok\n", "text/plain");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(std::string("pad failed: ") + e.what() + "\n", "text/plain");
        }
    }

    void handle_service(const httplib::Request& req, httplib::Response& res) {
        auto t0 = std::chrono::steady_clock::now();

        auto sid = model_->service_at(req.path);
        if (!sid) {
            res.status = 404;
            res.set_content("no such service\n", "text/plain");
            return;
        }
        auto consumer = req.get_header_value("X-Consumer");
        auto token = req.get_header_value("X-Session");
        if (consumer.empty() || token.empty()) {
            res.status = 400;
            res.set_content("missing X-Consumer or X-Session header\n", "text/plain");
            return;
        }
        Session* session = monitor_.find_session(token);
        if (!session || session->consumer != consumer) {
            res.status = 403;
            res.set_header("X-Decision", "deny");
            res.set_header("X-Reason", to_string(Reason::SessionTerminated));
            res.set_content("unknown session\n", "text/plain");
            return;
        }

        const Uri initial_uri = model_->uri_of(model_->initial());
        BehaviorElements elements;
        elements.id = consumer;
        elements.dst = req.path;
        elements.timestamp = now_ms();
        {
            std::lock_guard lock(session->mutex);
            // portal re-entry resets the source to the initial page
            elements.src = (req.path == initial_uri) ? initial_uri : session->last_uri;
        }

        Decision decision;
        try {
            decision = monitor_.decide(*session, elements, unix_ms());
        } catch (const StoreUnavailable&) {
            res.status = 503;
            res.set_content("monitor store unavailable\n", "text/plain");
            return;
        }

        bool responded = false;
        if (decision.verdict == Verdict::Allow) {
            allow_count_.fetch_add(1);
            res.set_content(invoke_mock(*sid, req.path), "text/plain");
            res.set_header("X-Decision", "allow");
            res.set_header("X-Reason", to_string(decision.reason));
            responded = true;
            std::lock_guard lock(session->mutex);
            session->last_uri = req.path;
        } else {
            res.status = 403;
            res.set_header("X-Decision", to_string(decision.verdict));
            res.set_header("X-Reason", to_string(decision.reason));
            res.set_content(std::string(to_string(decision.reason)) + "\n", "text/plain");
        }

        auto latency_us = std::chrono::duration_cast<std::chrono::microseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        {
            std::lock_guard lock(counters_mutex_);
            auto& c = counters_[req.path];
            ++c.access_times;
            if (responded) {
                ++c.responded_times;
                c.latency_total_us += static_cast<std::uint64_t>(latency_us);
            }
            last_session_by_consumer_[consumer] = session;
        }
    }

    std::string invoke_mock(const ServiceId& sid, const Uri& uri) {
        if (cfg_.mock_latency_us > 0)
            std::this_thread::sleep_for(std::chrono::microseconds(cfg_.mock_latency_us));
        mock_hits_.fetch_add(1);
        return "service " + sid + " at " + uri + "\n";
    }

    nlohmann::json metrics_json() {
        nlohmann::json services = nlohmann::json::object();
        nlohmann::json consumers = nlohmann::json::object();
        std::lock_guard lock(counters_mutex_);
        for (const auto& [uri, c] : counters_) {
            auto sid = model_->service_at(uri);
            services[uri] = {
                {"service", sid ? *sid : ""},
                {"access_times", c.access_times},
                {"responded_times", c.responded_times},
                {"avg_latency_us", c.responded_times
                                       ? static_cast<double>(c.latency_total_us) /
                                             static_cast<double>(c.responded_times)
                                       : 0.0},
            };
        }
        for (const auto& [consumer, session] : last_session_by_consumer_) {
            std::lock_guard sl(session->mutex);
            consumers[consumer] = {
                {"session", session->ordinal},
                {"uar", session->risk.uar},
                {"arr_s", session->risk.arr_s},
                {"afr_per_min", session->risk.afr_per_min},
                {"pf_uar", session->pf_uar},
                {"pf_afr", session->pf_afr},
                {"pf_arr", session->pf_arr},
                {"status",
                 session->status == SessionStatus::Active ? "active" : "terminated"},
            };
        }
        return {{"services", services}, {"consumers", consumers}};
    }

    static std::int64_t unix_ms() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    GatewayConfig cfg_;
    std::shared_ptr<const SoaModel> model_;
    Monitor monitor_;
    std::chrono::steady_clock::time_point epoch_;

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;

    std::mutex counters_mutex_;
    std::map<Uri, ServiceCounters> counters_;
    std::map<ConsumerId, Session*> last_session_by_consumer_;

    std::atomic<std::uint64_t> mock_hits_{0};
    std::atomic<std::uint64_t> allow_count_{0};

    std::mutex log_mutex_;
    std::ofstream log_file_;
};

inline std::unique_ptr<Gateway> make_gateway_from_config(const GatewayConfig& cfg) {
    std::ifstream model_in(cfg.model_path);
    if (!model_in) throw ParseError("cannot open model file: " + cfg.model_path);
    auto model = std::make_shared<const SoaModel>(load_model(model_in));
    std::ifstream srm_in(cfg.srm_path);
    if (!srm_in) throw ParseError("cannot open srm file: " + cfg.srm_path);
    Srm srm = parse_srm(srm_in, *model);
    return std::make_unique<Gateway>(cfg, std::move(model), std::move(srm));
}

}  // namespace tbac
