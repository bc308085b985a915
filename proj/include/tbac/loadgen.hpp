#pragma once

// Experiment drivers: seeded random load against a running gateway, the
// deauthorization scenarios (UAR replay and AFR frequency schedule) and the
// TBM scaling measurement, plus report emission as JSON and per-figure CSV.
//
// Each logical access to a sensitive service is issued as a route walk:
// portal re-entry followed by every hop of the derived route, so a released
// service is reached exactly the way its trusted behavior rules describe.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tbac/model.hpp"
#include "tbac/policy.hpp"
#include "tbac/risk.hpp"

namespace tbac {

struct ConnectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
    ConsumerId consumer;
    std::string key;
    Target target;
    std::uint64_t request_count = 10000;
    std::vector<ServiceId> service_range;
    std::vector<double> frequency_schedule;  // requests per virtual minute
    std::vector<std::size_t> tbm_scale;      // rule counts for run_scaling
    std::uint64_t seed = 1;
    double time_scale = 1.0;                 // must match the gateway's
    // When set, the frequency schedule advances this virtual clock instead of
    // sleeping; pair it with the gateway's clock_override for deterministic
    // compressed runs.
    std::function<void(Millis)> advance;
};

struct ServiceStats {
    std::uint64_t access_times = 0;
    std::uint64_t responded_times = 0;
};

struct GroupRecord {
    double rate_per_min = 0;
    std::uint64_t sent = 0;
    std::uint64_t responded = 0;
};

struct SizeRecord {
    std::size_t rules = 0;
    double mean_latency_us = 0;  // batch mean, median across repetitions
    int repetitions = 0;
};

struct ExperimentReport {
    std::uint64_t seed = 0;
    std::uint64_t request_count = 0;
    std::uint64_t denied = 0;
    std::map<ServiceId, ServiceStats> per_service;
    std::vector<GroupRecord> per_group;
    std::vector<SizeRecord> per_size;
    // 1-based logical index of the request that tripped a threshold; 0 if none
    std::uint64_t trigger_index = 0;
    std::size_t trigger_group = 0;  // 1-based; 0 if none
    bool partial = false;

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json services = nlohmann::json::object();
        for (const auto& [sid, st] : per_service)
            services[sid] = {{"access_times", st.access_times},
                             {"responded_times", st.responded_times}};
        nlohmann::json groups = nlohmann::json::array();
        for (const auto& g : per_group)
            groups.push_back({{"rate_per_min", g.rate_per_min},
                              {"sent", g.sent},
                              {"responded", g.responded}});
        nlohmann::json sizes = nlohmann::json::array();
        for (const auto& s : per_size)
            sizes.push_back({{"rules", s.rules},
                             {"mean_latency_us", s.mean_latency_us},
                             {"repetitions", s.repetitions}});
        return {{"seed", seed},
                {"request_count", request_count},
                {"denied", denied},
                {"per_service", services},
                {"per_group", groups},
                {"per_size", sizes},
                {"trigger_index", trigger_index},
                {"trigger_group", trigger_group},
                {"partial", partial}};
    }

    void write(const std::filesystem::path& out_dir, const std::string& name) const {
        std::filesystem::create_directories(out_dir);
        {
            std::ofstream out(out_dir / (name + ".json"));
            out << to_json().dump(2) << '\n';
        }
        if (!per_service.empty()) {
            std::ofstream out(out_dir / (name + "_per_service.csv"));
            out << "service,access_times,responded_times\n";
            for (const auto& [sid, st] : per_service)
                out << sid << ',' << st.access_times << ',' << st.responded_times << '\n';
        }
        if (!per_group.empty()) {
            std::ofstream out(out_dir / (name + "_per_group.csv"));
            out << "group,rate_per_min,sent,responded\n";
            for (std::size_t i = 0; i < per_group.size(); ++i)
                out << i + 1 << ',' << per_group[i].rate_per_min << ',' << per_group[i].sent
                    << ',' << per_group[i].responded << '\n';
        }
        if (!per_size.empty()) {
            std::ofstream out(out_dir / (name + "_per_size.csv"));
            out << "rules,mean_latency_us,repetitions\n";
            for (const auto& s : per_size)
                out << s.rules << ',' << s.mean_latency_us << ',' << s.repetitions << '\n';
        }
    }
};

// Thin HTTP client bound to one gateway session.
class GatewayClient {
public:
    GatewayClient(const std::string& host, int port) : cli_(host, port) {
        cli_.set_keep_alive(true);
        cli_.set_tcp_nodelay(true);
        cli_.set_connection_timeout(10);
        cli_.set_read_timeout(30);
    }

    void authenticate(const ConsumerId& consumer, const std::string& key, const Target& target) {
        consumer_ = consumer;
        nlohmann::json body{{"consumer", consumer}, {"key", key}, {"target", target}};
        auto res = cli_.Post("/auth", body.dump(), "application/json");
        if (!res) throw ConnectionError("cannot reach gateway for /auth");
        if (res->status != 200)
            throw ConnectionError("authentication failed: " + std::to_string(res->status));
        token_ = nlohmann::json::parse(res->body)["token"].get<std::string>();
    }

    struct Access {
        int status = 0;
        std::string decision;
        std::string reason;
        std::int64_t latency_us = 0;
    };

    Access get(const Uri& uri) {
        auto t0 = std::chrono::steady_clock::now();
        auto res = cli_.Get(uri, {{"X-Consumer", consumer_}, {"X-Session", token_}});
        auto t1 = std::chrono::steady_clock::now();
        if (!res) throw ConnectionError("request failed: " + uri);
        Access a;
        a.status = res->status;
        a.decision = res->get_header_value("X-Decision");
        a.reason = res->get_header_value("X-Reason");
        a.latency_us =
            std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
        return a;
    }

    void pad_tbm(const ConsumerId& consumer, const std::string& key, const Target& target,
                 std::size_t rules) {
        nlohmann::json body{
            {"consumer", consumer}, {"key", key}, {"target", target}, {"rules", rules}};
        auto res = cli_.Post("/admin/tbm-pad", body.dump(), "application/json");
        if (!res || res->status != 200) throw ConnectionError("tbm pad request failed");
    }

    [[nodiscard]] nlohmann::json metrics() {
        auto res = cli_.Get("/metrics");
        if (!res || res->status != 200) throw ConnectionError("metrics request failed");
        return nlohmann::json::parse(res->body);
    }

private:
    httplib::Client cli_;
    ConsumerId consumer_;
    std::string token_;
};

namespace detail {

inline bool is_trigger(const std::string& reason) {
    return reason == "uar-exceeded" || reason == "afr-exceeded" ||
           reason == "arr-exceeded" || reason == "uar-afr-exceeded";
}

// URIs requested for one logical access: portal re-entry, then each hop of
// the derived route.
inline std::vector<Uri> walk_uris(const SoaModel& model, const ServiceId& target) {
    auto route = model.find_route(target);
    if (!route) throw UnreachableService("no route to " + target);
    std::vector<Uri> uris{model.uri_of(model.initial())};
    for (const auto& t : route->transitions) uris.push_back(model.uri_of(t.to));
    return uris;
}

}  // namespace detail

// Uniform seeded random accesses over the service range through one session.
// When `report_trigger` is set the driver also records the logical request
// index at which the session got terminated.
inline ExperimentReport run_supervision(const ExperimentSpec& spec, const SoaModel& model,
                                        const std::string& host, int port) {
    ExperimentReport report;
    report.seed = spec.seed;
    report.request_count = spec.request_count;
    if (spec.request_count == 0) return report;
    if (spec.service_range.empty())
        throw std::invalid_argument("experiment needs a service range");

    std::map<ServiceId, std::vector<Uri>> walks;
    for (const auto& sid : spec.service_range) walks[sid] = detail::walk_uris(model, sid);

    GatewayClient client(host, port);
    client.authenticate(spec.consumer, spec.key, spec.target);

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> pick(0, spec.service_range.size() - 1);

    for (std::uint64_t i = 1; i <= spec.request_count; ++i) {
        const ServiceId& target = spec.service_range[pick(rng)];
        auto& stats = report.per_service[target];
        ++stats.access_times;
        bool responded = false;
        for (std::size_t h = 0; h < walks[target].size(); ++h) {
            auto access = client.get(walks[target][h]);
            if (report.trigger_index == 0 && detail::is_trigger(access.reason))
                report.trigger_index = i;
            if (h + 1 == walks[target].size()) responded = access.status == 200;
            if (access.status != 200) break;  // walk cannot proceed past a denial
        }
        if (responded) ++stats.responded_times;
        else ++report.denied;
    }
    return report;
}

// AFR scenario: drive one released service group by group at the scheduled
// per-minute rates. Pacing runs in virtual time (spec.time_scale compresses
// a virtual minute into 60/time_scale real seconds) and must match the
// gateway's configured time_scale.
inline ExperimentReport run_afr_schedule(const ExperimentSpec& spec, const SoaModel& model,
                                         const std::string& host, int port) {
    ExperimentReport report;
    report.seed = spec.seed;
    if (spec.frequency_schedule.empty())
        throw std::invalid_argument("afr experiment needs a frequency schedule");
    for (double r : spec.frequency_schedule)
        if (r <= 0) throw std::invalid_argument("schedule rates must be positive");
    if (spec.service_range.size() != 1)
        throw std::invalid_argument("afr experiment drives exactly one service");

    const ServiceId& target = spec.service_range[0];
    auto walk = detail::walk_uris(model, target);
    const Uri& target_uri = walk.back();

    GatewayClient client(host, port);
    client.authenticate(spec.consumer, spec.key, spec.target);

    // establish the session source at the target so later accesses are
    // refreshes of the released page
    for (const auto& uri : walk) client.get(uri);

    // Real-time pacing uses deadlines with a bounded backlog: after a
    // scheduler stall the driver may catch up (so the long-run rate stays
    // nominal even on a slow machine) but never bursts more than kMaxBacklog
    // requests at once, bounding the window-count overshoot at the gateway.
    // With spec.advance set there is no sleeping at all; the driver owns the
    // virtual clock and the schedule replays deterministically.
    constexpr int kMaxBacklog = 20;
    auto next = std::chrono::steady_clock::now();
    double virtual_ms = 0;
    for (std::size_t g = 0; g < spec.frequency_schedule.size(); ++g) {
        double rate = spec.frequency_schedule[g];
        double gap_ms = 60000.0 / rate;
        auto gap_real = std::chrono::microseconds(
            static_cast<std::int64_t>(gap_ms * 1000.0 / spec.time_scale));
        GroupRecord rec;
        rec.rate_per_min = rate;
        auto n = static_cast<std::uint64_t>(rate);  // one virtual minute per group
        for (std::uint64_t i = 0; i < n; ++i) {
            virtual_ms += gap_ms;
            if (spec.advance) {
                spec.advance(static_cast<Millis>(virtual_ms));
            } else {
                next = std::max(next + gap_real,
                                std::chrono::steady_clock::now() - kMaxBacklog * gap_real);
                std::this_thread::sleep_until(next);
            }
            auto access = client.get(target_uri);
            ++rec.sent;
            ++report.request_count;
            if (access.status == 200) ++rec.responded;
            else ++report.denied;
            if (report.trigger_group == 0 && detail::is_trigger(access.reason))
                report.trigger_group = g + 1;
        }
        report.per_group.push_back(rec);
    }
    return report;
}

// Scaling scenario: pad the consumer's TBM to each requested rule count,
// re-authenticate, and measure the mean latency of accessing the released
// service. Each repetition averages a fixed batch of sequential requests.
inline ExperimentReport run_scaling(const ExperimentSpec& spec, const SoaModel& model,
                                    const std::string& host, int port,
                                    int repetitions = 5, int batch = 50) {
    ExperimentReport report;
    report.seed = spec.seed;
    if (spec.tbm_scale.empty()) throw std::invalid_argument("scaling needs rule counts");
    if (spec.service_range.size() != 1)
        throw std::invalid_argument("scaling drives exactly one service");

    const ServiceId& target = spec.service_range[0];
    auto walk = detail::walk_uris(model, target);
    const Uri& target_uri = walk.back();

    GatewayClient admin(host, port);
    for (std::size_t rules : spec.tbm_scale) {
        admin.pad_tbm(spec.consumer, spec.key, spec.target, rules);

        GatewayClient client(host, port);
        client.authenticate(spec.consumer, spec.key, spec.target);
        for (const auto& uri : walk) client.get(uri);

        std::vector<double> rep_means;
        for (int rep = 0; rep < repetitions; ++rep) {
            std::int64_t total_us = 0;
            for (int i = 0; i < batch; ++i) {
                auto access = client.get(target_uri);
                if (access.status != 200)
                    throw ConnectionError("scaling access denied unexpectedly");
                total_us += access.latency_us;
            }
            rep_means.push_back(static_cast<double>(total_us) / batch);
        }
        SizeRecord rec;
        rec.rules = rules;
        rec.repetitions = repetitions;
        // median across repetitions: one stalled batch must not poison the
        // size's figure
        std::sort(rep_means.begin(), rep_means.end());
        rec.mean_latency_us = rep_means[rep_means.size() / 2];
        report.per_size.push_back(rec);
    }
    return report;
}

}  // namespace tbac
