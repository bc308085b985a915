#pragma once

// Behavior-aware access control monitor: per-request decisions, session
// lifecycle, early termination and the persistent blacklist.
//
// Decision procedure per request:
//   1. a terminated session only ever yields DenyRequest(SessionTerminated)
//   2. match the request against the session's TBM, then update AFR, ARR and
//      UAR (risks update on every request, matched or not)
//   3. turn risks into evidence bits against the configured thresholds
//   4. both UAR and AFR evidence  -> blacklist the consumer, terminate
//   5. a single evidence          -> terminate the session
//   6. no evidence but mismatched -> deny the request, session stays active
//   7. otherwise allow

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tbac/model.hpp"
#include "tbac/policy.hpp"
#include "tbac/risk.hpp"

namespace tbac {

struct ForeignSessionElements : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StoreUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BehaviorElements {
    ConsumerId id;
    Uri src;
    Uri dst;
    Millis timestamp = 0;
    std::uint64_t access_count = 0;  // filled in by the monitor
};

enum class Verdict { Allow, DenyRequest, TerminateSession, Blacklisted };

enum class Reason {
    Ok,
    TbmMismatch,
    UarExceeded,
    AfrExceeded,
    ArrExceeded,
    BothExceeded,
    SessionTerminated,
    NotAuthenticated,
    OnBlacklist,
};

struct Decision {
    Verdict verdict = Verdict::DenyRequest;
    Reason reason = Reason::SessionTerminated;
};

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Allow: return "allow";
        case Verdict::DenyRequest: return "deny";
        case Verdict::TerminateSession: return "terminated";
        case Verdict::Blacklisted: return "blacklisted";
    }
    return "?";
}

inline const char* to_string(Reason r) {
    switch (r) {
        case Reason::Ok: return "ok";
        case Reason::TbmMismatch: return "tbm-mismatch";
        case Reason::UarExceeded: return "uar-exceeded";
        case Reason::AfrExceeded: return "afr-exceeded";
        case Reason::ArrExceeded: return "arr-exceeded";
        case Reason::BothExceeded: return "uar-afr-exceeded";
        case Reason::SessionTerminated: return "session-terminated";
        case Reason::NotAuthenticated: return "not-authenticated";
        case Reason::OnBlacklist: return "on-blacklist";
    }
    return "?";
}

struct MonitorConfig {
    Thresholds thresholds;
    bool uar_enabled = true;
    bool afr_enabled = true;
    bool arr_enforce = false;  // ARR is reported but off the decision path
    AfrMode afr_mode = AfrMode::Windowed;
    RouteMode route_mode = RouteMode::Shortest;
    double idle_timeout_s = 1800.0;
};

struct BlacklistEntry {
    ConsumerId consumer;
    std::int64_t banned_at_unix_ms = 0;
    std::string reason;
};

// Append-only blacklist file, one `ban <consumer> <unix-ms> <reason>` line
// per entry; removal rewrites the file. Loaded at construction.
class Blacklist {
public:
    explicit Blacklist(std::filesystem::path path) : path_(std::move(path)) { load(); }

    [[nodiscard]] bool contains(const ConsumerId& consumer) const {
        std::shared_lock lock(mutex_);
        return entries_.contains(consumer);
    }

    void add(const ConsumerId& consumer, std::int64_t unix_ms, const std::string& reason) {
        std::unique_lock lock(mutex_);
        if (!entries_.emplace(consumer, BlacklistEntry{consumer, unix_ms, reason}).second) return;
        std::ofstream out(path_, std::ios::app);
        if (!out) throw StoreUnavailable("cannot append to blacklist: " + path_.string());
        out << "ban " << consumer << ' ' << unix_ms << ' ' << reason << '\n';
    }

    // Administrative removal; false when the consumer is not banned.
    bool remove(const ConsumerId& consumer) {
        std::unique_lock lock(mutex_);
        if (entries_.erase(consumer) == 0) return false;
        rewrite();
        return true;
    }

    [[nodiscard]] std::vector<BlacklistEntry> list() const {
        std::shared_lock lock(mutex_);
        std::vector<BlacklistEntry> out;
        for (const auto& [c, e] : entries_) out.push_back(e);
        return out;
    }

private:
    void load() {
        std::ifstream in(path_);
        if (!in) return;  // absent file means empty blacklist
        std::string line;
        while (std::getline(in, line)) {
            auto toks = detail::split_ws(detail::strip_comment(line));
            if (toks.empty()) continue;
            if (toks[0] != "ban" || toks.size() < 3)
                throw ParseError("malformed blacklist line: " + line);
            BlacklistEntry e;
            e.consumer = toks[1];
            e.banned_at_unix_ms = std::stoll(toks[2]);
            if (toks.size() > 3) e.reason = toks[3];
            entries_[e.consumer] = std::move(e);
        }
    }

    void rewrite() {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) throw StoreUnavailable("cannot rewrite blacklist: " + path_.string());
        for (const auto& [c, e] : entries_)
            out << "ban " << e.consumer << ' ' << e.banned_at_unix_ms << ' ' << e.reason << '\n';
    }

    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::map<ConsumerId, BlacklistEntry> entries_;
};

enum class SessionStatus { Active, Terminated };

struct Session {
    ConsumerId consumer;
    Target target;
    std::shared_ptr<const Tbm> tbm;
    RiskState risk;
    SessionStatus status = SessionStatus::Active;
    std::string session_id;
    std::uint64_t ordinal = 0;
    Millis started_at = 0;
    Uri last_uri;  // server-side source tracking for the gateway
    std::uint64_t requests = 0;
    std::uint64_t allowed = 0;
    std::uint64_t denied = 0;
    int pf_uar = 0;
    int pf_afr = 0;
    int pf_arr = 0;
    std::mutex mutex;  // decide calls are serialized per session
};

struct SessionSummary {
    std::uint64_t requests = 0;
    std::uint64_t allowed = 0;
    std::uint64_t denied = 0;
    RiskState final_risk;
};

struct OpenResult {
    std::string token;  // empty on refusal
    Reason reason = Reason::Ok;

    [[nodiscard]] bool ok() const { return !token.empty(); }
};

class Monitor {
public:
    Monitor(std::shared_ptr<const SoaModel> model, Srm srm, MonitorConfig config,
            std::filesystem::path blacklist_path)
        : config_(std::move(config)),
          blacklist_(std::move(blacklist_path)),
          rng_(std::random_device{}()) {
        config_.thresholds.validate();
        set_policy(std::move(model), std::move(srm));
    }

    [[nodiscard]] const MonitorConfig& config() const { return config_; }
    [[nodiscard]] Blacklist& blacklist() { return blacklist_; }

    [[nodiscard]] bool blacklist_contains(const ConsumerId& consumer) const {
        return blacklist_.contains(consumer);
    }

    // Atomically swaps the policy snapshot; in-flight sessions keep the TBM
    // they were opened with.
    void set_policy(std::shared_ptr<const SoaModel> model, Srm srm) {
        auto snap = std::make_shared<PolicySnapshot>();
        snap->model = std::move(model);
        snap->srm = std::move(srm);
        std::unique_lock lock(policy_mutex_);
        policy_ = std::move(snap);
    }

    [[nodiscard]] std::shared_ptr<const SoaModel> model() const {
        std::shared_lock lock(policy_mutex_);
        return policy_->model;
    }

    // Overrides the compiled TBM for (consumer, target); applies to sessions
    // opened afterwards. Used by the scaling experiment.
    void override_tbm(const Target& target, Tbm tbm) {
        std::string key = tbm.consumer() + "\x1f" + target;
        std::unique_lock lock(policy_mutex_);
        overrides_[key] = std::make_shared<const Tbm>(std::move(tbm));
    }

    void clear_tbm_overrides() {
        std::unique_lock lock(policy_mutex_);
        overrides_.clear();
    }

    OpenResult open_session(const ConsumerId& consumer, const std::string& key,
                            const Target& target, Millis now, std::int64_t unix_ms = 0) {
        if (blacklist_.contains(consumer)) return {"", Reason::OnBlacklist};

        std::shared_ptr<const PolicySnapshot> policy;
        std::shared_ptr<const Tbm> tbm;
        {
            std::shared_lock lock(policy_mutex_);
            policy = policy_;
            auto it = overrides_.find(consumer + "\x1f" + target);
            if (it != overrides_.end()) tbm = it->second;
        }
        auto rule = authenticate(policy->srm, consumer, key, target);
        if (!rule) return {"", Reason::NotAuthenticated};
        if (!tbm)
            tbm = std::make_shared<const Tbm>(
                compile_tbm(*rule, *policy->model, config_.route_mode));

        auto session = std::make_unique<Session>();
        session->consumer = consumer;
        session->target = target;
        session->tbm = std::move(tbm);
        session->risk = RiskState::fresh(now);
        session->started_at = now;
        session->last_uri = policy->model->uri_of(policy->model->initial());
        (void)unix_ms;

        std::unique_lock lock(sessions_mutex_);
        session->ordinal = ++session_counter_;
        session->session_id = make_token();
        std::string token = session->session_id;
        sessions_[token] = std::move(session);
        return {token, Reason::Ok};
    }

    [[nodiscard]] Session* find_session(const std::string& token) {
        std::shared_lock lock(sessions_mutex_);
        auto it = sessions_.find(token);
        return it == sessions_.end() ? nullptr : it->second.get();
    }

    // Core of the access-control algorithm. The caller holds no locks; this
    // serializes on the session's own mutex.
    Decision decide(Session& session, BehaviorElements elements, std::int64_t unix_ms = 0) {
        if (elements.id != session.consumer)
            throw ForeignSessionElements("elements for " + elements.id + " on session of " +
                                         session.consumer);
        std::lock_guard guard(session.mutex);

        if (session.status == SessionStatus::Terminated)
            return log_and_return(session, elements, {Verdict::DenyRequest,
                                                      Reason::SessionTerminated});

        // idle sessions expire rather than accumulate a huge ARR gap
        if (static_cast<double>(elements.timestamp - session.risk.last_timestamp) / 1000.0 >
            config_.idle_timeout_s) {
            session.status = SessionStatus::Terminated;
            return log_and_return(session, elements,
                                  {Verdict::DenyRequest, Reason::SessionTerminated});
        }

        ++session.requests;
        elements.access_count = session.requests;

        const bool matched = session.tbm->matches(elements.id, elements.src, elements.dst);
        const auto& th = config_.thresholds;
        update_afr(session.risk, elements.timestamp, th.afr_window_s, config_.afr_mode);
        update_arr(session.risk, elements.timestamp);
        update_uar(session.risk, matched);

        session.pf_uar = config_.uar_enabled
                             ? evidence(evaluate(static_cast<double>(session.risk.uar),
                                                 static_cast<double>(th.uar_max)))
                             : 0;
        session.pf_afr =
            config_.afr_enabled ? evidence(evaluate(session.risk.afr_per_min, th.afr_max)) : 0;
        session.pf_arr =
            config_.arr_enforce ? evidence(evaluate(session.risk.arr_s, th.arr_max)) : 0;

        Decision decision;
        if (session.pf_uar && session.pf_afr) {
            blacklist_.add(session.consumer, unix_ms, "uar-afr-exceeded");
            session.status = SessionStatus::Terminated;
            ++session.denied;
            decision = {Verdict::Blacklisted, Reason::BothExceeded};
        } else if (session.pf_uar || session.pf_afr || session.pf_arr) {
            session.status = SessionStatus::Terminated;
            ++session.denied;
            Reason why = session.pf_uar   ? Reason::UarExceeded
                         : session.pf_afr ? Reason::AfrExceeded
                                          : Reason::ArrExceeded;
            decision = {Verdict::TerminateSession, why};
        } else if (!matched) {
            ++session.denied;
            decision = {Verdict::DenyRequest, Reason::TbmMismatch};
        } else {
            ++session.allowed;
            decision = {Verdict::Allow, Reason::Ok};
        }
        return log_and_return(session, elements, decision);
    }

    // Idempotent: closing an already terminated session returns the same
    // summary again.
    SessionSummary close_session(Session& session) {
        std::lock_guard guard(session.mutex);
        session.status = SessionStatus::Terminated;
        return {session.requests, session.allowed, session.denied, session.risk};
    }

    // Structured log sink for `risk ...` and `decision ...` lines.
    void set_log_sink(std::function<void(const std::string&)> sink) {
        std::lock_guard lock(sink_mutex_);
        sink_ = std::move(sink);
    }

private:
    struct PolicySnapshot {
        std::shared_ptr<const SoaModel> model;
        Srm srm;
    };

    std::string make_token() {
        static const char* hexd = "0123456789abcdef";
        std::string t(32, '0');
        for (auto& c : t) c = hexd[rng_() & 0xf];
        return t;
    }

    Decision log_and_return(Session& session, const BehaviorElements& elements,
                            Decision decision) {
        std::lock_guard lock(sink_mutex_);
        if (sink_) {
            std::ostringstream line;
            line << "decision consumer=" << session.consumer << " session=" << session.ordinal
                 << " src=" << elements.src << " dst=" << elements.dst
                 << " verdict=" << to_string(decision.verdict)
                 << " reason=" << to_string(decision.reason) << " latency_us=0";
            sink_(line.str());
            std::ostringstream risk;
            risk << "risk consumer=" << session.consumer << " session=" << session.ordinal
                 << " uar=" << session.risk.uar << " arr_s=" << session.risk.arr_s
                 << " afr_per_min=" << session.risk.afr_per_min << " pf_uar=" << session.pf_uar
                 << " pf_afr=" << session.pf_afr;
            sink_(risk.str());
        }
        return decision;
    }

    MonitorConfig config_;
    Blacklist blacklist_;

    mutable std::shared_mutex policy_mutex_;
    std::shared_ptr<const PolicySnapshot> policy_;
    std::unordered_map<std::string, std::shared_ptr<const Tbm>> overrides_;

    mutable std::shared_mutex sessions_mutex_;
    std::unordered_map<std::string, std::unique_ptr<Session>> sessions_;
    std::uint64_t session_counter_ = 0;
    std::mt19937_64 rng_;

    std::mutex sink_mutex_;
    std::function<void(const std::string&)> sink_;
};

}  // namespace tbac
