#pragma once

// Service-releasing policy (SRM) and its compilation into per-consumer
// trusted behavior models (TBM). A releasing rule grants a consumer a set of
// sensitive services; compilation derives the route to each released service
// and turns every route transition into an invocation rule plus the two
// self-refresh rules for its endpoints.

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tbac/digest.hpp"
#include "tbac/model.hpp"

namespace tbac {

using ConsumerId = std::string;
using Target = std::string;

struct UnreachableService : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ForeignConsumerRule : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReleasingRule {
    ConsumerId consumer;
    std::string key_digest_hex;  // sha256(consumer:target:key)
    Target target;
    std::vector<ServiceId> released;  // sensitive services, no duplicates
};

class Srm {
public:
    Srm() = default;

    explicit Srm(std::vector<ReleasingRule> rules) : rules_(std::move(rules)) {
        std::set<std::pair<ConsumerId, Target>> seen;
        for (const auto& r : rules_) {
            if (r.consumer.empty()) throw ValidationError("releasing rule with empty consumer");
            if (r.target.empty()) throw ValidationError("releasing rule with empty target");
            if (r.released.empty())
                throw ValidationError("rule for " + r.consumer + " releases no services");
            if (!seen.insert({r.consumer, r.target}).second)
                throw ValidationError("duplicate rule for (" + r.consumer + ", " + r.target + ")");
            std::set<ServiceId> uniq(r.released.begin(), r.released.end());
            if (uniq.size() != r.released.size())
                throw ValidationError("duplicate released service in rule for " + r.consumer);
        }
    }

    [[nodiscard]] const std::vector<ReleasingRule>& rules() const { return rules_; }

    // Checks all released services against the bound model (only
    // sensitive services may be released).
    void bind_check(const SoaModel& model) const {
        for (const auto& r : rules_) {
            for (const auto& sid : r.released) {
                if (!model.has_service(sid))
                    throw ValidationError("rule for " + r.consumer +
                                          " releases undeclared service " + sid);
                if (model.kind_of(sid) != ServiceKind::Sensitive)
                    throw ValidationError("rule for " + r.consumer +
                                          " releases non-sensitive service " + sid);
            }
        }
    }

private:
    std::vector<ReleasingRule> rules_;
};

// Authentication is a value, not a fault: no matching rule means Rejected.
inline std::optional<ReleasingRule> authenticate(const Srm& srm, const ConsumerId& consumer,
                                                 const std::string& key, const Target& target) {
    for (const auto& r : srm.rules()) {
        if (r.consumer != consumer || r.target != target) continue;
        if (constant_time_equal(r.key_digest_hex, key_digest(consumer, target, key))) return r;
        return std::nullopt;  // (consumer, target) is unique in the SRM
    }
    return std::nullopt;
}

struct TrustedBehaviorRule {
    ConsumerId id;
    Uri src;
    Uri dst;

    friend bool operator==(const TrustedBehaviorRule&, const TrustedBehaviorRule&) = default;
    friend auto operator<=>(const TrustedBehaviorRule&, const TrustedBehaviorRule&) = default;
};

class Tbm {
public:
    explicit Tbm(ConsumerId consumer) : consumer_(std::move(consumer)) {}

    Tbm(ConsumerId consumer, const std::vector<TrustedBehaviorRule>& rules)
        : consumer_(std::move(consumer)) {
        for (const auto& r : rules) insert(r);
    }

    [[nodiscard]] const ConsumerId& consumer() const { return consumer_; }
    [[nodiscard]] std::size_t size() const { return pairs_.size(); }

    // Canonical lexicographic (src, dst) order.
    [[nodiscard]] std::vector<TrustedBehaviorRule> rules() const {
        std::vector<TrustedBehaviorRule> out;
        out.reserve(pairs_.size());
        for (const auto& p : pairs_) out.push_back({consumer_, p.first, p.second});
        return out;
    }

    void insert(const TrustedBehaviorRule& rule) {
        if (rule.id != consumer_)
            throw ForeignConsumerRule("rule for " + rule.id + " inserted into TBM of " + consumer_);
        if (pairs_.emplace(rule.src, rule.dst).second) index_.insert(rule.src + "\n" + rule.dst);
    }

    // Exact three-field match: O(1) via the hash index; the test
    // suite cross-checks against a linear scan.
    [[nodiscard]] bool matches(const ConsumerId& id, const Uri& src, const Uri& dst) const {
        return id == consumer_ && index_.contains(src + "\n" + dst);
    }

private:
    ConsumerId consumer_;
    std::set<std::pair<Uri, Uri>> pairs_;
    std::unordered_set<std::string> index_;
};

inline bool tbm_match(const Tbm& tbm, const ConsumerId& id, const Uri& src, const Uri& dst) {
    return tbm.matches(id, src, dst);
}

// One graph transition (Sp, Sq) yields the invocation rule plus both
// self-refresh rules; for a self-loop the three collapse to one.
inline std::vector<TrustedBehaviorRule> convert_transition(const ConsumerId& consumer,
                                                           const Transition& t,
                                                           const SoaModel& model) {
    const auto& ts = model.transitions();
    if (std::find(ts.begin(), ts.end(), t) == ts.end())
        throw UnknownService("transition not in model: " + t.from + " -> " + t.to);
    Uri src = model.uri_of(t.from);
    Uri dst = model.uri_of(t.to);
    std::vector<TrustedBehaviorRule> out{{consumer, src, dst}};
    if (src != dst) {
        out.push_back({consumer, src, src});
        out.push_back({consumer, dst, dst});
    }
    return out;
}

enum class RouteMode {
    Shortest,     // one deterministic shortest route per released service
    AllShortest,  // union of rules over every shortest route
};

inline Tbm compile_tbm(const ReleasingRule& rule, const SoaModel& model,
                       RouteMode mode = RouteMode::Shortest) {
    Tbm tbm(rule.consumer);
    for (const auto& target : rule.released) {
        std::vector<Route> routes;
        if (mode == RouteMode::Shortest) {
            auto r = model.find_route(target);
            if (r) routes.push_back(*r);
        } else {
            routes = model.find_all_shortest_routes(target);
        }
        if (routes.empty())
            throw UnreachableService("released service " + target +
                                     " has no route from the initial service");
        for (const auto& route : routes) {
            if (route.transitions.empty()) {
                // target is the initial service: only its self-refresh rule
                Uri u = model.uri_of(model.initial());
                tbm.insert({rule.consumer, u, u});
                continue;
            }
            for (const auto& t : route.transitions)
                for (const auto& rb : convert_transition(rule.consumer, t, model)) tbm.insert(rb);
        }
    }
    return tbm;
}

inline Tbm append_rules(const Tbm& tbm, const std::vector<TrustedBehaviorRule>& extra) {
    Tbm out(tbm.consumer(), tbm.rules());
    for (const auto& r : extra) out.insert(r);
    return out;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

// SRM file: `rule <consumer> <key-hash:hex> <target> -> <sid>[,<sid>...]`
inline Srm parse_srm(std::istream& in) {
    std::vector<ReleasingRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = detail::split_ws(detail::strip_comment(line));
        if (toks.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw ParseError("srm line " + std::to_string(lineno) + ": " + msg);
        };
        if (toks[0] != "rule") fail("unknown directive: " + toks[0]);
        if (toks.size() != 6 || toks[4] != "->")
            fail("expected: rule <consumer> <key-hash> <target> -> <services>");
        ReleasingRule r;
        r.consumer = toks[1];
        r.key_digest_hex = toks[2];
        r.target = toks[3];
        std::istringstream svc(toks[5]);
        std::string sid;
        while (std::getline(svc, sid, ',')) {
            if (sid.empty()) fail("empty service id in release list");
            r.released.push_back(sid);
        }
        if (r.released.empty()) fail("empty release list");
        rules.push_back(std::move(r));
    }
    return Srm(std::move(rules));
}

inline Srm parse_srm(const std::string& text) {
    std::istringstream in(text);
    return parse_srm(in);
}

inline Srm parse_srm(std::istream& in, const SoaModel& model) {
    Srm srm = parse_srm(in);
    srm.bind_check(model);
    return srm;
}

inline void write_srm(std::ostream& out, const Srm& srm) {
    for (const auto& r : srm.rules()) {
        out << "rule " << r.consumer << ' ' << r.key_digest_hex << ' ' << r.target << " -> ";
        for (std::size_t i = 0; i < r.released.size(); ++i) {
            if (i) out << ',';
            out << r.released[i];
        }
        out << '\n';
    }
}

// TBM file: `tbm <consumer>` header, then `rb <src> <dst>` lines in
// canonical (src, dst) order.
inline void write_tbm(std::ostream& out, const Tbm& tbm) {
    out << "tbm " << tbm.consumer() << '\n';
    for (const auto& r : tbm.rules()) out << "rb " << r.src << ' ' << r.dst << '\n';
}

inline Tbm parse_tbm(std::istream& in) {
    std::optional<Tbm> tbm;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = detail::split_ws(detail::strip_comment(line));
        if (toks.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw ParseError("tbm line " + std::to_string(lineno) + ": " + msg);
        };
        if (toks[0] == "tbm") {
            if (toks.size() != 2) fail("expected: tbm <consumer>");
            if (tbm) fail("second tbm header");
            tbm.emplace(toks[1]);
        } else if (toks[0] == "rb") {
            if (toks.size() != 3) fail("expected: rb <src-uri> <dst-uri>");
            if (!tbm) fail("rb before tbm header");
            tbm->insert({tbm->consumer(), toks[1], toks[2]});
        } else {
            fail("unknown directive: " + toks[0]);
        }
    }
    if (!tbm) throw ParseError("tbm file has no header");
    return *tbm;
}

inline Tbm parse_tbm(const std::string& text) {
    std::istringstream in(text);
    return parse_tbm(in);
}

// Inflates a TBM to `total` rules with filler rules over synthetic URIs that
// never occur in traffic. Used by the scaling experiment to grow the lookup
// structures without changing any decision.
inline Tbm pad_tbm(const Tbm& tbm, std::size_t total) {
    Tbm out(tbm.consumer(), tbm.rules());
    std::size_t i = 0;
    while (out.size() < total) {
        Uri u = "/__pad/" + std::to_string(i++);
        out.insert({out.consumer(), u, u});
    }
    return out;
}

}  // namespace tbac
