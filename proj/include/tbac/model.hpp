#pragma once

// Service graph model: a labeled directed graph of system/sensitive services
// with a single entry service, plus shortest-route derivation used by the
// policy compiler.

#include <algorithm>
#include <deque>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbac {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownService : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ServiceId = std::string;  // non-empty token, e.g. "S0"
using Uri = std::string;        // non-empty path, e.g. "/svc/0"

enum class ServiceKind { System, Sensitive };

struct Transition {
    ServiceId from;
    ServiceId to;

    friend bool operator==(const Transition&, const Transition&) = default;
    friend auto operator<=>(const Transition&, const Transition&) = default;
};

// A route is a chain of transitions starting at the model's initial service.
// Empty when the target is the initial service itself.
struct Route {
    std::vector<Transition> transitions;

    [[nodiscard]] std::vector<ServiceId> node_sequence(const ServiceId& start) const {
        std::vector<ServiceId> seq{start};
        for (const auto& t : transitions) seq.push_back(t.to);
        return seq;
    }
};

class SoaModel {
public:
    SoaModel(std::map<ServiceId, ServiceKind> services,
             std::vector<Transition> transitions,
             ServiceId initial,
             std::map<ServiceId, Uri> labels)
        : services_(std::move(services)),
          transitions_(std::move(transitions)),
          initial_(std::move(initial)),
          labels_(std::move(labels)) {
        validate();
        for (const auto& [sid, uri] : labels_) uri_index_.emplace(uri, sid);
        for (const auto& t : transitions_) adjacency_[t.from].push_back(t.to);
        for (auto& [from, outs] : adjacency_) std::sort(outs.begin(), outs.end());
    }

    [[nodiscard]] const std::map<ServiceId, ServiceKind>& services() const { return services_; }
    [[nodiscard]] const std::vector<Transition>& transitions() const { return transitions_; }
    [[nodiscard]] const ServiceId& initial() const { return initial_; }

    [[nodiscard]] bool has_service(const ServiceId& id) const { return services_.contains(id); }

    [[nodiscard]] ServiceKind kind_of(const ServiceId& id) const {
        auto it = services_.find(id);
        if (it == services_.end()) throw UnknownService("unknown service: " + id);
        return it->second;
    }

    [[nodiscard]] Uri uri_of(const ServiceId& id) const {
        auto it = labels_.find(id);
        if (it == labels_.end()) throw UnknownService("unknown service: " + id);
        return it->second;
    }

    [[nodiscard]] std::optional<ServiceId> service_at(const Uri& uri) const {
        auto it = uri_index_.find(uri);
        if (it == uri_index_.end()) return std::nullopt;
        return it->second;
    }

    // Shortest route (fewest transitions) from the initial service to target.
    // Ties are broken toward the lexicographically least node sequence, so
    // repeated calls are deterministic. nullopt when target is unreachable.
    [[nodiscard]] std::optional<Route> find_route(const ServiceId& target) const {
        if (!has_service(target)) throw UnknownService("unknown service: " + target);
        if (target == initial_) return Route{};

        auto dist_to_target = reverse_distances(target);
        auto it = dist_to_target.find(initial_);
        if (it == dist_to_target.end()) return std::nullopt;

        // Greedy walk: at each node take the least successor that still lies
        // on a shortest path to the target.
        Route route;
        ServiceId cur = initial_;
        std::size_t remaining = it->second;
        while (remaining > 0) {
            const auto& outs = neighbours(cur);
            const ServiceId* next = nullptr;
            for (const auto& n : outs) {
                auto d = dist_to_target.find(n);
                if (d != dist_to_target.end() && d->second == remaining - 1) {
                    next = &n;
                    break;  // outs is sorted, first hit is least
                }
            }
            route.transitions.push_back({cur, *next});
            cur = *next;
            --remaining;
        }
        return route;
    }

    // All shortest routes from the initial service to target, used by the
    // routes=all-shortest compilation mode. Empty when unreachable.
    [[nodiscard]] std::vector<Route> find_all_shortest_routes(const ServiceId& target) const {
        if (!has_service(target)) throw UnknownService("unknown service: " + target);
        if (target == initial_) return {Route{}};

        auto dist_to_target = reverse_distances(target);
        if (!dist_to_target.contains(initial_)) return {};

        std::vector<Route> out;
        Route partial;
        expand_shortest(initial_, dist_to_target.at(initial_), dist_to_target, partial, out);
        return out;
    }

private:
    void validate() const {
        if (services_.empty()) throw ValidationError("model declares no services");
        for (const auto& [sid, kind] : services_) {
            (void)kind;
            if (sid.empty()) throw ValidationError("empty service id");
            if (!labels_.contains(sid)) throw ValidationError("service without URI label: " + sid);
        }
        if (!services_.contains(initial_))
            throw ValidationError("initial service not declared: " + initial_);
        std::set<Uri> seen_uris;
        for (const auto& [sid, uri] : labels_) {
            if (!services_.contains(sid))
                throw ValidationError("label for undeclared service: " + sid);
            if (uri.empty()) throw ValidationError("empty URI for service: " + sid);
            if (!seen_uris.insert(uri).second)
                throw ValidationError("duplicate URI across services: " + uri);
        }
        std::set<Transition> seen_t;
        for (const auto& t : transitions_) {
            if (!services_.contains(t.from))
                throw ValidationError("transition from undeclared service: " + t.from);
            if (!services_.contains(t.to))
                throw ValidationError("transition to undeclared service: " + t.to);
            if (!seen_t.insert(t).second)
                throw ValidationError("duplicate transition " + t.from + " -> " + t.to);
        }
    }

    [[nodiscard]] const std::vector<ServiceId>& neighbours(const ServiceId& id) const {
        static const std::vector<ServiceId> none;
        auto it = adjacency_.find(id);
        return it == adjacency_.end() ? none : it->second;
    }

    // BFS over reversed edges: distance from each node to target.
    [[nodiscard]] std::map<ServiceId, std::size_t> reverse_distances(const ServiceId& target) const {
        std::map<ServiceId, std::vector<ServiceId>> preds;
        for (const auto& t : transitions_) preds[t.to].push_back(t.from);

        std::map<ServiceId, std::size_t> dist{{target, 0}};
        std::deque<ServiceId> queue{target};
        while (!queue.empty()) {
            ServiceId cur = queue.front();
            queue.pop_front();
            auto it = preds.find(cur);
            if (it == preds.end()) continue;
            for (const auto& p : it->second) {
                if (dist.emplace(p, dist[cur] + 1).second) queue.push_back(p);
            }
        }
        return dist;
    }

    void expand_shortest(const ServiceId& cur, std::size_t remaining,
                         const std::map<ServiceId, std::size_t>& dist,
                         Route& partial, std::vector<Route>& out) const {
        if (remaining == 0) {
            out.push_back(partial);
            return;
        }
        for (const auto& n : neighbours(cur)) {
            auto d = dist.find(n);
            if (d == dist.end() || d->second != remaining - 1) continue;
            partial.transitions.push_back({cur, n});
            expand_shortest(n, remaining - 1, dist, partial, out);
            partial.transitions.pop_back();
        }
    }

    std::map<ServiceId, ServiceKind> services_;
    std::vector<Transition> transitions_;
    ServiceId initial_;
    std::map<ServiceId, Uri> labels_;
    std::map<Uri, ServiceId> uri_index_;
    std::map<ServiceId, std::vector<ServiceId>> adjacency_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::string strip_comment(const std::string& line) {
    auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace detail

// Model file format, one directive per line, '#' starts a comment:
//   service <id> <system|sensitive> <uri>
//   transition <id> <from> <to>
//   initial <id>
inline SoaModel load_model(std::istream& in) {
    std::map<ServiceId, ServiceKind> services;
    std::vector<Transition> transitions;
    std::map<ServiceId, Uri> labels;
    std::optional<ServiceId> initial;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = detail::split_ws(detail::strip_comment(line));
        if (toks.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw ParseError("model line " + std::to_string(lineno) + ": " + msg);
        };
        if (toks[0] == "service") {
            if (toks.size() != 4) fail("expected: service <id> <system|sensitive> <uri>");
            ServiceKind kind;
            if (toks[2] == "system") kind = ServiceKind::System;
            else if (toks[2] == "sensitive") kind = ServiceKind::Sensitive;
            else fail("unknown service kind: " + toks[2]);
            if (services.contains(toks[1])) fail("duplicate service id: " + toks[1]);
            services.emplace(toks[1], kind);
            labels.emplace(toks[1], toks[3]);
        } else if (toks[0] == "transition") {
            // transition ids are kept in the file purely for traceability
            if (toks.size() != 4) fail("expected: transition <id> <from> <to>");
            transitions.push_back({toks[2], toks[3]});
        } else if (toks[0] == "initial") {
            if (toks.size() != 2) fail("expected: initial <id>");
            if (initial) fail("initial declared twice");
            initial = toks[1];
        } else {
            fail("unknown directive: " + toks[0]);
        }
    }
    if (!initial) throw ValidationError("model declares no initial service");
    return SoaModel(std::move(services), std::move(transitions), *initial, std::move(labels));
}

inline SoaModel load_model(const std::string& text) {
    std::istringstream in(text);
    return load_model(in);
}

}  // namespace tbac
