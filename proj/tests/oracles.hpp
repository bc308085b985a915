#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tbac/model.hpp"
#include "tbac/policy.hpp"

namespace oracle {

// Exhaustive enumeration of all simple paths between two nodes, as node
// sequences. Deliberately brute force.
inline void all_simple_paths_rec(const std::map<std::string, std::vector<std::string>>& adj,
                                 const std::string& cur, const std::string& to,
                                 std::vector<std::string>& path,
                                 std::set<std::string>& visited,
                                 std::vector<std::vector<std::string>>& out) {
    if (cur == to) {
        out.push_back(path);
        return;
    }
    auto it = adj.find(cur);
    if (it == adj.end()) return;
    for (const auto& next : it->second) {
        if (visited.contains(next)) continue;
        visited.insert(next);
        path.push_back(next);
        all_simple_paths_rec(adj, next, to, path, visited, out);
        path.pop_back();
        visited.erase(next);
    }
}

inline std::vector<std::vector<std::string>> all_simple_paths(
    const std::vector<tbac::Transition>& transitions, const std::string& from,
    const std::string& to) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& t : transitions) adj[t.from].push_back(t.to);
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> path{from};
    std::set<std::string> visited{from};
    all_simple_paths_rec(adj, from, to, path, visited, out);
    return out;
}

// Naive three-field scan over a rule list.
inline bool linear_match(const std::vector<tbac::TrustedBehaviorRule>& rules,
                         const std::string& id, const std::string& src,
                         const std::string& dst) {
    return std::any_of(rules.begin(), rules.end(), [&](const auto& r) {
        return r.id == id && r.src == src && r.dst == dst;
    });
}

// Recount of the windowed request rate straight from the full trace.
inline double afr_recount(const std::vector<std::int64_t>& all_timestamps, std::int64_t now,
                          double window_s) {
    auto window_ms = static_cast<std::int64_t>(window_s * 1000.0);
    std::int64_t kept = 0;
    for (auto t : all_timestamps)
        if (t > now - window_ms && t <= now) ++kept;
    return static_cast<double>(kept) * (60.0 / window_s);
}

}  // namespace oracle
