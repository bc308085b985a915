#pragma once

// Deployment configuration, `key = value` lines with '#' comments.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tbac/monitor.hpp"

namespace tbac {

struct GatewayConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    std::string model_path;
    std::string srm_path;
    std::string blacklist_path = "blacklist.txt";
    std::string decision_log_path;  // empty: no decision log
    MonitorConfig monitor;
    double time_scale = 1.0;     // virtual ms per real ms, for compressed runs
    int mock_latency_us = 0;     // fixed simulated backend delay
    // When set, replaces the scaled wall clock entirely. Not a file key; used
    // by in-process callers that drive virtual time deterministically.
    std::function<Millis()> clock_override;
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("config key " + key + ": expected boolean, got " + v);
}

}  // namespace detail

inline GatewayConfig parse_config(std::istream& in) {
    GatewayConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = detail::trim(detail::strip_comment(line));
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        std::string val = detail::trim(s.substr(eq + 1));

        if (key == "listen") {
            auto colon = val.rfind(':');
            if (colon == std::string::npos)
                throw ParseError("config: listen expects host:port");
            cfg.listen_host = val.substr(0, colon);
            cfg.listen_port = std::stoi(val.substr(colon + 1));
        } else if (key == "model") {
            cfg.model_path = val;
        } else if (key == "srm") {
            cfg.srm_path = val;
        } else if (key == "blacklist") {
            cfg.blacklist_path = val;
        } else if (key == "decision_log") {
            cfg.decision_log_path = val;
        } else if (key == "uar_max") {
            cfg.monitor.thresholds.uar_max = std::stoull(val);
        } else if (key == "afr_max") {
            cfg.monitor.thresholds.afr_max = std::stod(val);
        } else if (key == "arr_max") {
            cfg.monitor.thresholds.arr_max = std::stod(val);
        } else if (key == "afr_window") {
            cfg.monitor.thresholds.afr_window_s = std::stod(val);
        } else if (key == "idle_timeout") {
            cfg.monitor.idle_timeout_s = std::stod(val);
        } else if (key == "uar_enabled") {
            cfg.monitor.uar_enabled = detail::parse_bool(val, key);
        } else if (key == "afr_enabled") {
            cfg.monitor.afr_enabled = detail::parse_bool(val, key);
        } else if (key == "arr_enforce") {
            cfg.monitor.arr_enforce = detail::parse_bool(val, key);
        } else if (key == "afr") {
            if (val == "windowed") cfg.monitor.afr_mode = AfrMode::Windowed;
            else if (val == "two-point") cfg.monitor.afr_mode = AfrMode::TwoPoint;
            else throw ParseError("config: afr expects windowed|two-point");
        } else if (key == "routes") {
            if (val == "shortest") cfg.monitor.route_mode = RouteMode::Shortest;
            else if (val == "all-shortest") cfg.monitor.route_mode = RouteMode::AllShortest;
            else throw ParseError("config: routes expects shortest|all-shortest");
        } else if (key == "time_scale") {
            cfg.time_scale = std::stod(val);
        } else if (key == "mock_latency_us") {
            cfg.mock_latency_us = std::stoi(val);
        } else {
            throw ParseError("config line " + std::to_string(lineno) + ": unknown key " + key);
        }
    }
    return cfg;
}

inline GatewayConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path.string());
    return parse_config(in);
}

}  // namespace tbac
