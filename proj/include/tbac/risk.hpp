#pragma once

// Per-session behavior risk accumulators and their evaluation.
//
// Three quantitative risks are tracked per consumer session:
//   UAR - count of requests that did not match the trusted behavior model
//   ARR - accumulated session wall-clock seconds
//   AFR - request rate in requests per minute (all requests, matched or not)
// A risk turns into evidence when it strictly exceeds its threshold.

#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace tbac {

struct ClockRegression : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Millis = std::int64_t;  // monotonic per-process time in milliseconds

enum class AfrMode {
    Windowed,  // sliding-window rate, default
    TwoPoint,  // literal difference quotient between consecutive requests
};

struct Thresholds {
    std::uint64_t uar_max = 1000;  // unauthorized access count
    double afr_max = 350.0;        // requests per minute
    double arr_max = 3600.0;       // seconds
    double afr_window_s = 60.0;    // sliding window for the AFR rate

    void validate() const {
        if (uar_max == 0 || afr_max <= 0 || arr_max <= 0 || afr_window_s <= 0)
            throw std::invalid_argument("thresholds must be strictly positive");
    }
};

struct RiskState {
    std::uint64_t uar = 0;
    double arr_s = 0.0;
    double afr_per_min = 0.0;
    Millis session_start = 0;
    Millis last_timestamp = 0;
    std::deque<Millis> request_log;  // timestamps within the AFR window

    static RiskState fresh(Millis now) {
        RiskState s;
        s.session_start = now;
        s.last_timestamp = now;
        return s;
    }
};

// Eqs. for UAR: matched requests leave the count fixed, mismatches add one.
inline void update_uar(RiskState& state, bool matched) {
    if (!matched) ++state.uar;
}

inline void check_clock(const RiskState& state, Millis now) {
    if (now < state.last_timestamp)
        throw ClockRegression("timestamp went backwards within a session");
}

// ARR accumulates the gap since the previous observation, so after any
// update sequence it telescopes to now - session_start.
inline void update_arr(RiskState& state, Millis now) {
    check_clock(state, now);
    state.arr_s += static_cast<double>(now - state.last_timestamp) / 1000.0;
    state.last_timestamp = now;
}

inline void update_afr(RiskState& state, Millis now, double afr_window_s,
                       AfrMode mode = AfrMode::Windowed) {
    check_clock(state, now);
    if (mode == AfrMode::TwoPoint) {
        Millis prev = state.request_log.empty() ? state.session_start : state.request_log.back();
        state.request_log.clear();
        state.request_log.push_back(now);
        double gap_s = static_cast<double>(now - prev) / 1000.0;
        state.afr_per_min = gap_s > 0 ? 60.0 / gap_s
                                      : std::numeric_limits<double>::infinity();
        return;
    }
    const auto window_ms = static_cast<Millis>(afr_window_s * 1000.0);
    state.request_log.push_back(now);
    while (!state.request_log.empty() && state.request_log.front() <= now - window_ms)
        state.request_log.pop_front();
    state.afr_per_min = static_cast<double>(state.request_log.size()) * (60.0 / afr_window_s);
}

// Risk evaluation E = 1 - threshold/risk. Zero accumulated risk can never
// exceed a positive threshold, so it maps to the minimal evaluation.
inline double evaluate(double risk, double threshold) {
    if (threshold <= 0) throw std::invalid_argument("threshold must be positive");
    if (risk <= 0) return -std::numeric_limits<double>::infinity();
    return 1.0 - threshold / risk;
}

// Evidence bit: 1 iff the evaluation is strictly positive, i.e. the risk
// strictly exceeds its threshold.
inline int evidence(double evaluation) { return evaluation > 0 ? 1 : 0; }

inline void to_json(nlohmann::json& j, const RiskState& s) {
    j = nlohmann::json{{"uar", s.uar},
                       {"arr_s", s.arr_s},
                       {"afr_per_min", s.afr_per_min},
                       {"session_start", s.session_start},
                       {"last_timestamp", s.last_timestamp},
                       {"request_log", std::vector<Millis>(s.request_log.begin(),
                                                           s.request_log.end())}};
}

inline void from_json(const nlohmann::json& j, RiskState& s) {
    s.uar = j.at("uar").get<std::uint64_t>();
    s.arr_s = j.at("arr_s").get<double>();
    s.afr_per_min = j.at("afr_per_min").get<double>();
    s.session_start = j.at("session_start").get<Millis>();
    s.last_timestamp = j.at("last_timestamp").get<Millis>();
    auto log = j.at("request_log").get<std::vector<Millis>>();
    s.request_log.assign(log.begin(), log.end());
}

}  // namespace tbac
