#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "tbac/risk.hpp"

using namespace tbac;

TEST_CASE("update_uar: matched requests leave the count fixed") {
    auto s = RiskState::fresh(0);
    update_uar(s, true);
    CHECK(s.uar == 0);

    s.uar = 41;
    update_uar(s, false);
    CHECK(s.uar == 42);
}

TEST_CASE("update_uar fold: a thousand mismatches count to a thousand") {
    auto s = RiskState::fresh(0);
    for (int i = 0; i < 1000; ++i) update_uar(s, false);
    CHECK(s.uar == 1000);
}

TEST_CASE("uar equals the mismatch count of a random request sequence") {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution matched(0.6);
    auto s = RiskState::fresh(0);
    std::uint64_t mismatches = 0;
    for (int i = 0; i < 5000; ++i) {
        bool m = matched(rng);
        if (!m) ++mismatches;
        update_uar(s, m);
    }
    CHECK(s.uar == mismatches);
}

TEST_CASE("update_arr accumulates elapsed gaps") {
    auto s = RiskState::fresh(1000);
    update_arr(s, 1000);
    CHECK(s.arr_s == doctest::Approx(0.0));

    s.arr_s = 10.0;
    update_arr(s, 6000);
    CHECK(s.arr_s == doctest::Approx(15.0));
}

TEST_CASE("update_arr telescopes to wall-clock elapsed") {
    auto s = RiskState::fresh(0);
    update_arr(s, 1000);
    update_arr(s, 3000);
    update_arr(s, 6000);
    CHECK(s.arr_s == doctest::Approx(6.0));

    // property: arr == last_timestamp - session_start for any update sequence
    std::mt19937_64 rng(11);
    auto t = RiskState::fresh(500);
    Millis now = 500;
    std::uniform_int_distribution<Millis> gap(0, 10000);
    for (int i = 0; i < 300; ++i) {
        now += gap(rng);
        update_arr(t, now);
        CHECK(t.arr_s ==
              doctest::Approx(static_cast<double>(t.last_timestamp - t.session_start) / 1000.0));
    }
}

TEST_CASE("update_arr rejects a regressing clock") {
    auto s = RiskState::fresh(5000);
    CHECK_THROWS_AS(update_arr(s, 4000), ClockRegression);
    CHECK_THROWS_AS(update_afr(s, 4000, 60.0), ClockRegression);
}

TEST_CASE("update_afr: documented rates") {
    SUBCASE("350 uniform requests over one minute") {
        auto s = RiskState::fresh(0);
        for (int i = 0; i < 350; ++i)
            update_afr(s, static_cast<Millis>(i * (60000.0 / 350.0)), 60.0);
        CHECK(s.afr_per_min == doctest::Approx(350.0));
    }
    SUBCASE("single request in an empty window") {
        auto s = RiskState::fresh(0);
        update_afr(s, 0, 60.0);
        CHECK(s.afr_per_min == doctest::Approx(1.0));
    }
    SUBCASE("388 requests within one window exceeds the 350 threshold") {
        auto s = RiskState::fresh(0);
        for (int i = 0; i < 388; ++i)
            update_afr(s, static_cast<Millis>(i * (59000.0 / 388.0)), 60.0);
        CHECK(s.afr_per_min == doctest::Approx(388.0));
        CHECK(evidence(evaluate(s.afr_per_min, 350.0)) == 1);
    }
}

TEST_CASE("windowed afr equals brute-force recount on random traces") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<Millis> gap(0, 900);
    std::uniform_real_distribution<double> window(1.0, 120.0);
    for (int trial = 0; trial < 1000; ++trial) {
        double w = window(rng);
        auto s = RiskState::fresh(0);
        std::vector<Millis> trace;
        Millis now = 0;
        int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            now += gap(rng);
            trace.push_back(now);
            update_afr(s, now, w);
        }
        CHECK(s.afr_per_min == doctest::Approx(oracle::afr_recount(trace, now, w)));
    }
}

TEST_CASE("two-point afr is the literal difference quotient") {
    auto s = RiskState::fresh(0);
    update_afr(s, 2000, 60.0, AfrMode::TwoPoint);  // 2 s since session start
    CHECK(s.afr_per_min == doctest::Approx(30.0));
    update_afr(s, 2500, 60.0, AfrMode::TwoPoint);  // 0.5 s gap
    CHECK(s.afr_per_min == doctest::Approx(120.0));
}

TEST_CASE("evaluate: direct substitutions and the zero-risk sentinel") {
    CHECK(evaluate(2000.0, 1000.0) == doctest::Approx(0.5));
    CHECK(evaluate(1000.0, 1000.0) == doctest::Approx(0.0));
    CHECK(std::isinf(evaluate(0.0, 1000.0)));
    CHECK(evaluate(0.0, 1000.0) < 0);
    CHECK_THROWS_AS(evaluate(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("evidence fires only on strictly positive evaluations") {
    CHECK(evidence(0.5) == 1);
    CHECK(evidence(0.0) == 0);
    CHECK(evidence(-std::numeric_limits<double>::infinity()) == 0);
}

TEST_CASE("evidence equals strict exceedance over an exhaustive sweep") {
    const double threshold = 1000.0;
    for (int risk = 0; risk <= 10000; ++risk) {
        int bit = evidence(evaluate(static_cast<double>(risk), threshold));
        CHECK(bit == (risk > threshold ? 1 : 0));
    }
}

TEST_CASE("risk updates commute with state serialization") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<Millis> gap(0, 500);
    std::bernoulli_distribution matched(0.5);

    auto a = RiskState::fresh(0);
    Millis now = 0;
    for (int i = 0; i < 200; ++i) {
        now += gap(rng);
        bool m = matched(rng);

        // round-trip a copy through JSON, then apply the same update
        nlohmann::json j = a;
        RiskState b = j.get<RiskState>();

        update_afr(a, now, 60.0);
        update_arr(a, now);
        update_uar(a, m);
        update_afr(b, now, 60.0);
        update_arr(b, now);
        update_uar(b, m);

        CHECK(a.uar == b.uar);
        CHECK(a.arr_s == doctest::Approx(b.arr_s));
        CHECK(a.afr_per_min == doctest::Approx(b.afr_per_min));
        CHECK(a.last_timestamp == b.last_timestamp);
        CHECK(a.request_log == b.request_log);
    }
}

TEST_CASE("thresholds must be strictly positive") {
    Thresholds ok;
    CHECK_NOTHROW(ok.validate());
    Thresholds bad = ok;
    bad.afr_window_s = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.uar_max = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
