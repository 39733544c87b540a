#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"
#include "bbnas/schedule/schedules.hpp"

using namespace bbnas;
using namespace bbnas::sched;

TEST_CASE("parabolic mu at the boundaries and midpoint") {
    for (double T : {2.0, 20.0, 50.0, 7.0}) {
        CHECK(parabolic_mu(0, T) == 1.0);
        CHECK(parabolic_mu(T, T) == 0.0);
        CHECK(parabolic_mu(T / 2, T) == 0.75);
    }
}

TEST_CASE("reverse sigmoid values") {
    CHECK(reverse_sigmoid_mu(10, 20, 6) == doctest::Approx(0.5).epsilon(1e-15));
    const double expect = 1.0 - 1.0 / (1.0 + std::exp(6.0));  // 1 - sigma(-6)
    CHECK(std::abs(reverse_sigmoid_mu(0, 20, 6) - expect) < 1e-15);
    CHECK(reverse_sigmoid_mu(0, 20, 6) == doctest::Approx(0.997527).epsilon(1e-6));
}

TEST_CASE("reverse sigmoid central symmetry for random T and k") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double T = 1.0 + 99.0 * rng.uniform();
        const double k = 0.1 + 20.0 * rng.uniform();
        const double t = T * rng.uniform();
        CHECK(std::abs(reverse_sigmoid_mu(t, T, k) + reverse_sigmoid_mu(T - t, T, k) - 1.0) <
              1e-12);
    }
}

TEST_CASE("hls scale against direct evaluation") {
    const HlsConfig cfg{0.02, 5.0};
    CHECK(hls_scale(cfg, 0.0) == 0.0);
    CHECK(std::abs(hls_scale(cfg, 1.0) - 0.02 * (1.0 - std::exp(-5.0))) < 1e-12);
    CHECK(hls_scale(cfg, 1.0) == doctest::Approx(0.0198653).epsilon(1e-6));
    CHECK(hls_scale(cfg, 0.05) / cfg.xi0 == doctest::Approx(0.2212).epsilon(1e-3));
}

TEST_CASE("hls scale falls faster than mu near zero") {
    const HlsConfig cfg{1.0, 5.0};
    for (double mu = 0.001; mu < 0.2; mu += 0.001) CHECK(hls_scale(cfg, mu) / mu > 1.0 - 1e-12);
    // and the gap to the plateau closes quickly above mu = 0.6
    CHECK(hls_scale(cfg, 0.6) > 0.95);
}

TEST_CASE("cosine anneal") {
    CHECK(cosine_anneal(0.1, 0, 20) == 0.1);
    CHECK(std::abs(cosine_anneal(0.1, 20, 20)) < 1e-18);
    CHECK(cosine_anneal(0.1, 10, 20) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("monotone over a 1000 point sweep") {
    const double T = 37.0;
    const HlsConfig cfg{0.02, 5.0};
    double prev_p = 2, prev_rs = 2, prev_c = 2, prev_h = 2;
    for (int i = 0; i <= 1000; ++i) {
        const double t = T * i / 1000.0;
        const double p = parabolic_mu(t, T), rs = reverse_sigmoid_mu(t, T, 6);
        const double c = cosine_anneal(1.0, t, T), h = hls_scale(cfg, p);
        for (double v : {p, rs, c}) {
            CHECK(v >= -1e-15);
            CHECK(v <= 1.0);
        }
        CHECK(p <= prev_p);
        CHECK(rs <= prev_rs);
        CHECK(c <= prev_c);
        CHECK(h <= prev_h);
        prev_p = p, prev_rs = rs, prev_c = c, prev_h = h;
    }
}

TEST_CASE("mixing schedule dispatch") {
    MixingSchedule s{MixingKind::parabolic, 20, 6, 1};
    CHECK(s(10) == 0.75);
    s.kind = MixingKind::reverse_sigmoid;
    CHECK(s(10) == doctest::Approx(0.5));
    s.kind = MixingKind::constant;
    s.c = 0.3;
    CHECK(s(4) == 0.3);
    CHECK(parse_mixing_kind(mixing_kind_name(MixingKind::reverse_sigmoid)) ==
          MixingKind::reverse_sigmoid);
    CHECK_THROWS_AS(parse_mixing_kind("linear"), Error);
}

TEST_CASE("out-of-range arguments") {
    CHECK_THROWS_AS(parabolic_mu(-1, 10), Error);
    CHECK_THROWS_AS(parabolic_mu(11, 10), Error);
    CHECK_THROWS_AS(parabolic_mu(0, 0), Error);
    CHECK_THROWS_AS(hls_scale({0.02, 5}, 1.5), Error);
}
