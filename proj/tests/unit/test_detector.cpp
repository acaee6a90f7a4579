#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "driftscope/drift/detector.hpp"
#include "driftscope/errors.hpp"

using namespace driftscope;

namespace {

double closed_form_level(double p, double n, double p_min) {
  const double s = std::sqrt(p * (1 - p) / n);
  const double s_min = std::sqrt(p_min * (1 - p_min) / n);
  return (p + s - p_min) / s_min;
}

// Fills a window of n bits with exactly `errors` errors.
DetectorState filled(std::size_t n, std::size_t errors, const DetectorConfig& cfg) {
  DetectorState st;
  for (std::size_t i = 0; i < n; ++i) observe(st, cfg, i >= errors);
  return st;
}

}  // namespace

TEST_SUITE("drift.level") {
  TEST_CASE("minima identity gives level one") {
    oracle::Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const double p = rng.uniform(0.01, 0.99);
      const double s = rng.uniform(0.001, 0.1);
      CHECK(drift_level(p, s, p, s) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("confirmed and warning examples") {
    const double n = 500;
    const double s_min = std::sqrt(0.2 * 0.8 / n);
    CHECK(s_min == doctest::Approx(0.0178885).epsilon(1e-5));
    const double s_hi = std::sqrt(0.3 * 0.7 / n);
    CHECK(s_hi == doctest::Approx(0.0204939).epsilon(1e-5));
    const double r_hi = drift_level(0.3, s_hi, 0.2, s_min);
    CHECK(std::abs(r_hi - 6.736) <= 1e-3);
    CHECK(r_hi == doctest::Approx(closed_form_level(0.3, n, 0.2)).epsilon(1e-12));
    const double r_lo = drift_level(0.23, std::sqrt(0.23 * 0.77 / n), 0.2, s_min);
    CHECK(std::abs(r_lo - 2.729) <= 1e-3);
    CHECK(r_lo >= 2.0);
    CHECK(r_lo < 3.0);
  }

  TEST_CASE("zero-variance guard") {
    CHECK(drift_level(0.0, 0.0, 0.0, 0.0) == 0.0);
    CHECK(std::isinf(drift_level(0.01, 0.004, 0.0, 0.0)));
  }

  TEST_CASE("batch averages") {
    CHECK(batch_drift_level(std::vector<double>{1, 2, 3}) == 2.0);
    CHECK(batch_drift_level(std::vector<double>{}) == 0.0);
    CHECK(batch_drift_level(std::vector<double>{2.729, 6.736}) == doctest::Approx(4.7325).epsilon(1e-12));
  }

  TEST_CASE("kinds round-trip through text") {
    CHECK(drift_kind_from_string(to_string(DriftKind::kWarning)) == DriftKind::kWarning);
    CHECK(drift_kind_from_string(to_string(DriftKind::kConfirmed)) == DriftKind::kConfirmed);
    CHECK_THROWS_AS(drift_kind_from_string("maybe"), InvalidArgument);
    CHECK_THROWS_AS((DetectorConfig{10, 3.0, 2.0}.validate()), ConfigError);
  }
}

TEST_SUITE("drift.observe") {
  TEST_CASE("warm-up reports nothing until a fifth of the window is filled") {
    DetectorConfig cfg{500, 2.0, 3.0};
    DetectorState st;
    for (int i = 0; i < 99; ++i) {
      const auto obs = observe(st, cfg, i % 2 == 0);
      CHECK(obs.level == 0.0);
      CHECK(obs.status == DriftStatus::kStable);
    }
    CHECK_FALSE(st.has_minima());
    observe(st, cfg, true);
    CHECK(st.has_minima());
  }

  TEST_CASE("window statistics follow the definition") {
    DetectorConfig cfg{10, 2.0, 3.0};
    DetectorState st;
    const std::vector<bool> bits{true, false, true, true, false, true, true, true, false, true, true, false, true};
    std::deque<bool> oracle_window;
    for (bool correct : bits) {
      observe(st, cfg, correct);
      oracle_window.push_back(!correct);
      if (oracle_window.size() > 10) oracle_window.pop_front();
      const double n = static_cast<double>(oracle_window.size());
      const double p = static_cast<double>(std::count(oracle_window.begin(), oracle_window.end(), true)) / n;
      CHECK(st.p == doctest::Approx(p).epsilon(1e-15));
      CHECK(st.s == doctest::Approx(std::sqrt(p * (1 - p) / n)).epsilon(1e-15));
      CHECK(st.window.size() <= 10);
    }
  }

  TEST_CASE("confirmation resets the minima to the current statistics and keeps the window") {
    DetectorConfig cfg{500, 2.0, 3.0};
    auto st = filled(500, 100, cfg);  // p = 0.2 at the minimum
    std::optional<Observation> confirmed;
    for (int i = 0; i < 500 && !confirmed; ++i) {
      const auto obs = observe(st, cfg, false);
      if (obs.status == DriftStatus::kConfirmed) confirmed = obs;
    }
    REQUIRE(confirmed.has_value());
    CHECK(confirmed->level >= 3.0);
    CHECK(st.p_min == st.p);
    CHECK(st.s_min == st.s);
    CHECK(st.window.size() == 500);
  }

  TEST_CASE("a jump from p_min 0.2 to p 0.3 on a full window confirms") {
    DetectorConfig cfg{500, 2.0, 3.0};
    // 149 errors in 499 bits; one more error makes p = 150/500
    DetectorState check;
    check.p_min = 0.2;
    check.s_min = std::sqrt(0.2 * 0.8 / 500);
    for (int i = 0; i < 499; ++i) check.window.push_back(i < 149);
    check.errors = 149;
    const auto obs = observe(check, cfg, false);
    CHECK(check.p == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(obs.level == doctest::Approx(closed_form_level(0.3, 500, 0.2)).epsilon(1e-9));
    CHECK(obs.status == DriftStatus::kConfirmed);
  }

  TEST_CASE("error-free history then any error confirms via the guard") {
    DetectorConfig cfg{50, 2.0, 3.0};
    auto st = filled(50, 0, cfg);
    CHECK(st.p_min == 0.0);
    const auto obs = observe(st, cfg, false);
    CHECK(std::isinf(obs.level));
    CHECK(obs.status == DriftStatus::kConfirmed);
    CHECK(take_segment_level(st) <= kMaxReportedLevel);
  }

  TEST_CASE("property: minima are non-increasing between confirmations") {
    oracle::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      DetectorConfig cfg{static_cast<std::size_t>(rng.integer(5, 300)), 2.0, 3.0};
      DetectorState st;
      double bound = std::numeric_limits<double>::infinity();
      double seen_min = std::numeric_limits<double>::infinity();
      const double rate = rng.uniform(0.05, 0.6);
      for (int i = 0; i < 3000; ++i) {
        const auto obs = observe(st, cfg, !rng.coin(rate));
        if (obs.status == DriftStatus::kConfirmed) {
          bound = st.p_min + st.s_min;
          seen_min = st.p + st.s;
          continue;
        }
        if (st.window.size() >= cfg.warmup()) {
          seen_min = std::min(seen_min, st.p + st.s);
          CHECK(st.p_min + st.s_min <= bound);
          CHECK(st.p_min + st.s_min <= seen_min);
          bound = st.p_min + st.s_min;
        }
        CHECK(st.p >= 0.0);
        CHECK(st.p <= 1.0);
        // levels nest: a confirmation would also pass the warning threshold
        if (obs.status == DriftStatus::kWarning) CHECK(obs.level >= cfg.warning_level);
      }
    }
  }

  TEST_CASE("property: with all-correct history the level rises with each error in the window") {
    DetectorConfig cfg{200, 1e9, 2e9};  // thresholds out of reach so minima stay fixed
    auto st = filled(200, 0, cfg);
    st.p_min = 0.01;  // fixed, positive minima
    st.s_min = 0.005;
    double previous = -1.0;
    for (int e = 0; e < 100; ++e) {
      const auto obs = observe(st, cfg, false);
      CHECK(obs.level > previous);
      previous = obs.level;
    }
  }

  TEST_CASE("segment level is the mean of capped per-record levels") {
    DetectorConfig cfg{10, 2.0, 3.0};
    DetectorState st;
    std::vector<double> levels;
    oracle::Rng rng(9);
    for (int i = 0; i < 40; ++i) levels.push_back(std::min(observe(st, cfg, rng.coin(0.7)).level, kMaxReportedLevel));
    CHECK(take_segment_level(st) == doctest::Approx(batch_drift_level(levels)).epsilon(1e-12));
    CHECK(take_segment_level(st) == 0.0);
  }
}

// Classic DDM guarantee: a stationary Bernoulli(0.2) error stream should not
// confirm, and the switch to Bernoulli(0.5) should.
TEST_SUITE("drift.ddm_semantics") {
  TEST_CASE("stationary prefix stays quiet and the switch confirms (18 of 20 seeds)") {
    int passing = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      oracle::Rng rng(seed);
      DetectorConfig cfg;
      DetectorState st;
      bool prefix_alarm = false;
      bool detected = false;
      for (int i = 0; i < 10000; ++i) {
        const bool error = rng.coin(i < 5000 ? 0.2 : 0.5);
        const auto obs = observe(st, cfg, !error);
        if (obs.status == DriftStatus::kConfirmed) (i < 5000 ? prefix_alarm : detected) = true;
      }
      if (!prefix_alarm && detected) ++passing;
    }
    MESSAGE("seeds satisfying the DDM property: " << passing << "/20");
    CHECK(passing >= 18);
  }
}
