#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "driftscope/errors.hpp"
#include "driftscope/learner/ensemble.hpp"

using namespace driftscope;

namespace {

LinearModel model_of(std::vector<double> w, double b, SegmentIndex created = 0) {
  LinearModel m = LinearModel::zeros(w.size(), created);
  m.weights = std::move(w);
  m.bias = b;
  return m;
}

Batch batch_of(const std::string& source, SegmentIndex t, const std::vector<std::pair<std::vector<double>, int>>& rows) {
  Batch b{source, t, {}, 0.0};
  for (const auto& [x, y] : rows) b.records.push_back({source, t, x, y});
  return b;
}

Batch random_batch(oracle::Rng& rng, const std::string& source, SegmentIndex t, std::size_t n, std::size_t dims,
                   const std::vector<double>& w) {
  Batch b{source, t, {}, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dims);
    double z = -0.5 * std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t k = 0; k < dims; ++k) {
      x[k] = rng.uniform();
      z += w[k] * x[k];
    }
    b.records.push_back({source, t, x, z > 0 ? 1 : 0});
  }
  return b;
}

}  // namespace

TEST_SUITE("learner.model") {
  TEST_CASE("zero model predicts one half") {
    const auto m = LinearModel::zeros(3);
    CHECK(predict(m, std::vector<double>{0.2, 0.9, 0.4}) == 0.5);
    CHECK(predict_label(m, std::vector<double>{0.2, 0.9, 0.4}) == 1);
  }

  TEST_CASE("sigma(ln 3) is three quarters") {
    const auto m = model_of({std::log(3.0)}, 0.0);
    CHECK(predict(m, std::vector<double>{1.0}) == doctest::Approx(3.0 / 4.0).epsilon(1e-15));
  }

  TEST_CASE("probability is monotone in the bias and tends to one") {
    double previous = 0.0;
    for (double b = -40.0; b <= 40.0; b += 0.5) {
      const double p = predict(model_of({1.0}, b), std::vector<double>{0.3});
      CHECK(p >= previous);
      previous = p;
    }
    CHECK(previous == doctest::Approx(1.0));
  }

  TEST_CASE("dimension mismatch is reported") {
    CHECK_THROWS_AS(predict(LinearModel::zeros(2), std::vector<double>{1.0}), DimensionMismatch);
    CHECK_THROWS_AS(sgd_update(LinearModel::zeros(2), std::vector<double>{1.0}, 1, 0.1), DimensionMismatch);
  }

  TEST_CASE("one gradient step from zero") {
    const auto m = sgd_update(LinearModel::zeros(1), std::vector<double>{1.0}, 1, 0.1);
    // gradient (0.5 - 1) * 1 = -0.5, step -0.1 * -0.5
    CHECK(m.bias == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(m.weights[0] == doctest::Approx(0.05).epsilon(1e-15));
  }

  TEST_CASE("zero residual leaves the model unchanged") {
    // saturated prediction equals the label exactly in double precision
    const auto m = model_of({0.0}, 800.0);
    CHECK(sgd_update(m, std::vector<double>{1.0}, 1, 0.1) == m);
    CHECK_THROWS_AS(sgd_update(m, std::vector<double>{1.0}, 1, 0.0), InvalidArgument);
  }

  TEST_CASE("property: analytic gradient matches central differences") {
    oracle::Rng rng(17);
    const double eps = 1e-4;
    for (int draw = 0; draw < 200; ++draw) {
      const std::size_t d = static_cast<std::size_t>(rng.integer(1, 8));
      std::vector<double> w(d), x(d);
      for (auto& v : w) v = rng.normal(0, 1.5);
      for (auto& v : x) v = rng.uniform();
      const double b = rng.normal();
      const int y = rng.coin() ? 1 : 0;
      const auto g = log_loss_gradient(model_of(w, b), x, y);
      for (std::size_t k = 0; k <= d; ++k) {
        auto wp = w, wm = w;
        double bp = b, bm = b;
        if (k < d) {
          wp[k] += eps;
          wm[k] -= eps;
        } else {
          bp += eps;
          bm -= eps;
        }
        const double fd = (oracle::log_loss(wp, bp, x, y) - oracle::log_loss(wm, bm, x, y)) / (2 * eps);
        CHECK(std::abs(g[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
      CHECK(log_loss(model_of(w, b), x, y) == doctest::Approx(oracle::log_loss(w, b, x, y)).epsilon(1e-12));
    }
  }
}

TEST_SUITE("learner.ensemble") {
  TEST_CASE("argmax selects the most accurate model; ties go to the newest") {
    std::vector<LinearModel> models{LinearModel::zeros(1, 0), LinearModel::zeros(1, 1)};
    models[0].last_verification_accuracy = 0.9;
    models[1].last_verification_accuracy = 0.6;
    CHECK(best_model_index(models) == 0);
    models[1].last_verification_accuracy = 0.9;
    CHECK(best_model_index(models) == 1);
  }

  TEST_CASE("eviction removes the weakest, oldest on ties") {
    std::vector<LinearModel> models{LinearModel::zeros(1, 5), LinearModel::zeros(1, 3), LinearModel::zeros(1, 7)};
    models[0].last_verification_accuracy = 0.9;
    models[1].last_verification_accuracy = 0.6;
    models[2].last_verification_accuracy = 0.6;
    // enumeration: minimum accuracy 0.6 held by created_at {3, 7}; the oldest is 3
    CHECK(models[weakest_model_index(models)].created_at == 3);
  }

  TEST_CASE("capacity one: after a confirmed drift the output model is the fresh one") {
    auto state = EnsembleState::initial("s", 1);
    EnsembleConfig cfg{1, 0.05};
    const auto batch = batch_of("s", 4, {{{0.1}, 1}, {{0.9}, 0}, {{0.5}, 1}});
    auto res = ensemble_step(state, batch, cfg, [](std::size_t i, bool) { return i == 1; });
    CHECK(res.drift_confirmed);
    REQUIRE(res.state.models.size() == 1);
    CHECK(res.state.models[0].created_at == 4);
    // the fresh model saw only this batch, once
    LinearModel fresh = LinearModel::zeros(1, 4);
    for (const auto& r : batch.records) sgd_step(fresh, r.x, r.y, 0.05);
    CHECK(res.state.models[0].weights == fresh.weights);
    CHECK(res.state.models[0].bias == fresh.bias);
  }

  TEST_CASE("predictions are made before training (prequential order)") {
    auto state = EnsembleState::initial("s", 2);
    state.models[0] = model_of({3.0, -1.0}, 0.2);
    const auto batch = batch_of("s", 0, {{{0.3, 0.8}, 0}, {{0.9, 0.1}, 1}, {{0.2, 0.2}, 0}});
    // oracle: replay the output model step by step
    LinearModel replay = state.models[0];
    std::vector<int> expected;
    for (const auto& r : batch.records) {
      expected.push_back(predict_label(replay, r.x));
      sgd_step(replay, r.x, r.y, 0.05);
    }
    auto res = ensemble_step(state, batch, EnsembleConfig{});
    CHECK(res.predictions == expected);
  }

  TEST_CASE("empty batch carries state forward") {
    auto state = EnsembleState::initial("s", 2);
    state.models[0] = model_of({1.0, 2.0}, 3.0);
    auto res = ensemble_step(state, Batch{"s", 9, {}, 0.0}, EnsembleConfig{});
    CHECK(res.predictions.empty());
    CHECK(res.state.models == state.models);
    CHECK(res.snapshot.params == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(res.snapshot.segment_index == 9);
  }

  TEST_CASE("foreign batches are refused") {
    CHECK_THROWS_AS(ensemble_step(EnsembleState::initial("a", 1), batch_of("b", 0, {{{0.1}, 1}}), EnsembleConfig{}),
                    InvalidArgument);
  }

  TEST_CASE("property: capacity, monotone growth and argmax contract") {
    oracle::Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t dims = static_cast<std::size_t>(rng.integer(1, 6));
      const std::size_t K = static_cast<std::size_t>(rng.integer(1, 6));
      std::vector<double> w(dims);
      for (auto& v : w) v = rng.normal();
      auto state = EnsembleState::initial("s", dims);
      std::size_t previous = 1;
      for (SegmentIndex t = 0; t < 30; ++t) {
        const auto batch = random_batch(rng, "s", t, static_cast<std::size_t>(rng.integer(0, 40)), dims, w);
        const bool drift = rng.coin(0.2);
        auto res = ensemble_step(std::move(state), batch, EnsembleConfig{K, 0.05},
                                 [&](std::size_t i, bool) { return drift && i == 0; });
        state = std::move(res.state);
        CHECK(state.models.size() <= K);
        CHECK(state.models.size() >= std::min(previous, K));
        previous = state.models.size();
        const auto best = state.output_model().last_verification_accuracy.value_or(-1.0);
        for (const auto& m : state.models) CHECK(m.last_verification_accuracy.value_or(-1.0) <= best);
        CHECK(res.snapshot.params.size() == dims + 1);
        CHECK(res.snapshot.params == state.output_model().params());
      }
    }
  }

  TEST_CASE("property: identical input gives bit-identical snapshots") {
    auto run = [] {
      oracle::Rng rng(29);
      std::vector<double> w{1.0, -2.0, 0.5};
      auto state = EnsembleState::initial("s", 3);
      std::vector<std::vector<double>> snaps;
      for (SegmentIndex t = 0; t < 20; ++t) {
        auto res = ensemble_step(std::move(state), random_batch(rng, "s", t, 25, 3, w), EnsembleConfig{},
                                 [t](std::size_t i, bool) { return t % 7 == 3 && i == 2; });
        state = std::move(res.state);
        snaps.push_back(res.snapshot.params);
      }
      return snaps;
    };
    CHECK(run() == run());
  }

  TEST_CASE("a noise-free single concept is learnable") {
    oracle::Rng rng(31);
    std::vector<double> w{0.8, -0.5, 0.3, 0.1, -0.2};
    double norm = 0.0;
    for (double v : w) norm += v * v;
    for (auto& v : w) v /= std::sqrt(norm);
    auto state = EnsembleState::initial("s", 5);
    std::size_t correct = 0, seen = 0;
    for (SegmentIndex t = 0; t < 40; ++t) {
      auto res = ensemble_step(std::move(state), random_batch(rng, "s", t, 50, 5, w), EnsembleConfig{});
      state = std::move(res.state);
      if (t >= 30) {
        correct += res.correct;
        seen += res.predictions.size();
      }
    }
    // records 1500..2000: the windowed accuracy must reach 95%
    CHECK(static_cast<double>(correct) / static_cast<double>(seen) >= 0.95);
  }
}
