#include "driftscope/learner/ensemble.hpp"

#include <cmath>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

void check_dims(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw DimensionMismatch("model has " + std::to_string(model.weights.size()) + " weights, input has " +
                            std::to_string(x.size()) + " attributes");
  }
}

double linear_score(const LinearModel& model, std::span<const double> x) {
  double z = model.bias;
  for (std::size_t k = 0; k < x.size(); ++k) z += model.weights[k] * x[k];
  return z;
}

double accuracy_of(std::size_t correct, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

LinearModel LinearModel::zeros(std::size_t dims, SegmentIndex created_at) {
  LinearModel m;
  m.weights.assign(dims, 0.0);
  m.created_at = created_at;
  return m;
}

std::vector<double> LinearModel::params() const {
  std::vector<double> p(weights);
  p.push_back(bias);
  return p;
}

double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict(const LinearModel& model, std::span<const double> x) {
  check_dims(model, x);
  return logistic(linear_score(model, x));
}

int predict_label(const LinearModel& model, std::span<const double> x) { return predict(model, x) >= 0.5 ? 1 : 0; }

double log_loss(const LinearModel& model, std::span<const double> x, int y) {
  check_dims(model, x);
  const double z = linear_score(model, x);
  // log(1 + e^z) - y z, computed without overflow
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - static_cast<double>(y) * z;
}

std::vector<double> log_loss_gradient(const LinearModel& model, std::span<const double> x, int y) {
  const double residual = predict(model, x) - static_cast<double>(y);
  std::vector<double> g(x.size() + 1);
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = residual * x[k];
  g.back() = residual;
  return g;
}

void sgd_step(LinearModel& model, std::span<const double> x, int y, double lr) {
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  const double residual = predict(model, x) - static_cast<double>(y);
  if (residual == 0.0) return;
  for (std::size_t k = 0; k < x.size(); ++k) model.weights[k] -= lr * residual * x[k];
  model.bias -= lr * residual;
}

LinearModel sgd_update(LinearModel model, std::span<const double> x, int y, double lr) {
  sgd_step(model, x, y, lr);
  return model;
}

EnsembleState EnsembleState::initial(SourceId source, std::size_t dims, SegmentIndex created_at) {
  EnsembleState s;
  s.source_id = std::move(source);
  s.models.push_back(LinearModel::zeros(dims, created_at));
  return s;
}

std::size_t best_model_index(const std::vector<LinearModel>& models) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < models.size(); ++i) {
    const double a = models[i].last_verification_accuracy.value_or(-1.0);
    const double b = models[best].last_verification_accuracy.value_or(-1.0);
    if (a > b || (a == b && models[i].created_at >= models[best].created_at)) best = i;
  }
  return best;
}

std::size_t weakest_model_index(const std::vector<LinearModel>& models) {
  std::size_t weakest = 0;
  for (std::size_t i = 1; i < models.size(); ++i) {
    const double a = models[i].last_verification_accuracy.value_or(-1.0);
    const double b = models[weakest].last_verification_accuracy.value_or(-1.0);
    if (a < b || (a == b && models[i].created_at < models[weakest].created_at)) weakest = i;
  }
  return weakest;
}

StepResult ensemble_step(EnsembleState state, const Batch& batch, const EnsembleConfig& config,
                         const PredictionObserver& observer) {
  if (config.capacity == 0) throw InvalidArgument("ensemble capacity must be positive");
  if (state.models.empty()) throw InvalidArgument("ensemble has no models");
  if (batch.source_id != state.source_id) {
    throw InvalidArgument("batch of source " + batch.source_id + " fed to ensemble of " + state.source_id);
  }

  StepResult result;
  if (batch.empty()) {
    result.snapshot = {state.source_id, batch.segment_index, state.output_model().params()};
    result.state = std::move(state);
    return result;
  }

  const std::size_t members = state.models.size();
  const std::size_t output = state.output_index;
  std::vector<std::size_t> member_correct(members, 0);
  result.predictions.reserve(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& record = batch.records[i];
    for (std::size_t m = 0; m < members; ++m) {
      const int label = predict_label(state.models[m], record.x);
      if (label == record.y) ++member_correct[m];
      if (m == output) {
        result.predictions.push_back(label);
        const bool correct = label == record.y;
        if (correct) ++result.correct;
        if (observer && observer(i, correct)) result.drift_confirmed = true;
      }
    }
    for (auto& model : state.models) sgd_step(model, record.x, record.y, config.learning_rate);
  }

  for (std::size_t m = 0; m < members; ++m) {
    state.models[m].last_verification_accuracy = accuracy_of(member_correct[m], batch.size());
  }
  state.output_index = best_model_index(state.models);

  if (result.drift_confirmed || state.models.size() < config.capacity) {
    LinearModel fresh = LinearModel::zeros(batch.records.front().x.size(), batch.segment_index);
    std::size_t fresh_correct = 0;
    for (const auto& record : batch.records) {
      if (predict_label(fresh, record.x) == record.y) ++fresh_correct;
      sgd_step(fresh, record.x, record.y, config.learning_rate);
    }
    fresh.last_verification_accuracy = accuracy_of(fresh_correct, batch.size());
    if (state.models.size() >= config.capacity) {
      state.models.erase(state.models.begin() + static_cast<std::ptrdiff_t>(weakest_model_index(state.models)));
    }
    state.models.push_back(std::move(fresh));
    state.output_index = best_model_index(state.models);
    result.model_added = true;
  }

  result.snapshot = {state.source_id, batch.segment_index, state.output_model().params()};
  result.state = std::move(state);
  return result;
}

}  // namespace driftscope
