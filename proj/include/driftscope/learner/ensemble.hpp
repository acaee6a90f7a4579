#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "driftscope/core/types.hpp"

namespace driftscope {

/// Online logistic regression over normalized attributes.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  SegmentIndex created_at = 0;
  std::optional<double> last_verification_accuracy;

  static LinearModel zeros(std::size_t dims, SegmentIndex created_at = 0);
  /// weights followed by bias
  std::vector<double> params() const;

  bool operator==(const LinearModel&) const = default;
};

double logistic(double z) noexcept;

/// P(y = 1 | x). The predicted label is 1 iff this is >= 0.5.
double predict(const LinearModel& model, std::span<const double> x);
int predict_label(const LinearModel& model, std::span<const double> x);

/// Binary cross-entropy of the model on one example.
double log_loss(const LinearModel& model, std::span<const double> x, int y);

/// Analytic log-loss gradient, laid out like `params()`.
std::vector<double> log_loss_gradient(const LinearModel& model, std::span<const double> x, int y);

/// One log-loss gradient step.
LinearModel sgd_update(LinearModel model, std::span<const double> x, int y, double lr);
void sgd_step(LinearModel& model, std::span<const double> x, int y, double lr);

struct EnsembleConfig {
  std::size_t capacity = 5;
  double learning_rate = 0.05;
};

struct EnsembleState {
  SourceId source_id;
  std::vector<LinearModel> models;  // creation order
  std::size_t output_index = 0;

  /// A single zero-initialised model.
  static EnsembleState initial(SourceId source, std::size_t dims, SegmentIndex created_at = 0);
  const LinearModel& output_model() const { return models.at(output_index); }
};

struct ParameterSnapshot {
  SourceId source_id;
  SegmentIndex segment_index = 0;
  std::vector<double> params;

  bool operator==(const ParameterSnapshot&) const = default;
};

/// Called once per record, in order, with the output model's verdict on it.
/// Returns true when the drift index confirmed a drift on that record.
using PredictionObserver = std::function<bool(std::size_t record_index, bool correct)>;

struct StepResult {
  std::vector<int> predictions;
  std::size_t correct = 0;
  bool drift_confirmed = false;
  bool model_added = false;
  EnsembleState state;
  ParameterSnapshot snapshot;

  double accuracy() const noexcept {
    return predictions.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predictions.size());
  }
};

/// Indices of the best model (ties: most recently created) and the weakest
/// (ties: oldest) by last verification accuracy.
std::size_t best_model_index(const std::vector<LinearModel>& models);
std::size_t weakest_model_index(const std::vector<LinearModel>& models);

/// Processes one batch of normalized records prequentially: the output model
/// predicts each record before any member trains on it, then every member
/// takes one SGD step. Afterwards members are re-verified on the batch and,
/// when a drift was confirmed or the ensemble is below capacity, a fresh model
/// trained only on this batch joins (evicting the weakest at capacity).
StepResult ensemble_step(EnsembleState state, const Batch& batch, const EnsembleConfig& config,
                         const PredictionObserver& observer = {});

}  // namespace driftscope
