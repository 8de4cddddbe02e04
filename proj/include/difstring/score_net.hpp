#pragma once

#include "difstring/analytic_fields.hpp"
#include "difstring/field_oracle.hpp"
#include "difstring/gaussian_mixture.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace difstring {

/// Fully connected network (x, t) -> R^d with SiLU hidden layers.
///
/// The network predicts the noise eps of I_t = alpha x0 + beta x1 (x0 = eps)
/// and the score is s_hat = -eps_hat / alpha. Regressing eps is the
/// alpha^2-weighted form of denoising score matching; the division by alpha
/// is what makes the score estimate degrade as t -> 1.
class MlpScoreModel {
public:
  MlpScoreModel() = default;
  /// Random initialization (Glorot-uniform weights, zero biases) from seed.
  MlpScoreModel(int dim, std::vector<int> hidden, Schedule<double> schedule, std::uint64_t seed);

  int dim() const { return dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const Schedule<double>& schedule() const { return schedule_; }
  bool trained() const { return trained_; }
  void set_trained(bool v) { trained_ = v; }

  /// sum over layers of (fan_in * fan_out + fan_out).
  std::size_t parameter_count() const;
  static std::size_t parameter_count(int dim, const std::vector<int>& hidden);

  /// Raw network output (eps_hat) for inputs stacked as rows (x; t), one column each.
  MatrixXd forward(const MatrixXd& inputs) const;
  /// Score estimate at time t for the columns of x.
  MatrixXd score(double t, const MatrixXd& x) const;

  /// Mean over columns of ||forward(inputs) - targets||^2 and its gradient
  /// with respect to parameters() (same ordering).
  double loss_and_gradient(const MatrixXd& inputs, const MatrixXd& targets, VectorXd& gradient) const;
  double loss(const MatrixXd& inputs, const MatrixXd& targets) const;

  /// Flattened parameters: for each layer, weights (column-major) then bias.
  VectorXd parameters() const;
  void set_parameters(const VectorXd& p);

  nlohmann::json to_json() const;
  static MlpScoreModel from_json(const nlohmann::json& j);

private:
  int dim_ = 0;
  std::vector<int> hidden_;
  Schedule<double> schedule_;
  bool trained_ = false;
  std::vector<MatrixXd> weights_;
  std::vector<VectorXd> biases_;
};

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainConfig {
  int batch_size = 1000;
  int iterations = 20000;
  double learning_rate = 1e-3;
  /// Learning rate at the last iteration (cosine decay from learning_rate).
  double final_learning_rate = 1e-4;
  std::vector<int> hidden = {64, 128, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScoreTraining {
  MlpScoreModel model;
  std::vector<double> losses;
};

/// Adam on the noise-regression loss with (x1, x0, t) drawn fresh each
/// iteration, t ~ U[0, 1). Zero iterations returns the initialization with a
/// warning. A non-finite loss throws TrainingDivergenceError.
ScoreTraining train_score_model(const GaussianMixture& target, const Schedule<double>& schedule,
                                const TrainConfig& cfg);

/// A trained model exposed as a field oracle. The score is evaluated at
/// min(t, 1 - t_guard) because it is singular where alpha = 0; the velocity
/// comes from the inverted velocity-score relation at max(t, t_guard) because
/// that inversion divides by beta.
class ScoreModelOracle final : public FieldOracle {
public:
  explicit ScoreModelOracle(std::shared_ptr<const MlpScoreModel> model, double t_guard = 1e-2);

  OracleKind kind() const override { return OracleKind::learned_net; }
  int dim() const override { return model_->dim(); }
  std::optional<Schedule<double>> schedule() const override { return model_->schedule(); }
  FieldValues evaluate(double t, const MatrixXd& x, unsigned mask) const override;

private:
  std::shared_ptr<const MlpScoreModel> model_;
  double t_guard_;
};

struct ScoreErrorRow {
  double t;
  double mean_error;
  long n_excluded;
};

/// Monte Carlo mean of ||s_t - s_hat_t|| / ||s_t|| over n_samples draws from
/// the exact marginal rho_t of the reference target, per grid time. Samples
/// with ||s_t|| < 1e-12 are excluded and counted.
std::vector<ScoreErrorRow> relative_score_error_curve(const FieldOracle& model, const AnalyticGmmOracle& reference,
                                                      std::span<const double> times, int n_samples,
                                                      std::uint64_t seed);

/// Midpoints of n equal cells of [0, 1].
std::vector<double> midpoint_grid(int n);

} // namespace difstring
