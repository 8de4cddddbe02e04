#include "difstring/score_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace difstring {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

} // namespace

MlpScoreModel::MlpScoreModel(int dim, std::vector<int> hidden, Schedule<double> schedule, std::uint64_t seed)
    : dim_(dim), hidden_(std::move(hidden)), schedule_(schedule) {
  if (dim < 1) throw ConfigError("model dimension must be positive");
  for (int w : hidden_)
    if (w < 1) throw ConfigError("hidden widths must be positive");
  std::mt19937_64 rng(seed);
  std::vector<int> sizes{dim + 1};
  sizes.insert(sizes.end(), hidden_.begin(), hidden_.end());
  sizes.push_back(dim);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    MatrixXd w(out, in);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(VectorXd::Zero(out));
  }
}

std::size_t MlpScoreModel::parameter_count(int dim, const std::vector<int>& hidden) {
  std::size_t n = 0;
  int in = dim + 1;
  for (int w : hidden) {
    n += static_cast<std::size_t>(in) * w + w;
    in = w;
  }
  return n + static_cast<std::size_t>(in) * dim + dim;
}

std::size_t MlpScoreModel::parameter_count() const { return parameter_count(dim_, hidden_); }

MatrixXd MlpScoreModel::forward(const MatrixXd& inputs) const {
  if (inputs.rows() != dim_ + 1) throw DomainError("network input must have dim + 1 rows");
  MatrixXd h = inputs;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    MatrixXd z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (l == last) return z;
    h = (z.array() * sigmoid(z.array())).matrix();
  }
  return h;
}

MatrixXd MlpScoreModel::score(double t, const MatrixXd& x) const {
  MatrixXd in(dim_ + 1, x.cols());
  in.topRows(dim_) = x;
  in.row(dim_).setConstant(t);
  return forward(in) / -schedule_.alpha(t);
}

double MlpScoreModel::loss_and_gradient(const MatrixXd& inputs, const MatrixXd& targets, VectorXd& gradient) const {
  const std::size_t layers = weights_.size();
  const double n = static_cast<double>(inputs.cols());
  std::vector<MatrixXd> acts{inputs}; // inputs of each layer
  std::vector<Eigen::ArrayXXd> sig(layers);
  std::vector<MatrixXd> pre(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = weights_[l] * acts.back();
    pre[l].colwise() += biases_[l];
    if (l + 1 < layers) {
      sig[l] = sigmoid(pre[l].array());
      acts.push_back((pre[l].array() * sig[l]).matrix());
    }
  }
  const MatrixXd resid = pre.back() - targets;
  const double value = resid.squaredNorm() / n;

  gradient.resize(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += weights_[l].size() + biases_[l].size();
  }
  MatrixXd g = (2.0 / n) * resid;
  for (std::size_t l = layers; l-- > 0;) {
    const MatrixXd gw = g * acts[l].transpose();
    gradient.segment(offsets[l], gw.size()) = Eigen::Map<const VectorXd>(gw.data(), gw.size());
    gradient.segment(offsets[l] + gw.size(), biases_[l].size()) = g.rowwise().sum();
    if (l == 0) break;
    const Eigen::ArrayXXd& s = sig[l - 1];
    const Eigen::ArrayXXd dsilu = s * (1.0 + pre[l - 1].array() * (1.0 - s));
    g = ((weights_[l].transpose() * g).array() * dsilu).matrix();
  }
  return value;
}

double MlpScoreModel::loss(const MatrixXd& inputs, const MatrixXd& targets) const {
  return (forward(inputs) - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

VectorXd MlpScoreModel::parameters() const {
  VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    p.segment(off, weights_[l].size()) = Eigen::Map<const VectorXd>(weights_[l].data(), weights_[l].size());
    off += weights_[l].size();
    p.segment(off, biases_[l].size()) = biases_[l];
    off += biases_[l].size();
  }
  return p;
}

void MlpScoreModel::set_parameters(const VectorXd& p) {
  if (p.size() != static_cast<Eigen::Index>(parameter_count())) throw DomainError("parameter vector size mismatch");
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<VectorXd>(weights_[l].data(), weights_[l].size()) = p.segment(off, weights_[l].size());
    off += weights_[l].size();
    biases_[l] = p.segment(off, biases_[l].size());
    off += biases_[l].size();
  }
}

nlohmann::json MlpScoreModel::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const MatrixXd& w = weights_[l];
    std::vector<double> flat(w.data(), w.data() + w.size());
    std::vector<double> bias(biases_[l].data(), biases_[l].data() + biases_[l].size());
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights_col_major", flat}, {"bias", bias}});
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"kind", "mlp_score_model"},
          {"dim", dim_},
          {"hidden", hidden_},
          {"activation", "silu"},
          {"output", "noise"},
          {"schedule", to_string(schedule_.name())},
          {"trained", trained_},
          {"layers", layers}};
}

MlpScoreModel MlpScoreModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw ConfigError("unsupported checkpoint format version");
    if (j.at("kind").get<std::string>() != "mlp_score_model") throw ConfigError("not a score-model checkpoint");
    MlpScoreModel m;
    m.dim_ = j.at("dim").get<int>();
    m.hidden_ = j.at("hidden").get<std::vector<int>>();
    m.schedule_ = Schedule<double>(parse_schedule_name(j.at("schedule").get<std::string>()));
    m.trained_ = j.at("trained").get<bool>();
    std::vector<int> sizes{m.dim_ + 1};
    sizes.insert(sizes.end(), m.hidden_.begin(), m.hidden_.end());
    sizes.push_back(m.dim_);
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != sizes.size()) throw ConfigError("checkpoint layer count does not match widths");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      const int rows = L.at("rows").get<int>(), cols = L.at("cols").get<int>();
      if (rows != sizes[l + 1] || cols != sizes[l]) throw ConfigError("checkpoint layer shape mismatch");
      const auto flat = L.at("weights_col_major").get<std::vector<double>>();
      const auto bias = L.at("bias").get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(rows) * cols || bias.size() != static_cast<std::size_t>(rows))
        throw ConfigError("checkpoint layer data has the wrong size");
      m.weights_.push_back(Eigen::Map<const MatrixXd>(flat.data(), rows, cols));
      m.biases_.push_back(Eigen::Map<const VectorXd>(bias.data(), rows));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (iterations < 0) throw ConfigError("iterations must be nonnegative");
  if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
  for (int w : hidden)
    if (w < 1) throw ConfigError("hidden widths must be positive");
}

ScoreTraining train_score_model(const GaussianMixture& target, const Schedule<double>& schedule,
                                const TrainConfig& cfg) {
  cfg.validate();
  target.validate();
  const int d = target.dim();
  ScoreTraining out{MlpScoreModel(d, cfg.hidden, schedule, stream_seed(cfg.seed, 0)), {}};
  if (cfg.iterations == 0) {
    warn("score model returned untrained (zero iterations)");
    return out;
  }

  std::mt19937_64 rng(stream_seed(cfg.seed, 1));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  VectorXd params = out.model.parameters();
  VectorXd m = VectorXd::Zero(params.size()), v = VectorXd::Zero(params.size()), grad;
  MatrixXd inputs(d + 1, cfg.batch_size), noise(d, cfg.batch_size);
  out.losses.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 0; it < cfg.iterations; ++it) {
    const MatrixXd x1 = sample(target, cfg.batch_size, rng);
    for (Eigen::Index c = 0; c < noise.cols(); ++c)
      for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, c) = normal(rng);
    for (int c = 0; c < cfg.batch_size; ++c) {
      const double t = unif(rng);
      inputs.col(c).head(d) = schedule.alpha(t) * noise.col(c) + schedule.beta(t) * x1.col(c);
      inputs(d, c) = t;
    }
    const double value = out.model.loss_and_gradient(inputs, noise, grad);
    if (!std::isfinite(value) || !grad.allFinite())
      throw TrainingDivergenceError("non-finite training loss", it);
    out.losses.push_back(value);

    const double progress = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 1.0;
    const double lr = cfg.final_learning_rate + 0.5 * (cfg.learning_rate - cfg.final_learning_rate) *
                                                    (1.0 + std::cos(std::numbers::pi * progress));
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, it + 1), c2 = 1.0 - std::pow(b2, it + 1);
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    out.model.set_parameters(params);
  }
  out.model.set_trained(true);
  return out;
}

ScoreModelOracle::ScoreModelOracle(std::shared_ptr<const MlpScoreModel> model, double t_guard)
    : model_(std::move(model)), t_guard_(t_guard) {
  if (!model_) throw ConfigError("score-model oracle needs a model");
  if (!(t_guard > 0.0 && t_guard < 0.5)) throw ConfigError("t_guard must lie in (0, 0.5)");
}

FieldValues ScoreModelOracle::evaluate(double t, const MatrixXd& x, unsigned mask) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("field time must lie in [0, 1]");
  if (x.rows() != dim()) throw DomainError("point dimension does not match the oracle");
  if (mask & (kDivergence | kLogDensity))
    throw CapabilityError("learned score models provide only velocity and score");
  FieldValues out;
  if (mask & kScore) out.score = model_->score(std::min(t, 1.0 - t_guard_), x);
  if (mask & kVelocity) {
    const double tv = std::clamp(t, t_guard_, 1.0 - t_guard_);
    out.velocity = velocity_from_score(model_->schedule(), tv, x, model_->score(tv, x));
  }
  return out;
}

std::vector<ScoreErrorRow> relative_score_error_curve(const FieldOracle& model, const AnalyticGmmOracle& reference,
                                                      std::span<const double> times, int n_samples,
                                                      std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("n_samples must be positive");
  const Schedule<double> sched = *reference.schedule();
  std::vector<ScoreErrorRow> rows;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    std::mt19937_64 rng(stream_seed(seed, k));
    const MatrixXd x = sample(gmm_marginal_at(sched, reference.target(), t), n_samples, rng);
    const MatrixXd s = reference.score(t, x);
    const MatrixXd sh = model.score(t, x);
    double sum = 0.0;
    long used = 0, excluded = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double norm = s.col(j).norm();
      if (norm < 1e-12) {
        ++excluded;
        continue;
      }
      sum += (s.col(j) - sh.col(j)).norm() / norm;
      ++used;
    }
    rows.push_back({t, used ? sum / used : std::numeric_limits<double>::quiet_NaN(), excluded});
  }
  return rows;
}

std::vector<double> midpoint_grid(int n) {
  std::vector<double> g(static_cast<std::size_t>(std::max(n, 0)));
  for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = (k + 0.5) / n;
  return g;
}

} // namespace difstring
