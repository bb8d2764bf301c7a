#include "shoggoth/learner.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "shoggoth/wire.hpp"

namespace shoggoth::learner {

namespace {

Matrix tanh_layer(const Matrix& input, const Matrix& projection) {
  return (input * projection.transpose()).array().tanh().matrix();
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw ContractError(fmt::format("expected {} labels, got {}", rows, labels.size()));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError(fmt::format("label {} outside [0, {})", y, classes));
    }
  }
}

Matrix stack_activations(std::span<const Activation> acts) {
  Matrix m(static_cast<Eigen::Index>(acts.size()), acts.front().values.size());
  for (std::size_t i = 0; i < acts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = acts[i].values.transpose();
  return m;
}

bool all_finite(const std::vector<Matrix>& ms) {
  return std::all_of(ms.begin(), ms.end(), [](const Matrix& m) { return m.allFinite(); });
}

}  // namespace

FrontExtractor::FrontExtractor(std::size_t input_dim, std::vector<Matrix> projections, double lr_multiplier)
    : input_dim_(input_dim), projections_(std::move(projections)) {
  std::size_t in = input_dim_;
  for (const auto& p : projections_) {
    if (static_cast<std::size_t>(p.cols()) != in) throw ContractError("front stage dimensions do not chain");
    in = static_cast<std::size_t>(p.rows());
  }
  set_lr_multiplier(lr_multiplier);
}

std::size_t FrontExtractor::output_dim() const {
  return projections_.empty() ? input_dim_ : static_cast<std::size_t>(projections_.back().rows());
}

void FrontExtractor::set_lr_multiplier(double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw ContractError("front lr_multiplier must lie in [0, 1]");
  lr_multiplier_ = m;
}

Activation forward_front(const FrontExtractor& front, const Vector& features) {
  if (static_cast<std::size_t>(features.size()) != front.input_dim()) {
    throw ContractError(fmt::format("front expects {} features, got {}", front.input_dim(), features.size()));
  }
  Vector x = features;
  for (const auto& p : front.projections()) x = (p * x).array().tanh().matrix();
  return {std::move(x)};
}

Matrix forward_front_batch(const FrontExtractor& front, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != front.input_dim()) {
    throw ContractError(fmt::format("front expects {} features, got {}", front.input_dim(), features.cols()));
  }
  Matrix x = features;
  for (const auto& p : front.projections()) x = tanh_layer(x, p);
  return x;
}

BrnState BrnState::identity(std::size_t dim) {
  BrnState s;
  s.running_mean = Vector::Zero(static_cast<Eigen::Index>(dim));
  s.running_var = Vector::Ones(static_cast<Eigen::Index>(dim));
  return s;
}

BrnBatch brn_normalize_training(const BrnState& brn, const Matrix& batch) {
  if (batch.rows() == 0) throw ContractError("training-mode BRN needs a non-empty batch");
  if (batch.cols() != brn.running_mean.size()) throw ContractError("BRN dimension mismatch");
  const auto n = static_cast<double>(batch.rows());
  BrnBatch out;
  out.mean = batch.colwise().mean().transpose();
  const Matrix dev = batch.rowwise() - out.mean.transpose();
  out.var = (dev.array().square().colwise().sum() / n).transpose();
  out.sigma = (out.var.array() + brn.epsilon).sqrt().matrix();
  const Vector sigma_run = (brn.running_var.array() + brn.epsilon).sqrt().matrix();
  out.r = (out.sigma.array() / sigma_run.array()).max(1.0 / brn.r_max_clip).min(brn.r_max_clip).matrix();
  out.d = ((out.mean - brn.running_mean).array() / sigma_run.array())
              .max(-brn.d_max_clip)
              .min(brn.d_max_clip)
              .matrix();
  out.centered = dev.array().rowwise() / out.sigma.transpose().array();
  out.normalized = (out.centered.array().rowwise() * out.r.transpose().array()).rowwise() +
                   out.d.transpose().array();
  return out;
}

Matrix brn_normalize_inference(const BrnState& brn, const Matrix& batch) {
  if (batch.cols() != brn.running_mean.size()) throw ContractError("BRN dimension mismatch");
  const Vector sigma_run = (brn.running_var.array() + brn.epsilon).sqrt().matrix();
  return (batch.rowwise() - brn.running_mean.transpose()).array().rowwise() / sigma_run.transpose().array();
}

void update_running_stats(BrnState& brn, const Vector& batch_mean, const Vector& batch_var) {
  brn.running_mean += brn.momentum * (batch_mean - brn.running_mean);
  brn.running_var += brn.momentum * (batch_var - brn.running_var);
  brn.running_var = brn.running_var.cwiseMax(0.0);
}

HeadModel HeadModel::zeros(std::size_t act_dim, std::size_t classes, double learning_rate) {
  HeadModel h;
  h.weights = Matrix::Zero(static_cast<Eigen::Index>(act_dim), static_cast<Eigen::Index>(classes));
  h.bias = Vector::Zero(static_cast<Eigen::Index>(classes));
  h.brn = BrnState::identity(act_dim);
  h.learning_rate = learning_rate;
  return h;
}

Prediction prediction_from_logits(const Vector& logits) {
  Prediction p;
  const double m = logits.maxCoeff();
  p.scores = (logits.array() - m).exp().matrix();
  p.scores /= p.scores.sum();
  Eigen::Index best = 0;
  p.confidence = p.scores.maxCoeff(&best);
  p.predicted_class = static_cast<int>(best);
  return p;
}

Prediction forward_head(const HeadModel& head, const Activation& act, std::span<const Activation> batch_context) {
  if (static_cast<std::size_t>(act.values.size()) != head.input_dim()) {
    throw ContractError("head input dimension mismatch");
  }
  Vector normalized;
  if (head.brn.mode == BrnMode::kTraining) {
    if (batch_context.empty()) throw ContractError("training-mode head needs a non-empty batch context");
    const BrnBatch stats = brn_normalize_training(head.brn, stack_activations(batch_context));
    normalized = ((act.values - stats.mean).array() / stats.sigma.array() * stats.r.array() + stats.d.array())
                     .matrix();
  } else {
    normalized = brn_normalize_inference(head.brn, act.values.transpose()).transpose();
  }
  return prediction_from_logits(head.weights.transpose() * normalized + head.bias);
}

double loss(const Prediction& pred, int label) {
  if (label < 0 || label >= pred.scores.size()) {
    throw ContractError(fmt::format("label {} outside [0, {})", label, pred.scores.size()));
  }
  return -std::log(std::max(pred.scores[label], kProbabilityFloor));
}

HeadGradients head_gradients(const HeadModel& head, const Matrix& inputs, std::span<const int> labels) {
  check_labels(labels, static_cast<std::size_t>(inputs.rows()), head.classes());
  HeadGradients g;
  g.stats = brn_normalize_training(head.brn, inputs);
  const Matrix& z = g.stats.normalized;
  const Matrix logits = (z * head.weights).rowwise() + head.bias.transpose();
  Matrix delta = softmax_rows(logits);
  const auto n = static_cast<double>(inputs.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    total += -std::log(std::max(delta(i, y), kProbabilityFloor));
    delta(i, y) -= 1.0;
  }
  g.mean_loss = total / n;
  delta /= n;
  g.weights = z.transpose() * delta;
  g.bias = delta.colwise().sum().transpose();

  // Backward through the normalization with r and d held constant.
  const Matrix dz = delta * head.weights.transpose();
  const Eigen::RowVectorXd mean_dz = dz.colwise().mean();
  const Eigen::RowVectorXd mean_dz_xc = (dz.array() * g.stats.centered.array()).colwise().mean();
  const Eigen::RowVectorXd scale = (g.stats.r.array() / g.stats.sigma.array()).transpose();
  Matrix dx = dz.rowwise() - mean_dz;
  dx -= (g.stats.centered.array().rowwise() * mean_dz_xc.array()).matrix();
  g.inputs = (dx.array().rowwise() * scale.array()).matrix();
  return g;
}

double head_batch_loss(const HeadModel& head, const Matrix& inputs, std::span<const int> labels) {
  check_labels(labels, static_cast<std::size_t>(inputs.rows()), head.classes());
  const BrnBatch stats = brn_normalize_training(head.brn, inputs);
  const Matrix p = softmax_rows((stats.normalized * head.weights).rowwise() + head.bias.transpose());
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    total += -std::log(std::max(p(i, labels[static_cast<std::size_t>(i)]), kProbabilityFloor));
  }
  return total / static_cast<double>(p.rows());
}

double sgd_step(HeadModel& head, std::span<const LabeledActivation> minibatch) {
  if (minibatch.empty()) throw ContractError("sgd_step needs a non-empty minibatch");
  Matrix inputs(static_cast<Eigen::Index>(minibatch.size()), static_cast<Eigen::Index>(head.input_dim()));
  std::vector<int> labels(minibatch.size());
  for (std::size_t i = 0; i < minibatch.size(); ++i) {
    if (static_cast<std::size_t>(minibatch[i].activation.values.size()) != head.input_dim()) {
      throw ContractError("minibatch activation dimension mismatch");
    }
    inputs.row(static_cast<Eigen::Index>(i)) = minibatch[i].activation.values.transpose();
    labels[i] = minibatch[i].label;
  }
  const HeadGradients g = head_gradients(head, inputs, labels);
  const Matrix w = head.weights - head.learning_rate * g.weights;
  const Vector b = head.bias - head.learning_rate * g.bias;
  if (!g.weights.allFinite() || !g.bias.allFinite() || !w.allFinite() || !b.allFinite()) {
    throw NonFiniteError("non-finite head gradient or parameters");
  }
  head.weights = w;
  head.bias = b;
  update_running_stats(head.brn, g.stats.mean, g.stats.var);
  return g.mean_loss;
}

const char* to_string(ReplayTap tap) {
  switch (tap) {
    case ReplayTap::kInput: return "input";
    case ReplayTap::kMid: return "mid";
    case ReplayTap::kPool: return "pool";
  }
  return "pool";
}

ReplayTap replay_tap_from_string(const std::string& s) {
  if (s == "input") return ReplayTap::kInput;
  if (s == "mid") return ReplayTap::kMid;
  if (s == "pool") return ReplayTap::kPool;
  throw ContractError("unknown replay tap '" + s + "' (expected input, mid or pool)");
}

TwoStageModel TwoStageModel::create(const ModelShape& shape, const ModelInit& init, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_stage = [&](std::size_t out, std::size_t in) {
    Matrix m(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    const double scale = init.init_gain / std::sqrt(static_cast<double>(in));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * gauss(rng);
    return m;
  };
  // Both stages are drawn regardless of the tap so every tap variant starts
  // from identical weights.
  std::vector<Matrix> stages{random_stage(shape.mid_dim, shape.input_dim),
                             random_stage(shape.act_dim, shape.mid_dim)};
  const std::size_t split = shape.tap == ReplayTap::kInput ? 0 : shape.tap == ReplayTap::kMid ? 1 : 2;

  TwoStageModel m;
  m.front = FrontExtractor(shape.input_dim, {stages.begin(), stages.begin() + static_cast<std::ptrdiff_t>(split)},
                           init.front_lr_multiplier);
  m.trunk.assign(stages.begin() + static_cast<std::ptrdiff_t>(split), stages.end());
  m.head = HeadModel::zeros(shape.act_dim, shape.classes, init.learning_rate);
  m.head.brn.momentum = init.brn_momentum;
  m.head.brn.r_max_clip = init.r_max_clip;
  m.head.brn.d_max_clip = init.d_max_clip;
  return m;
}

Prediction TwoStageModel::predict(const Vector& features) const {
  Vector x = forward_front(front, features).values;
  for (const auto& t : trunk) x = (t * x).array().tanh().matrix();
  const Vector z = brn_normalize_inference(head.brn, x.transpose()).transpose();
  return prediction_from_logits(head.weights.transpose() * z + head.bias);
}

std::size_t TwoStageModel::front_macs() const {
  std::size_t n = 0;
  for (const auto& p : front.projections()) n += static_cast<std::size_t>(p.size());
  return n;
}

std::size_t TwoStageModel::trunk_macs() const {
  std::size_t n = 0;
  for (const auto& p : trunk) n += static_cast<std::size_t>(p.size());
  return n;
}

std::size_t TwoStageModel::head_macs() const { return static_cast<std::size_t>(head.weights.size()); }

namespace {

struct ForwardTrace {
  std::vector<Matrix> front;  // front[0] = raw fresh input
  std::vector<Matrix> trunk;  // trunk[0] = tap activations (fresh then replay)
};

ForwardTrace forward_trace(const TwoStageModel& model, const Matrix& fresh, const Matrix& replay) {
  if (fresh.rows() > 0 && static_cast<std::size_t>(fresh.cols()) != model.input_dim()) {
    throw ContractError("fresh feature dimension mismatch");
  }
  if (replay.rows() > 0 && static_cast<std::size_t>(replay.cols()) != model.tap_dim()) {
    throw ContractError("replay activation dimension mismatch");
  }
  if (fresh.rows() + replay.rows() == 0) throw ContractError("empty minibatch");
  ForwardTrace t;
  t.front.push_back(fresh.rows() > 0 ? fresh : Matrix(0, static_cast<Eigen::Index>(model.input_dim())));
  for (const auto& p : model.front.projections()) t.front.push_back(tanh_layer(t.front.back(), p));
  const Matrix replay_rows = replay.rows() > 0 ? replay : Matrix(0, static_cast<Eigen::Index>(model.tap_dim()));
  t.trunk.push_back(stack_rows(t.front.back(), replay_rows));
  for (const auto& p : model.trunk) t.trunk.push_back(tanh_layer(t.trunk.back(), p));
  return t;
}

}  // namespace

ModelGradients model_gradients(const TwoStageModel& model, const Matrix& fresh, const Matrix& replay,
                               std::span<const int> labels) {
  const ForwardTrace t = forward_trace(model, fresh, replay);
  ModelGradients g;
  g.head = head_gradients(model.head, t.trunk.back(), labels);

  Matrix upstream = g.head.inputs;
  g.trunk.resize(model.trunk.size());
  for (std::size_t l = model.trunk.size(); l-- > 0;) {
    const Matrix da = (upstream.array() * (1.0 - t.trunk[l + 1].array().square())).matrix();
    g.trunk[l] = da.transpose() * t.trunk[l];
    upstream = da * model.trunk[l];
  }

  const Eigen::Index n_fresh = fresh.rows();
  if (model.front.lr_multiplier() > 0.0 && n_fresh > 0 && !model.front.projections().empty()) {
    Matrix up = upstream.topRows(n_fresh);
    const auto& proj = model.front.projections();
    g.front.resize(proj.size());
    for (std::size_t l = proj.size(); l-- > 0;) {
      const Matrix da = (up.array() * (1.0 - t.front[l + 1].array().square())).matrix();
      g.front[l] = da.transpose() * t.front[l];
      up = da * proj[l];
    }
  }
  return g;
}

double model_batch_loss(const TwoStageModel& model, const Matrix& fresh, const Matrix& replay,
                        std::span<const int> labels) {
  const ForwardTrace t = forward_trace(model, fresh, replay);
  return head_batch_loss(model.head, t.trunk.back(), labels);
}

double train_step(TwoStageModel& model, const Matrix& fresh, const Matrix& replay, std::span<const int> labels) {
  const ModelGradients g = model_gradients(model, fresh, replay, labels);
  const double lr = model.head.learning_rate;

  Matrix w = model.head.weights - lr * g.head.weights;
  Vector b = model.head.bias - lr * g.head.bias;
  std::vector<Matrix> trunk = model.trunk;
  for (std::size_t l = 0; l < trunk.size(); ++l) trunk[l] -= lr * g.trunk[l];
  std::vector<Matrix> front = model.front.projections();
  for (std::size_t l = 0; l < g.front.size(); ++l) front[l] -= lr * model.front.lr_multiplier() * g.front[l];

  if (!std::isfinite(g.head.mean_loss) || !w.allFinite() || !b.allFinite() || !all_finite(trunk) ||
      !all_finite(front) || !g.head.weights.allFinite() || !all_finite(g.trunk) || !all_finite(g.front)) {
    throw NonFiniteError("non-finite gradient or parameter in training step");
  }
  model.head.weights = std::move(w);
  model.head.bias = std::move(b);
  model.trunk = std::move(trunk);
  model.front.projections() = std::move(front);
  update_running_stats(model.head.brn, g.head.stats.mean, g.head.stats.var);
  return g.head.mean_loss;
}

namespace {

std::vector<double> flatten(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

std::vector<double> flatten(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix unflatten(const std::vector<double>& shape, const std::vector<double>& data) {
  if (shape.size() != 2) throw wire::DecodeError("bad matrix shape");
  const auto rows = static_cast<Eigen::Index>(shape[0]);
  const auto cols = static_cast<Eigen::Index>(shape[1]);
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw wire::DecodeError("matrix shape does not match data");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[static_cast<std::size_t>(i * cols + j)];
  return m;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::vector<std::uint8_t> serialize(const TwoStageModel& model) {
  const auto& brn = model.head.brn;
  std::vector<std::vector<double>> arrays;
  arrays.push_back({static_cast<double>(model.input_dim()), static_cast<double>(model.front.projections().size()),
                    static_cast<double>(model.trunk.size()), model.head.learning_rate, model.front.lr_multiplier(),
                    brn.momentum, brn.r_max_clip, brn.d_max_clip, brn.epsilon});
  auto push_matrix = [&](const Matrix& m) {
    arrays.push_back({static_cast<double>(m.rows()), static_cast<double>(m.cols())});
    arrays.push_back(flatten(m));
  };
  for (const auto& p : model.front.projections()) push_matrix(p);
  for (const auto& p : model.trunk) push_matrix(p);
  push_matrix(model.head.weights);
  arrays.push_back(flatten(model.head.bias));
  arrays.push_back(flatten(brn.running_mean));
  arrays.push_back(flatten(brn.running_var));
  return wire::encode_record(arrays);
}

TwoStageModel deserialize(std::span<const std::uint8_t> bytes) {
  const auto arrays = wire::decode_record(bytes);
  if (arrays.empty() || arrays[0].size() != 9) throw wire::DecodeError("model record: bad header array");
  const auto& meta = arrays[0];
  const auto n_front = static_cast<std::size_t>(meta[1]);
  const auto n_trunk = static_cast<std::size_t>(meta[2]);
  const std::size_t expected = 1 + 2 * (n_front + n_trunk + 1) + 3;
  if (arrays.size() != expected) throw wire::DecodeError("model record: unexpected array count");

  std::size_t k = 1;
  auto next_matrix = [&]() {
    Matrix m = unflatten(arrays[k], arrays[k + 1]);
    k += 2;
    return m;
  };
  std::vector<Matrix> front;
  for (std::size_t i = 0; i < n_front; ++i) front.push_back(next_matrix());
  TwoStageModel m;
  for (std::size_t i = 0; i < n_trunk; ++i) m.trunk.push_back(next_matrix());
  m.head.weights = next_matrix();
  m.head.bias = to_vector(arrays[k++]);
  m.head.brn.running_mean = to_vector(arrays[k++]);
  m.head.brn.running_var = to_vector(arrays[k++]);
  m.head.learning_rate = meta[3];
  m.head.brn.momentum = meta[5];
  m.head.brn.r_max_clip = meta[6];
  m.head.brn.d_max_clip = meta[7];
  m.head.brn.epsilon = meta[8];
  m.front = FrontExtractor(static_cast<std::size_t>(meta[0]), std::move(front), meta[4]);
  return m;
}

}  // namespace shoggoth::learner
