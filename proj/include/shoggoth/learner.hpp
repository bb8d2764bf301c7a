#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "shoggoth/common.hpp"

namespace shoggoth::learner {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Floor applied to the target-class probability inside the cross-entropy.
inline constexpr double kProbabilityFloor = 1e-12;

/// Raised when a training step produces non-finite parameters or gradients.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values at the replay layer.
struct Activation {
  Vector values;
};

struct LabeledActivation {
  Activation activation;
  int label = 0;
};

/// Fixed stack of (projection, tanh) stages in front of the replay layer.
/// Each projection is stored outputs x inputs. An empty stack is the identity
/// (replay at the input layer).
class FrontExtractor {
 public:
  FrontExtractor() = default;
  FrontExtractor(std::size_t input_dim, std::vector<Matrix> projections, double lr_multiplier);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const;
  const std::vector<Matrix>& projections() const { return projections_; }
  std::vector<Matrix>& projections() { return projections_; }

  /// 0 freezes the stack; 1 trains it at the full learning rate.
  double lr_multiplier() const { return lr_multiplier_; }
  void set_lr_multiplier(double m);

 private:
  std::size_t input_dim_ = 0;
  std::vector<Matrix> projections_;
  double lr_multiplier_ = 0.0;
};

/// tanh(projection * features) through every stage. Throws ContractError on
/// a dimension mismatch.
Activation forward_front(const FrontExtractor& front, const Vector& features);

/// Row-batched variant: `features` is n x input_dim.
Matrix forward_front_batch(const FrontExtractor& front, const Matrix& features);

enum class BrnMode { kTraining, kInference };

/// Batch Renormalization state. r and d correction factors are clipped to
/// [1/r_max_clip, r_max_clip] and [-d_max_clip, d_max_clip]; with clips
/// (1, 0) training mode is exactly batch normalization.
struct BrnState {
  Vector running_mean;
  Vector running_var;
  double momentum = 0.01;
  double r_max_clip = 3.0;
  double d_max_clip = 5.0;
  double epsilon = 1e-5;
  BrnMode mode = BrnMode::kInference;

  static BrnState identity(std::size_t dim);
};

/// Training-mode normalization of a batch and the statistics behind it.
struct BrnBatch {
  Matrix normalized;  // r * (x - mean) / sigma + d
  Matrix centered;    // (x - mean) / sigma, before the r/d correction
  Vector mean;
  Vector var;         // biased batch variance
  Vector sigma;       // sqrt(var + epsilon)
  Vector r;
  Vector d;
};

BrnBatch brn_normalize_training(const BrnState& brn, const Matrix& batch);
Matrix brn_normalize_inference(const BrnState& brn, const Matrix& batch);

/// Moves the running moments toward the batch moments by `momentum`.
void update_running_stats(BrnState& brn, const Vector& batch_mean, const Vector& batch_var);

/// Trainable classification head: BRN, then affine map, then softmax.
struct HeadModel {
  Matrix weights;  // act_dim x classes
  Vector bias;     // classes
  BrnState brn;
  double learning_rate = 0.05;

  std::size_t input_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(weights.cols()); }

  static HeadModel zeros(std::size_t act_dim, std::size_t classes, double learning_rate);
};

struct Prediction {
  Vector scores;
  int predicted_class = 0;
  double confidence = 0.0;
};

Prediction prediction_from_logits(const Vector& logits);

/// In training mode `act` is normalized with the statistics of
/// `batch_context`, which must be non-empty; inference mode uses the running
/// statistics and ignores the context.
Prediction forward_head(const HeadModel& head, const Activation& act,
                        std::span<const Activation> batch_context = {});

/// Cross-entropy -log(max(scores[label], kProbabilityFloor)).
double loss(const Prediction& pred, int label);

struct HeadGradients {
  Matrix weights;
  Vector bias;
  Matrix inputs;  // dL/d(head input), one row per sample
  BrnBatch stats;
  double mean_loss = 0.0;
};

/// Analytic gradients of the mean cross-entropy over a training-mode batch.
/// The BRN factors r and d are treated as constants.
HeadGradients head_gradients(const HeadModel& head, const Matrix& inputs, std::span<const int> labels);

/// Mean training-mode loss; no state is modified.
double head_batch_loss(const HeadModel& head, const Matrix& inputs, std::span<const int> labels);

/// One plain SGD step on the head. Running moments are updated even when the
/// learning rate is 0. Returns the pre-step mean loss. Throws NonFiniteError
/// (leaving `head` untouched) if the gradient is not finite.
double sgd_step(HeadModel& head, std::span<const LabeledActivation> minibatch);

enum class ReplayTap { kInput, kMid, kPool };

const char* to_string(ReplayTap tap);
ReplayTap replay_tap_from_string(const std::string& s);

struct ModelShape {
  std::size_t input_dim = 16;
  std::size_t mid_dim = 48;
  std::size_t act_dim = 32;
  std::size_t classes = 4;
  ReplayTap tap = ReplayTap::kPool;
};

struct ModelInit {
  double learning_rate = 0.05;
  double front_lr_multiplier = 1.0;
  double init_gain = 1.0;
  double brn_momentum = 0.01;
  double r_max_clip = 3.0;
  double d_max_clip = 5.0;
};

/// The edge student. The two projection stages are split at the replay tap:
/// stages before it form the front extractor, stages after it (the trunk)
/// are trained at the full learning rate together with the head.
class TwoStageModel {
 public:
  static TwoStageModel create(const ModelShape& shape, const ModelInit& init, Rng& rng);

  FrontExtractor front;
  std::vector<Matrix> trunk;
  HeadModel head;

  std::size_t input_dim() const { return front.input_dim(); }
  std::size_t tap_dim() const { return front.output_dim(); }
  std::size_t classes() const { return head.classes(); }

  /// Replay-layer activation of raw features.
  Activation tap_activation(const Vector& features) const { return forward_front(front, features); }

  /// Inference-mode prediction from raw features.
  Prediction predict(const Vector& features) const;

  /// Multiply-accumulate counts per sample, used by the training cost model.
  std::size_t front_macs() const;
  std::size_t trunk_macs() const;
  std::size_t head_macs() const;
};

/// Gradients of the mean loss over one mixed mini-batch.
struct ModelGradients {
  std::vector<Matrix> front;  // empty when the front is frozen
  std::vector<Matrix> trunk;
  HeadGradients head;
};

/// `fresh` rows are raw features that cross the front; `replay` rows are
/// stored tap activations. `labels` lists fresh labels first, then replay.
ModelGradients model_gradients(const TwoStageModel& model, const Matrix& fresh, const Matrix& replay,
                               std::span<const int> labels);

double model_batch_loss(const TwoStageModel& model, const Matrix& fresh, const Matrix& replay,
                        std::span<const int> labels);

/// SGD on every trainable parameter plus a BRN moment update. Front stages
/// move at learning_rate * front.lr_multiplier. Throws NonFiniteError with
/// the model untouched if any gradient is non-finite.
double train_step(TwoStageModel& model, const Matrix& fresh, const Matrix& replay,
                  std::span<const int> labels);

/// Flat float record (see wire::encode_record) of every parameter.
std::vector<std::uint8_t> serialize(const TwoStageModel& model);
TwoStageModel deserialize(std::span<const std::uint8_t> bytes);

}  // namespace shoggoth::learner
