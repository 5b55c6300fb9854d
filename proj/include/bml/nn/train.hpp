#pragma once

#include "bml/augment.hpp"
#include "bml/nn/model.hpp"
#include "bml/phantom.hpp"

#include <functional>
#include <vector>

namespace bml::nn {

/// Adam with bias correction; updates parameters in collection order.
template <typename Scalar>
class Adam {
 public:
  Adam(const ParamList<Scalar>& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto lr = static_cast<Scalar>(lr_), eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

  int steps_taken() const { return t_; }

 private:
  ParamList<Scalar> params_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Matrix<Scalar>> m_, v_;
};

struct AugmentSettings {
  bool flip_horizontal = true;
  bool flip_vertical = true;
  bool bias_field = true;
  int bias_order = 3;
  double bias_bound = 0.2;
};

struct TrainOptions {
  int steps = 2000;
  int batch_size = 4;
  double learning_rate = 2e-4;
  double lambda_out = 0.1;
  std::uint64_t seed = 0;
  AugmentSettings augment;
  /// Called after every step with (step index, loss).
  std::function<void(int, double)> on_step;
};

/// Healthy slice paired with the region the network learns to fill.
struct TrainingSample {
  GrayImage image;
  BinaryMask mask;
};

/// Train split of a manifest, resampled to `resolution` (0 keeps the stored
/// size). Throws when the split is empty or any training slice has a lesion.
std::vector<TrainingSample> load_training_split(const Manifest& manifest, Index resolution);

/// Sequential deterministic Adam loop. Batch membership and augmentation for
/// step s depend only on (seed, s). Returns the per-step loss trace; throws
/// std::runtime_error naming the step when the loss becomes non-finite.
std::vector<double> train(InpainterModel<float>& model, const std::vector<TrainingSample>& samples,
                          const TrainOptions& options);

/// Masked L1 (lambda_out weighting) of the model on `samples`, averaged.
double evaluate_loss(InpainterModel<float>& model, const std::vector<TrainingSample>& samples, double lambda_out,
                     int batch_size = 4);

}  // namespace bml::nn
