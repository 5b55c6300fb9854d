#pragma once

#include "bml/image.hpp"
#include "bml/nn/layers.hpp"

#include <cstdint>
#include <span>

namespace bml::nn {

/// Encoder-FFC-decoder layout. Two stride-2 convolutions take the 2-channel
/// input to `width` channels at quarter resolution, `blocks` FFC residual
/// blocks run there, and two upsample+conv stages return to full resolution
/// before a 1-channel sigmoid head.
struct ArchConfig {
  Index encoder_channels = 16;
  Index width = 32;
  Index decoder_channels = 8;
  int blocks = 4;
  double alpha = 0.5;
  Index kernel = 3;

  bool operator==(const ArchConfig&) const = default;
};

/// Hyperparameters recorded alongside the weights.
struct TrainRecord {
  double learning_rate = 2e-4;
  int steps = 0;
  int batch_size = 1;
  double lambda_out = 0.1;
  std::uint64_t seed = 0;
  Index resolution = 0;
};

template <typename Scalar>
class InpainterModel {
 public:
  static constexpr Index kInputChannels = 2;
  /// Spatial sizes must be divisible by this (two stride-2 stages).
  static constexpr Index kSizeMultiple = 4;

  InpainterModel(const ArchConfig& arch, std::uint64_t init_seed);
  InpainterModel(const InpainterModel&) = delete;
  InpainterModel& operator=(const InpainterModel&) = delete;
  InpainterModel(InpainterModel&&) noexcept = default;
  InpainterModel& operator=(InpainterModel&&) noexcept = default;

  const ArchConfig& arch() const { return arch_; }
  std::uint64_t init_seed() const { return init_seed_; }
  TrainRecord& record() { return record_; }
  const TrainRecord& record() const { return record_; }

  /// (N, 2, H, W) -> (N, 1, H, W) with values in (0, 1).
  Tensor<Scalar> forward(const Tensor<Scalar>& input);
  /// Gradient with respect to the network input; accumulates parameter grads.
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output);

  const ParamList<Scalar>& params() const { return params_; }
  void zero_grad();
  Index parameter_count() const;

  /// Same architecture and weights at another precision.
  template <typename Other>
  InpainterModel<Other> cast() const {
    InpainterModel<Other> out(arch_, init_seed_);
    out.record() = record_;
    for (std::size_t i = 0; i < params_.size(); ++i)
      out.params()[i]->value = params_[i]->value.template cast<Other>();
    return out;
  }

  /// Copies every parameter value from a model of identical architecture.
  void copy_from(const InpainterModel& other);

 private:
  ArchConfig arch_;
  std::uint64_t init_seed_;
  TrainRecord record_;
  std::unique_ptr<Sequential<Scalar>> net_;
  ParamList<Scalar> params_;
};

extern template class InpainterModel<float>;
extern template class InpainterModel<double>;

/// Builds stack(x (*) m, m): channel 0 is the image with the region to inpaint
/// zeroed, channel 1 the mask.
template <typename Scalar>
Tensor<Scalar> make_input(std::span<const GrayImage> images, std::span<const BinaryMask> masks);

template <typename Scalar>
struct LossResult {
  double loss = 0.0;
  Tensor<Scalar> grad;  ///< d loss / d prediction
};

/// Per-sample loss mean_{m=1}|p - t| + lambda_out * mean_{m=0}|p - t|,
/// averaged over the batch. Subgradient 0 at exact ties. Throws
/// std::invalid_argument when a sample has no masked pixel.
template <typename Scalar>
LossResult<Scalar> masked_l1_loss(const Tensor<Scalar>& prediction, const Tensor<Scalar>& target,
                                  const Tensor<Scalar>& mask, double lambda_out);

}  // namespace bml::nn
