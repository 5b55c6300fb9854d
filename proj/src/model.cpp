#include "bml/nn/model.hpp"

#include "bml/rng.hpp"

#include <stdexcept>

namespace bml::nn {

template <typename Scalar>
InpainterModel<Scalar>::InpainterModel(const ArchConfig& arch, std::uint64_t init_seed)
    : arch_(arch), init_seed_(init_seed), net_(std::make_unique<Sequential<Scalar>>()) {
  if (arch.blocks < 0 || arch.encoder_channels < 1 || arch.width < 1 || arch.decoder_channels < 1 ||
      arch.kernel < 1 || arch.kernel % 2 == 0) {
    throw std::invalid_argument("inpainter: invalid architecture");
  }
  auto& net = *net_;
  const Index k = arch.kernel;
  auto conv_norm_act = [&](Index in, Index out, Index stride, const std::string& name) {
    net.template add<Conv2d<Scalar>>(in, out, k, stride, name + ".conv");
    net.template add<InstanceNorm<Scalar>>(out, name + ".norm");
    net.template add<ReLU<Scalar>>();
  };

  conv_norm_act(kInputChannels, arch.encoder_channels, 2, "down1");
  conv_norm_act(arch.encoder_channels, arch.width, 2, "down2");
  for (int b = 0; b < arch.blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    auto& block = net.template add<Residual<Scalar>>();
    for (int half = 0; half < 2; ++half) {
      const std::string sub = name + ".ffc" + std::to_string(half);
      block.template add<FfcLayer<Scalar>>(arch.width, arch.alpha, k, sub);
      block.template add<InstanceNorm<Scalar>>(arch.width, sub + ".norm");
      block.template add<ReLU<Scalar>>();
    }
  }
  net.template add<Upsample2x<Scalar>>();
  conv_norm_act(arch.width, arch.encoder_channels, 1, "up1");
  net.template add<Upsample2x<Scalar>>();
  conv_norm_act(arch.encoder_channels, arch.decoder_channels, 1, "up2");
  net.template add<Conv2d<Scalar>>(arch.decoder_channels, 1, k, 1, "head.conv");
  net.template add<Sigmoid<Scalar>>();

  Rng rng(init_seed);
  net.init(rng);
  net.collect(params_);
}

template <typename Scalar>
Tensor<Scalar> InpainterModel<Scalar>::forward(const Tensor<Scalar>& input) {
  if (input.c() != kInputChannels) throw std::invalid_argument("inpainter: input must have 2 channels");
  if (input.h() % kSizeMultiple != 0 || input.w() % kSizeMultiple != 0 || input.h() < 8 || input.w() < 8)
    throw std::invalid_argument("inpainter: spatial size must be a multiple of 4 and at least 8");
  return net_->forward(input);
}

template <typename Scalar>
Tensor<Scalar> InpainterModel<Scalar>::backward(const Tensor<Scalar>& grad_output) {
  return net_->backward(grad_output);
}

template <typename Scalar>
void InpainterModel<Scalar>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template <typename Scalar>
Index InpainterModel<Scalar>::parameter_count() const {
  Index total = 0;
  for (const auto* p : params_) total += p->size();
  return total;
}

template <typename Scalar>
void InpainterModel<Scalar>::copy_from(const InpainterModel& other) {
  if (!(arch_ == other.arch_)) throw std::invalid_argument("inpainter: architecture mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->value = other.params_[i]->value;
  record_ = other.record_;
}

template class InpainterModel<float>;
template class InpainterModel<double>;

template <typename Scalar>
Tensor<Scalar> make_input(std::span<const GrayImage> images, std::span<const BinaryMask> masks) {
  if (images.size() != masks.size() || images.empty())
    throw std::invalid_argument("make_input: need matching, non-empty image and mask lists");
  const Index h = images[0].rows(), w = images[0].cols();
  Tensor<Scalar> input(static_cast<Index>(images.size()), 2, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    require_same_shape(images[n], masks[n], "make_input");
    if (images[n].rows() != h || images[n].cols() != w) throw std::invalid_argument("make_input: batch shape mismatch");
    const auto b = static_cast<Index>(n);
    input.plane(b, 0) = masks[n].select(Scalar(0), images[n].template cast<Scalar>());
    input.plane(b, 1) = masks[n].template cast<Scalar>();
  }
  return input;
}

template Tensor<float> make_input<float>(std::span<const GrayImage>, std::span<const BinaryMask>);
template Tensor<double> make_input<double>(std::span<const GrayImage>, std::span<const BinaryMask>);

template <typename Scalar>
LossResult<Scalar> masked_l1_loss(const Tensor<Scalar>& prediction, const Tensor<Scalar>& target,
                                  const Tensor<Scalar>& mask, double lambda_out) {
  prediction.require_same_shape(target, "masked_l1_loss");
  prediction.require_same_shape(mask, "masked_l1_loss");
  LossResult<Scalar> out;
  out.grad = Tensor<Scalar>(prediction.shape());
  const Index batch = prediction.n();
  const Index per_sample = prediction.c() * prediction.plane_size();
  for (Index n = 0; n < batch; ++n) {
    const Scalar* p = prediction.data() + n * per_sample;
    const Scalar* t = target.data() + n * per_sample;
    const Scalar* m = mask.data() + n * per_sample;
    Scalar* g = out.grad.data() + n * per_sample;
    Index inside = 0;
    for (Index i = 0; i < per_sample; ++i) inside += m[i] > Scalar(0.5);
    const Index outside = per_sample - inside;
    if (inside == 0) throw std::invalid_argument("masked_l1_loss: mask has no pixels to inpaint");

    const double w_in = 1.0 / (static_cast<double>(inside) * batch);
    const double w_out = outside > 0 ? lambda_out / (static_cast<double>(outside) * batch) : 0.0;
    double loss_in = 0.0, loss_out = 0.0;
    for (Index i = 0; i < per_sample; ++i) {
      const double diff = static_cast<double>(p[i]) - static_cast<double>(t[i]);
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      if (m[i] > Scalar(0.5)) {
        loss_in += std::abs(diff);
        g[i] = static_cast<Scalar>(sign * w_in);
      } else {
        loss_out += std::abs(diff);
        g[i] = static_cast<Scalar>(sign * w_out);
      }
    }
    out.loss += loss_in * w_in + loss_out * w_out;
  }
  return out;
}

template LossResult<float> masked_l1_loss<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, double);
template LossResult<double> masked_l1_loss<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, double);

}  // namespace bml::nn
