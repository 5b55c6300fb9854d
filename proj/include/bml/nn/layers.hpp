#pragma once

#include "bml/nn/param.hpp"
#include "bml/nn/spectral.hpp"
#include "bml/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace bml::nn {

/// Layer with cached activations: backward() must follow the matching
/// forward() and accumulates into parameter gradients.
template <typename Scalar>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x) = 0;
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& gy) = 0;
  virtual void collect(ParamList<Scalar>&) {}
  virtual void init(Rng&) {}
};

template <typename Scalar>
using ModulePtr = std::unique_ptr<Module<Scalar>>;

// --- convolution ---------------------------------------------------------------

/// k x k convolution, zero padding k/2, optional stride; evaluated as
/// im2col followed by one GEMM per sample.
template <typename Scalar>
class Conv2d final : public Module<Scalar> {
 public:
  Conv2d(Index in, Index out, Index kernel, Index stride, const std::string& name)
      : in_(in), out_(out), k_(kernel), stride_(stride), pad_(kernel / 2),
        weight_(name + ".weight", {out, in, kernel, kernel}, out, in * kernel * kernel),
        bias_(name + ".bias", {out}, out, 1) {}

  Param<Scalar>& weight() { return weight_; }
  Param<Scalar>& bias() { return bias_; }

  void init(Rng& rng) override {
    weight_.init_uniform(rng, in_ * k_ * k_);
    bias_.value.setZero();
  }

  void collect(ParamList<Scalar>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Index out_size(Index n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    if (x.c() != in_) throw std::invalid_argument(weight_.name + ": input channel mismatch");
    input_ = x;
    const Index ho = out_size(x.h()), wo = out_size(x.w());
    const Index tile = tile_rows(wo);
    Tensor<Scalar> y(x.n(), out_, ho, wo);
    for (Index n = 0; n < x.n(); ++n) {
      for (Index oy = 0; oy < ho; oy += tile) {
        const Index rows = std::min(tile, ho - oy);
        im2col(x, n, oy, rows, wo);
        auto out = y.sample(n).middleCols(oy * wo, rows * wo);
        out.noalias() = weight_.value * cols_;
        out.colwise() += bias_.value.col(0);
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    const Tensor<Scalar>& x = input_;
    Tensor<Scalar> gx(x.shape());
    const Index ho = gy.h(), wo = gy.w();
    const Index tile = tile_rows(wo);
    for (Index n = 0; n < x.n(); ++n) {
      bias_.grad.col(0) += gy.sample(n).rowwise().sum();
      for (Index oy = 0; oy < ho; oy += tile) {
        const Index rows = std::min(tile, ho - oy);
        im2col(x, n, oy, rows, wo);
        const auto g = gy.sample(n).middleCols(oy * wo, rows * wo);
        weight_.grad.noalias() += g * cols_.transpose();
        gcols_.noalias() = weight_.value.transpose() * g;
        col2im(gx, n, oy, rows, wo);
      }
    }
    return gx;
  }

 private:
  // Output columns [lo, hi) read inside the image for kernel column kx.
  void valid_range(Index kx, Index w, Index wo, Index& lo, Index& hi) const {
    const Index off = kx - pad_;
    lo = off >= 0 ? 0 : (-off + stride_ - 1) / stride_;
    hi = off >= w ? 0 : std::min(wo, (w - 1 - off) / stride_ + 1);
    hi = std::max(hi, lo);
  }

  // Output rows per GEMM tile; keeps the column buffer cache-sized.
  static Index tile_rows(Index wo) { return std::max<Index>(1, 2048 / std::max<Index>(wo, 1)); }

  // Columns for output rows [oy0, oy0 + ho).
  void im2col(const Tensor<Scalar>& x, Index n, Index oy0, Index ho, Index wo) {
    cols_.resize(in_ * k_ * k_, ho * wo);
    for (Index c = 0; c < in_; ++c) {
      const Scalar* plane = x.data() + (n * x.c() + c) * x.plane_size();
      for (Index ky = 0; ky < k_; ++ky)
        for (Index kx = 0; kx < k_; ++kx) {
          Scalar* row = cols_.row((c * k_ + ky) * k_ + kx).data();
          Index lo, hi;
          valid_range(kx, x.w(), wo, lo, hi);
          const Index off = kx - pad_;
          for (Index oy = 0; oy < ho; ++oy) {
            const Index iy = (oy0 + oy) * stride_ - pad_ + ky;
            Scalar* dst = row + oy * wo;
            if (iy < 0 || iy >= x.h()) {
              std::fill(dst, dst + wo, Scalar(0));
              continue;
            }
            const Scalar* src = plane + iy * x.w() + off;
            std::fill(dst, dst + lo, Scalar(0));
            if (stride_ == 1) {
              std::copy(src + lo, src + hi, dst + lo);
            } else {
              for (Index ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride_];
            }
            std::fill(dst + hi, dst + wo, Scalar(0));
          }
        }
    }
  }

  void col2im(Tensor<Scalar>& gx, Index n, Index oy0, Index ho, Index wo) {
    for (Index c = 0; c < in_; ++c) {
      Scalar* plane = gx.data() + (n * gx.c() + c) * gx.plane_size();
      for (Index ky = 0; ky < k_; ++ky)
        for (Index kx = 0; kx < k_; ++kx) {
          const Scalar* row = gcols_.row((c * k_ + ky) * k_ + kx).data();
          Index lo, hi;
          valid_range(kx, gx.w(), wo, lo, hi);
          const Index off = kx - pad_;
          for (Index oy = 0; oy < ho; ++oy) {
            const Index iy = (oy0 + oy) * stride_ - pad_ + ky;
            if (iy < 0 || iy >= gx.h()) continue;
            Scalar* dst = plane + iy * gx.w() + off;
            const Scalar* src = row + oy * wo;
            if (stride_ == 1) {
              for (Index ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
            } else {
              for (Index ox = lo; ox < hi; ++ox) dst[ox * stride_] += src[ox];
            }
          }
        }
    }
  }

  Index in_, out_, k_, stride_, pad_;
  Param<Scalar> weight_, bias_;
  Tensor<Scalar> input_;
  Matrix<Scalar> cols_, gcols_;
};

// --- normalization and pointwise -----------------------------------------------

/// Per-sample, per-channel normalization with affine scale and shift.
template <typename Scalar>
class InstanceNorm final : public Module<Scalar> {
 public:
  static constexpr double kEpsilon = 1e-5;

  InstanceNorm(Index channels, const std::string& name)
      : channels_(channels), gamma_(name + ".gamma", {channels}, channels, 1), beta_(name + ".beta", {channels}, channels, 1) {
    gamma_.value.setOnes();
  }

  void init(Rng&) override {
    gamma_.value.setOnes();
    beta_.value.setZero();
  }

  void collect(ParamList<Scalar>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    if (x.c() != channels_) throw std::invalid_argument(gamma_.name + ": channel mismatch");
    normalized_ = Tensor<Scalar>(x.shape());
    inv_std_.resize(x.n() * channels_);
    Tensor<Scalar> y(x.shape());
    const Scalar count = static_cast<Scalar>(x.plane_size());
    for (Index n = 0; n < x.n(); ++n) {
      for (Index c = 0; c < channels_; ++c) {
        const auto in = x.sample(n).row(c).array();
        const Scalar mean = in.sum() / count;
        const Scalar var = (in - mean).square().sum() / count;
        const Scalar inv_std = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kEpsilon));
        inv_std_[n * channels_ + c] = inv_std;
        normalized_.sample(n).row(c).array() = (in - mean) * inv_std;
        y.sample(n).row(c).array() = gamma_.value(c, 0) * normalized_.sample(n).row(c).array() + beta_.value(c, 0);
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    Tensor<Scalar> gx(gy.shape());
    const Scalar count = static_cast<Scalar>(gy.plane_size());
    for (Index n = 0; n < gy.n(); ++n) {
      for (Index c = 0; c < channels_; ++c) {
        const auto g = gy.sample(n).row(c).array();
        const auto xhat = normalized_.sample(n).row(c).array();
        gamma_.grad(c, 0) += (g * xhat).sum();
        beta_.grad(c, 0) += g.sum();
        const auto gxhat = g * gamma_.value(c, 0);
        const Scalar sum_g = gxhat.sum();
        const Scalar sum_gx = (gxhat * xhat).sum();
        gx.sample(n).row(c).array() =
            inv_std_[n * channels_ + c] / count * (count * gxhat - sum_g - xhat * sum_gx);
      }
    }
    return gx;
  }

 private:
  Index channels_;
  Param<Scalar> gamma_, beta_;
  Tensor<Scalar> normalized_;
  std::vector<Scalar> inv_std_;
};

template <typename Scalar>
class ReLU final : public Module<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    output_ = x;
    output_.flat() = x.flat().cwiseMax(Scalar(0));
    return output_;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    Tensor<Scalar> gx(gy.shape());
    gx.flat() = (output_.flat().array() > Scalar(0)).select(gy.flat(), Scalar(0));
    return gx;
  }

 private:
  Tensor<Scalar> output_;
};

/// Logistic squash onto (0, 1).
template <typename Scalar>
class Sigmoid final : public Module<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    output_ = x;
    output_.flat() = (Scalar(1) + (-x.flat().array()).exp()).inverse().matrix();
    return output_;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    Tensor<Scalar> gx(gy.shape());
    const auto s = output_.flat().array();
    gx.flat() = (gy.flat().array() * s * (Scalar(1) - s)).matrix();
    return gx;
  }

 private:
  Tensor<Scalar> output_;
};

/// Nearest-neighbour 2x upsampling.
template <typename Scalar>
class Upsample2x final : public Module<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    Tensor<Scalar> y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
    for (Index n = 0; n < x.n(); ++n)
      for (Index c = 0; c < x.c(); ++c) {
        const auto in = x.plane(n, c);
        auto out = y.plane(n, c);
        for (Index r = 0; r < y.h(); ++r)
          for (Index q = 0; q < y.w(); ++q) out(r, q) = in(r / 2, q / 2);
      }
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    Tensor<Scalar> gx(gy.n(), gy.c(), gy.h() / 2, gy.w() / 2);
    for (Index n = 0; n < gy.n(); ++n)
      for (Index c = 0; c < gy.c(); ++c) {
        const auto g = gy.plane(n, c);
        auto out = gx.plane(n, c);
        for (Index r = 0; r < gy.h(); ++r)
          for (Index q = 0; q < gy.w(); ++q) out(r / 2, q / 2) += g(r, q);
      }
    return gx;
  }
};

// --- fast Fourier convolution --------------------------------------------------

/// Channel split of an FFC layer: round(alpha * channels) global channels,
/// the rest local.
struct FfcSplit {
  Index local = 0;
  Index global = 0;

  static FfcSplit of(Index channels, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("ffc: alpha must lie in [0, 1)");
    const auto g = static_cast<Index>(std::lround(alpha * static_cast<double>(channels)));
    return {channels - g, g};
  }
};

/// Local branch: k x k convolutions local->local and global->local.
/// Global branch: k x k convolution local->global plus the spectral
/// transform global->global. Channel layout is [local | global].
template <typename Scalar>
class FfcLayer final : public Module<Scalar> {
 public:
  FfcLayer(Index channels, double alpha, Index kernel, const std::string& name)
      : split_(FfcSplit::of(channels, alpha)), spectral_(split_.global, name + ".g2g") {
    if (split_.local > 0) local_to_local_ = std::make_unique<Conv2d<Scalar>>(split_.local, split_.local, kernel, 1, name + ".l2l");
    if (split_.local > 0 && split_.global > 0) {
      local_to_global_ = std::make_unique<Conv2d<Scalar>>(split_.local, split_.global, kernel, 1, name + ".l2g");
      global_to_local_ = std::make_unique<Conv2d<Scalar>>(split_.global, split_.local, kernel, 1, name + ".g2l");
    }
  }

  const FfcSplit& split() const { return split_; }
  Conv2d<Scalar>* local_to_local() { return local_to_local_.get(); }
  Conv2d<Scalar>* local_to_global() { return local_to_global_.get(); }
  Conv2d<Scalar>* global_to_local() { return global_to_local_.get(); }
  SpectralTransform<Scalar>& spectral() { return spectral_; }

  void init(Rng& rng) override {
    for (auto* conv : convs()) conv->init(rng);
    if (split_.global > 0) spectral_.init(rng);
  }

  void collect(ParamList<Scalar>& out) override {
    for (auto* conv : convs()) conv->collect(out);
    if (split_.global > 0) spectral_.collect(out);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    if (x.c() != split_.local + split_.global) throw std::invalid_argument("ffc: channel mismatch");
    if (split_.global == 0) return local_to_local_->forward(x);
    if (split_.local == 0) return spectral_.forward(x);
    const Tensor<Scalar> xl = x.channels(0, split_.local);
    const Tensor<Scalar> xg = x.channels(split_.local, split_.global);
    Tensor<Scalar> yl = local_to_local_->forward(xl);
    yl += global_to_local_->forward(xg);
    Tensor<Scalar> yg = local_to_global_->forward(xl);
    yg += spectral_.forward(xg);
    return Tensor<Scalar>::concat(yl, yg);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    if (split_.global == 0) return local_to_local_->backward(gy);
    if (split_.local == 0) return spectral_.backward(gy);
    const Tensor<Scalar> gyl = gy.channels(0, split_.local);
    const Tensor<Scalar> gyg = gy.channels(split_.local, split_.global);
    Tensor<Scalar> gxl = local_to_local_->backward(gyl);
    gxl += local_to_global_->backward(gyg);
    Tensor<Scalar> gxg = global_to_local_->backward(gyl);
    gxg += spectral_.backward(gyg);
    return Tensor<Scalar>::concat(gxl, gxg);
  }

 private:
  std::vector<Conv2d<Scalar>*> convs() {
    std::vector<Conv2d<Scalar>*> out;
    for (auto* c : {local_to_local_.get(), local_to_global_.get(), global_to_local_.get()})
      if (c) out.push_back(c);
    return out;
  }

  FfcSplit split_;
  std::unique_ptr<Conv2d<Scalar>> local_to_local_, local_to_global_, global_to_local_;
  SpectralTransform<Scalar> spectral_;
};

// --- containers ------------------------------------------------------------------

template <typename Scalar>
class Sequential : public Module<Scalar> {
 public:
  template <typename M, typename... Args>
  M& add(Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *m;
    modules_.push_back(std::move(m));
    return ref;
  }

  std::vector<ModulePtr<Scalar>>& modules() { return modules_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    Tensor<Scalar> h = x;
    for (auto& m : modules_) h = m->forward(h);
    return h;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    Tensor<Scalar> g = gy;
    for (auto it = modules_.rbegin(); it != modules_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void collect(ParamList<Scalar>& out) override {
    for (auto& m : modules_) m->collect(out);
  }

  void init(Rng& rng) override {
    for (auto& m : modules_) m->init(rng);
  }

 private:
  std::vector<ModulePtr<Scalar>> modules_;
};

/// y = x + body(x)
template <typename Scalar>
class Residual final : public Sequential<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x) override {
    Tensor<Scalar> y = Sequential<Scalar>::forward(x);
    y += x;
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& gy) override {
    Tensor<Scalar> gx = Sequential<Scalar>::backward(gy);
    gx += gy;
    return gx;
  }
};

}  // namespace bml::nn
