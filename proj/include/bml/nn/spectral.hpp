#pragma once

#include "bml/nn/param.hpp"
#include "bml/nn/tensor.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace bml::nn {

/// Orthonormal real 2D DFT on an h x w plane with a half spectrum of
/// h x (w/2 + 1) coefficients, plus the exact adjoints of both directions for
/// backprop. Evaluated as products with dense cosine/sine matrices; the
/// network only transforms planes of a few dozen pixels per side, where this
/// beats a recursive FFT and keeps every adjoint a plain transpose.
template <typename Scalar>
class RealFft2 {
 public:
  using Plane = Eigen::Map<Matrix<Scalar>>;
  using ConstPlane = Eigen::Map<const Matrix<Scalar>>;

  RealFft2(Index h, Index w) : h_(h), w_(w), wf_(w / 2 + 1), scale_(Scalar(1) / std::sqrt(Scalar(h * w))) {
    const double two_pi = 2.0 * std::numbers::pi;
    col_cos_.resize(h, h);
    col_sin_.resize(h, h);
    for (Index r = 0; r < h; ++r)
      for (Index q = 0; q < h; ++q) {
        const double a = two_pi * static_cast<double>((r * q) % h) / static_cast<double>(h);
        col_cos_(r, q) = static_cast<Scalar>(std::cos(a));
        col_sin_(r, q) = static_cast<Scalar>(-std::sin(a));
      }
    row_cos_.resize(w, wf_);
    row_sin_.resize(w, wf_);
    inv_cos_.resize(wf_, w);
    inv_sin_.resize(wf_, w);
    for (Index c = 0; c < w; ++c)
      for (Index k = 0; k < wf_; ++k) {
        const double a = two_pi * static_cast<double>((c * k) % w) / static_cast<double>(w);
        const double weight = (k == 0 || 2 * k == w) ? 1.0 : 2.0;
        row_cos_(c, k) = static_cast<Scalar>(std::cos(a));
        row_sin_(c, k) = static_cast<Scalar>(-std::sin(a));
        inv_cos_(k, c) = static_cast<Scalar>(weight * std::cos(a));
        inv_sin_(k, c) = static_cast<Scalar>(weight * std::sin(a));
      }
  }

  Index height() const { return h_; }
  Index width() const { return w_; }
  Index spectrum_width() const { return wf_; }
  Index spectrum_size() const { return h_ * wf_; }

  /// (re, im) = rfft2(x) / sqrt(h w); x is h*w row-major, re/im are h*wf row-major.
  void forward(const Scalar* x, Scalar* re, Scalar* im) {
    const ConstPlane in(x, h_, w_);
    a_re_.noalias() = in * row_cos_;
    a_im_.noalias() = in * row_sin_;
    Plane xr(re, h_, wf_), xi(im, h_, wf_);
    xr.noalias() = col_cos_ * a_re_;
    xr.noalias() -= col_sin_ * a_im_;
    xi.noalias() = col_cos_ * a_im_;
    xi.noalias() += col_sin_ * a_re_;
    xr *= scale_;
    xi *= scale_;
  }

  /// x = irfft2(re + i im) * sqrt(h w), reading the half spectrum as Hermitian.
  /// Imaginary parts of the DC and (for even w) Nyquist columns do not contribute.
  void inverse(const Scalar* re, const Scalar* im, Scalar* x) {
    const ConstPlane xr(re, h_, wf_), xi(im, h_, wf_);
    a_re_.noalias() = col_cos_ * xr;
    a_re_.noalias() += col_sin_ * xi;
    a_im_.noalias() = col_cos_ * xi;
    a_im_.noalias() -= col_sin_ * xr;
    Plane out(x, h_, w_);
    out.noalias() = a_re_ * inv_cos_;
    out.noalias() -= a_im_ * inv_sin_;
    out *= scale_;
  }

  /// Adjoint of forward: maps a gradient on (re, im) to a gradient on x.
  void forward_adjoint(const Scalar* g_re, const Scalar* g_im, Scalar* gx) {
    const ConstPlane gr(g_re, h_, wf_), gi(g_im, h_, wf_);
    a_re_.noalias() = col_cos_.transpose() * gr;
    a_re_.noalias() += col_sin_.transpose() * gi;
    a_im_.noalias() = col_cos_.transpose() * gi;
    a_im_.noalias() -= col_sin_.transpose() * gr;
    Plane out(gx, h_, w_);
    out.noalias() = a_re_ * row_cos_.transpose();
    out.noalias() += a_im_ * row_sin_.transpose();
    out *= scale_;
  }

  /// Adjoint of inverse: maps a gradient on x to a gradient on (re, im).
  void inverse_adjoint(const Scalar* gx, Scalar* g_re, Scalar* g_im) {
    const ConstPlane g(gx, h_, w_);
    a_re_.noalias() = g * inv_cos_.transpose();
    a_im_.noalias() = -(g * inv_sin_.transpose());
    Plane gr(g_re, h_, wf_), gi(g_im, h_, wf_);
    gr.noalias() = col_cos_.transpose() * a_re_;
    gr.noalias() -= col_sin_.transpose() * a_im_;
    gi.noalias() = col_sin_.transpose() * a_re_;
    gi.noalias() += col_cos_.transpose() * a_im_;
    gr *= scale_;
    gi *= scale_;
  }

 private:
  Index h_, w_, wf_;
  Scalar scale_;
  Matrix<Scalar> col_cos_, col_sin_;  // h x h, exp(-2 pi i r q / h)
  Matrix<Scalar> row_cos_, row_sin_;  // w x wf, exp(-2 pi i c k / w)
  Matrix<Scalar> inv_cos_, inv_sin_;  // wf x w, Hermitian-weighted inverse
  Matrix<Scalar> a_re_, a_im_;
};

/// Global FFC branch: y = irfft2(W * stack(re, im)(rfft2(x)) + b), where W is
/// a 1x1 convolution over the 2C stacked frequency channels.
template <typename Scalar>
class SpectralTransform {
 public:
  explicit SpectralTransform(Index channels, const std::string& name = "spectral")
      : channels_(channels),
        weight_(name + ".weight", {2 * channels, 2 * channels, 1, 1}, 2 * channels, 2 * channels),
        bias_(name + ".bias", {2 * channels}, 2 * channels, 1) {}

  Index channels() const { return channels_; }
  Param<Scalar>& weight() { return weight_; }
  Param<Scalar>& bias() { return bias_; }

  void init(Rng& rng) {
    weight_.init_uniform(rng, 2 * channels_);
    bias_.value.setZero();
  }

  /// Identity spectral map: the transform reduces to an FFT round trip.
  void set_identity() {
    weight_.value.setIdentity();
    bias_.value.setZero();
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    if (x.c() != channels_) throw std::invalid_argument("spectral_transform: channel mismatch");
    if (x.h() < 2 || x.w() < 2) throw std::invalid_argument("spectral_transform: spatial dims must be >= 2");
    ensure_plan(x.h(), x.w());
    const Index fs = fft_->spectrum_size();
    stacked_.assign(x.n(), Matrix<Scalar>(2 * channels_, fs));
    Tensor<Scalar> y(x.shape());
    Matrix<Scalar> mixed;
    for (Index n = 0; n < x.n(); ++n) {
      Matrix<Scalar>& s = stacked_[n];
      for (Index c = 0; c < channels_; ++c)
        fft_->forward(x.plane(n, c).data(), s.row(c).data(), s.row(channels_ + c).data());
      mixed.noalias() = weight_.value * s;
      mixed.colwise() += bias_.value.col(0);
      for (Index c = 0; c < channels_; ++c)
        fft_->inverse(mixed.row(c).data(), mixed.row(channels_ + c).data(), y.plane(n, c).data());
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& gy) {
    const Index fs = fft_->spectrum_size();
    Tensor<Scalar> gx(gy.shape());
    Matrix<Scalar> gmixed(2 * channels_, fs), gstacked;
    for (Index n = 0; n < gy.n(); ++n) {
      for (Index c = 0; c < channels_; ++c)
        fft_->inverse_adjoint(gy.plane(n, c).data(), gmixed.row(c).data(), gmixed.row(channels_ + c).data());
      weight_.grad.noalias() += gmixed * stacked_[n].transpose();
      bias_.grad.col(0) += gmixed.rowwise().sum();
      gstacked.noalias() = weight_.value.transpose() * gmixed;
      for (Index c = 0; c < channels_; ++c)
        fft_->forward_adjoint(gstacked.row(c).data(), gstacked.row(channels_ + c).data(), gx.plane(n, c).data());
    }
    return gx;
  }

 private:
  void ensure_plan(Index h, Index w) {
    if (!fft_ || fft_->height() != h || fft_->width() != w) fft_.emplace(h, w);
  }

  Index channels_;
  Param<Scalar> weight_, bias_;
  std::optional<RealFft2<Scalar>> fft_;
  std::vector<Matrix<Scalar>> stacked_;
};

}  // namespace bml::nn
