#pragma once

#include "bml/image.hpp"
#include "bml/nn/model.hpp"

namespace bml {

/// Fills `mask` with the network prediction and keeps every other pixel
/// bit-exact. Inputs whose sides are not multiples of 4 are edge-padded for
/// the forward pass and cropped back.
GrayImage inpaint(nn::InpainterModel<float>& model, const GrayImage& image, const BinaryMask& mask);

/// Raw network output (no compositing) on the same padded/cropped grid.
GrayImage predict(nn::InpainterModel<float>& model, const GrayImage& image, const BinaryMask& mask);

struct ClassicalOptions {
  double tolerance = 1e-6;
  int max_iters = 20000;
};

/// Harmonic fill of the masked region from its unmasked 4-neighbours by
/// successive over-relaxation. Every update is clamped to the range of the
/// boundary values, so the discrete maximum principle holds at every
/// iteration. Stops when the largest update falls below the tolerance.
/// Throws std::invalid_argument when a 4-connected masked component has no
/// unmasked neighbour.
GrayImage classical_inpaint(const GrayImage& image, const BinaryMask& mask,
                            const ClassicalOptions& options = {});

}  // namespace bml
