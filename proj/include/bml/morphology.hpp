#pragma once

#include "bml/image.hpp"

namespace bml {

/// Squared Euclidean distance from every pixel to the nearest set pixel of
/// `sites` (exact, separable lower-envelope transform). Pixels are at
/// infinity when `sites` is empty.
Image<double> squared_distance_to(const BinaryMask& sites);

/// Binary dilation by the disk {(di,dj) : di^2 + dj^2 <= r^2}. Pixels outside
/// the image count as background.
BinaryMask dilate(const BinaryMask& mask, double radius);

/// Binary erosion by the same disk, defined as the complement of the dilated
/// complement (pixels outside the image count as foreground).
BinaryMask erode(const BinaryMask& mask, double radius);

}  // namespace bml
