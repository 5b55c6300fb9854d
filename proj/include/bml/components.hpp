#pragma once

#include "bml/image.hpp"

namespace bml {

enum class Connectivity { kFour = 4, kEight = 8 };

/// Labels foreground pixels; ids are assigned in first-encounter raster order.
LabeledComponents connected_components(const BinaryMask& mask,
                                       Connectivity connectivity = Connectivity::kEight);

}  // namespace bml
