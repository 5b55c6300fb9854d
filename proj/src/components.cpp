#include "bml/components.hpp"

#include <algorithm>
#include <array>
#include <deque>

namespace bml {

LabeledComponents connected_components(const BinaryMask& mask, Connectivity connectivity) {
  static constexpr std::array<std::array<int, 2>, 8> kOffsets = {
      {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};
  const int neighbors = connectivity == Connectivity::kFour ? 4 : 8;
  const Index rows = mask.rows();
  const Index cols = mask.cols();

  LabeledComponents out;
  out.labels = Image<int>::Zero(rows, cols);
  std::deque<std::array<Index, 2>> frontier;

  for (Index r0 = 0; r0 < rows; ++r0) {
    for (Index c0 = 0; c0 < cols; ++c0) {
      if (!mask(r0, c0) || out.labels(r0, c0) != 0) continue;
      Component comp;
      comp.id = static_cast<int>(out.components.size()) + 1;
      comp.min_row = comp.max_row = r0;
      comp.min_col = comp.max_col = c0;
      out.labels(r0, c0) = comp.id;
      frontier.push_back({r0, c0});
      while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        ++comp.area;
        comp.min_row = std::min(comp.min_row, r);
        comp.max_row = std::max(comp.max_row, r);
        comp.min_col = std::min(comp.min_col, c);
        comp.max_col = std::max(comp.max_col, c);
        for (int k = 0; k < neighbors; ++k) {
          const Index rr = r + kOffsets[k][0];
          const Index cc = c + kOffsets[k][1];
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          if (!mask(rr, cc) || out.labels(rr, cc) != 0) continue;
          out.labels(rr, cc) = comp.id;
          frontier.push_back({rr, cc});
        }
      }
      out.components.push_back(comp);
    }
  }
  return out;
}

}  // namespace bml
