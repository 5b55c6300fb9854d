#include "bml/morphology.hpp"

#include <limits>
#include <vector>

namespace bml {
namespace {

constexpr double kFar = 1e20;

// 1D squared distance transform of a sampled function (lower envelope of
// parabolas rooted at each sample).
void distance_1d(const double* f, double* d, Index n, std::vector<Index>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  Index k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (Index q = 1; q < n; ++q) {
    const double fq = f[q] + static_cast<double>(q * q);
    double s = (fq - (f[v[k]] + static_cast<double>(v[k] * v[k]))) / static_cast<double>(2 * q - 2 * v[k]);
    while (s <= z[k]) {
      --k;
      s = (fq - (f[v[k]] + static_cast<double>(v[k] * v[k]))) / static_cast<double>(2 * q - 2 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (Index q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = static_cast<double>(q - v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Image<double> squared_distance_to(const BinaryMask& sites) {
  const Index rows = sites.rows();
  const Index cols = sites.cols();
  Image<double> dist(rows, cols);
  if (sites.size() == 0) return dist;
  dist = sites.select(Image<double>::Zero(rows, cols), Image<double>::Constant(rows, cols, kFar));

  std::vector<Index> v;
  std::vector<double> z;
  std::vector<double> line(std::max(rows, cols));
  std::vector<double> out(line.size());

  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) line[r] = dist(r, c);
    distance_1d(line.data(), out.data(), rows, v, z);
    for (Index r = 0; r < rows; ++r) dist(r, c) = out[r];
  }
  for (Index r = 0; r < rows; ++r) {
    distance_1d(&dist(r, 0), out.data(), cols, v, z);
    for (Index c = 0; c < cols; ++c) dist(r, c) = out[c];
  }
  return (dist >= kFar / 2).select(Image<double>::Constant(rows, cols, std::numeric_limits<double>::infinity()), dist);
}

BinaryMask dilate(const BinaryMask& mask, double radius) {
  if (radius <= 0.0) return mask;
  return squared_distance_to(mask) <= radius * radius;
}

BinaryMask erode(const BinaryMask& mask, double radius) {
  if (radius <= 0.0) return mask;
  return !dilate(!mask, radius);
}

}  // namespace bml
