#include "bml/phantom.hpp"

#include "bml/morphology.hpp"
#include "bml/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace bml {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with periodic boundaries.
Image<double> blur_wrap(const Image<double>& in, const std::vector<double>& k) {
  const Index rows = in.rows();
  const Index cols = in.cols();
  const int radius = static_cast<int>(k.size() / 2);
  auto wrap = [](Index i, Index n) { return ((i % n) + n) % n; };
  Image<double> tmp(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * in(r, wrap(c + t, cols));
      tmp(r, c) = acc;
    }
  Image<double> out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * tmp(wrap(r + t, rows), c);
      out(r, c) = acc;
    }
  return out;
}

// White Gaussian noise blurred at `sigma`, rescaled to unit variance using
// the kernel's energy rather than the sample statistics.
Image<double> smooth_noise(Rng& rng, Index size, double sigma) {
  Image<double> noise(size, size);
  for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  if (sigma <= 0.0) return noise;
  const auto k = gaussian_kernel(sigma);
  double energy = 0.0;
  for (double v : k) energy += v * v;
  return blur_wrap(noise, k) / energy;  // std of the 2D blur is sum(k^2)
}

struct Harmonics {
  std::vector<int> order;
  std::vector<double> amplitude;
  std::vector<double> phase;

  double operator()(double theta) const {
    double v = 1.0;
    for (std::size_t i = 0; i < order.size(); ++i) v += amplitude[i] * std::cos(order[i] * theta + phase[i]);
    return v;
  }
};

Harmonics draw_harmonics(Rng& rng, int first, int last, double total_amplitude) {
  Harmonics h;
  const int n = last - first + 1;
  for (int k = first; k <= last; ++k) {
    h.order.push_back(k);
    h.amplitude.push_back(rng.uniform(0.0, total_amplitude / n));
    h.phase.push_back(rng.uniform(0.0, kTwoPi));
  }
  return h;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void require_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string("phantom: ") + name + " must lie in [0,1]");
}

}  // namespace

void PhantomConfig::validate() const {
  if (size < 16) throw std::invalid_argument("phantom: size must be at least 16");
  if (bone_exponent <= 0.0) throw std::invalid_argument("phantom: bone exponent must be positive");
  if (boundary_perturbation < 0.0 || boundary_perturbation >= 0.5)
    throw std::invalid_argument("phantom: boundary perturbation must lie in [0, 0.5)");
  const double n = static_cast<double>(size);
  const double reach = 1.0 + boundary_perturbation;
  const double cx = bone_center_x_frac * n, cy = bone_center_y_frac * n;
  const double ax = bone_semi_x_frac * n * reach, ay = bone_semi_y_frac * n * reach;
  if (bone_semi_x_frac <= 0.0 || bone_semi_y_frac <= 0.0 || cx - ax < 4.0 || cx + ax > n - 4.0 ||
      cy - ay < 4.0 || cy + ay > n - 4.0) {
    throw std::invalid_argument("phantom: bone shape violates the 4-pixel border margin");
  }
  for (auto [v, name] : {std::pair{marrow_intensity, "marrow intensity"},
                         std::pair{rim_intensity, "rim intensity"},
                         std::pair{background_intensity, "background intensity"},
                         std::pair{cartilage_intensity, "cartilage intensity"}}) {
    require_unit(v, name);
  }
  if (marrow_noise < 0.0 || background_variation < 0.0 || background_texture < 0.0 || rim_width < 0.0 ||
      cartilage_width < 0.0 || marrow_smoothing < 0.0 || background_smoothing_frac < 0.0) {
    throw std::invalid_argument("phantom: amplitudes and widths must be non-negative");
  }
}

PhantomSample gen_healthy(const PhantomConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const Index n = config.size;
  const double cx = config.bone_center_x_frac * n, cy = config.bone_center_y_frac * n;
  const double ax = config.bone_semi_x_frac * n, ay = config.bone_semi_y_frac * n;
  const Harmonics boundary = draw_harmonics(rng, 2, 5, config.boundary_perturbation);

  PhantomSample s;
  s.bone_mask = BinaryMask::Constant(n, n, false);
  s.lesion_mask = BinaryMask::Constant(n, n, false);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const double u = (c + 0.5 - cx) / ax;
      const double v = (r + 0.5 - cy) / ay;
      const double rho = std::pow(std::pow(std::abs(u), config.bone_exponent) +
                                      std::pow(std::abs(v), config.bone_exponent),
                                  1.0 / config.bone_exponent);
      s.bone_mask(r, c) = rho <= boundary(std::atan2(v, u));
    }
  }

  const BinaryMask rim = s.bone_mask && !erode(s.bone_mask, config.rim_width);
  BinaryMask cartilage = dilate(s.bone_mask, config.cartilage_width) && !s.bone_mask;
  for (Index r = 0; r < n; ++r)
    if (r + 0.5 <= cy) cartilage.row(r).setConstant(false);

  const Image<double> tissue = smooth_noise(rng, n, config.background_smoothing_frac * n);
  const Image<double> texture = smooth_noise(rng, n, 1.0);
  const Image<double> marrow = smooth_noise(rng, n, config.marrow_smoothing);

  Image<double> img = config.background_intensity + config.background_variation * tissue +
                      config.background_texture * texture;
  img = cartilage.select(config.cartilage_intensity + config.background_texture * texture, img);
  img = s.bone_mask.select(config.marrow_intensity + config.marrow_noise * marrow, img);
  img = rim.select(Image<double>::Constant(n, n, config.rim_intensity), img);
  s.image = img.cwiseMax(0.0).cwiseMin(1.0);
  return s;
}

BinaryMask lesion_support(const PhantomConfig& config, const BinaryMask& bone) {
  return erode(bone, config.rim_width);
}

PhantomSample inject_lesion(const PhantomConfig& config, const PhantomSample& sample,
                            const LesionSpec& spec, std::uint64_t seed) {
  if (!(spec.lift > 0.0 && spec.lift <= 1.0)) throw std::invalid_argument("inject_lesion: lift must lie in (0, 1]");
  if (!(spec.target_area >= 1.0)) throw std::invalid_argument("inject_lesion: target area must be at least one pixel");
  if (spec.softness < 0.0 || spec.irregularity < 0.0 || spec.irregularity >= 1.0)
    throw std::invalid_argument("inject_lesion: softness must be >= 0 and irregularity in [0, 1)");
  if (!sample.bone_mask.any()) throw std::invalid_argument("inject_lesion: empty bone mask");

  const Index rows = sample.image.rows(), cols = sample.image.cols();
  const BinaryMask support = lesion_support(config, sample.bone_mask);
  const auto cr = static_cast<Index>(std::floor(spec.center_row));
  const auto cc = static_cast<Index>(std::floor(spec.center_col));
  if (cr < 0 || cr >= rows || cc < 0 || cc >= cols || !support(cr, cc))
    throw std::invalid_argument("inject_lesion: center lies outside the bone interior");

  Rng rng(seed);
  const Harmonics shape = draw_harmonics(rng, 2, 4, spec.irregularity);

  struct Candidate {
    double rho;
    Index r, c;
  };
  std::vector<Candidate> candidates;
  const double radius = std::sqrt(spec.target_area / std::numbers::pi);
  const auto reach = static_cast<Index>(std::ceil(radius / (1.0 - spec.irregularity) * 1.5 + 3.0));
  for (Index r = std::max<Index>(0, cr - reach); r <= std::min(rows - 1, cr + reach); ++r) {
    for (Index c = std::max<Index>(0, cc - reach); c <= std::min(cols - 1, cc + reach); ++c) {
      const double dr = r - spec.center_row, dc = c - spec.center_col;
      candidates.push_back({std::hypot(dr, dc) / shape(std::atan2(dr, dc)), r, c});
    }
  }
  const auto wanted = static_cast<std::size_t>(std::llround(spec.target_area));
  if (candidates.size() <= wanted) throw std::domain_error("inject_lesion: lesion does not fit inside the image");
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.rho != b.rho ? a.rho < b.rho : (a.r != b.r ? a.r < b.r : a.c < b.c);
  });
  const double cutoff = candidates[wanted - 1].rho;

  PhantomSample out = sample;
  out.lesion_mask = BinaryMask::Constant(rows, cols, false);
  for (const auto& cand : candidates) {
    if (cand.rho > cutoff) break;
    if (!support(cand.r, cand.c)) throw std::domain_error("inject_lesion: lesion does not fit inside the bone interior");
    out.lesion_mask(cand.r, cand.c) = true;
  }

  Image<double> falloff;
  if (spec.softness > 0.0) {
    const Image<double> depth_in = squared_distance_to(!out.lesion_mask).sqrt() - 0.5;
    const Image<double> depth_out = squared_distance_to(out.lesion_mask).sqrt() - 0.5;
    const Image<double> signed_depth = out.lesion_mask.select(depth_in, -depth_out);
    falloff = signed_depth.unaryExpr([&](double d) { return std_normal_cdf(d / spec.softness); });
  } else {
    falloff = out.lesion_mask.cast<double>();
  }
  out.image = sample.bone_mask.select((sample.image + spec.lift * falloff).cwiseMin(1.0), sample.image);
  return out;
}

// --- datasets ------------------------------------------------------------------

std::vector<SizeClass> default_size_classes() {
  return {{0.005, 0.010}, {0.010, 0.020}, {0.020, 0.035}, {0.035, 0.055}, {0.055, 0.080}};
}

std::vector<const ManifestEntry*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(&e);
  return out;
}

namespace {

std::uint64_t split_stream(const std::string& split) {
  if (split == "train") return 1;
  if (split == "val") return 2;
  if (split == "test") return 3;
  throw std::invalid_argument("unknown split '" + split + "'");
}

}  // namespace

PhantomSample dataset_sample(const PhantomConfig& config, const std::string& split, int index,
                             const std::vector<SizeClass>& size_classes,
                             const LesionSampling& lesions, std::uint64_t seed,
                             std::optional<int>* size_class) {
  const std::uint64_t sample_seed = derive_seed(seed, split_stream(split), static_cast<std::uint64_t>(index));
  PhantomSample sample = gen_healthy(config, sample_seed);
  if (size_class) size_class->reset();
  if (split == "train") return sample;
  if (size_classes.empty()) throw std::invalid_argument("dataset: at least one size class is required");

  const int k = index % static_cast<int>(size_classes.size());
  if (size_class) *size_class = k;
  Rng rng(derive_seed(sample_seed, 7, 0));
  const auto [lo, hi] = size_classes[k];
  const double bone_area = static_cast<double>(sample.bone_mask.count());
  LesionSpec spec;
  spec.target_area = std::max(1.0, rng.uniform(lo, hi) * bone_area);
  spec.lift = rng.uniform(lesions.lift_min, lesions.lift_max);
  spec.softness = lesions.softness;
  spec.irregularity = lesions.irregularity;

  const double max_radius = std::sqrt(spec.target_area / std::numbers::pi) * (1.0 + spec.irregularity);
  const BinaryMask feasible = erode(lesion_support(config, sample.bone_mask), max_radius + 1.0);
  std::vector<Index> centers;
  for (Index i = 0; i < feasible.size(); ++i)
    if (feasible.data()[i]) centers.push_back(i);
  if (centers.empty()) throw std::domain_error("dataset: size class too large for the bone interior");
  const Index pick = centers[rng.below(centers.size())];
  spec.center_row = static_cast<double>(pick / feasible.cols());
  spec.center_col = static_cast<double>(pick % feasible.cols());
  return inject_lesion(config, sample, spec, derive_seed(sample_seed, 8, 0));
}

Manifest gen_dataset(const PhantomConfig& config, const SplitCounts& counts,
                     const std::vector<SizeClass>& size_classes, const LesionSampling& lesions,
                     std::uint64_t seed, const fs::path& out_dir) {
  if (counts.train_healthy < 1 || counts.val < 1 || counts.test < 1)
    throw std::invalid_argument("dataset: every split needs at least one sample");
  config.validate();
  for (const char* sub : {"images", "bone", "lesion"}) fs::create_directories(out_dir / sub);

  Manifest manifest;
  manifest.root = out_dir;
  const std::pair<const char*, int> splits[] = {
      {"train", counts.train_healthy}, {"val", counts.val}, {"test", counts.test}};
  for (const auto& [split, n] : splits) {
    for (int i = 0; i < n; ++i) {
      ManifestEntry e;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04d", split, i);
      e.id = id;
      e.split = split;
      e.image_path = "images/" + e.id + ".png";
      e.bone_mask_path = "bone/" + e.id + ".png";
      e.lesion_mask_path = "lesion/" + e.id + ".png";
      const PhantomSample s = dataset_sample(config, split, i, size_classes, lesions, seed, &e.size_class);
      e.lesion_area_px = s.lesion_mask.count();
      e.bone_area_px = s.bone_mask.count();
      save_image(s.image, out_dir / e.image_path, BitDepth::k16);
      save_mask(s.bone_mask, out_dir / e.bone_mask_path);
      save_mask(s.lesion_mask, out_dir / e.lesion_mask_path);
      manifest.entries.push_back(std::move(e));
    }
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["split"] = e.split;
    j["image_path"] = e.image_path;
    j["bone_mask_path"] = e.bone_mask_path;
    j["lesion_mask_path"] = e.lesion_mask_path;
    j["lesion_area_px"] = e.lesion_area_px;
    j["size_class"] = e.size_class ? nlohmann::ordered_json(*e.size_class) : nlohmann::ordered_json(nullptr);
    j["bone_area_px"] = e.bone_area_px;
    list.push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << list.dump(1) << "\n";
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open manifest");
  nlohmann::json list;
  try {
    list = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (!list.is_array()) throw std::runtime_error(path.string() + ": manifest must be a JSON list");
  Manifest manifest;
  manifest.root = path.parent_path();
  for (const auto& j : list) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.split = j.at("split").get<std::string>();
    e.image_path = j.at("image_path").get<std::string>();
    e.bone_mask_path = j.at("bone_mask_path").get<std::string>();
    e.lesion_mask_path = j.at("lesion_mask_path").get<std::string>();
    e.lesion_area_px = j.value("lesion_area_px", Index{0});
    if (j.contains("size_class") && !j["size_class"].is_null()) e.size_class = j["size_class"].get<int>();
    e.bone_area_px = j.value("bone_area_px", Index{0});
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace bml
