#pragma once

#include "bml/image.hpp"
#include "bml/io.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bml {

/// Synthetic knee-like slice: a superellipse bone with a dark cortical rim and
/// textured marrow, bright cartilage along the lower articular surface, and a
/// smoothly varying soft-tissue background. Lengths without a suffix are in
/// pixels; `_frac` values are fractions of the image size.
struct PhantomConfig {
  Index size = 128;

  double bone_center_x_frac = 0.50;
  double bone_center_y_frac = 0.45;
  double bone_semi_x_frac = 0.36;
  double bone_semi_y_frac = 0.30;
  double bone_exponent = 2.5;
  double boundary_perturbation = 0.04;

  double marrow_intensity = 0.30;
  double marrow_noise = 0.04;
  double marrow_smoothing = 1.5;

  double rim_width = 2.0;
  double rim_intensity = 0.08;

  double background_intensity = 0.40;
  double background_variation = 0.10;
  double background_smoothing_frac = 0.10;
  double background_texture = 0.03;

  double cartilage_intensity = 0.60;
  double cartilage_width = 3.0;

  /// Throws std::invalid_argument when the bone would come within 4 pixels of
  /// the image border or an intensity lies outside [0,1].
  void validate() const;
};

struct LesionSpec {
  double target_area = 0.0;  ///< pixels
  double center_row = 0.0;
  double center_col = 0.0;
  double lift = 0.3;          ///< in (0, 1]
  double softness = 1.0;      ///< Gaussian falloff sigma, pixels
  double irregularity = 0.3;  ///< relative radial perturbation amplitude
};

struct PhantomSample {
  GrayImage image;
  BinaryMask bone_mask;
  BinaryMask lesion_mask;
};

PhantomSample gen_healthy(const PhantomConfig& config, std::uint64_t seed);

/// Bone interior available to lesions: the bone mask eroded by the rim width.
BinaryMask lesion_support(const PhantomConfig& config, const BinaryMask& bone);

/// Adds one lesion. The realized mask is the `target_area` pixels with the
/// smallest normalized radius from the center, so its area matches the
/// target up to ties. Throws std::invalid_argument on a bad spec and
/// std::domain_error when the lesion does not fit inside the bone interior.
PhantomSample inject_lesion(const PhantomConfig& config, const PhantomSample& sample,
                            const LesionSpec& spec, std::uint64_t seed);

// --- datasets ------------------------------------------------------------------

struct SplitCounts {
  int train_healthy = 200;
  int val = 25;
  int test = 50;
};

/// Lesion area range as fractions of the bone area.
using SizeClass = std::array<double, 2>;

std::vector<SizeClass> default_size_classes();

struct LesionSampling {
  double lift_min = 0.25;
  double lift_max = 0.40;
  double softness = 1.0;
  double irregularity = 0.3;
};

struct ManifestEntry {
  std::string id;
  std::string split;  ///< "train", "val" or "test"
  std::string image_path;
  std::string bone_mask_path;
  std::string lesion_mask_path;
  Index lesion_area_px = 0;
  std::optional<int> size_class;
  Index bone_area_px = 0;
};

struct Manifest {
  fs::path root;  ///< directory the relative paths resolve against
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(const std::string& name) const;
  fs::path resolve(const std::string& relative) const { return root / relative; }
};

/// Builds one in-memory sample of the dataset; index is the position inside
/// its split. Exposed so callers can regenerate a sample without disk I/O.
PhantomSample dataset_sample(const PhantomConfig& config, const std::string& split, int index,
                             const std::vector<SizeClass>& size_classes,
                             const LesionSampling& lesions, std::uint64_t seed,
                             std::optional<int>* size_class = nullptr);

/// Writes images/, bone/, lesion/ and manifest.json under `out_dir`.
/// Val/test sample i gets size class i mod K.
Manifest gen_dataset(const PhantomConfig& config, const SplitCounts& counts,
                     const std::vector<SizeClass>& size_classes, const LesionSampling& lesions,
                     std::uint64_t seed, const fs::path& out_dir);

void save_manifest(const Manifest& manifest, const fs::path& path);
Manifest load_manifest(const fs::path& path);

}  // namespace bml
