#pragma once

#include "bml/detect.hpp"
#include "bml/image.hpp"
#include "bml/phantom.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bml {

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

/// Counts over pixels with region = 1. Throws on shape mismatch or an empty region.
Confusion confusion(const BinaryMask& pred, const BinaryMask& truth, const BinaryMask& region);

struct MetricsRecord {
  std::string slice_id;
  Confusion counts;
  double dice = 0.0, iou = 0.0, sensitivity = 0.0, specificity = 0.0, accuracy = 0.0;
};

/// Empty truth: dice, iou and sensitivity are 1 when the prediction is also
/// empty and 0 otherwise. Specificity is 1 when there are no negatives.
MetricsRecord metrics(const Confusion& counts, std::string slice_id = {});

struct SizeGroupReport {
  int group = 0;                          ///< 1-based, smallest lesions first
  double area_min = 0.0, area_max = 0.0;  ///< lesion area / bone area
  double mean_dice = 0.0, mean_iou = 0.0;
  int count = 0;
};

struct SizedRecord {
  MetricsRecord record;
  double relative_area = 0.0;  ///< lesion px / bone px
};

/// Sorts by (relative area, slice id) and cuts into `n_groups` contiguous
/// groups; group g holds positions [floor(g N / G), floor((g + 1) N / G)).
/// Throws when a record has no lesion or there are fewer records than groups.
std::vector<SizeGroupReport> stratify_by_size(std::vector<SizedRecord> records, int n_groups = 5);

/// Macro-average of a set of records. Counts are summed.
MetricsRecord mean_metrics(const std::vector<MetricsRecord>& records, std::string label = "mean");

enum class EvalRegion { kBone, kFull };

struct SweepOptions {
  std::vector<Index> resolutions{128, 192, 256, 320, 448};
  DetectConfig detect;          ///< radii at the reference resolution
  Index reference_resolution = 128;
  EvalRegion region = EvalRegion::kBone;
  int groups = 5;
  std::string split = "test";
  /// Called with each slice's trace, e.g. to dump masks.
  std::function<void(Index resolution, const ManifestEntry&, const PipelineTrace&)> on_slice;
};

struct ResolutionResult {
  Index resolution = 0;
  std::vector<MetricsRecord> records;  ///< manifest order
  MetricsRecord summary;
  std::vector<SizeGroupReport> groups;  ///< empty when stratification is impossible
};

/// Returns the inpainter used at a resolution; throws when none exists.
using InpainterProvider = std::function<Inpainter(Index resolution)>;

/// Final mask for one slice already resampled to `resolution`.
using SlicePredictor = std::function<BinaryMask(Index resolution, const ManifestEntry& entry, const GrayImage& x,
                                                const BinaryMask& bone)>;

/// Scores `predict` over one split at every resolution. Slices are resized
/// from their stored size (image bilinear, masks bilinear then >= 0.5).
/// `on_slice` is not called.
std::vector<ResolutionResult> evaluate_split(const Manifest& manifest, const SlicePredictor& predict,
                                             const SweepOptions& options);

/// evaluate_split with the full detection pipeline as the predictor.
std::vector<ResolutionResult> sweep_report(const Manifest& manifest, const InpainterProvider& provider,
                                           const SweepOptions& options);

/// Per-slice rows followed by one summary row per resolution (slice_id "mean").
std::string metrics_csv(const std::vector<ResolutionResult>& results);
/// One row per resolution.
std::string sweep_csv(const std::vector<ResolutionResult>& results);
/// Everything above plus the size-group tables.
std::string report_json(const std::vector<ResolutionResult>& results);

}  // namespace bml
