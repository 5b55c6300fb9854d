#pragma once

#include "bml/config.hpp"
#include "bml/eval.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bml {

/// Output tree under RunConfig::out:
///   dataset/            manifest.json, images/, bone/, lesion/
///   models/             inpainter_<res>.ckpt, loss_<res>.csv
///   detect/<res>/       <id>.png final masks
///     trace/            <id>_<stage>.png (16-bit)
///     overlay/          <id>.png (RGB, contour in red)
///   eval/               metrics.csv, sweep.csv, report.json
///   report.md
struct RunLayout {
  fs::path root;

  fs::path dataset() const { return root / "dataset"; }
  fs::path manifest() const { return dataset() / "manifest.json"; }
  fs::path models() const { return root / "models"; }
  fs::path checkpoint(Index resolution) const;
  fs::path loss_trace(Index resolution) const;
  fs::path detect(Index resolution) const;
  fs::path eval() const { return root / "eval"; }
  fs::path report() const { return root / "report.md"; }
};

/// Seeds derived from the run seed, one stream per purpose.
std::uint64_t dataset_seed(const RunConfig& config);
std::uint64_t train_seed(const RunConfig& config, Index resolution);
std::uint64_t init_seed(const RunConfig& config, Index resolution);

/// Generates the phantom dataset.
Manifest cmd_phantom(const RunConfig& config);

/// Trains one model per required resolution, writing checkpoints and loss traces.
void cmd_train(const RunConfig& config, std::ostream* log = nullptr);

/// Inpainter for `resolution` as configured (loads a checkpoint when trained).
Inpainter make_inpainter(const RunConfig& config, Index resolution, bool force_classical = false);

struct DetectRequest {
  bool classical = false;
  bool trace = false;
  bool overlay = false;
  /// Explicit (image, bone mask) pairs; empty means the configured dataset split.
  std::vector<std::pair<fs::path, fs::path>> inputs;
};

/// Writes final masks (and optionally traces/overlays). Returns the number of slices processed.
int cmd_detect(const RunConfig& config, const DetectRequest& request);

/// Scores the masks written by cmd_detect and writes the eval/ reports.
std::vector<ResolutionResult> cmd_eval(const RunConfig& config);

/// Renders eval/report.json as a markdown summary.
std::string cmd_report(const RunConfig& config);

/// Gray image with the mask contour (mask pixels with a 4-neighbour outside it) in red.
RgbImage overlay_contour(const GrayImage& image, const BinaryMask& mask);

/// Writes every stage of a trace as 16-bit PNGs named <stem>_<stage>.png.
void write_trace(const PipelineTrace& trace, const fs::path& dir, const std::string& stem);

}  // namespace bml
