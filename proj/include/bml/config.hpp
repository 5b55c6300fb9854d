#pragma once

#include "bml/detect.hpp"
#include "bml/eval.hpp"
#include "bml/inpaint.hpp"
#include "bml/nn/train.hpp"
#include "bml/phantom.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bml {

/// Raised for malformed or incomplete configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainSection {
  nn::ArchConfig arch;
  nn::TrainOptions options;  ///< seed is derived from the run seed
  /// Resolutions that get their own model. Empty means the eval resolutions.
  std::vector<Index> resolutions;
  /// Serve every resolution with the model trained at `shared_resolution`.
  bool shared_model = false;
  Index shared_resolution = 128;
};

enum class InpainterKind { kTrained, kClassical };

struct DetectSection {
  DetectConfig config;
  Index reference_resolution = 128;  ///< resolution the radii are given at
  InpainterKind inpainter = InpainterKind::kTrained;
  ClassicalOptions classical;
};

struct EvalSection {
  std::vector<Index> resolutions{128};
  EvalRegion region = EvalRegion::kBone;
  int groups = 5;
  std::string split = "test";
};

/// One experiment. Every section is optional in the JSON file except the
/// seed, which may instead come from the command line.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  fs::path out = "run";

  PhantomConfig phantom;
  SplitCounts counts;
  std::vector<SizeClass> size_classes = default_size_classes();
  LesionSampling lesions;

  TrainSection train;
  DetectSection detect;
  EvalSection eval;

  /// Resolutions that need a trained model.
  std::vector<Index> model_resolutions() const;

  /// Throws ConfigError on any violated constraint.
  void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const fs::path& path);

/// Canonical JSON form; parse_run_config(to_json_string(c)) round-trips.
std::string to_json_string(const RunConfig& config);

}  // namespace bml
