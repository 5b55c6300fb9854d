#include "bml/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace bml {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      dst = node_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!node_.contains(key)) return std::nullopt;
    return Section(node_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : node_.items())
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_phantom(Section s, PhantomConfig& p) {
  s.get("size", p.size);
  s.get("bone_center_x_frac", p.bone_center_x_frac);
  s.get("bone_center_y_frac", p.bone_center_y_frac);
  s.get("bone_semi_x_frac", p.bone_semi_x_frac);
  s.get("bone_semi_y_frac", p.bone_semi_y_frac);
  s.get("bone_exponent", p.bone_exponent);
  s.get("boundary_perturbation", p.boundary_perturbation);
  s.get("marrow_intensity", p.marrow_intensity);
  s.get("marrow_noise", p.marrow_noise);
  s.get("marrow_smoothing", p.marrow_smoothing);
  s.get("rim_width", p.rim_width);
  s.get("rim_intensity", p.rim_intensity);
  s.get("background_intensity", p.background_intensity);
  s.get("background_variation", p.background_variation);
  s.get("background_smoothing_frac", p.background_smoothing_frac);
  s.get("background_texture", p.background_texture);
  s.get("cartilage_intensity", p.cartilage_intensity);
  s.get("cartilage_width", p.cartilage_width);
  s.finish();
}

ojson phantom_json(const PhantomConfig& p) {
  return {{"size", p.size},
          {"bone_center_x_frac", p.bone_center_x_frac},
          {"bone_center_y_frac", p.bone_center_y_frac},
          {"bone_semi_x_frac", p.bone_semi_x_frac},
          {"bone_semi_y_frac", p.bone_semi_y_frac},
          {"bone_exponent", p.bone_exponent},
          {"boundary_perturbation", p.boundary_perturbation},
          {"marrow_intensity", p.marrow_intensity},
          {"marrow_noise", p.marrow_noise},
          {"marrow_smoothing", p.marrow_smoothing},
          {"rim_width", p.rim_width},
          {"rim_intensity", p.rim_intensity},
          {"background_intensity", p.background_intensity},
          {"background_variation", p.background_variation},
          {"background_smoothing_frac", p.background_smoothing_frac},
          {"background_texture", p.background_texture},
          {"cartilage_intensity", p.cartilage_intensity},
          {"cartilage_width", p.cartilage_width}};
}

void read_dataset(Section s, RunConfig& c) {
  if (auto counts = s.child("counts")) {
    counts->get("train", c.counts.train_healthy);
    counts->get("val", c.counts.val);
    counts->get("test", c.counts.test);
    counts->finish();
  }
  s.get("size_classes", c.size_classes);
  if (auto l = s.child("lesions")) {
    l->get("lift_min", c.lesions.lift_min);
    l->get("lift_max", c.lesions.lift_max);
    l->get("softness", c.lesions.softness);
    l->get("irregularity", c.lesions.irregularity);
    l->finish();
  }
  if (auto p = s.child("image")) read_phantom(*p, c.phantom);
  s.finish();
}

void read_train(Section s, TrainSection& t) {
  if (auto a = s.child("arch")) {
    a->get("encoder_channels", t.arch.encoder_channels);
    a->get("width", t.arch.width);
    a->get("decoder_channels", t.arch.decoder_channels);
    a->get("blocks", t.arch.blocks);
    a->get("alpha", t.arch.alpha);
    a->get("kernel", t.arch.kernel);
    a->finish();
  }
  s.get("steps", t.options.steps);
  s.get("batch_size", t.options.batch_size);
  s.get("learning_rate", t.options.learning_rate);
  s.get("lambda_out", t.options.lambda_out);
  if (auto a = s.child("augment")) {
    a->get("flip_horizontal", t.options.augment.flip_horizontal);
    a->get("flip_vertical", t.options.augment.flip_vertical);
    a->get("bias_field", t.options.augment.bias_field);
    a->get("bias_order", t.options.augment.bias_order);
    a->get("bias_bound", t.options.augment.bias_bound);
    a->finish();
  }
  s.get("resolutions", t.resolutions);
  s.get("shared_model", t.shared_model);
  s.get("shared_resolution", t.shared_resolution);
  s.finish();
}

void read_detect(Section s, DetectSection& d) {
  s.get("open_radius", d.config.open_radius);
  s.get("close_radius", d.config.close_radius);
  s.get("bins", d.config.bins);
  s.get("restrict_to_bone", d.config.restrict_to_bone);
  s.get("reference_resolution", d.reference_resolution);
  std::string kind = d.inpainter == InpainterKind::kTrained ? "trained" : "classical";
  s.get("inpainter", kind);
  if (kind == "trained")
    d.inpainter = InpainterKind::kTrained;
  else if (kind == "classical")
    d.inpainter = InpainterKind::kClassical;
  else
    throw ConfigError("detect.inpainter: expected 'trained' or 'classical'");
  s.get("classical_tolerance", d.classical.tolerance);
  s.get("classical_max_iters", d.classical.max_iters);
  s.finish();
}

void read_eval(Section s, EvalSection& e) {
  s.get("resolutions", e.resolutions);
  std::string region = e.region == EvalRegion::kBone ? "bone" : "full";
  s.get("region", region);
  if (region == "bone")
    e.region = EvalRegion::kBone;
  else if (region == "full")
    e.region = EvalRegion::kFull;
  else
    throw ConfigError("eval.region: expected 'bone' or 'full'");
  s.get("groups", e.groups);
  s.get("split", e.split);
  s.finish();
}

}  // namespace

std::vector<Index> RunConfig::model_resolutions() const {
  if (train.shared_model) return {train.shared_resolution};
  return train.resolutions.empty() ? eval.resolutions : train.resolutions;
}

void RunConfig::validate() const {
  if (!seed) throw ConfigError("seed is required (config \"seed\" or --seed)");
  if (out.empty()) throw ConfigError("output directory is empty");
  try {
    phantom.validate();
    detect.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (counts.train_healthy < 0 || counts.val < 0 || counts.test < 0) throw ConfigError("dataset counts must be >= 0");
  if (size_classes.empty()) throw ConfigError("at least one size class is required");
  for (const auto& [lo, hi] : size_classes)
    if (!(lo > 0.0 && lo <= hi && hi < 1.0)) throw ConfigError("size classes need 0 < min <= max < 1");
  if (!(lesions.lift_min > 0.0 && lesions.lift_min <= lesions.lift_max && lesions.lift_max <= 1.0))
    throw ConfigError("lesion lift range must satisfy 0 < min <= max <= 1");
  if (train.options.steps < 0 || train.options.batch_size < 1 || !(train.options.learning_rate >= 0.0))
    throw ConfigError("train: steps >= 0, batch_size >= 1 and learning_rate >= 0 are required");
  if (!(train.arch.alpha >= 0.0 && train.arch.alpha < 1.0)) throw ConfigError("train.arch.alpha must lie in [0, 1)");
  if (eval.resolutions.empty()) throw ConfigError("eval.resolutions is empty");
  for (const Index r : eval.resolutions)
    if (r < 8) throw ConfigError("resolutions must be >= 8");
  for (const Index r : model_resolutions())
    if (r < 8) throw ConfigError("resolutions must be >= 8");
  if (detect.reference_resolution < 1) throw ConfigError("detect.reference_resolution must be positive");
  if (eval.groups < 0) throw ConfigError("eval.groups must be >= 0");
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section s(root, "config");
  if (root.contains("seed")) {
    std::uint64_t seed = 0;
    s.get("seed", seed);
    c.seed = seed;
  }
  std::string out = c.out.string();
  s.get("out", out);
  c.out = out;
  if (auto p = s.child("phantom")) read_dataset(*p, c);
  if (auto t = s.child("train")) read_train(*t, c.train);
  if (auto d = s.child("detect")) read_detect(*d, c.detect);
  if (auto e = s.child("eval")) read_eval(*e, c.eval);
  s.finish();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json_string(const RunConfig& c) {
  ojson root;
  if (c.seed) root["seed"] = *c.seed;
  root["out"] = c.out.string();
  root["phantom"] = {{"counts", {{"train", c.counts.train_healthy}, {"val", c.counts.val}, {"test", c.counts.test}}},
                     {"size_classes", c.size_classes},
                     {"lesions",
                      {{"lift_min", c.lesions.lift_min},
                       {"lift_max", c.lesions.lift_max},
                       {"softness", c.lesions.softness},
                       {"irregularity", c.lesions.irregularity}}},
                     {"image", phantom_json(c.phantom)}};
  const auto& t = c.train;
  root["train"] = {{"arch",
                    {{"encoder_channels", t.arch.encoder_channels},
                     {"width", t.arch.width},
                     {"decoder_channels", t.arch.decoder_channels},
                     {"blocks", t.arch.blocks},
                     {"alpha", t.arch.alpha},
                     {"kernel", t.arch.kernel}}},
                   {"steps", t.options.steps},
                   {"batch_size", t.options.batch_size},
                   {"learning_rate", t.options.learning_rate},
                   {"lambda_out", t.options.lambda_out},
                   {"augment",
                    {{"flip_horizontal", t.options.augment.flip_horizontal},
                     {"flip_vertical", t.options.augment.flip_vertical},
                     {"bias_field", t.options.augment.bias_field},
                     {"bias_order", t.options.augment.bias_order},
                     {"bias_bound", t.options.augment.bias_bound}}},
                   {"resolutions", t.resolutions},
                   {"shared_model", t.shared_model},
                   {"shared_resolution", t.shared_resolution}};
  const auto& d = c.detect;
  root["detect"] = {{"open_radius", d.config.open_radius},
                    {"close_radius", d.config.close_radius},
                    {"bins", d.config.bins},
                    {"restrict_to_bone", d.config.restrict_to_bone},
                    {"reference_resolution", d.reference_resolution},
                    {"inpainter", d.inpainter == InpainterKind::kTrained ? "trained" : "classical"},
                    {"classical_tolerance", d.classical.tolerance},
                    {"classical_max_iters", d.classical.max_iters}};
  root["eval"] = {{"resolutions", c.eval.resolutions},
                  {"region", c.eval.region == EvalRegion::kBone ? "bone" : "full"},
                  {"groups", c.eval.groups},
                  {"split", c.eval.split}};
  return root.dump(2) + "\n";
}

}  // namespace bml
