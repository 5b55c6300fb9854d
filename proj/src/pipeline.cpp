#include "bml/pipeline.hpp"

#include "bml/nn/checkpoint.hpp"
#include "bml/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace bml {
namespace {

constexpr std::uint64_t kDatasetStream = 101;
constexpr std::uint64_t kTrainStream = 102;
constexpr std::uint64_t kInitStream = 103;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Manifest require_manifest(const RunLayout& layout) {
  if (!fs::exists(layout.manifest()))
    throw std::runtime_error("dataset missing: " + layout.manifest().string() + " (run 'phantom' first)");
  return load_manifest(layout.manifest());
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string format_f(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

fs::path RunLayout::checkpoint(Index resolution) const {
  return models() / ("inpainter_" + std::to_string(resolution) + ".ckpt");
}
fs::path RunLayout::loss_trace(Index resolution) const {
  return models() / ("loss_" + std::to_string(resolution) + ".csv");
}
fs::path RunLayout::detect(Index resolution) const { return root / "detect" / std::to_string(resolution); }

std::uint64_t dataset_seed(const RunConfig& config) { return derive_seed(config.seed.value(), kDatasetStream, 0); }
std::uint64_t train_seed(const RunConfig& config, Index resolution) {
  return derive_seed(config.seed.value(), kTrainStream, static_cast<std::uint64_t>(resolution));
}
std::uint64_t init_seed(const RunConfig& config, Index resolution) {
  return derive_seed(config.seed.value(), kInitStream, static_cast<std::uint64_t>(resolution));
}

Manifest cmd_phantom(const RunConfig& config) {
  config.validate();
  const RunLayout layout{config.out};
  return gen_dataset(config.phantom, config.counts, config.size_classes, config.lesions, dataset_seed(config),
                     layout.dataset());
}

void cmd_train(const RunConfig& config, std::ostream* log) {
  config.validate();
  const RunLayout layout{config.out};
  const Manifest manifest = require_manifest(layout);
  fs::create_directories(layout.models());
  for (const Index res : config.model_resolutions()) {
    const auto samples = nn::load_training_split(manifest, res);
    nn::InpainterModel<float> model(config.train.arch, init_seed(config, res));
    nn::TrainOptions options = config.train.options;
    options.seed = train_seed(config, res);
    const int every = std::max(1, options.steps / 20);
    if (log)
      options.on_step = [&](int step, double loss) {
        if (step % every == 0 || step + 1 == options.steps)
          *log << "train[" << res << "] step " << step << " loss " << format_g(loss) << "\n" << std::flush;
      };
    const std::vector<double> trace = nn::train(model, samples, options);
    model.record().resolution = res;
    nn::save_checkpoint(model, layout.checkpoint(res));
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) csv += std::to_string(i) + "," + format_g(trace[i]) + "\n";
    write_text(layout.loss_trace(res), csv);
  }
}

Inpainter make_inpainter(const RunConfig& config, Index resolution, bool force_classical) {
  if (force_classical || config.detect.inpainter == InpainterKind::kClassical) {
    const ClassicalOptions opts = config.detect.classical;
    return [opts](const GrayImage& x, const BinaryMask& m) { return classical_inpaint(x, m, opts); };
  }
  const RunLayout layout{config.out};
  const Index model_res = config.train.shared_model ? config.train.shared_resolution : resolution;
  const fs::path ckpt = layout.checkpoint(model_res);
  if (!fs::exists(ckpt))
    throw std::runtime_error("missing model for resolution " + std::to_string(resolution) + ": " + ckpt.string());
  auto model = std::make_shared<nn::InpainterModel<float>>(nn::load_checkpoint(ckpt));
  return [model](const GrayImage& x, const BinaryMask& m) { return inpaint(*model, x, m); };
}

RgbImage overlay_contour(const GrayImage& image, const BinaryMask& mask) {
  require_same_shape(image, mask, "overlay");
  const Image<std::uint16_t> gray = quantize(image, BitDepth::k8);
  RgbImage rgb;
  for (auto& plane : rgb) plane = gray.cast<std::uint8_t>();
  const Index h = mask.rows(), w = mask.cols();
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      if (!mask(r, c)) continue;
      const bool edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w || !mask(r - 1, c) || !mask(r + 1, c) ||
                        !mask(r, c - 1) || !mask(r, c + 1);
      if (!edge) continue;
      rgb[0](r, c) = 255;
      rgb[1](r, c) = 0;
      rgb[2](r, c) = 0;
    }
  }
  return rgb;
}

void write_trace(const PipelineTrace& t, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  auto img = [&](const GrayImage& g, const char* stage) { save_image(g, dir / (stem + "_" + stage + ".png")); };
  auto msk = [&](const BinaryMask& m, const char* stage) { img(m.cast<double>(), stage); };
  img(t.x, "x");
  img(t.recon, "recon");
  img(t.x_eq, "x_he");
  img(t.recon_eq, "recon_he");
  img(t.diff, "NZ");
  msk(t.otsu_mask, "OT");
  msk(t.open_mask, "MO");
  msk(t.final_mask, "MC");
}

int cmd_detect(const RunConfig& config, const DetectRequest& request) {
  config.validate();
  const RunLayout layout{config.out};
  int processed = 0;
  auto emit = [&](const fs::path& dir, const std::string& stem, const PipelineTrace& trace) {
    fs::create_directories(dir);
    save_mask(trace.final_mask, dir / (stem + ".png"));
    if (request.trace) write_trace(trace, dir / "trace", stem);
    if (request.overlay) {
      fs::create_directories(dir / "overlay");
      save_rgb_png(overlay_contour(trace.x, trace.final_mask), dir / "overlay" / (stem + ".png"));
    }
    ++processed;
  };

  if (!request.inputs.empty()) {
    for (const auto& [image_path, bone_path] : request.inputs) {
      const GrayImage x = load_image(image_path);
      const BinaryMask bone = load_mask(bone_path);
      require_same_shape(x, bone, "detect: image and bone mask");
      if (x.rows() != x.cols()) throw std::invalid_argument("detect: slices must be square");
      const Index res = x.rows();
      const Inpainter inpainter = make_inpainter(config, res, request.classical);
      const DetectConfig detect = config.detect.config.scaled_to(res, config.detect.reference_resolution);
      emit(layout.detect(res), image_path.stem().string(), run_pipeline(x, bone, inpainter, detect));
    }
    return processed;
  }

  const Manifest manifest = require_manifest(layout);
  SweepOptions options;
  options.resolutions = config.eval.resolutions;
  options.detect = config.detect.config;
  options.reference_resolution = config.detect.reference_resolution;
  options.region = config.eval.region;
  options.groups = 0;
  options.split = config.eval.split;
  options.on_slice = [&](Index res, const ManifestEntry& e, const PipelineTrace& trace) {
    emit(layout.detect(res), e.id, trace);
  };
  sweep_report(manifest, [&](Index res) { return make_inpainter(config, res, request.classical); }, options);
  return processed;
}

std::vector<ResolutionResult> cmd_eval(const RunConfig& config) {
  config.validate();
  const RunLayout layout{config.out};
  const Manifest manifest = require_manifest(layout);
  SweepOptions options;
  options.resolutions = config.eval.resolutions;
  options.region = config.eval.region;
  options.groups = config.eval.groups;
  options.split = config.eval.split;
  auto predicted = [&](Index res, const ManifestEntry& e, const GrayImage& x, const BinaryMask&) {
    const fs::path path = layout.detect(res) / (e.id + ".png");
    if (!fs::exists(path)) throw std::runtime_error("prediction missing: " + path.string() + " (run 'detect' first)");
    BinaryMask m = load_mask(path);
    require_same_shape(m, x, "eval: predicted mask");
    return m;
  };
  const auto results = evaluate_split(manifest, predicted, options);
  write_text(layout.eval() / "metrics.csv", metrics_csv(results));
  write_text(layout.eval() / "sweep.csv", sweep_csv(results));
  write_text(layout.eval() / "report.json", report_json(results));
  return results;
}

std::string cmd_report(const RunConfig& config) {
  config.validate();
  const RunLayout layout{config.out};
  const fs::path path = layout.eval() / "report.json";
  if (!fs::exists(path)) throw std::runtime_error("report missing: " + path.string() + " (run 'eval' first)");
  const auto doc = nlohmann::json::parse(read_text(path));

  std::string md = "# Detection report\n\n| resolution | slices | dice | iou | sensitivity | specificity | accuracy |\n";
  md += "|---|---|---|---|---|---|---|\n";
  for (const auto& r : doc) {
    const auto& s = r.at("summary");
    md += "| " + std::to_string(r.at("resolution").get<Index>()) + " | " + std::to_string(r.at("slices").size());
    for (const char* k : {"dice", "iou", "sensitivity", "specificity", "accuracy"})
      md += " | " + format_f(s.at(k).get<double>());
    md += " |\n";
  }
  for (const auto& r : doc) {
    if (r.at("size_groups").empty()) continue;
    md += "\n## Lesion size groups at " + std::to_string(r.at("resolution").get<Index>()) + "\n\n";
    md += "| group | relative area | slices | dice | iou |\n|---|---|---|---|---|\n";
    for (const auto& g : r.at("size_groups"))
      md += "| " + std::to_string(g.at("group").get<int>()) + " | " + format_f(g.at("area_min").get<double>()) +
            " - " + format_f(g.at("area_max").get<double>()) + " | " + std::to_string(g.at("count").get<int>()) +
            " | " + format_f(g.at("mean_dice").get<double>()) + " | " + format_f(g.at("mean_iou").get<double>()) +
            " |\n";
  }
  write_text(layout.report(), md);
  return md;
}

}  // namespace bml
