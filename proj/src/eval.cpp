#include "bml/eval.hpp"

#include "bml/resample.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace bml {
namespace {

double ratio_or(std::int64_t num, std::int64_t den, double fallback) {
  return den == 0 ? fallback : static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_row(Index resolution, const MetricsRecord& m) {
  std::string row = std::to_string(resolution) + "," + m.slice_id;
  for (const auto v : {m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn}) row += "," + std::to_string(v);
  for (const double v : {m.dice, m.iou, m.sensitivity, m.specificity, m.accuracy}) row += "," + fixed(v);
  return row + "\n";
}

nlohmann::ordered_json record_json(const MetricsRecord& m) {
  return {{"slice_id", m.slice_id},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"tn", m.counts.tn},
          {"fn", m.counts.fn},
          {"dice", m.dice},
          {"iou", m.iou},
          {"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"accuracy", m.accuracy}};
}

}  // namespace

Confusion confusion(const BinaryMask& pred, const BinaryMask& truth, const BinaryMask& region) {
  require_same_shape(pred, truth, "confusion");
  require_same_shape(pred, region, "confusion");
  if (!region.any()) throw std::invalid_argument("confusion: empty evaluation region");
  Confusion c;
  c.tp = (pred && truth && region).count();
  c.fp = (pred && !truth && region).count();
  c.fn = (!pred && truth && region).count();
  c.tn = (!pred && !truth && region).count();
  return c;
}

MetricsRecord metrics(const Confusion& c, std::string slice_id) {
  MetricsRecord m;
  m.slice_id = std::move(slice_id);
  m.counts = c;
  const bool nothing_to_find = c.tp + c.fn == 0;
  const double empty_truth = (nothing_to_find && c.fp == 0) ? 1.0 : 0.0;
  m.dice = ratio_or(2 * c.tp, 2 * c.tp + c.fp + c.fn, empty_truth);
  m.iou = ratio_or(c.tp, c.tp + c.fp + c.fn, empty_truth);
  m.sensitivity = ratio_or(c.tp, c.tp + c.fn, empty_truth);
  m.specificity = ratio_or(c.tn, c.tn + c.fp, 1.0);
  m.accuracy = ratio_or(c.tp + c.tn, c.total(), 1.0);
  return m;
}

std::vector<SizeGroupReport> stratify_by_size(std::vector<SizedRecord> records, int n_groups) {
  if (n_groups < 1) throw std::invalid_argument("stratify_by_size: need at least one group");
  if (records.size() < static_cast<std::size_t>(n_groups))
    throw std::invalid_argument("stratify_by_size: fewer records than groups");
  for (const auto& r : records)
    if (!(r.relative_area > 0.0))
      throw std::invalid_argument("stratify_by_size: record '" + r.record.slice_id + "' has no lesion");
  std::sort(records.begin(), records.end(), [](const SizedRecord& a, const SizedRecord& b) {
    if (a.relative_area != b.relative_area) return a.relative_area < b.relative_area;
    return a.record.slice_id < b.record.slice_id;
  });

  const std::size_t n = records.size();
  std::vector<SizeGroupReport> out;
  for (int g = 0; g < n_groups; ++g) {
    const std::size_t lo = n * g / n_groups, hi = n * (g + 1) / n_groups;
    SizeGroupReport rep;
    rep.group = g + 1;
    rep.count = static_cast<int>(hi - lo);
    rep.area_min = records[lo].relative_area;
    rep.area_max = records[hi - 1].relative_area;
    for (std::size_t i = lo; i < hi; ++i) {
      rep.mean_dice += records[i].record.dice;
      rep.mean_iou += records[i].record.iou;
    }
    rep.mean_dice /= rep.count;
    rep.mean_iou /= rep.count;
    out.push_back(rep);
  }
  return out;
}

MetricsRecord mean_metrics(const std::vector<MetricsRecord>& records, std::string label) {
  MetricsRecord m;
  m.slice_id = std::move(label);
  if (records.empty()) return m;
  for (const auto& r : records) {
    m.counts.tp += r.counts.tp;
    m.counts.fp += r.counts.fp;
    m.counts.tn += r.counts.tn;
    m.counts.fn += r.counts.fn;
    m.dice += r.dice;
    m.iou += r.iou;
    m.sensitivity += r.sensitivity;
    m.specificity += r.specificity;
    m.accuracy += r.accuracy;
  }
  const auto n = static_cast<double>(records.size());
  m.dice /= n;
  m.iou /= n;
  m.sensitivity /= n;
  m.specificity /= n;
  m.accuracy /= n;
  return m;
}

std::vector<ResolutionResult> evaluate_split(const Manifest& manifest, const SlicePredictor& predict,
                                             const SweepOptions& options) {
  if (options.resolutions.empty()) throw std::invalid_argument("evaluate: no resolutions");
  const auto entries = manifest.split(options.split);
  if (entries.empty()) throw std::invalid_argument("evaluate: split '" + options.split + "' is empty");

  std::vector<ResolutionResult> out;
  for (const Index res : options.resolutions) {
    if (res < 8) throw std::invalid_argument("evaluate: resolution too small");
    ResolutionResult result;
    result.resolution = res;
    std::vector<SizedRecord> sized;
    for (const ManifestEntry* e : entries) {
      GrayImage x = load_image(manifest.resolve(e->image_path));
      BinaryMask bone = load_mask(manifest.resolve(e->bone_mask_path));
      BinaryMask truth = load_mask(manifest.resolve(e->lesion_mask_path));
      require_same_shape(x, bone, e->id.c_str());
      require_same_shape(x, truth, e->id.c_str());
      if (x.rows() != res || x.cols() != res) {
        x = resize_bilinear(x, res, res);
        bone = resize_mask(bone, res, res);
        truth = resize_mask(truth, res, res);
      }
      const BinaryMask pred = predict(res, *e, x, bone);
      const BinaryMask region =
          options.region == EvalRegion::kBone ? bone : BinaryMask::Constant(x.rows(), x.cols(), true);
      result.records.push_back(metrics(confusion(pred, truth, region), e->id));
      const Index truth_px = count(truth);
      if (truth_px > 0)
        sized.push_back({result.records.back(), static_cast<double>(truth_px) / static_cast<double>(count(bone))});
    }
    result.summary = mean_metrics(result.records);
    if (options.groups > 0 && sized.size() >= static_cast<std::size_t>(options.groups))
      result.groups = stratify_by_size(sized, options.groups);
    out.push_back(std::move(result));
  }
  return out;
}

std::vector<ResolutionResult> sweep_report(const Manifest& manifest, const InpainterProvider& provider,
                                           const SweepOptions& options) {
  Index current = -1;
  Inpainter inpainter;
  DetectConfig detect;
  auto predict = [&](Index res, const ManifestEntry& e, const GrayImage& x, const BinaryMask& bone) {
    if (res != current) {
      inpainter = provider(res);
      detect = options.detect.scaled_to(res, options.reference_resolution);
      current = res;
    }
    PipelineTrace trace = run_pipeline(x, bone, inpainter, detect);
    if (options.on_slice) options.on_slice(res, e, trace);
    return std::move(trace.final_mask);
  };
  return evaluate_split(manifest, predict, options);
}

std::string metrics_csv(const std::vector<ResolutionResult>& results) {
  std::string csv = "resolution,slice_id,tp,fp,tn,fn,dice,iou,sensitivity,specificity,accuracy\n";
  for (const auto& r : results) {
    for (const auto& m : r.records) csv += csv_row(r.resolution, m);
    csv += csv_row(r.resolution, r.summary);
  }
  return csv;
}

std::string sweep_csv(const std::vector<ResolutionResult>& results) {
  std::string csv = "resolution,slices,dice,iou,sensitivity,specificity,accuracy\n";
  for (const auto& r : results) {
    const MetricsRecord& m = r.summary;
    csv += std::to_string(r.resolution) + "," + std::to_string(r.records.size());
    for (const double v : {m.dice, m.iou, m.sensitivity, m.specificity, m.accuracy}) csv += "," + fixed(v);
    csv += "\n";
  }
  return csv;
}

std::string report_json(const std::vector<ResolutionResult>& results) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json entry;
    entry["resolution"] = r.resolution;
    entry["summary"] = record_json(r.summary);
    auto& slices = entry["slices"] = nlohmann::ordered_json::array();
    for (const auto& m : r.records) slices.push_back(record_json(m));
    auto& groups = entry["size_groups"] = nlohmann::ordered_json::array();
    for (const auto& g : r.groups)
      groups.push_back({{"group", g.group},
                        {"area_min", g.area_min},
                        {"area_max", g.area_max},
                        {"mean_dice", g.mean_dice},
                        {"mean_iou", g.mean_iou},
                        {"count", g.count}});
    doc.push_back(std::move(entry));
  }
  return doc.dump(1) + "\n";
}

}  // namespace bml
