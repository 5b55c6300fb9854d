#include "bml/nn/train.hpp"

#include "bml/io.hpp"
#include "bml/resample.hpp"
#include "bml/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bml::nn {
namespace {

constexpr std::uint64_t kBatchStream = 11;

TrainingSample augment_sample(const TrainingSample& s, const AugmentSettings& a, Rng& rng) {
  TrainingSample out = s;
  if (a.flip_horizontal && rng.uniform() < 0.5) {
    out.image = flip(out.image, FlipAxis::kHorizontal);
    out.mask = flip(out.mask, FlipAxis::kHorizontal);
  }
  if (a.flip_vertical && rng.uniform() < 0.5) {
    out.image = flip(out.image, FlipAxis::kVertical);
    out.mask = flip(out.mask, FlipAxis::kVertical);
  }
  if (a.bias_field && a.bias_bound > 0.0) {
    out.image = bias_field(out.image, {a.bias_order, a.bias_bound, rng.next_u64()});
  }
  return out;
}

Tensor<float> stack_targets(const std::vector<TrainingSample>& batch, bool masks) {
  const Index h = batch[0].image.rows(), w = batch[0].image.cols();
  Tensor<float> t(static_cast<Index>(batch.size()), 1, h, w);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (masks)
      t.plane(static_cast<Index>(n), 0) = batch[n].mask.cast<float>();
    else
      t.plane(static_cast<Index>(n), 0) = batch[n].image.cast<float>();
  }
  return t;
}

Tensor<float> stack_inputs(const std::vector<TrainingSample>& batch) {
  std::vector<GrayImage> images;
  std::vector<BinaryMask> masks;
  for (const auto& s : batch) {
    images.push_back(s.image);
    masks.push_back(s.mask);
  }
  return make_input<float>(images, masks);
}

}  // namespace

std::vector<TrainingSample> load_training_split(const Manifest& manifest, Index resolution) {
  std::vector<TrainingSample> out;
  for (const ManifestEntry* e : manifest.split("train")) {
    if (e->lesion_area_px != 0)
      throw std::invalid_argument("training split must be lesion-free, but '" + e->id + "' has a lesion");
    TrainingSample s{load_image(manifest.resolve(e->image_path)), load_mask(manifest.resolve(e->bone_mask_path))};
    require_same_shape(s.image, s.mask, e->id.c_str());
    if (resolution > 0 && (s.image.rows() != resolution || s.image.cols() != resolution)) {
      s.image = resize_bilinear(s.image, resolution, resolution);
      s.mask = resize_mask(s.mask, resolution, resolution);
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::invalid_argument("training split is empty");
  return out;
}

std::vector<double> train(InpainterModel<float>& model, const std::vector<TrainingSample>& samples,
                          const TrainOptions& options) {
  if (samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (options.steps < 0 || options.batch_size < 1) throw std::invalid_argument("train: invalid step count or batch size");

  Adam<float> adam(model.params(), options.learning_rate);
  std::vector<double> trace;
  trace.reserve(options.steps);
  std::vector<TrainingSample> batch;
  for (int step = 0; step < options.steps; ++step) {
    Rng rng(derive_seed(options.seed, kBatchStream, static_cast<std::uint64_t>(step)));
    batch.clear();
    for (int b = 0; b < options.batch_size; ++b)
      batch.push_back(augment_sample(samples[rng.below(samples.size())], options.augment, rng));

    const Tensor<float> input = stack_inputs(batch);
    const Tensor<float> target = stack_targets(batch, false);
    const Tensor<float> mask = stack_targets(batch, true);

    model.zero_grad();
    const Tensor<float> prediction = model.forward(input);
    const LossResult<float> loss = masked_l1_loss(prediction, target, mask, options.lambda_out);
    if (!std::isfinite(loss.loss)) throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    model.backward(loss.grad);
    adam.step();
    trace.push_back(loss.loss);
    if (options.on_step) options.on_step(step, loss.loss);
  }

  TrainRecord& rec = model.record();
  rec.learning_rate = options.learning_rate;
  rec.steps = options.steps;
  rec.batch_size = options.batch_size;
  rec.lambda_out = options.lambda_out;
  rec.seed = options.seed;
  rec.resolution = samples.front().image.rows();
  return trace;
}

double evaluate_loss(InpainterModel<float>& model, const std::vector<TrainingSample>& samples, double lambda_out,
                     int batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate_loss: no samples");
  double weighted = 0.0;
  for (std::size_t first = 0; first < samples.size(); first += batch_size) {
    const std::size_t last = std::min(samples.size(), first + batch_size);
    const std::vector<TrainingSample> batch(samples.begin() + first, samples.begin() + last);
    const auto prediction = model.forward(stack_inputs(batch));
    const auto loss = masked_l1_loss(prediction, stack_targets(batch, false), stack_targets(batch, true), lambda_out);
    weighted += loss.loss * static_cast<double>(batch.size());
  }
  return weighted / static_cast<double>(samples.size());
}

}  // namespace bml::nn
