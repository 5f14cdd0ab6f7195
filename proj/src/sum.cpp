#include "salrefine/sum.hpp"

#include <cmath>
#include <stdexcept>

#include "salrefine/gradcam.hpp"

namespace salrefine {

ImageRGB fuse_mask(const ImageRGB& original, const GrayMap& map,
                   const SumConfig& cfg) {
  if (map.width != original.width || map.height != original.height)
    throw std::invalid_argument("fuse_mask: map/image dimension mismatch");
  if (cfg.omega <= 0.0 || cfg.sigma <= 0.0 || cfg.sigma >= 1.0)
    throw std::invalid_argument("fuse_mask: invalid omega/sigma");

  ImageRGB out(original.width, original.height);
  for (size_t p = 0; p < map.data.size(); ++p) {
    const double s = 1.0 / (1.0 + std::exp(-cfg.omega * (map.data[p] -
                                                         cfg.sigma)));
    for (int c = 0; c < 3; ++c) {
      const double v = original.data[p * 3 + c];
      out.data[p * 3 + c] = v - s * v;
    }
  }
  return out;
}

double mask_mining_loss(const std::vector<double>& scores) {
  if (scores.empty())
    throw std::invalid_argument("mask_mining_loss: empty score list");
  double total = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s))
      throw std::invalid_argument("mask_mining_loss: non-finite score");
    total += s;
  }
  return total / static_cast<double>(scores.size());
}

double total_loss(double l_cls, double l_mask, double alpha) {
  return l_cls + alpha * l_mask;
}

GrayMap scorer_saliency(const ToyScorer& model, const ImageRGB& image,
                        int class_index, const std::vector<double>& scales) {
  if (scales.empty())
    throw std::invalid_argument("scorer_saliency: empty scale list");

  const int res = model.input_size;
  std::vector<RawMap> maps;
  maps.reserve(scales.size());
  for (double s : scales) {
    if (s <= 0.0)
      throw std::invalid_argument("scorer_saliency: scales must be > 0");
    // Degrade to the scale, then return to the model resolution; the scorer
    // sees the same geometry with scale-dependent detail.
    const int sw = std::max(1, static_cast<int>(std::lround(s * image.width)));
    const int sh = std::max(1, static_cast<int>(std::lround(s * image.height)));
    ImageRGB scaled = resize_bilinear(image, sw, sh);
    scaled = resize_bilinear(scaled, res, res);

    const ForwardTrace trace = forward(model, scaled);
    const ClassGradients grads = backprop_class(model, trace, class_index);
    const NeuronWeights w = neuron_weights(grads.features, class_index);
    maps.push_back(cam(trace.features, w));
  }
  return multiscale_cam(maps, image.width, image.height);
}

std::vector<IterationRecord> update_loop(const ImageRGB& original,
                                         const ToyScorer& model,
                                         const SumConfig& cfg, int class_index,
                                         const std::vector<double>& scales) {
  if (cfg.iterations < 1)
    throw std::invalid_argument("update_loop: iterations must be >= 1");

  std::vector<IterationRecord> records;
  records.reserve(cfg.iterations);
  GrayMap accumulated;

  for (int it = 1; it <= cfg.iterations; ++it) {
    IterationRecord rec;
    rec.iteration_index = it;
    rec.masked_image =
        it == 1 ? original : fuse_mask(original, accumulated, cfg);

    const ImageRGB at_model_res = resize_bilinear(
        rec.masked_image, model.input_size, model.input_size);
    const ForwardTrace trace = forward(model, at_model_res);
    if (it == 1 && class_index < 0) class_index = argmax_class(trace);
    rec.class_score = trace.probs[class_index];

    rec.map = scorer_saliency(model, rec.masked_image, class_index, scales);

    if (it == 1) {
      accumulated = rec.map;
    } else {
      for (size_t i = 0; i < accumulated.data.size(); ++i)
        accumulated.data[i] = std::max(accumulated.data[i], rec.map.data[i]);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

GrayMap accumulated_map(const std::vector<IterationRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("accumulated_map: no records");
  GrayMap acc = records.front().map;
  for (size_t r = 1; r < records.size(); ++r)
    for (size_t i = 0; i < acc.data.size(); ++i)
      acc.data[i] = std::max(acc.data[i], records[r].map.data[i]);
  return acc;
}

double active_area_fraction(const GrayMap& map) {
  size_t count = 0;
  for (double v : map.data)
    if (v > 0.5) ++count;
  return static_cast<double>(count) / static_cast<double>(map.data.size());
}

}  // namespace salrefine
