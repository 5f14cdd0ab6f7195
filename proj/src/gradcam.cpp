#include "salrefine/gradcam.hpp"

#include <cmath>
#include <stdexcept>

namespace salrefine {

NeuronWeights neuron_weights(const GradStack& grads, int class_index) {
  if (class_index < 0 || class_index > 4)
    throw std::invalid_argument("class index out of range [0,4]");

  const double inv_n = 1.0 / (static_cast<double>(grads.rows) * grads.cols);
  NeuronWeights w;
  w.class_index = class_index;
  w.weights.resize(grads.channels);
  for (int k = 0; k < grads.channels; ++k) {
    double sum = 0.0;
    for (int i = 0; i < grads.rows; ++i)
      for (int j = 0; j < grads.cols; ++j) sum += grads.at(k, i, j);
    if (!std::isfinite(sum))
      throw std::invalid_argument("non-finite gradient values");
    w.weights[k] = sum * inv_n;
  }
  return w;
}

RawMap cam(const FeatureStack& acts, const NeuronWeights& w) {
  if (static_cast<int>(w.weights.size()) != acts.channels)
    throw std::invalid_argument("weight/activation channel mismatch");

  RawMap map(acts.cols, acts.rows);
  for (int i = 0; i < acts.rows; ++i) {
    for (int j = 0; j < acts.cols; ++j) {
      double v = 0.0;
      for (int k = 0; k < acts.channels; ++k)
        v += w.weights[k] * acts.at(k, i, j);
      map.at(j, i) = v > 0.0 ? v : 0.0;
    }
  }
  return map;
}

GrayMap multiscale_cam(const std::vector<RawMap>& maps, int target_w,
                       int target_h) {
  if (maps.empty())
    throw std::invalid_argument("multiscale_cam: empty map list");

  RawMap sum(target_w, target_h, 0.0);
  for (const RawMap& m : maps) {
    const RawMap resized = resize_bilinear(m, target_w, target_h);
    for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += resized.data[i];
  }
  return normalize_unit(sum);
}

}  // namespace salrefine
