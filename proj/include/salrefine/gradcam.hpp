#pragma once

#include <vector>

#include "salrefine/image.hpp"

namespace salrefine {

/// One importance weight per feature channel for a fixed class.
struct NeuronWeights {
  std::vector<double> weights;
  int class_index = 0;
};

/// Spatially averaged gradients: weights[k] = mean over (i,j) of grads[k,i,j].
/// Throws std::invalid_argument on non-finite gradients or class out of range.
NeuronWeights neuron_weights(const GradStack& grads, int class_index);

/// Class activation map M[i,j] = max(0, sum_k w[k] * acts[k,i,j]), at the
/// feature-map resolution.
RawMap cam(const FeatureStack& acts, const NeuronWeights& w);

/// Resize every map to the target size, sum elementwise, min-max normalize.
GrayMap multiscale_cam(const std::vector<RawMap>& maps, int target_w,
                       int target_h);

}  // namespace salrefine
