#include <doctest.h>

#include <cmath>

#include "salrefine/gradcam.hpp"
#include "salrefine/rng.hpp"

using namespace salrefine;

namespace {

GradStack stack_from(int k, int m, int h, std::vector<double> values) {
  GradStack g(k, m, h);
  g.data = std::move(values);
  return g;
}

}  // namespace

TEST_CASE("neuron_weights averages per channel") {
  CHECK(neuron_weights(stack_from(1, 2, 2, {1, 1, 1, 1}), 0).weights ==
        std::vector<double>{1.0});
  CHECK(neuron_weights(stack_from(1, 2, 2, {1, 2, 3, 4}), 0).weights ==
        std::vector<double>{2.5});
  CHECK(neuron_weights(stack_from(2, 2, 2, {0, 0, 0, 0, -2, -2, -2, -2}), 1)
            .weights == std::vector<double>{0.0, -2.0});
}

TEST_CASE("neuron_weights rejects non-finite gradients and bad class") {
  CHECK_THROWS(neuron_weights(stack_from(1, 1, 1, {std::nan("")}), 0));
  CHECK_THROWS(neuron_weights(stack_from(1, 1, 1, {1.0}), 5));
  CHECK_THROWS(neuron_weights(stack_from(1, 1, 1, {1.0}), -1));
}

TEST_CASE("cam weighted sums and ReLU clamp") {
  NeuronWeights unit{{1.0}, 0};
  const RawMap ones = cam(stack_from(1, 2, 2, {1, 1, 1, 1}), unit);
  CHECK(ones.data == std::vector<double>{1, 1, 1, 1});

  NeuronWeights opposed{{1.0, -1.0}, 0};
  const RawMap clamped =
      cam(stack_from(2, 2, 2, {1, 1, 1, 1, 2, 2, 2, 2}), opposed);
  CHECK(clamped.data == std::vector<double>{0, 0, 0, 0});

  NeuronWeights twice{{2.0}, 0};
  const RawMap mixed = cam(stack_from(1, 1, 2, {0.5, -1.0}), twice);
  CHECK(mixed.data == std::vector<double>{1.0, 0.0});
}

TEST_CASE("cam rejects channel mismatch") {
  NeuronWeights w{{1.0, 2.0}, 0};
  CHECK_THROWS(cam(stack_from(1, 1, 1, {1.0}), w));
}

TEST_CASE("cam output is non-negative") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = rng.range(1, 4), m = rng.range(1, 6), h = rng.range(1, 6);
    FeatureStack acts(k, m, h);
    for (double& v : acts.data) v = rng.uniform(-2.0, 2.0);
    NeuronWeights w;
    w.weights.resize(k);
    for (double& v : w.weights) v = rng.uniform(-1.0, 1.0);
    for (double v : cam(acts, w).data) CHECK(v >= 0.0);
  }
}

TEST_CASE("multiscale_cam of a single map is its normalization") {
  RawMap map(2, 1);
  map.data = {1.0, 3.0};
  const GrayMap out = multiscale_cam({map}, 2, 1);
  CHECK(out.data == std::vector<double>{0.0, 1.0});
}

TEST_CASE("multiscale_cam degenerate sums normalize to zero") {
  const GrayMap constant = multiscale_cam(
      {RawMap(2, 2, 0.3), RawMap(2, 2, 0.3), RawMap(2, 2, 0.3)}, 4, 4);
  for (double v : constant.data) CHECK(v == 0.0);

  RawMap a(2, 1), b(2, 1);
  a.data = {0.0, 1.0};
  b.data = {1.0, 0.0};
  const GrayMap summed = multiscale_cam({a, b}, 2, 1);
  CHECK(summed.data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("multiscale_cam rejects an empty list") {
  CHECK_THROWS(multiscale_cam({}, 2, 2));
}

TEST_CASE("uniform positive scaling leaves multiscale_cam invariant") {
  Rng rng(33);
  for (double lambda : {3.7, 0.02, 250.0}) {
    std::vector<RawMap> maps, scaled;
    for (int i = 0; i < 3; ++i) {
      RawMap m(rng.range(2, 5), rng.range(2, 5));
      for (double& v : m.data) v = rng.uniform(0.0, 4.0);
      scaled.push_back(m);
      for (double& v : scaled.back().data) v *= lambda;
      maps.push_back(std::move(m));
    }
    const GrayMap base = multiscale_cam(maps, 6, 6);
    const GrayMap after = multiscale_cam(scaled, 6, 6);
    for (size_t i = 0; i < base.data.size(); ++i)
      CHECK(after.data[i] == doctest::Approx(base.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("gradient scaling scales weights and pre-ReLU cam linearly") {
  Rng rng(34);
  GradStack grads(2, 3, 3);
  FeatureStack acts(2, 3, 3);
  for (double& v : grads.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : acts.data) v = rng.uniform(0.0, 1.0);

  const double lambda = 2.5;
  GradStack scaled = grads;
  for (double& v : scaled.data) v *= lambda;

  const NeuronWeights w = neuron_weights(grads, 2);
  const NeuronWeights ws = neuron_weights(scaled, 2);
  for (size_t k = 0; k < w.weights.size(); ++k)
    CHECK(ws.weights[k] == doctest::Approx(lambda * w.weights[k]));

  const RawMap m = cam(acts, w);
  const RawMap ms = cam(acts, ws);
  for (size_t i = 0; i < m.data.size(); ++i)
    CHECK(ms.data[i] == doctest::Approx(lambda * m.data[i]));
}

TEST_CASE("single positive channel gives a constant cam") {
  FeatureStack acts(1, 3, 3, 0.8);
  GradStack grads(1, 3, 3, 0.4);
  const NeuronWeights w = neuron_weights(grads, 0);
  CHECK(w.weights[0] == doctest::Approx(0.4));
  const RawMap m = cam(acts, w);
  for (double v : m.data) CHECK(v == doctest::Approx(0.8 * 0.4));
}
