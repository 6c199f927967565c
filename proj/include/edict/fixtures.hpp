#pragma once

#include <cstdint>
#include <vector>

#include "edict/eps_models.hpp"
#include "edict/rng.hpp"
#include "edict/tensor.hpp"

namespace edict {

// Shape of the small image-like states used by the demos and acceptance runs.
inline const Shape kImageShape{2, 16, 16};

struct MixtureSpec {
  Shape shape = kImageShape;
  int components = 16;
  int labels = 4;  // component k carries label k % labels
  double var = 1.0;
  double separation = 16.0;  // squared distance scale between means
  std::uint64_t seed = 0;
};

// Component k has label k % labels and a mean along a random direction with squared
// norm separation / 2.
std::vector<GaussianScoreEps::Component> make_mixture_components(const MixtureSpec& spec);

// Draws: component chosen uniformly, x0 = mean + sqrt(var) * noise, labelled
// with the component label.
std::vector<LabeledSample> sample_mixture(const std::vector<GaussianScoreEps::Component>& components, std::size_t n,
                                          SeededRng& rng);

// Inputs uniform in [-1, 1] with the given shape.
std::vector<Tensor> uniform_inputs(const Shape& shape, std::size_t n, SeededRng& rng);

// Two clusters at -h e_0 (label 0) and +h e_0 (label 1). The defaults are the
// training set for the MLP fixture.
inline constexpr std::size_t kTwinDim = 32;
std::vector<GaussianScoreEps::Component> twin_components(std::size_t dim = kTwinDim, double half_distance = 2.0,
                                                         double var = 1.0);

// eps = 0.1 x unconditionally and -0.1 (k + 1) x under label k, so guidance
// toward any label drives the slope negative.
inline constexpr int kLinearLabels = 4;
LinearEps linear_fixture(std::size_t dim);

}  // namespace edict
