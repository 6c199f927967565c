#include "edict/fixtures.hpp"

#include <cmath>

#include "edict/error.hpp"

namespace edict {

std::vector<GaussianScoreEps::Component> make_mixture_components(const MixtureSpec& spec) {
  if (spec.components < 1 || spec.labels < 1) throw DomainError("mixture needs at least one component and label");
  if (!(spec.var > 0.0) || !(spec.separation >= 0.0)) throw DomainError("mixture var must be > 0, separation >= 0");
  SeededRng rng(spec.seed);
  const double radius = std::sqrt(spec.separation / 2.0);
  std::vector<GaussianScoreEps::Component> out;
  for (int k = 0; k < spec.components; ++k) {
    Tensor dir = gaussian_draw(rng, spec.shape);
    const double n = norm(dir);
    out.push_back({(radius / n) * dir, spec.var, k % spec.labels, 1.0});
  }
  return out;
}

std::vector<LabeledSample> sample_mixture(const std::vector<GaussianScoreEps::Component>& components, std::size_t n,
                                          SeededRng& rng) {
  if (components.empty()) throw DomainError("sample_mixture: no components");
  std::vector<LabeledSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = components[rng.below(components.size())];
    Tensor x = axpby(1.0, c.mean, std::sqrt(c.var), gaussian_draw(rng, c.mean.shape()));
    out.push_back({std::move(x), Condition::label(c.label)});
  }
  return out;
}

std::vector<Tensor> uniform_inputs(const Shape& shape, std::size_t n, SeededRng& rng) {
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<GaussianScoreEps::Component> twin_components(std::size_t dim, double half_distance, double var) {
  if (dim < 1) throw DomainError("twin_components: dim must be >= 1");
  if (!(var > 0.0)) throw DomainError("twin_components: var must be positive");
  Tensor a(Shape{dim}), b(Shape{dim});
  a[0] = -half_distance;
  b[0] = half_distance;
  return {{std::move(a), var, 0, 1.0}, {std::move(b), var, 1, 1.0}};
}

LinearEps linear_fixture(std::size_t dim) {
  auto diag = [dim](double v) {
    Tensor m({dim, dim});
    for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = v;
    return m;
  };
  std::vector<Tensor> labels;
  for (int k = 0; k < kLinearLabels; ++k) labels.push_back(diag(-0.1 * (k + 1)));
  return LinearEps(diag(0.1), std::move(labels));
}

}  // namespace edict
