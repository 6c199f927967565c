#include "edict/eps_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edict/error.hpp"
#include "edict/kernels.hpp"

namespace edict {

Condition Condition::label(int k) {
  if (k < 0) throw DomainError("condition labels must be non-negative");
  Condition c;
  c.kind_ = Kind::label;
  c.label_ = k;
  return c;
}

Condition Condition::embedding(Tensor e) {
  if (e.empty()) throw DomainError("condition embedding must be non-empty");
  Condition c;
  c.kind_ = Kind::embedding;
  c.embedding_ = std::move(e);
  return c;
}

int Condition::label_value() const {
  if (kind_ != Kind::label) throw DomainError("condition is not a label");
  return label_;
}

const Tensor& Condition::embedding_value() const {
  if (kind_ != Kind::embedding) throw DomainError("condition is not an embedding");
  return embedding_;
}

std::string Condition::to_string() const {
  switch (kind_) {
    case Kind::null: return "null";
    case Kind::label: return "label:" + std::to_string(label_);
    case Kind::embedding: return "embedding" + shape_string(embedding_.shape());
  }
  return "null";
}

bool operator==(const Condition& a, const Condition& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Condition::Kind::null: return true;
    case Condition::Kind::label: return a.label_ == b.label_;
    case Condition::Kind::embedding: return a.embedding_.bit_equal(b.embedding_);
  }
  return false;
}

GuidanceConfig::GuidanceConfig(double g) : scale(g) {
  if (!std::isfinite(g) || g < 0.0) throw DomainError("guidance scale must be finite and >= 0");
}

Tensor guided_predict(const EpsModel& model, const Tensor& x, int t, const Condition& c, const GuidanceConfig& g) {
  if (c.is_null() || g.scale == 0.0) return model.predict(x, t, Condition::null());
  if (g.scale == 1.0) return model.predict(x, t, c);
  const Tensor uncond = model.predict(x, t, Condition::null());
  const Tensor cond = model.predict(x, t, c);
  Tensor out(uncond.shape());
  kernels::mix(g.scale, cond.data(), uncond.data(), out.data());
  return out;
}

GuidedEps::GuidedEps(const EpsModel& model, Condition cond, GuidanceConfig guidance)
    : model_(&model), cond_(std::move(cond)), guidance_(guidance) {
  if (!model.accepts(cond_)) {
    throw DomainError("model '" + model.name() + "' does not accept condition " + cond_.to_string());
  }
}

Tensor GuidedEps::operator()(const Tensor& x, int t) const {
  Tensor eps = guided_predict(*model_, x, t, cond_, guidance_);
  require_same_shape(x, eps, "eps model output");
  return eps;
}

// ---------------------------------------------------------------------------

ConstantEps::ConstantEps(Tensor eps0) : eps0_(std::move(eps0)) {}

ConstantEps::ConstantEps(Tensor eps_null, Tensor eps_cond) : eps0_(std::move(eps_null)), eps_cond_(std::move(eps_cond)) {
  require_same_shape(eps0_, eps_cond_, "ConstantEps");
}

Tensor ConstantEps::predict(const Tensor& x, int, const Condition& c) const {
  require_same_shape(x, eps0_, "ConstantEps");
  return c.is_null() || eps_cond_.empty() ? eps0_ : eps_cond_;
}

// ---------------------------------------------------------------------------

namespace {

void require_square(const Tensor& m, std::size_t dim, const char* what) {
  if (m.rank() != 2 || m.shape()[0] != dim || m.shape()[1] != dim) {
    throw ShapeError(std::string(what) + " must be a [" + std::to_string(dim) + "," + std::to_string(dim) +
                     "] matrix, got " + shape_string(m.shape()));
  }
}

Tensor scaled_identity_matrix(std::size_t dim, double s) {
  Tensor m({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = s;
  return m;
}

}  // namespace

LinearEps::LinearEps(Tensor m_null, std::vector<Tensor> m_labels, Tensor offset, OffsetRule rule,
                     std::vector<double> alpha_bar)
    : dim_(m_null.rank() == 2 ? m_null.shape()[0] : 0),
      m_null_(std::move(m_null)),
      m_labels_(std::move(m_labels)),
      offset_(std::move(offset)),
      rule_(rule),
      alpha_bar_(std::move(alpha_bar)) {
  require_square(m_null_, dim_, "LinearEps null matrix");
  for (const auto& m : m_labels_) require_square(m, dim_, "LinearEps label matrix");
  if (rule_ != OffsetRule::zero) {
    if (offset_.size() != dim_) throw ShapeError("LinearEps offset must have one entry per state element");
    if (rule_ == OffsetRule::sqrt_one_minus_alpha_bar && alpha_bar_.empty()) {
      throw DomainError("LinearEps offset rule needs the alpha_bar table");
    }
  }
}

LinearEps LinearEps::scaled_identity(std::size_t dim, double scale, int labels, double label_step) {
  std::vector<Tensor> per_label;
  for (int k = 0; k < labels; ++k) per_label.push_back(scaled_identity_matrix(dim, scale + label_step * (k + 1)));
  return LinearEps(scaled_identity_matrix(dim, scale), std::move(per_label));
}

bool LinearEps::accepts(const Condition& c) const {
  if (c.is_null()) return true;
  return c.kind() == Condition::Kind::label && static_cast<std::size_t>(c.label_value()) < m_labels_.size();
}

const Tensor& LinearEps::matrix_for(const Condition& c) const {
  if (c.is_null()) return m_null_;
  if (!accepts(c)) throw DomainError("LinearEps: unknown condition " + c.to_string());
  return m_labels_[static_cast<std::size_t>(c.label_value())];
}

Tensor LinearEps::predict(const Tensor& x, int t, const Condition& c) const {
  if (x.size() != dim_) throw ShapeError("LinearEps: state has " + std::to_string(x.size()) + " elements, expected " +
                                         std::to_string(dim_));
  const Tensor& m = matrix_for(c);
  Tensor out(x.shape());
  kernels::matvec(m.data(), dim_, dim_, x.data(), out.data());
  if (rule_ != OffsetRule::zero) {
    double scale = 1.0;
    if (rule_ == OffsetRule::sqrt_one_minus_alpha_bar) {
      if (t < 0 || static_cast<std::size_t>(t) >= alpha_bar_.size()) throw DomainError("LinearEps: timestep out of range");
      scale = std::sqrt(1.0 - alpha_bar_[static_cast<std::size_t>(t)]);
    }
    for (std::size_t i = 0; i < dim_; ++i) out[i] += scale * offset_[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

GaussianScoreEps::GaussianScoreEps(std::vector<Component> components, std::vector<double> alpha_bar)
    : components_(std::move(components)), alpha_bar_(std::move(alpha_bar)) {
  if (components_.empty()) throw DomainError("GaussianScoreEps needs at least one component");
  for (const auto& comp : components_) {
    if (!(comp.var > 0.0)) throw DomainError("component variance must be positive");
    if (!(comp.weight > 0.0)) throw DomainError("component weight must be positive");
    if (comp.label < 0) throw DomainError("component labels must be non-negative");
    require_same_shape(comp.mean, components_.front().mean, "GaussianScoreEps component means");
  }
  if (alpha_bar_.empty()) throw DomainError("GaussianScoreEps needs the alpha_bar table");
}

bool GaussianScoreEps::accepts(const Condition& c) const {
  if (c.is_null()) return true;
  if (c.kind() != Condition::Kind::label) return false;
  return std::any_of(components_.begin(), components_.end(),
                     [&](const Component& comp) { return comp.label == c.label_value(); });
}

std::optional<Tensor> GaussianScoreEps::label_mean(int label) const {
  std::optional<Tensor> sum;
  double total = 0.0;
  for (const auto& comp : components_) {
    if (comp.label != label) continue;
    sum = sum ? axpby(1.0, *sum, comp.weight, comp.mean) : comp.weight * comp.mean;
    total += comp.weight;
  }
  if (sum) *sum = (1.0 / total) * *sum;
  return sum;
}

Tensor GaussianScoreEps::posterior_eps(const Tensor& x, double alpha_bar,
                                       const std::vector<std::size_t>& members) const {
  const double sa = std::sqrt(alpha_bar);
  const double sn = std::sqrt(1.0 - alpha_bar);
  const double dim = static_cast<double>(x.size());
  Tensor out(x.shape());

  if (members.size() == 1) {
    const auto& comp = components_[members.front()];
    const double v = alpha_bar * comp.var + 1.0 - alpha_bar;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sn * (x[i] - sa * comp.mean[i]) / v;
    return out;
  }

  // Responsibilities in log space: log w_k + log N(x; sa*mu_k, v_k I).
  std::vector<double> logw(members.size());
  std::vector<double> v(members.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    const auto& comp = components_[members[j]];
    v[j] = alpha_bar * comp.var + 1.0 - alpha_bar;
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - sa * comp.mean[i];
      r2 += r * r;
    }
    logw[j] = std::log(comp.weight) - 0.5 * dim * std::log(v[j]) - 0.5 * r2 / v[j];
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double& lw : logw) {
    lw = std::exp(lw - top);
    total += lw;
  }
  for (std::size_t j = 0; j < members.size(); ++j) {
    const double w = logw[j] / total;
    if (w == 0.0) continue;
    const auto& comp = components_[members[j]];
    const double scale = w * sn / v[j];
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += scale * (x[i] - sa * comp.mean[i]);
  }
  return out;
}

Tensor GaussianScoreEps::predict(const Tensor& x, int t, const Condition& c) const {
  require_same_shape(x, components_.front().mean, "GaussianScoreEps");
  if (t < 0 || static_cast<std::size_t>(t) >= alpha_bar_.size()) {
    throw DomainError("GaussianScoreEps: timestep " + std::to_string(t) + " out of range");
  }
  if (!accepts(c)) throw DomainError("GaussianScoreEps: unknown condition " + c.to_string());
  std::vector<std::size_t> members;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (c.is_null() || components_[k].label == c.label_value()) members.push_back(k);
  }
  return posterior_eps(x, alpha_bar_[static_cast<std::size_t>(t)], members);
}

}  // namespace edict
