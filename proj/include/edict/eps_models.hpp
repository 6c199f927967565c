#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edict/rng.hpp"
#include "edict/schedule.hpp"
#include "edict/tensor.hpp"

namespace edict {

// Conditioning signal: the null condition, an integer label, or a raw
// embedding vector. Null never compares equal to a label or embedding.
class Condition {
 public:
  enum class Kind { null, label, embedding };

  static Condition null() { return Condition(); }
  static Condition label(int k);
  static Condition embedding(Tensor e);

  Kind kind() const noexcept { return kind_; }
  bool is_null() const noexcept { return kind_ == Kind::null; }
  int label_value() const;
  const Tensor& embedding_value() const;

  std::string to_string() const;
  friend bool operator==(const Condition& a, const Condition& b);

 private:
  Condition() = default;

  Kind kind_ = Kind::null;
  int label_ = -1;
  Tensor embedding_;
};

struct GuidanceConfig {
  double scale = 1.0;

  explicit GuidanceConfig(double g = 1.0);
};

// Deterministic noise predictor theta(x, t, c). Implementations are immutable
// after construction and may be called concurrently.
class EpsModel {
 public:
  virtual ~EpsModel() = default;

  virtual Tensor predict(const Tensor& x, int t, const Condition& c) const = 0;
  virtual std::string name() const = 0;

  // Whether predict accepts this condition.
  virtual bool accepts(const Condition& c) const = 0;

  // Data mean associated with a label, when the model has one.
  virtual std::optional<Tensor> label_mean(int) const { return std::nullopt; }
};

// theta(x,t,null) + g * (theta(x,t,c) - theta(x,t,null)). g == 0 and g == 1
// return the corresponding prediction exactly.
Tensor guided_predict(const EpsModel& model, const Tensor& x, int t, const Condition& c, const GuidanceConfig& g);

// A model bound to a condition and guidance scale: the eps(x, t) every
// sampler consumes.
class GuidedEps {
 public:
  GuidedEps(const EpsModel& model, Condition cond, GuidanceConfig guidance);

  Tensor operator()(const Tensor& x, int t) const;

  const EpsModel& model() const noexcept { return *model_; }
  const Condition& condition() const noexcept { return cond_; }
  const GuidanceConfig& guidance() const noexcept { return guidance_; }

 private:
  const EpsModel* model_;
  Condition cond_;
  GuidanceConfig guidance_;
};

// Returns eps0 for every input. With a second tensor, that one answers any
// non-null condition instead.
class ConstantEps final : public EpsModel {
 public:
  explicit ConstantEps(Tensor eps0);
  ConstantEps(Tensor eps_null, Tensor eps_cond);

  Tensor predict(const Tensor& x, int t, const Condition& c) const override;
  std::string name() const override { return "constant"; }
  bool accepts(const Condition&) const override { return true; }

 private:
  Tensor eps0_;
  Tensor eps_cond_;
};

// eps = M_c x + offset(t). M_c is the null matrix for the null condition and
// the per-label matrix otherwise. offset(t) = scale(t) * offset where scale is
// 0, 1 or sqrt(1 - alpha_bar_t) by rule.
class LinearEps final : public EpsModel {
 public:
  enum class OffsetRule { zero, constant, sqrt_one_minus_alpha_bar };

  LinearEps(Tensor m_null, std::vector<Tensor> m_labels = {}, Tensor offset = {},
            OffsetRule rule = OffsetRule::zero, std::vector<double> alpha_bar = {});

  // scale * identity of size dim, repeated per label with label_step added per label index.
  static LinearEps scaled_identity(std::size_t dim, double scale, int labels = 0, double label_step = 0.0);

  Tensor predict(const Tensor& x, int t, const Condition& c) const override;
  std::string name() const override { return "linear"; }
  bool accepts(const Condition& c) const override;

  std::size_t dim() const noexcept { return dim_; }
  const Tensor& matrix_for(const Condition& c) const;

 private:
  std::size_t dim_;
  Tensor m_null_;
  std::vector<Tensor> m_labels_;
  Tensor offset_;
  OffsetRule rule_;
  std::vector<double> alpha_bar_;
};

// Exact posterior-mean noise predictor for data drawn from a mixture of
// isotropic Gaussians N(mean_k, var_k I). A label conditions on the
// components carrying it; null uses the full mixture.
class GaussianScoreEps final : public EpsModel {
 public:
  struct Component {
    Tensor mean;
    double var = 1.0;
    int label = 0;
    double weight = 1.0;
  };

  GaussianScoreEps(std::vector<Component> components, std::vector<double> alpha_bar);
  GaussianScoreEps(std::vector<Component> components, const NoiseSchedule& schedule)
      : GaussianScoreEps(std::move(components), schedule.alpha_bars()) {}

  Tensor predict(const Tensor& x, int t, const Condition& c) const override;
  std::string name() const override { return "gauss"; }
  bool accepts(const Condition& c) const override;
  std::optional<Tensor> label_mean(int label) const override;

  const std::vector<Component>& components() const noexcept { return components_; }

 private:
  Tensor posterior_eps(const Tensor& x, double alpha_bar, const std::vector<std::size_t>& members) const;

  std::vector<Component> components_;
  std::vector<double> alpha_bar_;
};

// Two-hidden-layer perceptron over x ++ sinusoidal(t) ++ one-hot(label).
// Activation is SiLU (x * sigmoid(x)).
class MlpEps final : public EpsModel {
 public:
  struct Layout {
    std::size_t input_dim = 2;   // state elements
    std::size_t labels = 0;      // one-hot width; null is all zeros
    std::size_t hidden = 64;
    std::size_t time_dim = 16;   // even
    std::size_t features() const { return input_dim + time_dim + labels; }
  };

  struct Layer {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]
  };

  MlpEps(Layout layout, std::vector<Layer> layers);

  static MlpEps initialize(const Layout& layout, SeededRng& rng);

  Tensor predict(const Tensor& x, int t, const Condition& c) const override;
  std::string name() const override { return "mlp"; }
  bool accepts(const Condition& c) const override;

  const Layout& layout() const noexcept { return layout_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }

  // Fills `features` (size layout().features()) for one sample.
  void encode_input(std::span<const double> x, int t, const Condition& c, std::span<double> features) const;

  static constexpr const char* kActivation = "silu";

 private:
  Layout layout_;
  std::vector<Layer> layers_;
};

void write_mlp(const MlpEps& model, const std::filesystem::path& path);
MlpEps read_mlp(const std::filesystem::path& path);

struct TrainConfig {
  int steps = 4000;
  double lr = 2e-3;
  double cond_dropout = 0.1;
  std::size_t batch_size = 128;
  MlpEps::Layout layout{};
};

struct TrainStats {
  double initial_validation_loss = 0.0;
  double final_validation_loss = 0.0;
  std::vector<double> loss_history;  // one entry per training step
};

struct LabeledSample {
  Tensor x0;
  Condition cond;
};

// Adam on the denoising objective MSE(theta(x_t, t, c), eps) with timesteps
// drawn uniformly from [1, train_steps] and conditions replaced by null with
// probability cond_dropout. layout.input_dim and layout.labels are taken
// from the data. Throws NumericError on a non-finite loss.
MlpEps train_mlp(const std::vector<LabeledSample>& data, const NoiseSchedule& schedule, const TrainConfig& config,
                 SeededRng& rng, TrainStats* stats = nullptr);

// Denoising loss of a model on a fixed batch built from `rng`.
double denoising_loss(const EpsModel& model, const std::vector<LabeledSample>& data, const NoiseSchedule& schedule,
                      std::size_t batch, SeededRng& rng);

}  // namespace edict
