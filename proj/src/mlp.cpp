#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "edict/eps_models.hpp"
#include "edict/error.hpp"
#include "edict/kernels.hpp"
#include "edict/tensor_io.hpp"

namespace edict {

namespace {

constexpr double kMaxPeriod = 10000.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double silu(double z) { return z * sigmoid(z); }
double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

void check_layout(const MlpEps::Layout& l) {
  if (l.input_dim == 0 || l.hidden == 0) throw DomainError("MLP dimensions must be positive");
  if (l.time_dim == 0 || l.time_dim % 2 != 0) throw DomainError("MLP time embedding width must be even and positive");
}

// out = W in + b
void affine_layer(const MlpEps::Layer& layer, std::span<const double> in, std::span<double> out) {
  const std::size_t rows = layer.weight.shape()[0];
  const std::size_t cols = layer.weight.shape()[1];
  kernels::serial::matvec(layer.weight.data(), rows, cols, in, out);
  for (std::size_t r = 0; r < rows; ++r) out[r] += layer.bias[r];
}

struct Activations {
  std::vector<double> input, z1, a1, z2, a2, out;
};

void forward(const MlpEps& model, std::span<const double> features, Activations& act) {
  const auto& layers = model.layers();
  const auto& l = model.layout();
  act.input.assign(features.begin(), features.end());
  act.z1.resize(l.hidden);
  act.a1.resize(l.hidden);
  act.z2.resize(l.hidden);
  act.a2.resize(l.hidden);
  act.out.resize(l.input_dim);
  affine_layer(layers[0], act.input, act.z1);
  for (std::size_t i = 0; i < l.hidden; ++i) act.a1[i] = silu(act.z1[i]);
  affine_layer(layers[1], act.a1, act.z2);
  for (std::size_t i = 0; i < l.hidden; ++i) act.a2[i] = silu(act.z2[i]);
  affine_layer(layers[2], act.a2, act.out);
}

}  // namespace

MlpEps::MlpEps(Layout layout, std::vector<Layer> layers) : layout_(layout), layers_(std::move(layers)) {
  check_layout(layout_);
  if (layers_.size() != 3) throw DomainError("MLP must have exactly three affine layers");
  const std::size_t in[3] = {layout_.features(), layout_.hidden, layout_.hidden};
  const std::size_t out[3] = {layout_.hidden, layout_.hidden, layout_.input_dim};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& w = layers_[i].weight;
    if (w.rank() != 2 || w.shape()[0] != out[i] || w.shape()[1] != in[i] || layers_[i].bias.size() != out[i]) {
      throw ShapeError("MLP layer " + std::to_string(i) + " has shape " + shape_string(w.shape()) +
                       ", expected [" + std::to_string(out[i]) + "," + std::to_string(in[i]) + "]");
    }
  }
}

MlpEps MlpEps::initialize(const Layout& layout, SeededRng& rng) {
  check_layout(layout);
  const std::size_t in[3] = {layout.features(), layout.hidden, layout.hidden};
  const std::size_t out[3] = {layout.hidden, layout.hidden, layout.input_dim};
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < 3; ++i) {
    Layer layer{Tensor({out[i], in[i]}), Tensor({out[i]})};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in[i]));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    layers.push_back(std::move(layer));
  }
  return MlpEps(layout, std::move(layers));
}

bool MlpEps::accepts(const Condition& c) const {
  switch (c.kind()) {
    case Condition::Kind::null: return true;
    case Condition::Kind::label: return static_cast<std::size_t>(c.label_value()) < layout_.labels;
    case Condition::Kind::embedding: return c.embedding_value().size() == layout_.labels;
  }
  return false;
}

void MlpEps::encode_input(std::span<const double> x, int t, const Condition& c, std::span<double> features) const {
  std::size_t k = 0;
  for (double v : x) features[k++] = v;
  const std::size_t half = layout_.time_dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(kMaxPeriod) * static_cast<double>(i) / static_cast<double>(half));
    features[k + i] = std::sin(t * freq);
    features[k + half + i] = std::cos(t * freq);
  }
  k += layout_.time_dim;
  for (std::size_t i = 0; i < layout_.labels; ++i) features[k + i] = 0.0;
  if (c.kind() == Condition::Kind::label) {
    features[k + static_cast<std::size_t>(c.label_value())] = 1.0;
  } else if (c.kind() == Condition::Kind::embedding) {
    for (std::size_t i = 0; i < layout_.labels; ++i) features[k + i] = c.embedding_value()[i];
  }
}

Tensor MlpEps::predict(const Tensor& x, int t, const Condition& c) const {
  if (x.size() != layout_.input_dim) {
    throw ShapeError("MlpEps: state has " + std::to_string(x.size()) + " elements, expected " +
                     std::to_string(layout_.input_dim));
  }
  if (!accepts(c)) throw DomainError("MlpEps: unknown condition " + c.to_string());
  std::vector<double> features(layout_.features());
  encode_input(x.data(), t, c, features);
  Activations act;
  forward(*this, features, act);
  return Tensor(x.shape(), std::move(act.out));
}

// ---------------------------------------------------------------------------
// Weights file: a plain-text manifest terminated by "end", followed by the
// six EDT1 records weight0, bias0, weight1, bias1, weight2, bias2.

void write_mlp(const MlpEps& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  const auto& l = model.layout();
  out << "edict-mlp v1\n"
      << "input_dim=" << l.input_dim << "\n"
      << "labels=" << l.labels << "\n"
      << "hidden=" << l.hidden << "\n"
      << "time_dim=" << l.time_dim << "\n"
      << "activation=" << MlpEps::kActivation << "\n"
      << "layers=" << model.layers().size() << "\n"
      << "end\n";
  for (const auto& layer : model.layers()) {
    write_tensor(layer.weight, out);
    write_tensor(layer.bias, out);
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

MlpEps read_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::open_failed, path.string());
  std::string line;
  if (!std::getline(in, line) || line != "edict-mlp v1") throw IoError(IoErrorKind::bad_magic, "not an MLP weights file");
  std::map<std::string, std::string> manifest;
  while (std::getline(in, line) && line != "end") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(IoErrorKind::bad_header, "malformed manifest line: " + line);
    manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (line != "end") throw IoError(IoErrorKind::truncated, "manifest without terminator");
  auto field = [&](const char* key) -> std::size_t {
    const auto it = manifest.find(key);
    if (it == manifest.end()) throw IoError(IoErrorKind::bad_header, std::string("manifest lacks ") + key);
    return static_cast<std::size_t>(std::stoull(it->second));
  };
  if (manifest["activation"] != MlpEps::kActivation) {
    throw IoError(IoErrorKind::bad_header, "unsupported activation '" + manifest["activation"] + "'");
  }
  MlpEps::Layout layout;
  layout.input_dim = field("input_dim");
  layout.labels = field("labels");
  layout.hidden = field("hidden");
  layout.time_dim = field("time_dim");
  const std::size_t count = field("layers");
  std::vector<MlpEps::Layer> layers;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor w = read_tensor(in);
    Tensor b = read_tensor(in);
    layers.push_back({std::move(w), std::move(b)});
  }
  return MlpEps(layout, std::move(layers));
}

// ---------------------------------------------------------------------------

namespace {

struct Batch {
  std::vector<std::vector<double>> features;
  std::vector<std::vector<double>> target;
};

Batch draw_batch(const MlpEps& model, const std::vector<LabeledSample>& data, const NoiseSchedule& schedule,
                 std::size_t size, double cond_dropout, SeededRng& rng) {
  Batch batch;
  batch.features.resize(size);
  batch.target.resize(size);
  for (std::size_t n = 0; n < size; ++n) {
    const auto& sample = data[rng.below(data.size())];
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.train_steps())));
    const Tensor eps = gaussian_draw(rng, sample.x0.shape());
    const Tensor xt = forward_noise(sample.x0, eps, schedule.alpha_bar(t));
    const bool drop = cond_dropout > 0.0 && rng.uniform() < cond_dropout;
    batch.features[n].resize(model.layout().features());
    model.encode_input(xt.data(), t, drop ? Condition::null() : sample.cond, batch.features[n]);
    batch.target[n] = eps.values();
  }
  return batch;
}

double batch_loss(const MlpEps& model, const Batch& batch) {
  Activations act;
  double total = 0.0;
  for (std::size_t n = 0; n < batch.features.size(); ++n) {
    forward(model, batch.features[n], act);
    for (std::size_t i = 0; i < act.out.size(); ++i) {
      const double d = act.out[i] - batch.target[n][i];
      total += d * d;
    }
  }
  return total / static_cast<double>(batch.features.size() * model.layout().input_dim);
}

struct AdamState {
  std::vector<std::vector<double>> m, v;
};

}  // namespace

double denoising_loss(const EpsModel& model, const std::vector<LabeledSample>& data, const NoiseSchedule& schedule,
                      std::size_t batch, SeededRng& rng) {
  if (data.empty()) throw DomainError("denoising_loss: empty data");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    const auto& sample = data[rng.below(data.size())];
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.train_steps())));
    const Tensor eps = gaussian_draw(rng, sample.x0.shape());
    const Tensor xt = forward_noise(sample.x0, eps, schedule.alpha_bar(t));
    const Tensor pred = model.predict(xt, t, sample.cond);
    const Tensor d = pred - eps;
    total += dot(d, d);
    count += d.size();
  }
  return total / static_cast<double>(count);
}

MlpEps train_mlp(const std::vector<LabeledSample>& data, const NoiseSchedule& schedule, const TrainConfig& config,
                 SeededRng& rng, TrainStats* stats) {
  if (data.empty()) throw DomainError("train_mlp: empty training data");
  if (!(config.lr > 0.0)) throw DomainError("train_mlp: learning rate must be positive");
  if (!(config.cond_dropout >= 0.0 && config.cond_dropout <= 1.0)) {
    throw DomainError("train_mlp: cond_dropout must lie in [0, 1]");
  }
  if (config.steps < 0 || config.batch_size == 0) throw DomainError("train_mlp: bad step or batch count");

  MlpEps::Layout layout = config.layout;
  layout.input_dim = data.front().x0.size();
  std::size_t max_label = 0;
  bool any_label = false;
  for (const auto& s : data) {
    if (s.x0.size() != layout.input_dim) throw ShapeError("train_mlp: samples differ in size");
    if (s.cond.kind() == Condition::Kind::label) {
      any_label = true;
      max_label = std::max(max_label, static_cast<std::size_t>(s.cond.label_value()));
    }
  }
  layout.labels = std::max(layout.labels, any_label ? max_label + 1 : 0);

  MlpEps model = MlpEps::initialize(layout, rng);
  SeededRng validation_rng(rng.seed() ^ 0x5eedf00dULL);
  const Batch validation = draw_batch(model, data, schedule, 512, 0.0, validation_rng);
  if (stats != nullptr) {
    stats->initial_validation_loss = batch_loss(model, validation);
    stats->loss_history.clear();
  }

  auto& layers = model.mutable_layers();
  const std::size_t n_params = 6;
  auto param = [&](std::size_t k) -> std::span<double> {
    return k % 2 == 0 ? layers[k / 2].weight.data() : layers[k / 2].bias.data();
  };
  AdamState adam;
  std::vector<std::vector<double>> grad(n_params);
  for (std::size_t k = 0; k < n_params; ++k) {
    adam.m.emplace_back(param(k).size(), 0.0);
    adam.v.emplace_back(param(k).size(), 0.0);
    grad[k].resize(param(k).size());
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  const std::size_t H = layout.hidden, D = layout.input_dim, F = layout.features();
  Activations act;
  std::vector<double> dout(D), da2(H), dz2(H), da1(H), dz1(H);
  for (int step = 0; step < config.steps; ++step) {
    const Batch batch = draw_batch(model, data, schedule, config.batch_size, config.cond_dropout, rng);
    for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
    double loss = 0.0;
    const double norm = 1.0 / static_cast<double>(config.batch_size * D);
    for (std::size_t n = 0; n < config.batch_size; ++n) {
      forward(model, batch.features[n], act);
      for (std::size_t i = 0; i < D; ++i) {
        const double d = act.out[i] - batch.target[n][i];
        loss += d * d;
        dout[i] = 2.0 * d * norm;
      }
      // layer 2
      for (std::size_t i = 0; i < D; ++i) {
        for (std::size_t j = 0; j < H; ++j) grad[4][i * H + j] += dout[i] * act.a2[j];
        grad[5][i] += dout[i];
      }
      std::fill(da2.begin(), da2.end(), 0.0);
      for (std::size_t i = 0; i < D; ++i) {
        for (std::size_t j = 0; j < H; ++j) da2[j] += layers[2].weight[i * H + j] * dout[i];
      }
      for (std::size_t j = 0; j < H; ++j) dz2[j] = da2[j] * silu_grad(act.z2[j]);
      // layer 1
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < H; ++j) grad[2][i * H + j] += dz2[i] * act.a1[j];
        grad[3][i] += dz2[i];
      }
      std::fill(da1.begin(), da1.end(), 0.0);
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < H; ++j) da1[j] += layers[1].weight[i * H + j] * dz2[i];
      }
      for (std::size_t j = 0; j < H; ++j) dz1[j] = da1[j] * silu_grad(act.z1[j]);
      // layer 0
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < F; ++j) grad[0][i * F + j] += dz1[i] * act.input[j];
        grad[1][i] += dz1[i];
      }
    }
    loss *= norm;
    if (!std::isfinite(loss)) {
      throw NumericError("train_mlp: non-finite loss " + std::to_string(loss) + " at step " + std::to_string(step) +
                         " (lr=" + std::to_string(config.lr) + ")");
    }
    if (stats != nullptr) stats->loss_history.push_back(loss);

    // linear decay to 10% of the base rate
    const double progress = static_cast<double>(step) / static_cast<double>(config.steps);
    const double lr = config.lr * (1.0 - 0.9 * progress);
    const double bc1 = 1.0 - std::pow(beta1, step + 1);
    const double bc2 = 1.0 - std::pow(beta2, step + 1);
    for (std::size_t k = 0; k < n_params; ++k) {
      auto p = param(k);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = grad[k][i];
        adam.m[k][i] = beta1 * adam.m[k][i] + (1.0 - beta1) * g;
        adam.v[k][i] = beta2 * adam.v[k][i] + (1.0 - beta2) * g * g;
        p[i] -= lr * (adam.m[k][i] / bc1) / (std::sqrt(adam.v[k][i] / bc2) + adam_eps);
      }
    }
  }
  if (stats != nullptr) stats->final_validation_loss = batch_loss(model, validation);
  return model;
}

}  // namespace edict
