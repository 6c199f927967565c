#include "edict/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "edict/coupled.hpp"
#include "edict/csv.hpp"
#include "edict/ddim.hpp"
#include "edict/diagnostics.hpp"
#include "edict/editing.hpp"
#include "edict/eps_models.hpp"
#include "edict/fixtures.hpp"
#include "edict/parallel.hpp"
#include "edict/rng.hpp"
#include "edict/schedule.hpp"
#include "edict/tensor_io.hpp"

namespace fs = std::filesystem;

namespace edict::cli {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string boolean(bool b) { return b ? "true" : "false"; }

template <class T>
std::vector<T> parse_list(const std::string& text, const char* key) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    const char* b = item.data();
    const char* e = item.data() + item.size();
    while (b < e && *b == ' ') ++b;
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw UsageError(std::string(key) + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(key) + ": empty list");
  return out;
}

std::vector<std::string> config_file_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = line.substr(0, line.find_last_not_of(" \t", eq - 1) + 1);
    std::string value = line.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    if (key == "config" || key == "print-config") throw UsageError(path.string() + ": key '" + key + "' not allowed");
    if (value.empty()) {
      // `--key=` would make CLI11 take the next token as the value.
      args.push_back("--" + key);
      args.emplace_back();
    } else {
      args.push_back("--" + key + "=" + value);
    }
  }
  return args;
}

}  // namespace

double RunConfig::effective_guidance() const {
  if (guidance) return *guidance;
  return command == "edit" ? 3.0 : 7.5;
}

double RunConfig::effective_p() const { return auto_scale_p ? scale_p(p, 50, steps) : p; }

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  CLI::App app("EDICT / DDIM diffusion inversion toolkit", "edict-cli");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.allow_extras(false);

  double guidance = 0.0;
  std::string config_path;
  bool print_config = false;
  std::string positional_command;
  app.add_option("cmd", positional_command, "sample|invert|roundtrip|edit|bench|diverge|align|train")
      ->check(CLI::IsMember(kCommands));
  app.add_option("--command", cfg.command, "same as the positional command; config files use this")
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "key=value config file; flags override it");
  app.add_flag("--print-config", print_config, "print the canonical config and exit");
  app.add_option("--sampler", cfg.sampler)->check(CLI::IsMember({"ddim", "edict"}));
  app.add_option("--model", cfg.model)->check(CLI::IsMember({"gauss", "linear", "constant", "mlp"}));
  app.add_option("--weights", cfg.weights, "MLP weights file");
  app.add_option("--schedule", cfg.schedule)->check(CLI::IsMember({"scaled_linear", "linear", "cosine"}));
  app.add_option("--spacing", cfg.spacing)->check(CLI::IsMember({"trailing", "leading"}));
  app.add_option("--train-steps", cfg.train_steps);
  app.add_option("--schedule-csv", cfg.schedule_csv, "alpha_bar table (t,alpha_bar)");
  app.add_option("--steps", cfg.steps);
  app.add_option("--strength", cfg.strength);
  app.add_option("--p", cfg.p, "mixing coefficient in (0, 1]");
  app.add_flag("--auto-scale-p", cfg.auto_scale_p, "use p^(50/steps)");
  auto* g_opt = app.add_option("--guidance", guidance);
  app.add_option("--label", cfg.label, "condition label, -1 for none");
  app.add_option("--base-label", cfg.base_label);
  app.add_option("--target-label", cfg.target_label);
  app.add_option("--seed", cfg.seed);
  app.add_option("--input", cfg.input, "EDT1 or PGM input");
  app.add_option("--out", cfg.out, "output directory");
  app.add_flag("--store-trajectory", cfg.store_trajectory);
  app.add_flag("--pgm", cfg.pgm, "also write PGM renders");
  app.add_option("--steps-grid", cfg.steps_grid);
  app.add_option("--guidance-grid", cfg.guidance_grid);
  app.add_option("--p-grid", cfg.p_grid);
  app.add_option("--strength-grid", cfg.strength_grid);
  app.add_option("--n-inputs", cfg.n_inputs);
  app.add_option("--iters", cfg.iters, "training iterations");
  app.add_option("--lr", cfg.lr, "training learning rate");

  std::vector<std::string> user(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::vector<std::string> merged;
  for (std::size_t i = 0; i < user.size(); ++i) {
    if (user[i] == "--config" && i + 1 < user.size()) {
      const auto extra = config_file_args(user[i + 1]);
      merged.insert(merged.end(), extra.begin(), extra.end());
    } else if (user[i].rfind("--config=", 0) == 0) {
      const auto extra = config_file_args(user[i].substr(9));
      merged.insert(merged.end(), extra.begin(), extra.end());
    }
  }
  merged.insert(merged.end(), user.begin(), user.end());
  std::reverse(merged.begin(), merged.end());
  try {
    app.parse(merged);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  if (!positional_command.empty()) cfg.command = positional_command;
  if (g_opt->count() > 0) cfg.guidance = guidance;
  if (print_config) throw HelpRequested{canonical(cfg)};
  return cfg;
}

std::string canonical(const RunConfig& c) {
  std::ostringstream o;
  o << "command=" << c.command << "\n"
    << "sampler=" << c.sampler << "\n"
    << "model=" << c.model << "\n"
    << "weights=" << c.weights << "\n"
    << "schedule=" << c.schedule << "\n"
    << "spacing=" << c.spacing << "\n"
    << "train-steps=" << c.train_steps << "\n"
    << "schedule-csv=" << c.schedule_csv << "\n"
    << "steps=" << c.steps << "\n"
    << "strength=" << num(c.strength) << "\n"
    << "p=" << num(c.p) << "\n"
    << "auto-scale-p=" << boolean(c.auto_scale_p) << "\n"
    << "guidance=" << num(c.effective_guidance()) << "\n"
    << "label=" << c.label << "\n"
    << "base-label=" << c.base_label << "\n"
    << "target-label=" << c.target_label << "\n"
    << "seed=" << c.seed << "\n"
    << "input=" << c.input << "\n"
    << "out=" << c.out << "\n"
    << "store-trajectory=" << boolean(c.store_trajectory) << "\n"
    << "pgm=" << boolean(c.pgm) << "\n"
    << "steps-grid=" << c.steps_grid << "\n"
    << "guidance-grid=" << c.guidance_grid << "\n"
    << "p-grid=" << c.p_grid << "\n"
    << "strength-grid=" << c.strength_grid << "\n"
    << "n-inputs=" << c.n_inputs << "\n"
    << "iters=" << c.iters << "\n"
    << "lr=" << num(c.lr) << "\n";
  return o.str();
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw UsageError(m); };
  if (c.command.empty()) fail("a command is required");
  if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end()) fail("unknown command " + c.command);
  if (!(c.p > 0.0 && c.p <= 1.0)) fail("--p must lie in (0, 1]; p = 0 has no mixing inverse");
  if (c.steps < 1) fail("--steps must be >= 1");
  if (c.schedule_csv.empty() && (c.train_steps < 1 || c.steps > c.train_steps)) {
    fail("--steps must not exceed --train-steps");
  }
  if (!(c.strength > 0.0 && c.strength <= 1.0)) fail("--strength must lie in (0, 1]");
  if (c.command == "edit" && std::floor(c.strength * c.steps) < 1) fail("--strength too small: floor(s * steps) < 1");
  const double g = c.effective_guidance();
  if (!std::isfinite(g) || g < 0.0) fail("--guidance must be finite and >= 0");
  if (c.model == "mlp" && c.weights.empty()) fail("--model mlp requires --weights");
  if (c.model != "mlp" && !c.weights.empty()) fail("--weights only applies to --model mlp");
  if (c.command == "train" && c.model != "mlp") fail("train requires --model mlp");
  if ((c.command == "invert" || c.command == "edit") && c.input.empty()) fail(c.command + " requires --input");
  if (c.command == "edit" && c.sampler != "edict") fail("edit requires --sampler edict");
  if (c.n_inputs < 1) fail("--n-inputs must be >= 1");
  if (c.iters < 0 || !(c.lr > 0.0)) fail("--iters must be >= 0 and --lr > 0");
  if (c.label < -1 || c.base_label < 0 || c.target_label < 0) fail("labels must be >= 0 (--label allows -1)");
  for (int s : parse_list<int>(c.steps_grid, "--steps-grid")) {
    if (s < 1) fail("--steps-grid entries must be >= 1");
  }
  for (double v : parse_list<double>(c.guidance_grid, "--guidance-grid")) {
    if (!std::isfinite(v) || v < 0.0) fail("--guidance-grid entries must be >= 0");
  }
  for (double v : parse_list<double>(c.p_grid, "--p-grid")) {
    if (!(v > 0.0 && v <= 1.0)) fail("--p-grid entries must lie in (0, 1]");
  }
  if (!c.strength_grid.empty()) {
    for (double v : parse_list<double>(c.strength_grid, "--strength-grid")) {
      if (!(v > 0.0 && v <= 1.0) || std::floor(v * c.steps) < 1.0) {
        fail("--strength-grid entries must lie in (0, 1] with floor(s * steps) >= 1");
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

struct Setup {
  NoiseSchedule schedule;
  std::unique_ptr<EpsModel> model;
  Shape shape;
  int labels = 0;  // 0 means any label is accepted
};

NoiseSchedule make_schedule(const RunConfig& c) {
  const Spacing spacing = parse_spacing(c.spacing);
  if (!c.schedule_csv.empty()) return read_schedule_csv(c.schedule_csv, c.steps, spacing);
  return build_schedule(parse_schedule_kind(c.schedule), c.train_steps, c.steps, spacing);
}

Setup make_setup(const RunConfig& c) {
  Setup s{make_schedule(c), nullptr, kImageShape, 0};
  const std::size_t dim = element_count(kImageShape);
  if (c.model == "gauss") {
    s.model = std::make_unique<GaussianScoreEps>(make_mixture_components(MixtureSpec{}), s.schedule);
    s.labels = MixtureSpec{}.labels;
  } else if (c.model == "linear") {
    s.model = std::make_unique<LinearEps>(linear_fixture(dim));
    s.labels = kLinearLabels;
  } else if (c.model == "constant") {
    s.model = std::make_unique<ConstantEps>(Tensor(kImageShape, 0.1));
  } else if (c.model == "mlp" && c.command != "train") {
    auto mlp = std::make_unique<MlpEps>(read_mlp(c.weights));
    s.shape = {mlp->layout().input_dim};
    s.labels = static_cast<int>(mlp->layout().labels);
    s.model = std::move(mlp);
  }
  return s;
}

Condition condition(const Setup& s, int label) {
  if (label < 0) return Condition::null();
  if (s.labels > 0 && label >= s.labels) {
    throw DomainError("label " + std::to_string(label) + " unknown to the model (labels 0.." +
                      std::to_string(s.labels - 1) + ")");
  }
  return Condition::label(label);
}

std::vector<LabeledSample> dataset(const RunConfig& c, const Setup& s, std::size_t n) {
  SeededRng rng(c.seed);
  if (c.model == "gauss") {
    return sample_mixture(static_cast<const GaussianScoreEps&>(*s.model).components(), n, rng);
  }
  std::vector<LabeledSample> out;
  if (c.model == "mlp") {
    return sample_mixture(twin_components(s.shape.front()), n, rng);
  }
  const int labels = s.labels > 0 ? s.labels : 8;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x(s.shape);
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    out.push_back({std::move(x), Condition::label(static_cast<int>(i % static_cast<std::size_t>(labels)))});
  }
  return out;
}

Tensor load_input(const RunConfig& c, const Setup& s) {
  const fs::path path(c.input);
  Tensor t = path.extension() == ".pgm" ? read_pgm(path) : read_tensor(path);
  if (t.size() != element_count(s.shape)) {
    throw ShapeError("input " + shape_string(t.shape()) + " does not match model shape " + shape_string(s.shape));
  }
  return t.reshaped(s.shape);
}

Tensor stack(const std::vector<Tensor>& states) {
  Shape shape{states.size()};
  const Shape& inner = states.front().shape();
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  auto dst = out.data().begin();
  for (const auto& s : states) dst = std::copy(s.data().begin(), s.data().end(), dst);
  return out;
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + " contains non-finite values");
}

double relative_gap(const Tensor& x, const Tensor& y) {
  const double nx = norm(x);
  return nx == 0.0 ? norm(x - y) : norm(x - y) / nx;
}

// Files written by the current command, removed again if it fails.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  fs::path add(const std::string& name) {
    fs::path p = dir_ / name;
    written_.push_back(p);
    return p;
  }

  void track(fs::path p) { written_.push_back(std::move(p)); }

  void discard() noexcept {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

void write_ddim_trace(const Trajectory& t, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_csv_schema(out, "ddim-trace");
  out << "step,t_from,t_to,norm\n";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    out << i + 1 << ',' << t.steps[i].t_from << ',' << t.steps[i].t_to << ',' << num(t.steps[i].norm) << "\n";
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

void write_coupled_trace(const std::vector<CoupledTraceRow>& trace, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_csv_schema(out, "edict-trace");
  out << "step,t,cos_sim_xy,norm_x,norm_y,gap_norm\n";
  for (const auto& r : trace) {
    out << r.step << ',' << r.t << ',' << num(r.cos_xy) << ',' << num(r.norm_x) << ',' << num(r.norm_y) << ','
        << num(r.gap_norm) << "\n";
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

std::vector<Tensor> x_states(const std::vector<CoupledState>& states, bool take_y = false) {
  std::vector<Tensor> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(take_y ? s.y : s.x);
  return out;
}

using Summary = std::vector<std::pair<std::string, std::string>>;

Summary run_sample(const RunConfig& c, const Setup& s, Outputs& o) {
  SeededRng rng(c.seed);
  const Tensor x_top = gaussian_draw(rng, s.shape);
  const GuidedEps eps(*s.model, condition(s, c.label), GuidanceConfig(c.effective_guidance()));
  Summary sum;
  if (c.sampler == "ddim") {
    const Trajectory t = ddim_sample(x_top, s.schedule, eps, c.store_trajectory);
    require_finite(t.final(), "sample");
    write_tensor(t.final(), o.add("sample_x.edt"));
    write_ddim_trace(t, o.add("trace.csv"));
    if (c.store_trajectory) write_tensor(stack(t.states), o.add("trajectory_x.edt"));
    if (c.pgm) write_pgm(t.final(), o.add("sample_x.pgm"));
    sum.emplace_back("norm_x", num(norm(t.final())));
  } else {
    CoupledOptions opts;
    opts.store_states = c.store_trajectory;
    const CoupledRun r = edict_denoise(generation_start(x_top, s.schedule), s.schedule, eps, c.effective_p(), opts);
    require_finite(r.state.x, "sample x");
    require_finite(r.state.y, "sample y");
    write_tensor(r.state.x, o.add("sample_x.edt"));
    write_tensor(r.state.y, o.add("sample_y.edt"));
    write_coupled_trace(r.trace, o.add("trace.csv"));
    if (c.store_trajectory) {
      write_tensor(stack(x_states(r.states)), o.add("trajectory_x.edt"));
      write_tensor(stack(x_states(r.states, true)), o.add("trajectory_y.edt"));
    }
    if (c.pgm) {
      write_pgm(r.state.x, o.add("sample_x.pgm"));
      write_pgm(r.state.y, o.add("sample_y.pgm"));
    }
    sum.emplace_back("norm_x", num(norm(r.state.x)));
    sum.emplace_back("xy_gap", num(relative_gap(r.state.x, r.state.y)));
  }
  return sum;
}

Summary run_invert(const RunConfig& c, const Setup& s, Outputs& o) {
  const Tensor x0 = load_input(c, s);
  const GuidedEps eps(*s.model, condition(s, c.label), GuidanceConfig(c.effective_guidance()));
  Summary sum;
  if (c.sampler == "ddim") {
    const Trajectory t = ddim_invert(x0, s.schedule, eps, c.store_trajectory);
    require_finite(t.final(), "latent");
    write_tensor(t.final(), o.add("latent_x.edt"));
    write_ddim_trace(t, o.add("trace.csv"));
    if (c.store_trajectory) write_tensor(stack(t.states), o.add("trajectory_x.edt"));
    sum.emplace_back("norm_x", num(norm(t.final())));
  } else {
    CoupledOptions opts;
    opts.store_states = c.store_trajectory;
    const CoupledRun r = edict_invert(x0, s.schedule, eps, c.effective_p(), opts);
    require_finite(r.state.x, "latent x");
    require_finite(r.state.y, "latent y");
    write_tensor(r.state.x, o.add("latent_x.edt"));
    write_tensor(r.state.y, o.add("latent_y.edt"));
    write_coupled_trace(r.trace, o.add("trace.csv"));
    if (c.store_trajectory) {
      write_tensor(stack(x_states(r.states)), o.add("trajectory_x.edt"));
      write_tensor(stack(x_states(r.states, true)), o.add("trajectory_y.edt"));
    }
    sum.emplace_back("norm_x", num(norm(r.state.x)));
    sum.emplace_back("xy_gap", num(relative_gap(r.state.x, r.state.y)));
  }
  return sum;
}

Summary run_roundtrip(const RunConfig& c, const Setup& s, Outputs& o) {
  const Tensor x0 = c.input.empty() ? dataset(c, s, 1).front().x0 : load_input(c, s);
  const GuidedEps eps(*s.model, condition(s, c.label), GuidanceConfig(c.effective_guidance()));
  Tensor recon;
  Summary sum;
  if (c.sampler == "ddim") {
    const Trajectory up = ddim_invert(x0, s.schedule, eps);
    const Trajectory down = ddim_sample(up.final(), s.schedule, eps, c.store_trajectory);
    recon = down.final();
    require_finite(recon, "reconstruction");
    write_tensor(recon, o.add("recon_x.edt"));
    write_ddim_trace(down, o.add("trace.csv"));
  } else {
    const double p = c.effective_p();
    const CoupledRun up = edict_invert(x0, s.schedule, eps, p);
    const CoupledRun down = edict_denoise(up.state, s.schedule, eps, p);
    recon = down.state.x;
    require_finite(down.state.x, "reconstruction x");
    require_finite(down.state.y, "reconstruction y");
    write_tensor(down.state.x, o.add("recon_x.edt"));
    write_tensor(down.state.y, o.add("recon_y.edt"));
    write_coupled_trace(down.trace, o.add("trace.csv"));
    sum.emplace_back("max_abs_y", num(max_abs_diff(down.state.y, x0)));
  }
  if (c.pgm) write_pgm(recon, o.add("recon_x.pgm"));
  sum.insert(sum.begin(), {"max_abs", num(max_abs_diff(recon, x0))});
  sum.insert(sum.begin(), {"mse", num(mean_squared_error(recon, x0))});
  return sum;
}

Summary run_edit(const RunConfig& c, const Setup& s, Outputs& o) {
  const Tensor x0 = load_input(c, s);
  EditParams params;
  params.strength = c.strength;
  params.guidance = c.effective_guidance();
  params.p = c.effective_p();
  params.base = condition(s, c.base_label);
  params.target = condition(s, c.target_label);
  const EditResult r = edit(x0, params, s.schedule, *s.model);
  require_finite(r.x, "edit x");
  require_finite(r.y, "edit y");
  write_tensor(r.x, o.add("edit_x.edt"));
  write_tensor(r.y, o.add("edit_y.edt"));
  if (c.pgm) {
    write_pgm(r.x, o.add("edit_x.pgm"));
    write_pgm(r.y, o.add("edit_y.pgm"));
  }
  const EditReportRow row = edit_report(x0, params, s.schedule, *s.model);
  std::vector<EditReportRow> rows{row};
  if (!c.strength_grid.empty()) {
    const auto grid = edit_grid_report(x0, params, parse_list<double>(c.strength_grid, "--strength-grid"),
                                       {params.guidance}, s.schedule, *s.model);
    rows.insert(rows.end(), grid.begin(), grid.end());
  }
  write_edit_csv(rows, o.add("edit.csv"));
  return {{"inversion_steps", std::to_string(r.inversion_steps)},
          {"mse_roundtrip", num(row.mse_roundtrip)},
          {"xy_gap", num(row.xy_gap)},
          {"dist_input", num(norm(r.x - x0))}};
}

Summary run_bench(const RunConfig& c, const Setup& s, Outputs& o) {
  const auto data = dataset(c, s, static_cast<std::size_t>(c.n_inputs));
  std::vector<Tensor> inputs;
  std::vector<Condition> conds;
  for (const auto& d : data) {
    inputs.push_back(d.x0);
    conds.push_back(c.label >= 0 ? condition(s, c.label) : d.cond);
  }
  ReconConfig rc;
  rc.guidance_grid = parse_list<double>(c.guidance_grid, "--guidance-grid");
  rc.steps_grid = parse_list<int>(c.steps_grid, "--steps-grid");
  rc.p = c.p;
  rc.base_steps = 50;
  const auto rows = recon_benchmark(inputs, conds, s.schedule, *s.model, rc);
  write_recon_csv(rows, o.add("recon.csv"));
  Summary sum{{"rows", std::to_string(rows.size())}};
  for (const auto& r : rows) {
    if (!std::isfinite(r.mse)) throw NumericError("non-finite reconstruction error for " + to_string(r.method));
    if (r.steps == rc.steps_grid.front() && r.guidance == rc.guidance_grid.front()) {
      sum.emplace_back("mse_" + to_string(r.method), num(r.mse));
    }
  }
  return sum;
}

Summary run_diverge(const RunConfig& c, const Setup& s, Outputs& o) {
  SeededRng rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  const Tensor noise = gaussian_draw(rng, s.shape);
  const Tensor real = c.input.empty() ? dataset(c, s, 1).front().x0 : load_input(c, s);
  const GuidedEps eps(*s.model, condition(s, c.label), GuidanceConfig(c.effective_guidance()));
  const auto results = divergence_sweep(noise, real, s.schedule, eps, parse_list<double>(c.p_grid, "--p-grid"));
  write_divergence_csv(results, o.add("diverge_trace.csv"), o.add("diverge_verdict.csv"));
  std::vector<PlotSeries> series;
  std::string inv_flags;
  std::string gen_flags;
  for (const auto& r : results) {
    PlotSeries ps{"p=" + num(r.p), {}};
    int k = 0;
    for (const auto& row : r.inversion.trace) ps.points.emplace_back(++k, row.cos_xy);
    series.push_back(std::move(ps));
    inv_flags += (inv_flags.empty() ? "" : ",") + num(r.p) + ":" + (r.inversion.diverged ? "1" : "0");
    gen_flags += (gen_flags.empty() ? "" : ",") + num(r.p) + ":" + (r.generation.diverged ? "1" : "0");
  }
  write_svg_plot(o.add("diverge.svg"), "inversion round trip: cos(x, y) per step", series);
  return {{"inversion_flags", inv_flags}, {"generation_flags", gen_flags}};
}

Summary run_align(const RunConfig& c, const Setup& s, Outputs& o) {
  const auto sample = dataset(c, s, 1).front();
  const Tensor x0 = c.input.empty() ? sample.x0 : load_input(c, s);
  const Condition cond = c.label >= 0 ? condition(s, c.label) : sample.cond;
  const GuidanceConfig guidance(c.effective_guidance());
  const GuidedEps eps(*s.model, cond, guidance);
  Trajectory traj;
  if (c.sampler == "ddim") {
    traj = ddim_invert(x0, s.schedule, eps, true);
  } else {
    CoupledOptions opts;
    opts.store_states = true;
    const CoupledRun r = edict_invert(x0, s.schedule, eps, c.effective_p(), opts);
    traj.direction = Direction::invert;
    traj.all_states = true;
    for (std::size_t i = 0; i < r.states.size(); ++i) {
      traj.states.push_back(r.states[i].x);
      traj.timesteps.push_back(r.states[i].t);
      if (i > 0) traj.steps.push_back({r.states[i - 1].t, r.states[i].t, norm(r.states[i].x)});
    }
  }
  const AlignmentTrace trace = pseudograd_alignment(traj, *s.model, cond, guidance);
  write_alignment_csv(trace, o.add("align.csv"));
  PlotSeries u{"uncond", {}}, k{"cond", {}}, pg{"pseudograd", {}};
  double mu = 0.0, mp = 0.0;
  for (const auto& r : trace) {
    u.points.emplace_back(r.t, r.cos_uncond);
    k.points.emplace_back(r.t, r.cos_cond);
    pg.points.emplace_back(r.t, r.cos_pseudograd);
    mu += r.cos_uncond;
    mp += r.cos_pseudograd;
  }
  write_svg_plot(o.add("align.svg"), "consecutive-step cosine of noise predictions", {u, k, pg});
  const double n = trace.empty() ? 1.0 : static_cast<double>(trace.size());
  return {{"rows", std::to_string(trace.size())},
          {"mean_cos_uncond", num(mu / n)},
          {"mean_cos_pseudograd", num(mp / n)}};
}

Summary run_train(const RunConfig& c, const Setup& s, Outputs& o) {
  SeededRng data_rng(c.seed);
  const auto data = sample_mixture(twin_components(), 4096, data_rng);
  TrainConfig tc;
  tc.steps = c.iters;
  tc.lr = c.lr;
  SeededRng rng(c.seed + 1);
  TrainStats stats;
  const MlpEps model = train_mlp(data, s.schedule, tc, rng, &stats);
  fs::path weights(c.weights);
  if (weights.has_parent_path()) fs::create_directories(weights.parent_path());
  o.track(weights);
  write_mlp(model, weights);
  const fs::path loss = o.add("train_loss.csv");
  std::ofstream out(loss, std::ios::trunc);
  write_csv_schema(out, "train-loss");
  out << "iter,loss\n";
  for (std::size_t i = 0; i < stats.loss_history.size(); ++i) out << i + 1 << ',' << num(stats.loss_history[i]) << "\n";
  if (!out) throw IoError(IoErrorKind::write_failed, loss.string());
  return {{"initial_loss", num(stats.initial_validation_loss)}, {"final_loss", num(stats.final_validation_loss)}};
}

}  // namespace

void run(const RunConfig& c, std::ostream& out) {
  fs::create_directories(c.out);
  Outputs outputs(c.out);
  try {
    const Setup setup = make_setup(c);
    {
      const fs::path cfg_path = outputs.add("run.cfg");
      std::ofstream cfg(cfg_path, std::ios::trunc);
      cfg << canonical(c);
      if (!cfg) throw IoError(IoErrorKind::write_failed, cfg_path.string());
    }
    static const std::map<std::string, std::function<Summary(const RunConfig&, const Setup&, Outputs&)>> commands{
        {"sample", run_sample}, {"invert", run_invert}, {"roundtrip", run_roundtrip}, {"edit", run_edit},
        {"bench", run_bench},   {"diverge", run_diverge}, {"align", run_align},     {"train", run_train}};
    const Summary sum = commands.at(c.command)(c, setup, outputs);
    std::ostringstream line;
    line << "command=" << c.command << " sampler=" << c.sampler << " model=" << c.model << " steps=" << c.steps
         << " p=" << num(c.effective_p()) << " guidance=" << num(c.effective_guidance()) << " seed=" << c.seed;
    for (const auto& [k, v] : sum) line << ' ' << k << '=' << v;
    line << " status=ok\n";
    out << line.str();
  } catch (...) {
    outputs.discard();
    throw;
  }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  auto code = [](ExitCode c) { return static_cast<int>(c); };
  try {
    parallel::apply_thread_env();
    const RunConfig cfg = parse_config(args);
    validate(cfg);
    run(cfg, out);
    return code(ExitCode::ok);
  } catch (const HelpRequested& h) {
    out << h.text;
    return code(ExitCode::ok);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return code(ExitCode::usage);
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return code(ExitCode::io);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return code(ExitCode::numeric);
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return code(ExitCode::domain);
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return code(ExitCode::domain);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return code(ExitCode::io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return code(ExitCode::failure);
  }
}

}  // namespace edict::cli
