#include "edict/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "edict/diagnostics.hpp"
#include "edict/error.hpp"
#include "edict/kernels.hpp"

namespace edict {

MixingConfig::MixingConfig(double p_) : p(p_) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("mixing coefficient p must lie in (0, 1]");
}

Tensor mix(const Tensor& x, const Tensor& y, double p) {
  require_same_shape(x, y, "mix");
  Tensor out(x.shape());
  kernels::mix(p, x.data(), y.data(), out.data());
  return out;
}

Tensor unmix(const Tensor& mixed, const Tensor& y, double p) {
  require_same_shape(mixed, y, "unmix");
  if (p == 0.0) throw DomainError("unmix: p == 0 has no inverse");
  Tensor out(mixed.shape());
  kernels::unmix(p, mixed.data(), y.data(), out.data());
  return out;
}

namespace {

void check_p(double p) { (void)MixingConfig(p); }

// The unflipped update; `first` is the sequence that moves first.
std::pair<Tensor, Tensor> denoise_ordered(const Tensor& first, const Tensor& second, const StepCoeffs& c,
                                          const GuidedEps& eps, double p) {
  Tensor first_inter = axpby(c.a, first, c.b, eps(second, c.t_hi));
  Tensor second_inter = axpby(c.a, second, c.b, eps(first_inter, c.t_hi));
  Tensor first_next = mix(first_inter, second_inter, p);
  Tensor second_next = mix(second_inter, first_next, p);
  return {std::move(first_next), std::move(second_next)};
}

std::pair<Tensor, Tensor> noise_ordered(const Tensor& first, const Tensor& second, const StepCoeffs& c,
                                        const GuidedEps& eps, double p) {
  Tensor second_inter = unmix(second, first, p);
  Tensor first_inter = unmix(first, second_inter, p);
  Tensor second_prev = affine_solve(second_inter, c.b, eps(first_inter, c.t_hi), c.a);
  Tensor first_prev = affine_solve(first_inter, c.b, eps(second_prev, c.t_hi), c.a);
  return {std::move(first_prev), std::move(second_prev)};
}

CoupledTraceRow trace_row(int step, const CoupledState& s) {
  CoupledTraceRow row;
  row.step = step;
  row.t = s.t;
  row.cos_xy = cosine_similarity(s.x, s.y);
  row.norm_x = norm(s.x);
  row.norm_y = norm(s.y);
  row.gap_norm = norm(s.x - s.y);
  return row;
}

}  // namespace

CoupledState edict_denoise_step(const CoupledState& s, const StepCoeffs& c, const GuidedEps& eps, double p) {
  check_p(p);
  require_same_shape(s.x, s.y, "edict_denoise_step");
  if (s.t != c.t_hi) throw DomainError("edict_denoise_step: state timestep does not match the step's t_hi");
  CoupledState out;
  out.t = c.t_lo;
  out.flip = !s.flip;
  if (!s.flip) {
    std::tie(out.x, out.y) = denoise_ordered(s.x, s.y, c, eps, p);
  } else {
    std::tie(out.y, out.x) = denoise_ordered(s.y, s.x, c, eps, p);
  }
  return out;
}

CoupledState edict_noise_step(const CoupledState& s, const StepCoeffs& c, const GuidedEps& eps, double p) {
  check_p(p);
  require_same_shape(s.x, s.y, "edict_noise_step");
  if (s.t != c.t_lo) throw DomainError("edict_noise_step: state timestep does not match the step's t_lo");
  if (c.a == 0.0) throw DomainError("edict_noise_step: coefficient a must be non-zero");
  CoupledState out;
  out.t = c.t_hi;
  out.flip = !s.flip;  // the order the undone denoising step used
  if (!out.flip) {
    std::tie(out.x, out.y) = noise_ordered(s.x, s.y, c, eps, p);
  } else {
    std::tie(out.y, out.x) = noise_ordered(s.y, s.x, c, eps, p);
  }
  return out;
}

CoupledState generation_start(const Tensor& x_top, const NoiseSchedule& schedule) {
  return CoupledState{x_top, x_top, schedule.timesteps().back(), false};
}

CoupledRun edict_denoise(const CoupledState& s0, const NoiseSchedule& schedule, const GuidedEps& eps, double p,
                         const CoupledOptions& options) {
  check_p(p);
  const auto seq = step_sequence(schedule);
  std::size_t start = 0;
  if (s0.t != 0) {
    const auto& ts = schedule.timesteps();
    const auto it = std::find(ts.begin(), ts.end(), s0.t);
    if (it == ts.end()) throw DomainError("edict_denoise: state timestep is not a sampler timestep");
    start = static_cast<std::size_t>(it - ts.begin()) + 1;
  }
  CoupledRun run;
  run.state = s0;
  if (options.store_states) run.states.push_back(s0);
  for (std::size_t i = start; i-- > 0;) {
    run.state = edict_denoise_step(run.state, seq[i], eps, p);
    run.trace.push_back(trace_row(static_cast<int>(run.trace.size()) + 1, run.state));
    if (options.store_states) run.states.push_back(run.state);
  }
  return run;
}

CoupledRun edict_noise(const CoupledState& s0, const NoiseSchedule& schedule, const GuidedEps& eps, double p,
                       const CoupledOptions& options) {
  check_p(p);
  const auto seq = step_sequence(schedule);
  std::size_t start = 0;
  if (s0.t != 0) {
    const auto& ts = schedule.timesteps();
    const auto it = std::find(ts.begin(), ts.end(), s0.t);
    if (it == ts.end()) throw DomainError("edict_noise: state timestep is not a sampler timestep");
    start = static_cast<std::size_t>(it - ts.begin()) + 1;
  }
  const std::size_t available = seq.size() - start;
  const std::size_t n = options.steps == 0 ? available : options.steps;
  if (n > available) throw DomainError("edict_noise: more steps requested than the schedule has");
  CoupledRun run;
  run.state = s0;
  if (options.store_states) run.states.push_back(run.state);
  for (std::size_t i = 0; i < n; ++i) {
    run.state = edict_noise_step(run.state, seq[start + i], eps, p);
    run.trace.push_back(trace_row(static_cast<int>(i) + 1, run.state));
    if (options.store_states) run.states.push_back(run.state);
  }
  return run;
}

CoupledRun edict_invert(const Tensor& x0, const NoiseSchedule& schedule, const GuidedEps& eps, double p,
                        const CoupledOptions& options) {
  const std::size_t total = schedule.timesteps().size();
  return edict_noise(CoupledState{x0, x0, 0, total % 2 == 1}, schedule, eps, p, options);
}

double scale_p(double base_p, int base_steps, int steps) {
  if (steps < 1) throw DomainError("scale_p: steps must be >= 1");
  if (steps == base_steps) return base_p;
  return std::pow(base_p, static_cast<double>(base_steps) / static_cast<double>(steps));
}

}  // namespace edict
