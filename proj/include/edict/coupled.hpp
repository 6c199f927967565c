#pragma once

#include <cstddef>
#include <vector>

#include "edict/eps_models.hpp"
#include "edict/schedule.hpp"
#include "edict/tensor.hpp"

namespace edict {

// The pair of coupled sequences at sampler timestep t. `flip` is the order
// used by the next denoising step: false updates x first, true updates y
// first. Each denoising step toggles it.
struct CoupledState {
  Tensor x;
  Tensor y;
  int t = 0;
  bool flip = false;
};

struct MixingConfig {
  double p = 0.93;

  explicit MixingConfig(double p_ = 0.93);
};

// Mixing layer p*x + (1-p)*y, evaluated as y + p*(x - y) so that x == y is a
// fixed point in floating point too.
Tensor mix(const Tensor& x, const Tensor& y, double p);
// Dilating layer (mixed - (1-p)*y) / p, the exact inverse of mix.
Tensor unmix(const Tensor& mixed, const Tensor& y, double p);

// One coupled denoising step t_hi -> t_lo:
//   x' = a x + b eps(y, t);  y' = a y + b eps(x', t);
//   x'' = mix(x', y', p);     y'' = mix(y', x'', p)
// with x and y swapped when s.flip is set.
CoupledState edict_denoise_step(const CoupledState& s, const StepCoeffs& c, const GuidedEps& eps, double p);

// Exact algebraic inverse of edict_denoise_step (t_lo -> t_hi).
CoupledState edict_noise_step(const CoupledState& s, const StepCoeffs& c, const GuidedEps& eps, double p);

struct CoupledTraceRow {
  int step = 0;
  int t = 0;
  double cos_xy = 0.0;
  double norm_x = 0.0;
  double norm_y = 0.0;
  double gap_norm = 0.0;
};

struct CoupledRun {
  CoupledState state;
  std::vector<CoupledTraceRow> trace;
  std::vector<CoupledState> states;  // every visited state when requested
};

struct CoupledOptions {
  bool store_states = false;
  // Number of steps for inversion; 0 means the whole schedule.
  std::size_t steps = 0;
};

// Starting state for generation from noise: y == x at the top timestep.
CoupledState generation_start(const Tensor& x_top, const NoiseSchedule& schedule);

// Denoises from s0.t (which must be 0 or a sampler timestep) down to 0.
CoupledRun edict_denoise(const CoupledState& s0, const NoiseSchedule& schedule, const GuidedEps& eps, double p,
                         const CoupledOptions& options = {});

// Noises a coupled state from s0.t upward through options.steps sampler steps
// (0 means up to the top timestep).
CoupledRun edict_noise(const CoupledState& s0, const NoiseSchedule& schedule, const GuidedEps& eps, double p,
                       const CoupledOptions& options = {});

// Noises x0 (with y0 = x0) upward through options.steps sampler steps. The
// initial flip parity matches the one a full-schedule generation ends with,
// so denoising the result retraces the same computation order.
CoupledRun edict_invert(const Tensor& x0, const NoiseSchedule& schedule, const GuidedEps& eps, double p,
                        const CoupledOptions& options = {});

// base_p^(base_steps / steps)
double scale_p(double base_p, int base_steps, int steps);

}  // namespace edict
