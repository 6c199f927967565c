#pragma once

#include <vector>

#include "edict/eps_models.hpp"
#include "edict/schedule.hpp"
#include "edict/tensor.hpp"

namespace edict {

enum class Direction { denoise, invert };

struct StepRecord {
  int t_from = 0;
  int t_to = 0;
  double norm = 0.0;  // norm of the state after the step
};

// A sampler run. `timesteps` always lists every visited state's timestep
// (steps + 1 entries, strictly monotone in the run direction). `states`
// holds all of them when stored, otherwise the two endpoints.
struct Trajectory {
  Direction direction = Direction::denoise;
  std::vector<int> timesteps;
  std::vector<StepRecord> steps;
  std::vector<Tensor> states;
  bool all_states = false;

  const Tensor& initial() const { return states.front(); }
  const Tensor& final() const { return states.back(); }
};

// x_lo = a * x_hi + b * eps(x_hi, t_hi)
Tensor ddim_step(const Tensor& x_hi, const StepCoeffs& c, const GuidedEps& eps);

// x_hi ~= (x_lo - b * eps(x_lo, t_hi)) / a, evaluating eps at the known state.
Tensor ddim_invert_step(const Tensor& x_lo, const StepCoeffs& c, const GuidedEps& eps);

Trajectory ddim_sample(const Tensor& x_top, const NoiseSchedule& schedule, const GuidedEps& eps,
                       bool store_states = false);
Trajectory ddim_invert(const Tensor& x0, const NoiseSchedule& schedule, const GuidedEps& eps,
                       bool store_states = false);

}  // namespace edict
