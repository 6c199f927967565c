#include "edict/ddim.hpp"

#include "edict/error.hpp"

namespace edict {

Tensor ddim_step(const Tensor& x_hi, const StepCoeffs& c, const GuidedEps& eps) {
  return axpby(c.a, x_hi, c.b, eps(x_hi, c.t_hi));
}

Tensor ddim_invert_step(const Tensor& x_lo, const StepCoeffs& c, const GuidedEps& eps) {
  if (c.a == 0.0) throw DomainError("ddim_invert_step: coefficient a must be non-zero");
  return affine_solve(x_lo, c.b, eps(x_lo, c.t_hi), c.a);
}

namespace {

void record(Trajectory& traj, const StepCoeffs& c, const Tensor& state, bool store) {
  const bool down = traj.direction == Direction::denoise;
  traj.steps.push_back({down ? c.t_hi : c.t_lo, down ? c.t_lo : c.t_hi, norm(state)});
  traj.timesteps.push_back(down ? c.t_lo : c.t_hi);
  if (store) traj.states.push_back(state);
}

}  // namespace

Trajectory ddim_sample(const Tensor& x_top, const NoiseSchedule& schedule, const GuidedEps& eps, bool store_states) {
  const auto seq = step_sequence(schedule);
  Trajectory traj;
  traj.direction = Direction::denoise;
  traj.all_states = store_states;
  traj.timesteps.push_back(seq.back().t_hi);
  traj.states.push_back(x_top);
  Tensor x = x_top;
  for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
    x = ddim_step(x, *it, eps);
    record(traj, *it, x, store_states);
  }
  if (!store_states) traj.states.push_back(std::move(x));
  return traj;
}

Trajectory ddim_invert(const Tensor& x0, const NoiseSchedule& schedule, const GuidedEps& eps, bool store_states) {
  const auto seq = step_sequence(schedule);
  Trajectory traj;
  traj.direction = Direction::invert;
  traj.all_states = store_states;
  traj.timesteps.push_back(0);
  traj.states.push_back(x0);
  Tensor x = x0;
  for (const auto& c : seq) {
    x = ddim_invert_step(x, c, eps);
    record(traj, c, x, store_states);
  }
  if (!store_states) traj.states.push_back(std::move(x));
  return traj;
}

}  // namespace edict
