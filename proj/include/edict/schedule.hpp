#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "edict/tensor.hpp"

namespace edict {

enum class ScheduleKind { scaled_linear, linear, cosine, custom };
enum class Spacing { trailing, leading };

ScheduleKind parse_schedule_kind(const std::string& name);
Spacing parse_spacing(const std::string& name);
std::string to_string(ScheduleKind kind);
std::string to_string(Spacing spacing);

struct ScheduleParams {
  ScheduleKind kind = ScheduleKind::scaled_linear;
  int train_steps = 1000;
  int steps = 50;
  Spacing spacing = Spacing::trailing;
  double beta_start = 0.00085;
  double beta_end = 0.012;
};

// Cumulative signal level alpha_bar[t] for t in [0, train_steps] together
// with the increasing subset of training timesteps the sampler visits.
// alpha_bar[0] == 1 and alpha_bar[train_steps] > 0.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> alpha_bar, int steps, Spacing spacing, ScheduleKind kind = ScheduleKind::custom);

  int train_steps() const noexcept { return static_cast<int>(alpha_bar_.size()) - 1; }
  int steps() const noexcept { return static_cast<int>(timesteps_.size()); }
  ScheduleKind kind() const noexcept { return kind_; }
  Spacing spacing() const noexcept { return spacing_; }

  double alpha_bar(int t) const;
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }
  const std::vector<int>& timesteps() const noexcept { return timesteps_; }

  // Same alpha_bar table with a different sampler subset.
  NoiseSchedule with_steps(int steps) const;

 private:
  std::vector<double> alpha_bar_;
  std::vector<int> timesteps_;
  Spacing spacing_;
  ScheduleKind kind_;
};

NoiseSchedule build_schedule(const ScheduleParams& params);
NoiseSchedule build_schedule(ScheduleKind kind, int train_steps, int steps, Spacing spacing);

std::vector<int> sampler_timesteps(int train_steps, int steps, Spacing spacing);

// One sampler step between two training timesteps. A denoising step maps
// x(t_hi) to x(t_lo) = a * x(t_hi) + b * eps.
struct StepCoeffs {
  double a = 1.0;
  double b = 0.0;
  int t_hi = 0;
  int t_lo = 0;
};

StepCoeffs coeffs(const NoiseSchedule& s, int t_hi, int t_lo);
StepCoeffs coeffs_from_alphas(double alpha_bar_hi, double alpha_bar_lo);

// Steps ordered from the cleanest upward: entry i connects timesteps[i-1]
// (or 0 for i == 0) to timesteps[i]. Denoising walks this list backwards.
std::vector<StepCoeffs> step_sequence(const NoiseSchedule& s);

// sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * eps
Tensor forward_noise(const Tensor& x0, const Tensor& eps, double alpha_bar_t);

void write_schedule_csv(const NoiseSchedule& s, const std::filesystem::path& path);
NoiseSchedule read_schedule_csv(const std::filesystem::path& path, int steps, Spacing spacing);

}  // namespace edict
