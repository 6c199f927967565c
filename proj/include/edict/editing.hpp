#pragma once

#include <filesystem>
#include <vector>

#include "edict/coupled.hpp"
#include "edict/eps_models.hpp"
#include "edict/schedule.hpp"

namespace edict {

struct EditParams {
  double strength = 0.8;  // fraction of the schedule to invert, in (0, 1]
  double guidance = 3.0;
  double p = 0.93;
  Condition base = Condition::null();
  Condition target = Condition::null();

  // Number of inversion steps for a schedule of `steps` steps; throws
  // DomainError when it rounds down to zero.
  std::size_t inversion_steps(int steps) const;
};

struct EditResult {
  Tensor x;
  Tensor y;
  CoupledState noised;  // the partially inverted state
  std::size_t inversion_steps = 0;
};

// Inverts x0 through floor(strength * S) steps under the base condition,
// then denoises to t = 0 under the target condition.
EditResult edit(const Tensor& x0, const EditParams& params, const NoiseSchedule& schedule, const EpsModel& model);

struct EditReportRow {
  double strength = 0.0;
  int steps = 0;
  double p = 0.0;
  double guidance = 0.0;
  double mse_roundtrip = 0.0;       // base -> base edit against x0
  double xy_gap = 0.0;              // |x - y| / |x| of the target edit
  double dist_to_base_mean = 0.0;   // NaN when the model has no label means
  double dist_to_target_mean = 0.0;
};

EditReportRow edit_report(const Tensor& x0, const EditParams& params, const NoiseSchedule& schedule,
                          const EpsModel& model);

// One row per (strength, guidance) pair, strength-major. Other fields come
// from `params`. Grid points run concurrently.
std::vector<EditReportRow> edit_grid_report(const Tensor& x0, const EditParams& params,
                                            const std::vector<double>& strengths, const std::vector<double>& guidances,
                                            const NoiseSchedule& schedule, const EpsModel& model);

inline constexpr const char* kEditCsvHeader =
    "s,S,p,G,mse_roundtrip,xy_gap,dist_to_base_mean,dist_to_target_mean";
void write_edit_csv(const std::vector<EditReportRow>& rows, const std::filesystem::path& path);

}  // namespace edict
