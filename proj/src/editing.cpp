#include "edict/editing.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>

#include "edict/csv.hpp"
#include "edict/error.hpp"

namespace edict {

std::size_t EditParams::inversion_steps(int steps) const {
  if (!(strength > 0.0 && strength <= 1.0)) throw DomainError("edit strength must lie in (0, 1]");
  if (steps < 1) throw DomainError("edit needs at least one sampler step");
  const auto n = static_cast<std::size_t>(std::floor(strength * steps));
  if (n == 0) throw DomainError("edit strength too small: floor(s * S) must be at least 1");
  return n;
}

EditResult edit(const Tensor& x0, const EditParams& params, const NoiseSchedule& schedule, const EpsModel& model) {
  const std::size_t n = params.inversion_steps(schedule.steps());
  const GuidanceConfig guidance(params.guidance);
  const GuidedEps up_eps(model, params.base, guidance);
  const GuidedEps down_eps(model, params.target, guidance);
  CoupledOptions options;
  options.steps = n;
  const CoupledRun up = edict_invert(x0, schedule, up_eps, params.p, options);
  CoupledRun down = edict_denoise(up.state, schedule, down_eps, params.p);
  return {std::move(down.state.x), std::move(down.state.y), up.state, n};
}

EditReportRow edit_report(const Tensor& x0, const EditParams& params, const NoiseSchedule& schedule,
                          const EpsModel& model) {
  EditReportRow row;
  row.strength = params.strength;
  row.steps = schedule.steps();
  row.p = params.p;
  row.guidance = params.guidance;

  EditParams same = params;
  same.target = params.base;
  row.mse_roundtrip = mean_squared_error(edit(x0, same, schedule, model).x, x0);

  const EditResult r = edit(x0, params, schedule, model);
  const double nx = norm(r.x);
  row.xy_gap = nx == 0.0 ? norm(r.x - r.y) : norm(r.x - r.y) / nx;

  auto dist = [&](const Condition& c) {
    if (c.kind() != Condition::Kind::label) return std::numeric_limits<double>::quiet_NaN();
    const auto mean = model.label_mean(c.label_value());
    return mean ? norm(r.x - *mean) : std::numeric_limits<double>::quiet_NaN();
  };
  row.dist_to_base_mean = dist(params.base);
  row.dist_to_target_mean = dist(params.target);
  return row;
}

std::vector<EditReportRow> edit_grid_report(const Tensor& x0, const EditParams& params,
                                            const std::vector<double>& strengths, const std::vector<double>& guidances,
                                            const NoiseSchedule& schedule, const EpsModel& model) {
  std::vector<EditParams> grid;
  for (double s : strengths) {
    for (double g : guidances) {
      EditParams point = params;
      point.strength = s;
      point.guidance = g;
      (void)point.inversion_steps(schedule.steps());
      (void)GuidanceConfig(g);
      grid.push_back(point);
    }
  }
  std::vector<EditReportRow> rows(grid.size());
  std::exception_ptr failure;
  const long long n = static_cast<long long>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      rows[static_cast<std::size_t>(i)] = edit_report(x0, grid[static_cast<std::size_t>(i)], schedule, model);
    } catch (...) {
#pragma omp critical(edict_edit_grid)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

void write_edit_csv(const std::vector<EditReportRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_csv_schema(out, "edit");
  out << kEditCsvHeader << "\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.strength, r.steps, r.p,
                  r.guidance, r.mse_roundtrip, r.xy_gap, r.dist_to_base_mean, r.dist_to_target_mean);
    out << buf;
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

}  // namespace edict
