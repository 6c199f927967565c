#include "edict/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <omp.h>

#include "edict/coupled.hpp"
#include "edict/csv.hpp"
#include "edict/error.hpp"

namespace edict {

double cosine_similarity(const Tensor& u, const Tensor& v, bool* degenerate) {
  require_same_shape(u, v, "cosine_similarity");
  if (degenerate != nullptr) *degenerate = false;
  if (!u.all_finite() || !v.all_finite()) return std::numeric_limits<double>::quiet_NaN();
  const double uu = dot(u, u);
  const double vv = dot(v, v);
  if (uu == 0.0 || vv == 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  // sqrt(uu * vv) is exact for u == v; fall back to separate roots when the
  // product leaves the normal range.
  const double prod = uu * vv;
  const double denom = std::isnormal(prod) ? std::sqrt(prod) : std::sqrt(uu) * std::sqrt(vv);
  return std::clamp(dot(u, v) / denom, -1.0, 1.0);
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(ReconMethod m) {
  switch (m) {
    case ReconMethod::edict_uc: return "edict_uc";
    case ReconMethod::edict_c: return "edict_c";
    case ReconMethod::ddim_uc: return "ddim_uc";
    case ReconMethod::ddim_c: return "ddim_c";
  }
  return "unknown";
}

std::vector<ReconRow> recon_benchmark(const std::vector<Tensor>& inputs, const std::vector<Condition>& conditions,
                                      const NoiseSchedule& schedule, const EpsModel& model,
                                      const ReconConfig& config) {
  if (inputs.empty()) throw DomainError("recon_benchmark: no inputs");
  if (conditions.size() != inputs.size()) throw DomainError("recon_benchmark: one condition per input required");
  constexpr ReconMethod kMethods[] = {ReconMethod::edict_uc, ReconMethod::edict_c, ReconMethod::ddim_uc,
                                      ReconMethod::ddim_c};
  std::vector<ReconRow> rows;
  for (int steps : config.steps_grid) {
    const NoiseSchedule sched = schedule.with_steps(steps);
    const double p = scale_p(config.p, config.base_steps, steps);
    for (double g : config.guidance_grid) {
      const GuidanceConfig guidance(g);
      for (ReconMethod method : kMethods) {
        const bool conditional = method == ReconMethod::edict_c || method == ReconMethod::ddim_c;
        const bool coupled = method == ReconMethod::edict_uc || method == ReconMethod::edict_c;
        const long long n = static_cast<long long>(inputs.size());
        std::vector<double> per_input(inputs.size());
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (long long i = 0; i < n; ++i) {
          try {
            const auto idx = static_cast<std::size_t>(i);
            const GuidedEps eps(model, conditional ? conditions[idx] : Condition::null(), guidance);
            Tensor recon;
            if (coupled) {
              const CoupledRun up = edict_invert(inputs[idx], sched, eps, p);
              recon = edict_denoise(up.state, sched, eps, p).state.x;
            } else {
              const Trajectory up = ddim_invert(inputs[idx], sched, eps);
              recon = ddim_sample(up.final(), sched, eps).final();
            }
            per_input[idx] = mean_squared_error(recon, inputs[idx]);
          } catch (...) {
#pragma omp critical
            failure = std::current_exception();
          }
        }
        if (failure) std::rethrow_exception(failure);
        double total = 0.0;
        for (double v : per_input) total += v;
        rows.push_back({method, steps, g, total / static_cast<double>(inputs.size()), inputs.size()});
      }
    }
  }
  return rows;
}

void write_recon_csv(const std::vector<ReconRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_csv_schema(out, "recon");
  out << kReconCsvHeader << "\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.steps << ',' << fmt(r.guidance) << ',' << fmt(r.mse) << ',' << r.n_inputs
        << "\n";
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

// ---------------------------------------------------------------------------

namespace {

void absorb(RoundTripVerdict& v, const std::vector<CoupledTraceRow>& trace, const char* pass) {
  const bool forward = std::string(pass) == "forward";
  for (const auto& row : trace) {
    v.trace.push_back({pass, row.step, row.t, row.cos_xy, row.gap_norm});
    double& slot = forward ? v.min_cos_forward : v.min_cos_backward;
    if (std::isnan(row.cos_xy) || !std::isfinite(row.gap_norm)) {
      slot = std::numeric_limits<double>::quiet_NaN();
      v.diverged = true;
    } else {
      if (!std::isnan(slot)) slot = std::min(slot, row.cos_xy);
      if (row.cos_xy < kDivergenceCosThreshold) v.diverged = true;
    }
  }
}

double roundtrip_error(const CoupledState& s, const Tensor& reference) {
  return std::max(max_abs_diff(s.x, reference), max_abs_diff(s.y, reference));
}

}  // namespace

std::vector<DivergenceResult> divergence_sweep(const Tensor& generation_noise, const Tensor& real_input,
                                               const NoiseSchedule& schedule, const GuidedEps& eps,
                                               const std::vector<double>& p_grid) {
  std::vector<DivergenceResult> results;
  for (double p : p_grid) {
    (void)MixingConfig(p);
    DivergenceResult r;
    r.p = p;
    {
      const CoupledRun down = edict_denoise(generation_start(generation_noise, schedule), schedule, eps, p);
      absorb(r.generation, down.trace, "forward");
      const CoupledRun up = edict_noise(down.state, schedule, eps, p);
      absorb(r.generation, up.trace, "backward");
      const CoupledState& s = up.state;
      r.generation.roundtrip_max_abs = roundtrip_error(s, generation_noise);
      if (!std::isfinite(r.generation.roundtrip_max_abs)) r.generation.diverged = true;
    }
    {
      const CoupledRun up = edict_invert(real_input, schedule, eps, p);
      absorb(r.inversion, up.trace, "backward");
      const CoupledRun down = edict_denoise(up.state, schedule, eps, p);
      absorb(r.inversion, down.trace, "forward");
      r.inversion.roundtrip_max_abs = roundtrip_error(down.state, real_input);
      if (!std::isfinite(r.inversion.roundtrip_max_abs)) r.inversion.diverged = true;
    }
    results.push_back(std::move(r));
  }
  return results;
}

void write_divergence_csv(const std::vector<DivergenceResult>& results, const std::filesystem::path& trace_path,
                          const std::filesystem::path& verdict_path) {
  std::ofstream trace(trace_path, std::ios::trunc);
  std::ofstream verdict(verdict_path, std::ios::trunc);
  if (!trace) throw IoError(IoErrorKind::open_failed, trace_path.string());
  if (!verdict) throw IoError(IoErrorKind::open_failed, verdict_path.string());
  write_csv_schema(trace, "diverge-trace");
  trace << "p,run,pass,step,t,cos_sim_xy,gap_norm\n";
  write_csv_schema(verdict, "diverge-verdict");
  verdict << "p,run,diverged,min_cos_forward,min_cos_backward,roundtrip_max_abs\n";
  for (const auto& r : results) {
    for (const auto& [name, v] : {std::pair<const char*, const RoundTripVerdict*>{"generation", &r.generation},
                                  std::pair<const char*, const RoundTripVerdict*>{"inversion", &r.inversion}}) {
      for (const auto& row : v->trace) {
        trace << fmt(r.p) << ',' << name << ',' << row.pass << ',' << row.step << ',' << row.t << ','
              << fmt(row.cos_xy) << ',' << fmt(row.gap_norm) << "\n";
      }
      verdict << fmt(r.p) << ',' << name << ',' << (v->diverged ? 1 : 0) << ',' << fmt(v->min_cos_forward) << ','
              << fmt(v->min_cos_backward) << ',' << fmt(v->roundtrip_max_abs) << "\n";
    }
  }
  if (!trace || !verdict) throw IoError(IoErrorKind::write_failed, trace_path.string());
}

// ---------------------------------------------------------------------------

AlignmentTrace pseudograd_alignment(const Trajectory& trajectory, const EpsModel& model, const Condition& cond,
                                    const GuidanceConfig& guidance) {
  if (!trajectory.all_states) throw DomainError("pseudograd_alignment: trajectory must store every state");
  if (cond.is_null()) throw DomainError("pseudograd_alignment: needs a non-null condition");
  const double g = guidance.scale;
  AlignmentTrace trace;
  const bool invert = trajectory.direction == Direction::invert;
  for (std::size_t k = 1; k < trajectory.steps.size(); ++k) {
    const auto& step = trajectory.steps[k];
    const int t = invert ? step.t_to : step.t_from;
    const Tensor& prev = trajectory.states[k - 1];
    const Tensor& cur = trajectory.states[k];
    const Tensor u_prev = model.predict(prev, t, Condition::null());
    const Tensor u_cur = model.predict(cur, t, Condition::null());
    const Tensor c_prev = model.predict(prev, t, cond);
    const Tensor c_cur = model.predict(cur, t, cond);
    AlignmentRow row;
    row.step = static_cast<int>(k);
    row.t = t;
    row.cos_uncond = cosine_similarity(u_prev, u_cur);
    row.cos_cond = cosine_similarity(c_prev, c_cur);
    bool degenerate = false;
    row.cos_pseudograd = cosine_similarity(g * (c_prev - u_prev), g * (c_cur - u_cur), &degenerate);
    row.pseudograd_degenerate = degenerate;
    trace.push_back(row);
  }
  return trace;
}

void write_alignment_csv(const AlignmentTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_csv_schema(out, "align");
  out << kAlignmentCsvHeader << "\n";
  for (const auto& r : trace) {
    out << r.step << ',' << r.t << ',' << fmt(r.cos_uncond) << ',' << fmt(r.cos_cond) << ',' << fmt(r.cos_pseudograd)
        << "\n";
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 400, M = 48;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (!(x1 > x0)) x0 -= 1, x1 += 1;
  if (!(y1 > y0)) y0 -= 1, y1 += 1;
  auto sx = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
  auto sy = [&](double y) { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << M << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
      << "<text x=\"4\" y=\"" << sy(y1) << "\" font-size=\"10\">" << fmt(y1).substr(0, 8) << "</text>\n"
      << "<text x=\"4\" y=\"" << sy(y0) << "\" font-size=\"10\">" << fmt(y0).substr(0, 8) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[i % 6] << "\" points=\"";
    for (const auto& [x, y] : series[i].points) {
      if (std::isfinite(x) && std::isfinite(y)) out << sx(x) << ',' << sy(y) << ' ';
    }
    out << "\"/>\n<text x=\"" << W - 150 << "\" y=\"" << 40 + 14 * i << "\" font-size=\"11\" fill=\"" << colors[i % 6]
        << "\">" << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

}  // namespace edict
