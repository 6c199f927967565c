#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "edict/ddim.hpp"
#include "edict/eps_models.hpp"
#include "edict/schedule.hpp"
#include "edict/tensor.hpp"

namespace edict {

// u.v / (|u| |v|), clamped to [-1, 1]. A zero vector on either side yields 0
// and sets *degenerate. Non-finite inputs propagate as NaN.
double cosine_similarity(const Tensor& u, const Tensor& v, bool* degenerate = nullptr);

// ---------------------------------------------------------------------------
// Reconstruction error: invert each input, regenerate, average the MSE.

enum class ReconMethod { edict_uc, edict_c, ddim_uc, ddim_c };

std::string to_string(ReconMethod m);

struct ReconRow {
  ReconMethod method = ReconMethod::edict_uc;
  int steps = 0;
  double guidance = 0.0;
  double mse = 0.0;
  std::size_t n_inputs = 0;
};

struct ReconConfig {
  std::vector<double> guidance_grid{7.0};
  std::vector<int> steps_grid{50};
  double p = 0.93;       // at base_steps; other step counts use scale_p
  int base_steps = 50;
};

// Rows come out ordered by steps, then guidance, then method in enum order.
// Inputs are processed in parallel; the result does not depend on the
// thread count.
std::vector<ReconRow> recon_benchmark(const std::vector<Tensor>& inputs, const std::vector<Condition>& conditions,
                                      const NoiseSchedule& schedule, const EpsModel& model, const ReconConfig& config);

inline constexpr const char* kReconCsvHeader = "method,steps,guidance,mse,n";
void write_recon_csv(const std::vector<ReconRow>& rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Mixing-coefficient sweep.

struct DivergenceTraceRow {
  std::string pass;  // "forward" (denoise) or "backward" (noise)
  int step = 0;
  int t = 0;
  double cos_xy = 0.0;
  double gap_norm = 0.0;
};

struct RoundTripVerdict {
  std::vector<DivergenceTraceRow> trace;
  double min_cos_forward = 1.0;
  double min_cos_backward = 1.0;
  bool diverged = false;  // any cos < threshold or non-finite value
  double roundtrip_max_abs = 0.0;
};

struct DivergenceResult {
  double p = 0.0;
  RoundTripVerdict generation;  // noise -> image -> noise
  RoundTripVerdict inversion;   // image -> noise -> image
};

inline constexpr double kDivergenceCosThreshold = 0.5;

std::vector<DivergenceResult> divergence_sweep(const Tensor& generation_noise, const Tensor& real_input,
                                               const NoiseSchedule& schedule, const GuidedEps& eps,
                                               const std::vector<double>& p_grid);

void write_divergence_csv(const std::vector<DivergenceResult>& results, const std::filesystem::path& trace_path,
                          const std::filesystem::path& verdict_path);

// ---------------------------------------------------------------------------
// Consecutive-step alignment of the noise-prediction components.

struct AlignmentRow {
  int step = 0;
  int t = 0;
  double cos_uncond = 0.0;
  double cos_cond = 0.0;
  double cos_pseudograd = 0.0;
  bool pseudograd_degenerate = false;
};

using AlignmentTrace = std::vector<AlignmentRow>;

// For each step k >= 1 of a stored trajectory, compares the predictions made
// on the step's input state and on the previous step's input state, both at
// step k's prediction timestep. Yields steps - 1 rows.
AlignmentTrace pseudograd_alignment(const Trajectory& trajectory, const EpsModel& model, const Condition& cond,
                                    const GuidanceConfig& guidance);

inline constexpr const char* kAlignmentCsvHeader = "step,t,cos_uncond,cos_cond,cos_pseudograd";
void write_alignment_csv(const AlignmentTrace& trace, const std::filesystem::path& path);

// Minimal SVG line chart, one polyline per series.
struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};
void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::vector<PlotSeries>& series);

}  // namespace edict
