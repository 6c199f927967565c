#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "edict/diagnostics.hpp"
#include "edict/error.hpp"
#include "edict/fixtures.hpp"
#include "edict/parallel.hpp"
#include "edict/rng.hpp"

using namespace edict;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

struct MixtureSetup {
  NoiseSchedule schedule = build_schedule(ScheduleParams{});
  GaussianScoreEps model{make_mixture_components(MixtureSpec{}), schedule};
  std::vector<Tensor> inputs;
  std::vector<Condition> conds;

  explicit MixtureSetup(std::size_t n) {
    SeededRng rng(50);
    for (const auto& s : sample_mixture(model.components(), n, rng)) {
      inputs.push_back(s.x0);
      conds.push_back(s.cond);
    }
  }
};

const ReconRow& find(const std::vector<ReconRow>& rows, ReconMethod m, int steps, double g) {
  for (const auto& r : rows) {
    if (r.method == m && r.steps == steps && r.guidance == g) return r;
  }
  throw std::runtime_error("row not found");
}

}  // namespace

TEST_CASE("cosine similarity") {
  const Tensor u = Tensor::vector({1.0, 0.0});
  CHECK(cosine_similarity(u, u) == 1.0);
  CHECK(cosine_similarity(u, Tensor::vector({0.0, 3.0})) == 0.0);
  CHECK(cosine_similarity(u, Tensor::vector({1.0, 1.0})) == doctest::Approx(0.7071067811865475).epsilon(1e-15));
  CHECK(cosine_similarity(u, Tensor::vector({-2.0, 0.0})) == -1.0);
  bool degenerate = false;
  CHECK(cosine_similarity(u, Tensor::vector({0.0, 0.0}), &degenerate) == 0.0);
  CHECK(degenerate);
  degenerate = false;
  CHECK(cosine_similarity(u, Tensor::vector({0.3, 0.4}), &degenerate) == doctest::Approx(0.6));
  CHECK_FALSE(degenerate);
  CHECK(std::isnan(cosine_similarity(u, Tensor::vector({NAN, 1.0}))));
  const Tensor tiny = Tensor::vector({1e-300, 1e-300});
  CHECK(cosine_similarity(tiny, tiny) <= 1.0);
}

TEST_CASE("reconstruction benchmark rows") {
  const MixtureSetup m(4);
  ReconConfig cfg;
  cfg.guidance_grid = {1.0, 7.0};
  cfg.steps_grid = {10, 20};
  const auto rows = recon_benchmark(m.inputs, m.conds, m.schedule, m.model, cfg);
  REQUIRE(rows.size() == 16);
  CHECK(rows[0].steps == 10);
  CHECK(rows[0].guidance == 1.0);
  CHECK(rows[0].method == ReconMethod::edict_uc);
  CHECK(rows[3].method == ReconMethod::ddim_c);
  CHECK(rows[4].guidance == 7.0);
  CHECK(rows[8].steps == 20);
  for (const auto& r : rows) {
    CHECK(r.n_inputs == 4);
    CHECK(r.mse >= 0.0);
    if (r.method == ReconMethod::edict_uc || r.method == ReconMethod::edict_c) CHECK(r.mse < 1e-12);
  }
  CHECK(to_string(ReconMethod::ddim_uc) == "ddim_uc");

  const auto again = recon_benchmark(m.inputs, m.conds, m.schedule, m.model, cfg);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(std::memcmp(&rows[i].mse, &again[i].mse, sizeof(double)) == 0);

  CHECK_THROWS_AS(recon_benchmark(m.inputs, {}, m.schedule, m.model, cfg), DomainError);
}

TEST_CASE("reconstruction benchmark does not depend on the thread count") {
  const MixtureSetup m(6);
  ReconConfig cfg;
  const int saved = parallel::max_threads();
  parallel::set_max_threads(1);
  const auto serial = recon_benchmark(m.inputs, m.conds, m.schedule, m.model, cfg);
  parallel::set_max_threads(4);
  const auto threaded = recon_benchmark(m.inputs, m.conds, m.schedule, m.model, cfg);
  parallel::set_max_threads(saved);
  REQUIRE(serial.size() == threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(std::memcmp(&serial[i].mse, &threaded[i].mse, sizeof(double)) == 0);
  }
}

TEST_CASE("reconstruction ordering on the mixture fixture") {
  const MixtureSetup m(8);
  ReconConfig cfg;
  cfg.guidance_grid = {0.0, 1.0, 3.0, 7.0};
  cfg.steps_grid = {50, 200};
  const auto rows = recon_benchmark(m.inputs, m.conds, m.schedule, m.model, cfg);
  const double ddim_c = find(rows, ReconMethod::ddim_c, 50, 7.0).mse;
  const double ddim_uc = find(rows, ReconMethod::ddim_uc, 50, 7.0).mse;
  CHECK(ddim_c > ddim_uc);
  for (int steps : {50, 200}) {
    for (double g : cfg.guidance_grid) {
      CHECK(ddim_uc > find(rows, ReconMethod::edict_uc, steps, g).mse);
      CHECK(find(rows, ReconMethod::edict_c, steps, g).mse < 1e-12);
    }
  }
  CHECK(find(rows, ReconMethod::ddim_uc, 200, 7.0).mse < ddim_uc);
}

TEST_CASE("edict exactness does not depend on guidance") {
  const NoiseSchedule s = build_schedule(ScheduleParams{});
  const LinearEps lin = linear_fixture(element_count(kImageShape));
  SeededRng rng(51);
  const std::vector<Tensor> inputs{gaussian_draw(rng, kImageShape), gaussian_draw(rng, kImageShape)};
  const std::vector<Condition> conds{Condition::label(0), Condition::label(0)};
  ReconConfig cfg;
  cfg.guidance_grid = {0.0, 1.0, 3.0, 7.0};
  const auto rows = recon_benchmark(inputs, conds, s, lin, cfg);
  double previous = -1.0;
  for (double g : cfg.guidance_grid) {
    CHECK(find(rows, ReconMethod::edict_c, 50, g).mse < 1e-12);
    const double ddim = find(rows, ReconMethod::ddim_c, 50, g).mse;
    CHECK(ddim > previous);
    previous = ddim;
  }
}

TEST_CASE("recon csv") {
  const auto path = fs::temp_directory_path() / "edict_recon.csv";
  write_recon_csv({ReconRow{ReconMethod::edict_c, 50, 7.0, 1e-31, 3}}, path);
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "# edict-recon v1");
  CHECK(lines[1] == "method,steps,guidance,mse,n");
  CHECK(lines[2].rfind("edict_c,50,7,", 0) == 0);
}

TEST_CASE("divergence sweep on the linear fixture") {
  const NoiseSchedule s = build_schedule(ScheduleParams{});
  const LinearEps lin = linear_fixture(element_count(kImageShape));
  const GuidedEps eps(lin, Condition::null(), GuidanceConfig(1.0));
  SeededRng rng(52);
  const Tensor noise = gaussian_draw(rng, kImageShape);
  const Tensor real = uniform_inputs(kImageShape, 1, rng).front();
  const std::vector<double> grid{0.5, 0.7, 0.9, 0.93, 0.97, 1.0};
  const auto results = divergence_sweep(noise, real, s, eps, grid);
  REQUIRE(results.size() == grid.size());
  for (const auto& r : results) {
    CAPTURE(r.p);
    CHECK(r.inversion.trace.size() == 100);
    CHECK(r.generation.trace.size() == 100);
    for (const auto& row : r.inversion.trace) {
      if (std::isfinite(row.cos_xy)) CHECK(std::abs(row.cos_xy) <= 1.0);
    }
    if (r.p <= 0.7) CHECK(r.inversion.diverged);
    if (r.p >= 0.9 && r.p <= 0.97) {
      CHECK_FALSE(r.inversion.diverged);
      CHECK_FALSE(r.generation.diverged);
      CHECK(r.generation.min_cos_forward > 0.99);
      CHECK(r.inversion.roundtrip_max_abs < 1e-8);
    }
  }
  CHECK(results.front().inversion.trace.front().pass == "backward");

  const auto trace_path = fs::temp_directory_path() / "edict_div_trace.csv";
  const auto verdict_path = fs::temp_directory_path() / "edict_div_verdict.csv";
  write_divergence_csv(results, trace_path, verdict_path);
  const auto trace = read_lines(trace_path);
  const auto verdict = read_lines(verdict_path);
  CHECK(trace[1] == "p,run,pass,step,t,cos_sim_xy,gap_norm");
  CHECK(trace.size() == 2 + grid.size() * 2 * 100);
  CHECK(verdict[1] == "p,run,diverged,min_cos_forward,min_cos_backward,roundtrip_max_abs");
  CHECK(verdict.size() == 2 + grid.size() * 2);
}

TEST_CASE("alignment with constant predictions") {
  const NoiseSchedule s = build_schedule(ScheduleParams{});
  const ConstantEps split(Tensor::vector({0.1, 0.2, 0.3}), Tensor::vector({0.4, -0.1, 0.0}));
  const GuidedEps eps(split, Condition::label(0), GuidanceConfig(7.0));
  const Trajectory traj = ddim_invert(Tensor::vector({1.0, 2.0, 3.0}), s, eps, true);
  const AlignmentTrace trace = pseudograd_alignment(traj, split, Condition::label(0), GuidanceConfig(7.0));
  REQUIRE(trace.size() == 49);
  for (const auto& row : trace) {
    CHECK(row.cos_uncond == 1.0);
    CHECK(row.cos_cond == 1.0);
    CHECK(row.cos_pseudograd == 1.0);
    CHECK_FALSE(row.pseudograd_degenerate);
  }
  CHECK(trace.front().step == 1);

  const ConstantEps flat(Tensor::vector({0.1, 0.2, 0.3}));
  const AlignmentTrace degenerate = pseudograd_alignment(traj, flat, Condition::label(0), GuidanceConfig(7.0));
  CHECK(degenerate.front().pseudograd_degenerate);
  CHECK(degenerate.front().cos_pseudograd == 0.0);
}

TEST_CASE("alignment preconditions") {
  ScheduleParams one;
  one.steps = 1;
  const NoiseSchedule s1 = build_schedule(one);
  const ConstantEps m(Tensor::vector({0.1}));
  const GuidedEps eps(m, Condition::label(0), GuidanceConfig(3.0));
  const Trajectory single = ddim_invert(Tensor::vector({1.0}), s1, eps, true);
  CHECK(pseudograd_alignment(single, m, Condition::label(0), GuidanceConfig(3.0)).empty());

  const NoiseSchedule s = build_schedule(ScheduleParams{});
  const Trajectory ends = ddim_invert(Tensor::vector({1.0}), s, eps, false);
  CHECK_THROWS_AS(pseudograd_alignment(ends, m, Condition::label(0), GuidanceConfig(3.0)), DomainError);
  const Trajectory full = ddim_invert(Tensor::vector({1.0}), s, eps, true);
  CHECK_THROWS_AS(pseudograd_alignment(full, m, Condition::null(), GuidanceConfig(3.0)), DomainError);
}

TEST_CASE("pseudo-gradient is less consistent than the unconditional prediction") {
  const MixtureSetup m(1);
  const GuidanceConfig g(7.0);
  const GuidedEps eps(m.model, m.conds[0], g);
  const Trajectory traj = ddim_invert(m.inputs[0], m.schedule, eps, true);
  const AlignmentTrace trace = pseudograd_alignment(traj, m.model, m.conds[0], g);
  REQUIRE(trace.size() == 49);
  double uncond = 0.0, pseudo = 0.0;
  for (const auto& row : trace) {
    CHECK(std::abs(row.cos_uncond) <= 1.0);
    CHECK(std::abs(row.cos_pseudograd) <= 1.0);
    uncond += row.cos_uncond / 49;
    pseudo += row.cos_pseudograd / 49;
  }
  CHECK(uncond > pseudo);

  const auto path = fs::temp_directory_path() / "edict_align.csv";
  write_alignment_csv(trace, path);
  const auto lines = read_lines(path);
  CHECK(lines[0] == "# edict-align v1");
  CHECK(lines[1] == "step,t,cos_uncond,cos_cond,cos_pseudograd");
  CHECK(lines.size() == 51);
}

TEST_CASE("svg plot") {
  const auto path = fs::temp_directory_path() / "edict_plot.svg";
  write_svg_plot(path, "demo", {{"a", {{0, 1}, {1, 0.5}, {2, 0.25}}}, {"b", {{0, 0}, {2, 1}}}});
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string svg = ss.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("demo") != std::string::npos);
  write_svg_plot(path, "empty", {});
  CHECK(fs::file_size(path) > 0);
}
