#include "edict/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "edict/csv.hpp"
#include "edict/error.hpp"

namespace edict {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "scaled_linear") return ScheduleKind::scaled_linear;
  if (name == "linear") return ScheduleKind::linear;
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "custom") return ScheduleKind::custom;
  throw DomainError("unknown schedule kind '" + name + "'");
}

Spacing parse_spacing(const std::string& name) {
  if (name == "trailing") return Spacing::trailing;
  if (name == "leading") return Spacing::leading;
  throw DomainError("unknown timestep spacing '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::scaled_linear: return "scaled_linear";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::custom: return "custom";
  }
  return "custom";
}

std::string to_string(Spacing spacing) { return spacing == Spacing::trailing ? "trailing" : "leading"; }

std::vector<int> sampler_timesteps(int train_steps, int steps, Spacing spacing) {
  if (steps < 1) throw DomainError("sampler steps must be >= 1");
  if (steps > train_steps) {
    throw DomainError("sampler steps (" + std::to_string(steps) + ") exceed training steps (" +
                      std::to_string(train_steps) + ")");
  }
  const long long T = train_steps;
  const long long S = steps;
  std::vector<int> ts(static_cast<std::size_t>(steps));
  for (long long i = 0; i < S; ++i) {
    if (spacing == Spacing::trailing) {
      // T - round(i * T / S), listed from the smallest timestep upward
      const long long off = (2 * i * T + S) / (2 * S);
      ts[static_cast<std::size_t>(S - 1 - i)] = static_cast<int>(T - off);
    } else {
      ts[static_cast<std::size_t>(i)] = static_cast<int>(i * T / S + 1);
    }
  }
  return ts;
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar, int steps, Spacing spacing, ScheduleKind kind)
    : alpha_bar_(std::move(alpha_bar)), spacing_(spacing), kind_(kind) {
  if (alpha_bar_.size() < 2) throw DomainError("schedule needs at least one training step");
  if (alpha_bar_[0] != 1.0) throw DomainError("alpha_bar[0] must be exactly 1");
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    const double a = alpha_bar_[t];
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("alpha_bar[" + std::to_string(t) + "] outside (0, 1]");
    if (a > alpha_bar_[t - 1]) throw DomainError("alpha_bar must be non-increasing");
  }
  timesteps_ = sampler_timesteps(train_steps(), steps, spacing);
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > train_steps()) throw DomainError("timestep " + std::to_string(t) + " outside schedule");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

NoiseSchedule NoiseSchedule::with_steps(int steps) const { return NoiseSchedule(alpha_bar_, steps, spacing_, kind_); }

namespace {

std::vector<double> betas_for(const ScheduleParams& p) {
  const int T = p.train_steps;
  std::vector<double> beta(static_cast<std::size_t>(T));
  switch (p.kind) {
    case ScheduleKind::scaled_linear:
    case ScheduleKind::linear: {
      const bool scaled = p.kind == ScheduleKind::scaled_linear;
      const double lo = scaled ? std::sqrt(p.beta_start) : p.beta_start;
      const double hi = scaled ? std::sqrt(p.beta_end) : p.beta_end;
      for (int i = 0; i < T; ++i) {
        const double v = T == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(T - 1);
        beta[static_cast<std::size_t>(i)] = scaled ? v * v : v;
      }
      break;
    }
    case ScheduleKind::cosine: {
      constexpr double s = 0.008;
      auto f = [T](double t) {
        const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
      };
      for (int i = 0; i < T; ++i) {
        const double b = 1.0 - f(i + 1) / f(i);
        beta[static_cast<std::size_t>(i)] = std::min(b, 0.999);
      }
      break;
    }
    case ScheduleKind::custom:
      throw DomainError("custom schedules are loaded from CSV, not built");
  }
  for (double b : beta) {
    if (!(b >= 0.0 && b < 1.0)) throw DomainError("beta values must lie in [0, 1)");
  }
  return beta;
}

}  // namespace

NoiseSchedule build_schedule(const ScheduleParams& params) {
  if (params.train_steps < 1) throw DomainError("train_steps must be >= 1");
  if (params.steps < 1 || params.steps > params.train_steps) {
    throw DomainError("sampler steps must lie in [1, train_steps]");
  }
  const std::vector<double> beta = betas_for(params);
  std::vector<double> alpha_bar(beta.size() + 1);
  alpha_bar[0] = 1.0;
  for (std::size_t t = 1; t <= beta.size(); ++t) alpha_bar[t] = alpha_bar[t - 1] * (1.0 - beta[t - 1]);
  return NoiseSchedule(std::move(alpha_bar), params.steps, params.spacing, params.kind);
}

NoiseSchedule build_schedule(ScheduleKind kind, int train_steps, int steps, Spacing spacing) {
  ScheduleParams p;
  p.kind = kind;
  p.train_steps = train_steps;
  p.steps = steps;
  p.spacing = spacing;
  if (kind == ScheduleKind::linear) {
    p.beta_start = 0.0001;
    p.beta_end = 0.02;
  }
  return build_schedule(p);
}

StepCoeffs coeffs_from_alphas(double alpha_bar_hi, double alpha_bar_lo) {
  StepCoeffs c;
  c.a = std::sqrt(alpha_bar_lo / alpha_bar_hi);
  c.b = -std::sqrt(alpha_bar_lo * (1.0 - alpha_bar_hi) / alpha_bar_hi) + std::sqrt(1.0 - alpha_bar_lo);
  return c;
}

StepCoeffs coeffs(const NoiseSchedule& s, int t_hi, int t_lo) {
  if (t_lo >= t_hi) {
    throw DomainError("coeffs: t_lo (" + std::to_string(t_lo) + ") must be below t_hi (" + std::to_string(t_hi) +
                      ")");
  }
  StepCoeffs c = coeffs_from_alphas(s.alpha_bar(t_hi), s.alpha_bar(t_lo));
  c.t_hi = t_hi;
  c.t_lo = t_lo;
  return c;
}

std::vector<StepCoeffs> step_sequence(const NoiseSchedule& s) {
  const auto& ts = s.timesteps();
  std::vector<StepCoeffs> out;
  out.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out.push_back(coeffs(s, ts[i], i == 0 ? 0 : ts[i - 1]));
  return out;
}

Tensor forward_noise(const Tensor& x0, const Tensor& eps, double alpha_bar_t) {
  if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0)) throw DomainError("alpha_bar_t must lie in (0, 1]");
  return axpby(std::sqrt(alpha_bar_t), x0, std::sqrt(1.0 - alpha_bar_t), eps);
}

void write_schedule_csv(const NoiseSchedule& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_csv_schema(out, "schedule");
  out << "t,alpha_bar\n";
  char buf[64];
  for (int t = 0; t <= s.train_steps(); ++t) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", t, s.alpha_bar(t));
    out << buf;
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

NoiseSchedule read_schedule_csv(const std::filesystem::path& path, int steps, Spacing spacing) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::open_failed, path.string());
  std::string line;
  while (std::getline(in, line) && line.rfind('#', 0) == 0) {
  }
  if (line.rfind("t,alpha_bar", 0) != 0) {
    throw IoError(IoErrorKind::bad_header, "schedule CSV must start with 't,alpha_bar'");
  }
  std::vector<double> alpha_bar;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(IoErrorKind::bad_header, "malformed row: " + line);
    const int t = std::stoi(line.substr(0, comma));
    if (t != static_cast<int>(alpha_bar.size())) throw IoError(IoErrorKind::bad_header, "rows must list t = 0, 1, ...");
    alpha_bar.push_back(std::stod(line.substr(comma + 1)));
  }
  return NoiseSchedule(std::move(alpha_bar), steps, spacing, ScheduleKind::custom);
}

}  // namespace edict
