#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>

#include "edict/eps_models.hpp"
#include "edict/error.hpp"
#include "edict/fixtures.hpp"
#include "edict/rng.hpp"
#include "edict/schedule.hpp"

using namespace edict;
namespace fs = std::filesystem;

namespace {

// Returns 0.2 for the null condition and 0.6 for any label.
class TwoLevelEps final : public EpsModel {
 public:
  Tensor predict(const Tensor& x, int, const Condition& c) const override {
    return Tensor(x.shape(), c.is_null() ? 0.2 : 0.6);
  }
  std::string name() const override { return "two-level"; }
  bool accepts(const Condition&) const override { return true; }
};

std::vector<double> alpha_table(double a) { return {1.0, a}; }

}  // namespace

TEST_CASE("conditions") {
  CHECK(Condition::null() == Condition::null());
  CHECK_FALSE(Condition::null() == Condition::label(0));
  CHECK(Condition::label(3) == Condition::label(3));
  CHECK_FALSE(Condition::label(3) == Condition::label(4));
  CHECK_FALSE(Condition::embedding(Tensor::vector({0.0})) == Condition::null());
  CHECK(Condition::label(2).label_value() == 2);
  CHECK_THROWS_AS(Condition::null().label_value(), DomainError);
  CHECK_THROWS_AS(Condition::label(-1), DomainError);
  CHECK(Condition::null().to_string() == "null");
}

TEST_CASE("guidance config validation") {
  CHECK_THROWS_AS(GuidanceConfig{-1.0}, DomainError);
  CHECK_THROWS_AS(GuidanceConfig{std::nan("")}, DomainError);
  CHECK_THROWS_AS(GuidanceConfig{std::numeric_limits<double>::infinity()}, DomainError);
  CHECK(GuidanceConfig(0.0).scale == 0.0);
}

TEST_CASE("constant model ignores its inputs") {
  const ConstantEps m(Tensor::vector({0.5, -1.0}));
  const Tensor out = m.predict(Tensor::vector({9.0, 9.0}), 17, Condition::label(4));
  CHECK(out.values() == std::vector<double>{0.5, -1.0});
  CHECK_THROWS_AS(m.predict(Tensor::vector({1.0}), 1, Condition::null()), ShapeError);
}

TEST_CASE("guided prediction") {
  const TwoLevelEps m;
  const Tensor x = Tensor::vector({0.0});
  CHECK(guided_predict(m, x, 1, Condition::label(0), GuidanceConfig(3.0))[0] == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(guided_predict(m, x, 1, Condition::label(0), GuidanceConfig(1.0))[0] == 0.6);
  CHECK(guided_predict(m, x, 1, Condition::label(0), GuidanceConfig(0.0))[0] == 0.2);
  CHECK(guided_predict(m, x, 1, Condition::null(), GuidanceConfig(5.0))[0] == 0.2);

  const GuidedEps eps(m, Condition::label(1), GuidanceConfig(3.0));
  CHECK(eps(x, 1)[0] == doctest::Approx(1.4));
  const LinearEps lin = LinearEps::scaled_identity(2, 0.1, 1, 0.05);
  CHECK_THROWS_AS(GuidedEps(lin, Condition::label(5), GuidanceConfig(1.0)), DomainError);
}

TEST_CASE("linear model") {
  const LinearEps m = LinearEps::scaled_identity(3, 0.1, 2, 0.05);
  const Tensor x = Tensor::vector({1.0, -2.0, 4.0});
  const Tensor u = m.predict(x, 10, Condition::null());
  CHECK(u[0] == doctest::Approx(0.1));
  CHECK(u[1] == doctest::Approx(-0.2));
  const Tensor c1 = m.predict(x, 10, Condition::label(1));
  CHECK(c1[2] == doctest::Approx((0.1 + 0.05 * 2) * 4.0));
  CHECK_THROWS_AS(m.predict(x, 10, Condition::label(2)), DomainError);
  CHECK_FALSE(m.accepts(Condition::label(2)));
  CHECK_THROWS_AS(m.predict(Tensor::vector({1.0}), 10, Condition::null()), ShapeError);

  const NoiseSchedule s = build_schedule(ScheduleParams{});
  const LinearEps offset(Tensor(Shape{1, 1}, 0.0), {}, Tensor::vector({2.0}),
                         LinearEps::OffsetRule::sqrt_one_minus_alpha_bar, s.alpha_bars());
  CHECK(offset.predict(Tensor::vector({5.0}), 500, Condition::null())[0] ==
        doctest::Approx(2.0 * std::sqrt(1.0 - s.alpha_bar(500))));
}

TEST_CASE("gaussian score model closed form") {
  const GaussianScoreEps single({{Tensor::vector({0.0}), 1.0, 0, 1.0}}, alpha_table(0.75));
  CHECK(single.predict(Tensor::vector({2.0}), 1, Condition::label(0))[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(single.predict(Tensor::vector({2.0}), 1, Condition::null())[0] == doctest::Approx(1.0).epsilon(1e-15));

  const GaussianScoreEps clean({{Tensor::vector({0.3, -0.7}), 0.5, 0, 1.0}}, alpha_table(1.0));
  const Tensor at_mean = clean.predict(Tensor::vector({0.3, -0.7}), 1, Condition::label(0));
  CHECK(at_mean[0] == 0.0);
  CHECK(at_mean[1] == 0.0);

  CHECK_THROWS_AS(single.predict(Tensor::vector({0.0}), 1, Condition::label(1)), DomainError);
  CHECK_THROWS_AS(single.predict(Tensor::vector({0.0}), 2, Condition::null()), DomainError);
}

TEST_CASE("gaussian mixture model matches a Monte-Carlo regression oracle") {
  // 1-D two-component mixture; E[eps | x_t] estimated by binning 1e5 draws.
  const double abar = 0.5;
  const std::vector<GaussianScoreEps::Component> comps{{Tensor::vector({-1.5}), 0.3, 0, 1.0},
                                                       {Tensor::vector({1.0}), 0.6, 1, 2.0}};
  const GaussianScoreEps m(comps, alpha_table(abar));
  SeededRng rng(99);
  constexpr int kBins = 20;
  constexpr double lo = -2.5, hi = 2.5;
  std::vector<double> sum_resid(kBins, 0.0);
  std::vector<int> count(kBins, 0);
  for (int i = 0; i < 100000; ++i) {
    const auto& c = comps[rng.uniform() < 1.0 / 3.0 ? 0 : 1];
    const double x0 = c.mean[0] + std::sqrt(c.var) * rng.normal();
    const double eps = rng.normal();
    const double xt = std::sqrt(abar) * x0 + std::sqrt(1 - abar) * eps;
    if (xt < lo || xt >= hi) continue;
    const int b = static_cast<int>((xt - lo) / (hi - lo) * kBins);
    sum_resid[static_cast<std::size_t>(b)] += eps - m.predict(Tensor::vector({xt}), 1, Condition::null())[0];
    ++count[static_cast<std::size_t>(b)];
  }
  double mean_abs = 0.0;
  int used = 0;
  for (int b = 0; b < kBins; ++b) {
    if (count[static_cast<std::size_t>(b)] < 500) continue;
    mean_abs += std::abs(sum_resid[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)]);
    ++used;
  }
  REQUIRE(used >= 10);
  CHECK(mean_abs / used < 0.02);
}

TEST_CASE("label mean averages a label's components") {
  const GaussianScoreEps m({{Tensor::vector({0.0}), 1.0, 0, 1.0},
                            {Tensor::vector({4.0}), 1.0, 0, 3.0},
                            {Tensor::vector({-2.0}), 1.0, 1, 1.0}},
                           alpha_table(0.5));
  CHECK((*m.label_mean(0))[0] == doctest::Approx(3.0));
  CHECK((*m.label_mean(1))[0] == -2.0);
  CHECK_FALSE(m.label_mean(2).has_value());
}

TEST_CASE("mixture fixture layout") {
  const auto comps = make_mixture_components(MixtureSpec{});
  REQUIRE(comps.size() == 16);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    CHECK(comps[k].label == static_cast<int>(k % 4));
    CHECK(comps[k].mean.shape() == kImageShape);
    CHECK(norm(comps[k].mean) == doctest::Approx(std::sqrt(8.0)));
  }
  SeededRng rng(1);
  const auto data = sample_mixture(comps, 10, rng);
  CHECK(data.size() == 10);
  SeededRng rng2(1);
  CHECK(sample_mixture(comps, 10, rng2)[9].x0.bit_equal(data[9].x0));
}

TEST_CASE("mlp initialization, persistence and determinism") {
  MlpEps::Layout layout;
  layout.input_dim = 3;
  layout.labels = 2;
  layout.hidden = 8;
  layout.time_dim = 4;
  SeededRng r1(5), r2(5);
  const MlpEps a = MlpEps::initialize(layout, r1);
  const MlpEps b = MlpEps::initialize(layout, r2);
  const Tensor x = Tensor::vector({0.1, -0.2, 0.3});
  CHECK(a.predict(x, 10, Condition::label(1)).bit_equal(b.predict(x, 10, Condition::label(1))));
  CHECK_FALSE(a.predict(x, 10, Condition::label(1)).bit_equal(a.predict(x, 10, Condition::null())));
  CHECK_THROWS_AS(a.predict(x, 10, Condition::label(2)), DomainError);

  const fs::path path = fs::temp_directory_path() / "edict_mlp.edt";
  write_mlp(a, path);
  const MlpEps back = read_mlp(path);
  CHECK(back.layout().hidden == 8);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.layers()[i].weight.bit_equal(a.layers()[i].weight));
    CHECK(back.layers()[i].bias.bit_equal(a.layers()[i].bias));
  }
  CHECK(back.predict(x, 999, Condition::null()).bit_equal(a.predict(x, 999, Condition::null())));
}

TEST_CASE("checked-in mlp fixture loads and predicts reproducibly") {
  const MlpEps m = read_mlp(fs::path(EDICT_FIXTURE_DIR) / "mlp_twin32.edt");
  CHECK(m.layout().input_dim == kTwinDim);
  CHECK(m.layout().labels == 2);
  CHECK(m.layout().hidden == 64);
  CHECK(std::string(MlpEps::kActivation) == "silu");
  const MlpEps again = read_mlp(fs::path(EDICT_FIXTURE_DIR) / "mlp_twin32.edt");
  SeededRng rng(4);
  const Tensor x = gaussian_draw(rng, {kTwinDim});
  CHECK(m.predict(x, 300, Condition::label(0)).bit_equal(again.predict(x, 300, Condition::label(0))));
  CHECK(m.predict(x, 300, Condition::label(0)).all_finite());
}

TEST_CASE("corrupt mlp files are rejected") {
  const fs::path path = fs::temp_directory_path() / "edict_bad_mlp.edt";
  {
    std::ofstream out(path);
    out << "edict-mlp v2\nend\n";
  }
  CHECK_THROWS_AS(read_mlp(path), IoError);
}

TEST_CASE("training with zero steps returns the initialization") {
  const NoiseSchedule s = build_schedule(ScheduleParams{});
  SeededRng data_rng(1);
  const auto data = sample_mixture(twin_components(4), 64, data_rng);
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.layout.hidden = 16;
  SeededRng r1(8), r2(8);
  const MlpEps trained = train_mlp(data, s, cfg, r1);
  MlpEps::Layout layout = cfg.layout;
  layout.input_dim = 4;
  layout.labels = 2;
  const MlpEps init = MlpEps::initialize(layout, r2);
  for (std::size_t i = 0; i < 3; ++i) CHECK(trained.layers()[i].weight.bit_equal(init.layers()[i].weight));
}

TEST_CASE("training reduces the validation loss and is reproducible") {
  const NoiseSchedule s = build_schedule(ScheduleParams{});
  SeededRng data_rng(2);
  const auto data = sample_mixture(twin_components(8), 512, data_rng);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.layout.hidden = 32;
  SeededRng r1(3), r2(3);
  TrainStats stats;
  const MlpEps a = train_mlp(data, s, cfg, r1, &stats);
  const MlpEps b = train_mlp(data, s, cfg, r2);
  CHECK(stats.final_validation_loss < stats.initial_validation_loss);
  CHECK(stats.loss_history.size() == 300);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.layers()[i].weight.bit_equal(b.layers()[i].weight));

  TrainConfig bad = cfg;
  bad.lr = 0.0;
  SeededRng r3(3);
  CHECK_THROWS_AS(train_mlp(data, s, bad, r3), DomainError);
  CHECK_THROWS_AS(train_mlp({}, s, cfg, r3), DomainError);
}

TEST_CASE("mlp trained on a standard normal approaches the closed-form score") {
  // For N(0, I) data the Bayes-optimal prediction is sqrt(1 - abar) * x.
  const NoiseSchedule s = build_schedule(ScheduleParams{});
  SeededRng data_rng(6);
  std::vector<LabeledSample> data;
  for (int i = 0; i < 4096; ++i) data.push_back({gaussian_draw(data_rng, {2}), Condition::null()});
  TrainConfig cfg;
  cfg.steps = 4000;
  SeededRng rng(7);
  const MlpEps m = train_mlp(data, s, cfg, rng);
  const GaussianScoreEps oracle({{Tensor::vector({0.0, 0.0}), 1.0, 0, 1.0}}, s);
  double se = 0.0;
  int n = 0;
  for (int t : {50, 200, 400, 600, 800, 1000}) {
    for (double u = -2.0; u <= 2.0; u += 0.5) {
      for (double v = -2.0; v <= 2.0; v += 0.5) {
        const Tensor x = Tensor::vector({u, v});
        const Tensor d = m.predict(x, t, Condition::null()) - oracle.predict(x, t, Condition::null());
        se += dot(d, d);
        n += 2;
      }
    }
  }
  const double rmse = std::sqrt(se / n);
  CAPTURE(rmse);
  CHECK(rmse < 0.1);
}
