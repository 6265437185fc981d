#include <gtest/gtest.h>

#include <cmath>

#include "pemnet/error.hpp"
#include "pemnet/metrics.hpp"
#include "pemnet/rng.hpp"

using namespace pemnet;
using namespace pemnet::metrics;

TEST(Rrmse, HandCases) {
  const std::vector<double> ones{1, 1};
  EXPECT_EQ(rrmse(ones, ones), 0.0);
  EXPECT_NEAR(rrmse(std::vector<double>{1.1, 0.9}, ones), 10.0, 1e-12);
}

TEST(Rrmse, Errors) {
  EXPECT_THROW(rrmse(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
  EXPECT_THROW(rrmse(std::vector<double>{}, std::vector<double>{}), ShapeError);
  EXPECT_THROW(rrmse(std::vector<double>{1, 1}, std::vector<double>{-1, 0.5}), DomainError);
}

TEST(Rrmse, ScaleInvariantAndNonNegative) {
  SplitMix64 rng(1);
  for (int n = 0; n < 1000; ++n) {
    const std::size_t len = 1 + rng.below(20);
    std::vector<double> p(len), t(len), kp(len), kt(len);
    const double k = rng.uniform(0.01, 100);
    for (std::size_t i = 0; i < len; ++i) {
      t[i] = rng.uniform(0.1, 1.2);
      p[i] = t[i] + rng.uniform(-0.2, 0.2);
      kp[i] = k * p[i];
      kt[i] = k * t[i];
    }
    const double a = rrmse(p, t);
    EXPECT_GE(a, 0.0);
    EXPECT_NEAR(rrmse(kp, kt), a, 1e-10 * std::max(1.0, a));
  }
}

TEST(Dispersion, HandCases) {
  dataset::SampleRecord r;
  r.features.fill(0.3);
  const std::vector<dataset::SampleRecord> same(5, r);
  EXPECT_NEAR(cosine_dispersion(same).mean_distance, 0.0, 1e-15);
  dataset::SampleRecord a, b;
  a.features[0] = 1;
  b.features[1] = 2;
  const std::vector<dataset::SampleRecord> ortho{a, b};
  EXPECT_NEAR(cosine_dispersion(ortho).mean_distance, 1.0, 1e-15);
  const std::vector<dataset::SampleRecord> with_zero{a, b, dataset::SampleRecord{}};
  const auto d = cosine_dispersion(with_zero);
  EXPECT_EQ(d.pairs, 1u);
  EXPECT_EQ(d.skipped_pairs, 2u);
  EXPECT_THROW(cosine_dispersion(std::vector<dataset::SampleRecord>{a}), ConfigError);
}

TEST(Dispersion, RangeAndRescaling) {
  SplitMix64 rng(2);
  std::vector<dataset::SampleRecord> recs(60), scaled(60);
  for (std::size_t n = 0; n < recs.size(); ++n) {
    for (auto& f : recs[n].features) f = rng.uniform(-1, 1);
    const double k = rng.uniform(0.1, 10);
    for (std::size_t i = 0; i < dataset::kFeatureWidth; ++i) scaled[n].features[i] = k * recs[n].features[i];
  }
  const double d = cosine_dispersion(recs).mean_distance;
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 2.0);
  EXPECT_NEAR(cosine_dispersion(scaled).mean_distance, d, 1e-12);
}

TEST(Dispersion, SubsamplesLargeSets) {
  SplitMix64 rng(3);
  std::vector<dataset::SampleRecord> recs(2500);
  for (auto& r : recs)
    for (auto& f : r.features) f = rng.uniform(-1, 1);
  const auto a = cosine_dispersion(recs, 4), b = cosine_dispersion(recs, 4);
  EXPECT_TRUE(a.subsampled);
  EXPECT_EQ(a.pairs, 2000u * 1999u / 2u);
  EXPECT_EQ(a.mean_distance, b.mean_distance);
}

namespace {

// A linear "model" that reproduces a known function of current is enough to
// exercise the evaluation plumbing.
net::NetworkModel current_model(double slope, double intercept) {
  net::NetworkModel m;
  m.layers = {net::Layer::dense(12, 1, net::ParamGroup::Task)};
  m.layers[0].weights.assign(12, 0.0);
  m.layers[0].weights[11] = slope;
  m.layers[0].bias = {intercept};
  m.standardizer = dataset::Standardizer::identity();
  return m;
}

dataset::ExperimentalSet linear_set() {
  dataset::ExperimentalSet s;
  s.id = "lin";
  s.design_base.temperature = 433.15;
  s.conditions = {433.15, 473.15};
  s.points = {{{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}}, {{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}}};
  s.holdout_condition = 473.15;
  return s;
}

}  // namespace

TEST(Evaluate, PerfectModelScoresZero) {
  const auto set = linear_set();
  const auto rep = evaluate_holdout(current_model(-1.0, 1.0), set);
  EXPECT_TRUE(rep.holdout);
  EXPECT_EQ(rep.n_points, 3u);
  EXPECT_LT(rep.rrmse_percent, 1e-10);
  EXPECT_EQ(rep.normalization, "mean");
  const auto all = evaluate_conditions(current_model(-1.0, 1.1), set);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_FALSE(all[0].holdout);
  EXPECT_NEAR(all[0].rrmse_percent, 100 * 0.1 / 0.8, 1e-9);
}

TEST(Evaluate, EemOnItsOwnCurvesIsExact) {
  physics::PhysicsParams p;
  auto dev = dataset::reference_devices()[0];
  const auto set = dataset::make_synthetic_set(dev, 9, p);
  for (std::size_t c = 0; c < set.conditions.size(); ++c) EXPECT_EQ(evaluate_eem(p, set, c).rrmse_percent, 0.0);
}

TEST(PredictCurve, GridBehaviour) {
  const auto m = current_model(-1.0, 1.0);
  physics::CellDesign d;
  const std::vector<double> one{0.5};
  EXPECT_EQ(predict_curve(m, d, one).size(), 1u);
  const auto wide = linear_grid(0.0, 50.0, 11);
  for (const auto& p : predict_curve(m, d, wide)) EXPECT_TRUE(std::isfinite(p.voltage));
  EXPECT_THROW(predict_curve(m, d, std::vector<double>{0.3, 0.1}), ConfigError);
  auto bad = m;
  bad.layers[0].bias = {std::nan("")};
  try {
    predict_curve(bad, d, one);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos);
  }
}

TEST(Artifacts, JsonSvgCsv) {
  const auto set = linear_set();
  const auto rep = evaluate_holdout(current_model(-1.0, 1.0), set);
  const auto j = report_json(rep);
  EXPECT_NE(j.find("\"rrmse_normalization\": \"mean\""), std::string::npos);
  const auto svg = curve_svg("t", rep.measured, rep.predicted, {});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  const auto csv = curve_csv(rep.measured, rep.predicted, {});
  EXPECT_EQ(csv.rfind("series,current_a_cm2,voltage_v\n", 0), 0u);
}
