#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <set>

#include "designs.hpp"
#include "pemnet/dataset.hpp"
#include "pemnet/error.hpp"
#include "pemnet/hash.hpp"

using namespace pemnet;
using namespace pemnet::dataset;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pemnet_dataset_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string mea0_csv() {
  return "id,MEA0\nmode,fuelcell\ns_h2,1.2\ns_o2,2.2\npressure_atm,1.59\niec_mem,7.9\niec_io,8.9\n"
         "delta_mem_cm,0.005\ndelta_io_cm,0.0001\nco_h2_ratio,0\nload_an,0.5\nload_cat,0.5\nholdout_temp_c,200\n"
         "temp_c,current_a_cm2,voltage_v\n"
         "160,0.1,0.80\n160,0.2,0.75\n160,0.3,0.70\n"
         "200,0.1,0.82\n200,0.3,0.72\n200,0.2,0.77\n"
         "220,0.1,0.83\n220,0.2,0.78\n220,0.3,0.73\n";
}

}  // namespace

TEST(Factorial, DefaultCount) {
  const auto spec = FactorialSpec::default_levels();
  EXPECT_EQ(spec.design_count(), 177147u);
  EXPECT_EQ(generate_factorial(spec).size(), 177147u);
}

TEST(Factorial, OneFixedVariable) {
  auto spec = FactorialSpec::default_levels();
  spec.levels[3] = {1.5};
  EXPECT_EQ(generate_factorial(spec).size(), 59049u);
}

TEST(Factorial, LexicographicTinyCase) {
  auto spec = FactorialSpec::default_levels();
  for (auto& l : spec.levels) l = {l[1]};
  spec.levels[0] = {1.0, 2.0};
  spec.levels[1] = {2.0, 3.0};
  const auto designs = generate_factorial(spec);
  ASSERT_EQ(designs.size(), 4u);
  const std::pair<double, double> expected[] = {{1, 2}, {1, 3}, {2, 2}, {2, 3}};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(designs[k].s_h2, expected[k].first);
    EXPECT_EQ(designs[k].s_o2, expected[k].second);
  }
}

TEST(Factorial, RandomSmallSpecsMatchEnumeration) {
  SplitMix64 rng(3);
  const auto base = FactorialSpec::default_levels();
  for (int trial = 0; trial < 30; ++trial) {
    FactorialSpec spec = base;
    std::size_t expected = 1;
    for (auto& l : spec.levels) {
      const std::size_t n = 1 + rng.below(2);
      l.resize(n);
      expected *= n;
    }
    const auto designs = generate_factorial(spec);
    ASSERT_EQ(designs.size(), expected);
    // Every tuple distinct and drawn from the levels.
    std::set<std::array<double, physics::kDesignVariables>> seen;
    for (const auto& d : designs) {
      const auto v = d.values();
      for (std::size_t k = 0; k < v.size(); ++k)
        EXPECT_NE(std::find(spec.levels[k].begin(), spec.levels[k].end(), v[k]), spec.levels[k].end());
      seen.insert(v);
    }
    EXPECT_EQ(seen.size(), expected);
  }
}

TEST(Factorial, ConfigErrors) {
  KeyValueConfig cfg;
  cfg.set("levels.s_h2", "1.0, abc");
  EXPECT_THROW(FactorialSpec::from_config(cfg), ConfigError);
  KeyValueConfig unknown;
  unknown.set("levels.humidity", "1,2");
  EXPECT_THROW(FactorialSpec::from_config(unknown), ConfigError);
  KeyValueConfig invalid;
  invalid.set("levels.temperature_k", "-3, 400");
  EXPECT_THROW(FactorialSpec::from_config(invalid), ConfigError);
}

TEST(SourceDataset, LayoutAndLabels) {
  PhysicsParams p;
  auto spec = FactorialSpec::default_levels();
  for (auto& l : spec.levels) l = {l[1]};
  const auto designs = generate_factorial(spec);
  const auto records = build_source_dataset(designs, 5, p);
  ASSERT_EQ(records.size(), 5u);
  const auto curve = physics::sample_curve(designs[0], 5, p);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(records[k].label, curve[k].voltage);
    const auto v = designs[0].values();
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_EQ(records[k].features[j], v[j]);
    EXPECT_EQ(records[k].features[11], curve[k].current_density);
  }
}

TEST(Standardizer, ZeroVarianceColumns) {
  SampleRecord r;
  for (std::size_t k = 0; k < kFeatureWidth; ++k) r.features[k] = 1.0 + k;
  r.label = 0.5;
  const std::vector<SampleRecord> same(4, r);
  const auto s = fit_standardizer(same);
  for (std::size_t k = 0; k < kFeatureWidth; ++k) {
    EXPECT_EQ(s.mean[k], r.features[k]);
    EXPECT_EQ(s.std[k], 1.0);
    EXPECT_EQ(s.apply(r.features)[k], 0.0);
  }
  EXPECT_EQ(s.label_std, 1.0);
}

TEST(Standardizer, TwoRecordCase) {
  SampleRecord a, b;
  a.features.fill(0.0);
  b.features.fill(2.0);
  a.label = 0;
  b.label = 2;
  const std::vector<SampleRecord> recs{a, b};
  const auto s = fit_standardizer(recs);
  EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.std[0], 1.0);
  EXPECT_DOUBLE_EQ(s.apply(a.features)[5], -1.0);
  EXPECT_DOUBLE_EQ(s.apply(b.features)[5], 1.0);
}

TEST(Standardizer, MatchesTwoPassOnSourceSample) {
  PhysicsParams p;
  const auto designs = generate_factorial(FactorialSpec::default_levels());
  const std::vector<physics::CellDesign> some(designs.begin(), designs.begin() + 3000);
  const auto sample = subsample(build_source_dataset(some, 5, p), 100, 9);
  const auto s = fit_standardizer(sample);
  for (std::size_t k = 0; k < kFeatureWidth; ++k) {
    double m = 0;
    for (const auto& r : sample) m += r.features[k];
    m /= sample.size();
    double var = 0;
    for (const auto& r : sample) var += (r.features[k] - m) * (r.features[k] - m);
    var /= sample.size();
    EXPECT_NEAR(s.mean[k], m, 1e-10 * std::max(1.0, std::abs(m)));
    if (var > 0) EXPECT_NEAR(s.std[k], std::sqrt(var), 1e-10 * std::max(1.0, std::sqrt(var)));
  }
  const auto z = apply_standardizer(s, sample);
  for (std::size_t k = 0; k < kFeatureWidth; ++k) {
    double m = 0, m2 = 0;
    for (const auto& r : z) m += r.features[k];
    m /= z.size();
    for (const auto& r : z) m2 += (r.features[k] - m) * (r.features[k] - m);
    EXPECT_LT(std::abs(m), 1e-9);
    if (s.std[k] != 1.0 || m2 > 0) EXPECT_NEAR(std::sqrt(m2 / z.size()), 1.0, 1e-9);
  }
}

TEST(Standardizer, RoundTripAndShapes) {
  SplitMix64 rng(4);
  std::vector<SampleRecord> recs(1000);
  for (auto& r : recs) {
    for (auto& f : r.features) f = rng.uniform(-50, 50);
    r.label = rng.uniform(0, 1);
  }
  const auto s = fit_standardizer(recs);
  double worst = 0;
  for (const auto& r : recs) {
    const auto back = s.invert(s.apply(r.features));
    for (std::size_t k = 0; k < kFeatureWidth; ++k) worst = std::max(worst, std::abs(back[k] - r.features[k]));
  }
  EXPECT_LT(worst, 1e-12 * 50);
  const auto z = s.apply(s.mean);
  for (double v : z) EXPECT_EQ(v, 0.0);
  const std::vector<double> wrong(11, 0.0);
  EXPECT_THROW(s.apply(std::span<const double>(wrong)), ShapeError);
  EXPECT_EQ(standardizer_from_json(standardizer_to_json(s)), s);
  EXPECT_THROW(fit_standardizer(std::span<const SampleRecord>(recs.data(), 1)), std::exception);
}

TEST(Subsample, DeterministicOrderedSubset) {
  std::vector<SampleRecord> recs(500);
  for (std::size_t k = 0; k < recs.size(); ++k) recs[k].label = static_cast<double>(k);
  const auto a = subsample(recs, 50, 7), b = subsample(recs, 50, 7), c = subsample(recs, 50, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LT(a[k - 1].label, a[k].label);
  EXPECT_THROW(subsample(recs, 501, 1), ConfigError);
}

TEST(DatasetFile, BinaryRoundTripIsBitExact) {
  PhysicsParams p;
  auto spec = FactorialSpec::default_levels();
  spec.levels[0] = {1.0};
  spec.levels[1] = {2.0};
  spec.levels[2] = {463.0};
  const auto recs = build_source_dataset(generate_factorial(spec), 5, p);
  const auto path = scratch("roundtrip.bin");
  write_dataset(path, recs);
  const auto back = read_dataset(path);
  ASSERT_EQ(back.size(), recs.size());
  EXPECT_EQ(std::memcmp(back.data(), recs.data(), recs.size() * sizeof(SampleRecord)), 0);
  const auto path2 = scratch("roundtrip2.bin");
  write_dataset(path2, back);
  EXPECT_EQ(sha256_file(path), sha256_file(path2));
}

TEST(DatasetFile, CorruptionIsDetected) {
  std::vector<SampleRecord> recs(3);
  const auto path = scratch("corrupt.bin");
  write_dataset(path, recs);
  auto bytes = [&] {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  {
    auto bad = bytes;
    bad[0] = 'X';
    std::ofstream(scratch("bad_magic.bin"), std::ios::binary) << bad;
    EXPECT_THROW(read_dataset(scratch("bad_magic.bin")), LoadError);
  }
  {
    std::ofstream(scratch("short.bin"), std::ios::binary) << bytes.substr(0, bytes.size() - 5);
    EXPECT_THROW(read_dataset(scratch("short.bin")), LoadError);
  }
  EXPECT_THROW(read_dataset(scratch("does_not_exist.bin")), LoadError);
}

TEST(ExperimentalCsv, ParsesMea0Header) {
  const auto set = parse_experimental_csv(mea0_csv());
  EXPECT_EQ(set.id, "MEA0");
  EXPECT_EQ(set.design_base.mode, physics::DeviceMode::FuelCell);
  EXPECT_DOUBLE_EQ(set.design_base.pressure, 1.59);
  EXPECT_DOUBLE_EQ(set.design_base.iec_mem, 7.9);
  EXPECT_DOUBLE_EQ(set.design_base.iec_io, 8.9);
  EXPECT_DOUBLE_EQ(set.design_base.delta_mem, 0.005);
  ASSERT_EQ(set.conditions.size(), 3u);
  EXPECT_NEAR(set.conditions[0], 433.15, 1e-9);
  EXPECT_NEAR(set.holdout_condition, 473.15, 1e-9);
  // Points within a condition are sorted by current.
  EXPECT_DOUBLE_EQ(set.points[1][1].current_density, 0.2);
  EXPECT_EQ(set.total_points(), 9u);
}

TEST(ExperimentalCsv, NotApplicableIsZero) {
  auto text = mea0_csv();
  text.replace(text.find("iec_io,8.9"), 10, "iec_io,n/a");
  EXPECT_EQ(parse_experimental_csv(text).design_base.iec_io, 0.0);
}

TEST(ExperimentalCsv, ErrorsCarryLineNumbers) {
  auto text = mea0_csv();
  text.replace(text.find("200,0.3,0.72"), 12, "200,0.3,abc");
  try {
    parse_experimental_csv(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 19u);
  }
  const auto header_only = mea0_csv().substr(0, mea0_csv().find("160,"));
  EXPECT_THROW(parse_experimental_csv(header_only), ParseError);
  auto missing = mea0_csv();
  missing.erase(missing.find("load_cat"), 13);
  EXPECT_THROW(parse_experimental_csv(missing), ParseError);
}

TEST(ExperimentalCsv, FormatRoundTrip) {
  const auto set = parse_experimental_csv(mea0_csv());
  const auto again = parse_experimental_csv(format_experimental_csv(set));
  EXPECT_EQ(again.id, set.id);
  EXPECT_EQ(again.design_base, set.design_base);
  ASSERT_EQ(again.conditions.size(), set.conditions.size());
  for (std::size_t c = 0; c < set.conditions.size(); ++c) {
    EXPECT_NEAR(again.conditions[c], set.conditions[c], 1e-9);
    for (std::size_t k = 0; k < set.points[c].size(); ++k)
      EXPECT_EQ(again.points[c][k].voltage, set.points[c][k].voltage);
  }
}

TEST(Holdout, PartitionsMea0) {
  const auto set = parse_experimental_csv(mea0_csv());
  const auto split = split_holdout(set);
  EXPECT_EQ(split.train.size(), 6u);
  EXPECT_EQ(split.test.size(), 3u);
  for (const auto& r : split.test) EXPECT_NEAR(r.features[2], 473.15, 1e-9);
  for (const auto& r : split.train) EXPECT_GT(std::abs(r.features[2] - 473.15), 1.0);
}

TEST(Holdout, SingleConditionIsAnError) {
  ExperimentalSet set;
  set.id = "one";
  set.design_base.temperature = 433.15;
  set.conditions = {433.15};
  set.points = {{{0.1, 0.8}, {0.2, 0.7}, {0.3, 0.6}}};
  set.holdout_condition = 433.15;
  EXPECT_THROW(split_holdout(set), ConfigError);
}

TEST(Holdout, PartitionProperty) {
  PhysicsParams p;
  for (const auto& dev : reference_devices()) {
    auto d = dev;
    // Reference IECs lie above the simulated box; the partition does not care.
    const auto set = make_synthetic_set(d, 7, p);
    const auto split = split_holdout(set);
    EXPECT_EQ(split.train.size() + split.test.size(), set.total_points());
    EXPECT_EQ(split.test.size(), 7u);
  }
}

TEST(ReferenceDevices, TableValues) {
  const auto devices = reference_devices();
  ASSERT_EQ(devices.size(), 8u);
  EXPECT_EQ(devices[0].id, "MEA0");
  EXPECT_EQ(devices[0].holdout_c, 200);
  EXPECT_EQ(devices[1].design.iec_io, 0.0);
  EXPECT_EQ(devices[6].design.mode, physics::DeviceMode::HydrogenPump);
  EXPECT_EQ(devices[6].design.s_o2, 0.0);
}
