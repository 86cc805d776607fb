#include <gtest/gtest.h>

#include <cmath>

#include "pfk/preprocess.hpp"
#include "test_support.hpp"

using namespace pfk;
using pfk_test::make_record;
using pfk_test::TestRng;

TEST(FitIqr, ConstantData) {
  const std::vector<double> v{5, 5, 5, 5};
  const auto b = fit_iqr(v);
  EXPECT_EQ(b.q1, 5);
  EXPECT_EQ(b.q3, 5);
  EXPECT_EQ(b.lower, 5);
  EXPECT_EQ(b.upper, 5);
}

TEST(FitIqr, HandComputedFences) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 200};
  const auto b = fit_iqr(v);
  EXPECT_DOUBLE_EQ(b.q1, 3.5);
  EXPECT_DOUBLE_EQ(b.q3, 8.5);
  EXPECT_DOUBLE_EQ(b.lower, -4.0);
  EXPECT_DOUBLE_EQ(b.upper, 16.0);
}

TEST(FitIqr, OrderInvariantAndOrdered) {
  TestRng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = rng.vec(4 + rng.index(40), -50, 50);
    const auto b = fit_iqr(v);
    std::reverse(v.begin(), v.end());
    EXPECT_EQ(fit_iqr(v), b);
    EXPECT_LE(b.lower, b.q1);
    EXPECT_LE(b.q1, b.q3);
    EXPECT_LE(b.q3, b.upper);
  }
  EXPECT_THROW(fit_iqr(std::vector<double>{1, 2, 3}), ValidationError);
}

TEST(FilterOutliers, RemovesAndKeepsBoundary) {
  std::map<std::string, IqrBounds> bounds{{"ph", {3.5, 8.5, -4.0, 16.0}}};
  auto in = make_record("in", 1);
  auto at = make_record("at", 1);
  at.ph = 14.0;
  Dataset d({in, at}, "d");
  EXPECT_EQ(filter_outliers(d, bounds).removed, 0u);

  std::map<std::string, IqrBounds> l_bounds{{"l", {3.5, 8.5, -4.0, 16.0}}};
  auto big = make_record("big", 1);
  big.length = 200;
  big.lpdb = 10;
  auto edge = make_record("edge", 1);
  edge.length = 16;
  edge.lpdb = 10;
  const auto r = filter_outliers(Dataset({big, edge}, "d"), l_bounds);
  EXPECT_EQ(r.removed, 1u);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].psn, "edge");
}

TEST(FilterOutliers, SubsetAndIdempotent) {
  const auto d = synthesize_dataset(150, 4);
  std::map<std::string, IqrBounds> bounds;
  for (auto name : kNumericColumns) {
    std::vector<double> col;
    for (const auto& r : d) col.push_back(numeric_value(r, name));
    bounds[std::string(name)] = fit_iqr(col);
  }
  const auto once = filter_outliers(d, bounds);
  const auto twice = filter_outliers(once.kept, bounds);
  EXPECT_EQ(twice.removed, 0u);
  EXPECT_EQ(twice.kept, once.kept);
  EXPECT_EQ(once.kept.size() + once.removed, d.size());
}

TEST(FilterOutliers, UnknownFeature) {
  std::map<std::string, IqrBounds> bounds{{"mass", {0, 1, 0, 1}}};
  EXPECT_THROW(filter_outliers(Dataset({make_record("a", 1)}, "d"), bounds), ValidationError);
}

TEST(StandardizeRate, ReferenceIsIdentity) {
  RateStandardizationParams p;
  TestRng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-20, 20);
    EXPECT_EQ(standardize_rate(v, 25.0, p), v);
    p.delta_h = rng.uniform(0, 1e5);
    EXPECT_EQ(standardize_rate(v, 25.0, p), v);
  }
}

TEST(StandardizeRate, ThirtySevenDegrees) {
  RateStandardizationParams p;
  EXPECT_NEAR(standardize_rate(5.0, 37.0, p), 4.96054, 1e-5);
  EXPECT_NEAR(standardize_rate(5.0, 37.0, p), 5.0 + std::log(298.15 / 310.15), 1e-15);
}

TEST(StandardizeRate, EnthalpyTerm) {
  RateStandardizationParams p;
  p.delta_h = 50000;
  const double t = 310.15;
  EXPECT_NEAR(standardize_rate(1.0, 37.0, p), 1.0 + std::log(298.15 / t) + 50000 / 8.314 * (1 / t - 1 / 298.15),
              1e-12);
  EXPECT_THROW(standardize_rate(1.0, -300.0, p), ValidationError);
}

TEST(ZScore, HandComputed) {
  const auto p = fit_zscore(std::vector<double>{2, 4, 6});
  EXPECT_DOUBLE_EQ(p.mean, 4);
  EXPECT_NEAR(p.std, std::sqrt(8.0 / 3.0), 1e-15);
  EXPECT_NEAR(p.std, 1.63299, 1e-5);
  EXPECT_EQ(apply_zscore(4, p), 0);
  EXPECT_NEAR(apply_zscore(2, p), -1.22474, 1e-5);
}

TEST(ZScore, Degenerate) {
  const auto one = fit_zscore(std::vector<double>{7});
  EXPECT_EQ(one.mean, 7);
  EXPECT_EQ(one.std, 0);
  EXPECT_EQ(fit_zscore(std::vector<double>{3, 3, 3}).std, 0);
  EXPECT_EQ(apply_zscore(123, one), 0);
  EXPECT_THROW(fit_zscore(std::vector<double>{}), ValidationError);
}

TEST(ZScore, TrainingColumnIsStandard) {
  TestRng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto col = rng.vec(2 + rng.index(100), -1e3, 1e3);
    const auto p = fit_zscore(col);
    std::vector<double> z;
    for (double v : col) z.push_back(apply_zscore(v, p));
    const double m = stats::mean(z);
    double ss = 0;
    for (double v : z) ss += (v - m) * (v - m);
    EXPECT_LT(std::abs(m), 1e-9);
    EXPECT_NEAR(std::sqrt(ss / z.size()), 1.0, 1e-9);
  }
}

TEST(MEstimate, SingleCategory) {
  const std::vector<std::string> c{"x", "x"};
  const std::vector<double> y{3, 3};
  const auto t = fit_m_estimate(c, y, 20);
  EXPECT_EQ(t.prior, 3);
  EXPECT_EQ(t.per_category.at("x").count, 2u);
  EXPECT_EQ(t.per_category.at("x").target_sum, 6);
}

TEST(MEstimate, PriorIgnoresGrouping) {
  const std::vector<std::string> c{"a", "b", "b", "c"};
  const std::vector<double> y{1, 2, 3, 10};
  EXPECT_DOUBLE_EQ(fit_m_estimate(c, y).prior, 4.0);
}

TEST(MEstimate, Accumulation) {
  std::vector<std::string> c(5, "a");
  std::vector<double> y{1, 3, 2, 2.5, 1.5};
  c.insert(c.end(), 5, "b");
  y.insert(y.end(), {0, 0, 0, 0, 0});
  const auto t = fit_m_estimate(c, y);
  EXPECT_EQ(t.per_category.at("a").count, 5u);
  EXPECT_EQ(t.per_category.at("a").target_sum, 10);
  EXPECT_DOUBLE_EQ(t.prior, 1.0);
}

TEST(MEstimate, EncodeHandComputed) {
  MEstimateTable t;
  t.m = 20;
  t.prior = 1.0;
  t.per_category["a"] = {5, 10.0};
  EXPECT_DOUBLE_EQ(encode_category("a", t), 1.2);
  EXPECT_EQ(encode_category("unseen", t), 1.0);
  t.m = 0;
  t.per_category["b"] = {2, 7.0};
  EXPECT_DOUBLE_EQ(encode_category("b", t), 3.5);
  EXPECT_THROW(fit_m_estimate(std::vector<std::string>{"a"}, std::vector<double>{1, 2}), ValidationError);
}

TEST(MEstimate, EncodingBetweenPriorAndCategoryMean) {
  TestRng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::string> c;
    std::vector<double> y;
    const std::size_t n = 1 + rng.index(60);
    for (std::size_t i = 0; i < n; ++i) {
      c.push_back(std::string(1, static_cast<char>('a' + rng.index(4))));
      y.push_back(rng.uniform(-5, 5));
    }
    const auto table = fit_m_estimate(c, y, rng.uniform(0, 40));
    for (const auto& [cat, s] : table.per_category) {
      const double mean = s.target_sum / s.count;
      const double e = encode_category(cat, table);
      EXPECT_GE(e, std::min(mean, table.prior) - 1e-12);
      EXPECT_LE(e, std::max(mean, table.prior) + 1e-12);
    }
  }
}

TEST(FitPipeline, ShapeAndDeterminism) {
  const auto d = synthesize_dataset(200, 0);
  const auto f = fit_pipeline(d);
  EXPECT_EQ(f.feature_order.size(), 9u);
  for (const auto& r : d) EXPECT_EQ(transform(r, f).size(), f.feature_order.size());
  EXPECT_EQ(fit_pipeline(d), f);
  EXPECT_EQ(transform(d[0], f), transform(d[0], f));
}

TEST(FitPipeline, EverythingRemovedIsAnError) {
  // Eight records agree on every column except one deviation each. Each
  // column has six equal values, which pins both quartiles (and hence both
  // fences) to that value, so every record falls outside exactly one fence.
  std::vector<ProteinRecord> recs;
  for (int i = 0; i < 8; ++i) recs.push_back(make_record("r" + std::to_string(i), 1));
  recs[0].ph = 6.0;
  recs[1].ph = 8.0;
  recs[2].temp = 20.0;
  recs[3].temp = 30.0;
  recs[4].ln_ku = -3.0;
  recs[5].ln_ku = -1.0;
  recs[6].beta_t = 0.5;
  recs[7].beta_t = 0.7;
  EXPECT_THROW(fit_pipeline(Dataset(recs, "d")), ValidationError);

  // Restoring one record leaves exactly that record.
  recs[7].beta_t = 0.6;
  const auto f = fit_pipeline(Dataset(recs, "d"));
  EXPECT_EQ(f.removed_outliers, 7u);
  EXPECT_THROW(fit_pipeline(Dataset({}, "empty")), ValidationError);
}

TEST(FitPipeline, NeedsTargets) {
  auto recs = synthesize_dataset(20, 1).records();
  recs[5].ln_kf.reset();
  EXPECT_THROW(fit_pipeline(Dataset(recs, "d")), ValidationError);
}

TEST(FitPipeline, RejectsBadFeatureLists) {
  const auto d = synthesize_dataset(30, 1);
  PreprocessConfig c;
  c.features = {"l", "l"};
  EXPECT_THROW(fit_pipeline(d, c), ValidationError);
  c.features = {"mass"};
  EXPECT_THROW(fit_pipeline(d, c), ValidationError);
  c.features = {};
  EXPECT_THROW(fit_pipeline(d, c), ValidationError);
}

TEST(Transform, MeanRecordIsNearZero) {
  const auto d = synthesize_dataset(300, 2);
  PreprocessConfig c;
  c.features = {"lpdb", "l", "ph", "temp"};
  const auto f = fit_pipeline(d, c);
  auto r = d[0];
  r.lpdb = 0;
  r.length = 0;
  // Build a record at the fitted means (rounded fields aside) by inverting
  // the z-score; integer columns cannot hit the mean exactly.
  r.ph = f.zscore.at("ph").mean;
  r.temp = f.zscore.at("temp").mean;
  r.length = static_cast<std::int64_t>(std::llround(f.zscore.at("l").mean));
  r.lpdb = std::min<std::int64_t>(r.length, std::llround(f.zscore.at("lpdb").mean));
  const auto v = transform(r, f);
  EXPECT_NEAR(v[2], 0.0, 1e-12);
  EXPECT_NEAR(v[3], 0.0, 1e-12);
  EXPECT_LT(std::abs(v[0]), 0.02);
  EXPECT_LT(std::abs(v[1]), 0.02);
}

TEST(Transform, UnseenCategoryUsesPrior) {
  const auto d = synthesize_dataset(100, 2);
  PreprocessConfig c;
  c.features = {"fold"};
  const auto f = fit_pipeline(d, c);
  auto r = d[0];
  r.fold = "never seen";
  EXPECT_EQ(transform(r, f)[0], f.encoders.at("fold").prior);
}

TEST(Transform, CategoricalZScoreIsOptIn) {
  const auto d = synthesize_dataset(200, 9);
  PreprocessConfig c;
  c.features = {"fold"};
  const auto plain = fit_pipeline(d, c);
  EXPECT_FALSE(plain.zscore.contains("fold"));
  c.zscore_columns.push_back("fold");
  const auto scored = fit_pipeline(d, c);
  ASSERT_TRUE(scored.zscore.contains("fold"));
  const auto& z = scored.zscore.at("fold");
  EXPECT_NEAR(transform(d[0], scored)[0], (transform(d[0], plain)[0] - z.mean) / z.std, 1e-12);
}

namespace {

// Every stage re-derived from its definition, sharing no code with the library.
struct BruteForce {
  std::vector<ProteinRecord> kept;
  std::map<std::string, std::vector<double>> columns;  // numeric columns after the stage they are scored at
  std::vector<double> targets;

  static double raw(const ProteinRecord& r, const std::string& name) {
    if (name == "lpdb") return static_cast<double>(r.lpdb);
    if (name == "l") return static_cast<double>(r.length);
    if (name == "ph") return r.ph;
    if (name == "temp") return r.temp;
    if (name == "ln_ku") return r.ln_ku;
    return r.beta_t;
  }
  static std::string cat(const ProteinRecord& r, const std::string& name) {
    if (name == "class") return r.protein_class;
    if (name == "fold") return r.fold;
    return r.f_type == FoldType::two_state ? "2S" : "N2S";
  }
  static double eyring(double v, double tc, double dh) {
    const long double t = tc + 273.15L, tr = 298.15L;
    if (tc == 25.0) return v;
    return static_cast<double>(v + std::log(tr / t) + (dh / 8.314L) * (1 / t - 1 / tr));
  }

  BruteForce(const std::vector<ProteinRecord>& data, double dh) {
    const std::vector<std::string> numeric{"lpdb", "l", "ph", "temp", "ln_ku", "beta_t"};
    std::map<std::string, std::pair<double, double>> fences;
    for (const auto& n : numeric) {
      std::vector<double> col;
      for (const auto& r : data) col.push_back(raw(r, n));
      const double q1 = pfk_test::oracle_quantile(col, 0.25), q3 = pfk_test::oracle_quantile(col, 0.75);
      fences[n] = {q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)};
    }
    for (const auto& r : data) {
      bool ok = true;
      for (const auto& n : numeric) ok = ok && raw(r, n) >= fences[n].first && raw(r, n) <= fences[n].second;
      if (ok) kept.push_back(r);
    }
    for (const auto& r : kept) targets.push_back(eyring(*r.ln_kf, r.temp, dh));
  }

  double value(const ProteinRecord& r, const std::string& name, const std::vector<std::string>& zcols, double m,
               double dh) const {
    const bool scored = std::find(zcols.begin(), zcols.end(), name) != zcols.end();
    auto column_of = [&](auto fn) {
      std::vector<double> col;
      for (const auto& k : kept) col.push_back(fn(k));
      return col;
    };
    if (name == "class" || name == "fold" || name == "f_type") {
      std::vector<std::string> cats;
      for (const auto& k : kept) cats.push_back(cat(k, name));
      auto enc = [&](const ProteinRecord& x) { return pfk_test::oracle_m_estimate(cats, targets, cat(x, name), m); };
      const double v = enc(r);
      return scored ? pfk_test::oracle_zscore(column_of(enc), v) : v;
    }
    auto stage = [&](const ProteinRecord& x) { return name == "ln_ku" ? eyring(x.ln_ku, x.temp, dh) : raw(x, name); };
    const double v = stage(r);
    return scored ? pfk_test::oracle_zscore(column_of(stage), v) : v;
  }
};

std::vector<ProteinRecord> random_records(TestRng& rng, std::size_t n) {
  const std::vector<std::string> classes{"alpha", "beta", "mixed"};
  const std::vector<std::string> folds{"f1", "f2", "f3", "f4", "f5"};
  const std::vector<double> temps{5, 15, 25, 25, 37};
  std::vector<ProteinRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    ProteinRecord r;
    r.psn = "R" + std::to_string(i);
    r.protein_class = classes[rng.index(classes.size())];
    r.fold = folds[rng.index(folds.size())];
    r.length = 30 + static_cast<std::int64_t>(rng.index(200));
    if (rng.index(15) == 0) r.length *= 10;  // the occasional outlier
    r.lpdb = r.length - static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(r.length / 8 + 1)));
    r.ph = std::round(rng.uniform(4, 9) * 10) / 10;
    r.temp = temps[rng.index(temps.size())];
    r.f_type = rng.index(2) ? FoldType::two_state : FoldType::non_two_state;
    r.ln_ku = rng.uniform(-8, 2);
    r.beta_t = rng.uniform(0, 1);
    r.ln_kf = rng.uniform(-2, 10);
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Transform, MatchesStageCompositionOracle) {
  TestRng rng(5);
  const std::vector<std::vector<std::string>> zsets{
      {"lpdb", "l", "ph", "temp"}, {"lpdb", "l", "ph", "temp", "ln_ku", "beta_t"}, {"ph", "class", "f_type"}, {}};
  for (int trial = 0; trial < 60; ++trial) {
    const auto recs = random_records(rng, 8 + rng.index(43));
    PreprocessConfig c;
    c.m = trial % 3 == 0 ? 0.0 : 20.0;
    c.delta_h = trial % 2 ? 0.0 : 40000.0;
    c.zscore_columns = zsets[trial % zsets.size()];
    const auto f = fit_pipeline(Dataset(recs, "r"), c);
    const BruteForce oracle(recs, c.delta_h);
    EXPECT_EQ(f.removed_outliers, recs.size() - oracle.kept.size());
    for (const auto& r : recs) {
      const auto v = transform(r, f);
      for (std::size_t j = 0; j < v.size(); ++j)
        EXPECT_NEAR(v[j], oracle.value(r, f.feature_order[j], c.zscore_columns, c.m, c.delta_h), 1e-9)
            << f.feature_order[j];
      EXPECT_NEAR(target_value(r, f), BruteForce::eyring(*r.ln_kf, r.temp, c.delta_h), 1e-12);
    }
  }
}

TEST(Transform, DatasetMatchesPerRecord) {
  const auto d = synthesize_dataset(80, 6);
  const auto f = fit_pipeline(d);
  const auto ld = transform_dataset(d, f);
  ASSERT_EQ(ld.features.rows(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto v = transform(d[i], f);
    EXPECT_TRUE(std::equal(v.begin(), v.end(), ld.features.row(i).begin()));
    EXPECT_EQ(ld.targets[i], target_value(d[i], f));
  }
}

TEST(PreprocessorJson, RoundTripIsExact) {
  const auto d = synthesize_dataset(150, 8);
  PreprocessConfig c;
  c.delta_h = 12345.6;
  c.zscore_columns.push_back("fold");
  const auto f = fit_pipeline(d, c);
  const auto text = to_json(f).dump();
  const auto back = preprocessor_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, f);
  for (const auto& r : d) EXPECT_EQ(transform(r, back), transform(r, f));
}

TEST(PreprocessorJson, RejectsBadDocuments) {
  const auto f = fit_pipeline(synthesize_dataset(40, 8));
  auto j = to_json(f);
  j["version"] = 99;
  EXPECT_THROW(preprocessor_from_json(j), ValidationError);
  j = to_json(f);
  j.erase("encoders");
  EXPECT_THROW(preprocessor_from_json(j), ValidationError);
  j = to_json(f);
  j["format"] = "other";
  EXPECT_THROW(preprocessor_from_json(j), ValidationError);
}

TEST(WithFeatures, ReordersOutput) {
  const auto d = synthesize_dataset(60, 8);
  const auto f = fit_pipeline(d);
  const auto g = with_features(f, {"temp", "l"});
  const auto full = transform(d[0], f);
  const auto part = transform(d[0], g);
  ASSERT_EQ(part.size(), 2u);
  EXPECT_EQ(part[0], full[3]);
  EXPECT_EQ(part[1], full[1]);
}
