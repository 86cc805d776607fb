#include <gtest/gtest.h>

#include <set>

#include "pfk/strategy.hpp"
#include "test_support.hpp"

using namespace pfk;

namespace {

StrategyConfig quick_config() {
  StrategyConfig c;
  c.bonsai.epochs = 30;
  c.latency_warmup = 0;
  c.latency_reps = 2;
  return c;
}

std::string model_bytes(const BonsaiModel& m) {
  const auto b = serialize(m);
  return {b.begin(), b.end()};
}

}  // namespace

TEST(Quadrants, Names) {
  for (auto q : kQuadrants) EXPECT_EQ(parse_quadrant(to_string(q)), q);
  EXPECT_EQ(to_string(Quadrant::AB), "D_AB");
  EXPECT_FALSE(parse_quadrant("D_CC"));
}

TEST(RunStrategy, GridShape) {
  const auto data = synthesize_dataset(300, 1);
  auto config = quick_config();
  config.subset_sizes = {9, 2, 4, 4};
  const auto result = run_strategy(split_ab(data), config);
  std::map<Quadrant, std::vector<std::string>> names;
  for (const auto& c : result.cells) names[c.quadrant].push_back(c.subset.name);
  EXPECT_EQ(names[Quadrant::AA], (std::vector<std::string>{"F2_A", "F4_A", "F9_A"}));
  EXPECT_EQ(names[Quadrant::BB], (std::vector<std::string>{"F2_B", "F4_B", "F9_B"}));
  const auto inter = subset_intersection(*result.best_a, *result.best_b);
  const std::size_t cross = inter.empty() ? 1 : 2;
  EXPECT_EQ(names[Quadrant::AB].size(), cross);
  EXPECT_EQ(names[Quadrant::BA].size(), cross);
  EXPECT_EQ(names[Quadrant::AB].back(), subset_union(*result.best_a, *result.best_b).name);

  // Best subset is the minimum-MAE D_AA cell, found by scanning.
  const StrategyCell* best = nullptr;
  for (const auto& c : result.cells)
    if (c.quadrant == Quadrant::AA && (!best || c.metrics.mae < best->metrics.mae)) best = &c;
  EXPECT_EQ(best->subset, *result.best_a);

  for (const auto& c : result.cells) {
    EXPECT_GT(c.model_size_bytes, 0u);
    EXPECT_EQ(c.latency.model_only.count, 2u);
    const bool trains_on_a = c.quadrant == Quadrant::AA || c.quadrant == Quadrant::AB;
    EXPECT_EQ(c.train_label, trains_on_a ? result.part_a->train.label() : result.part_b->train.label());
  }
}

TEST(RunStrategy, IdenticalSplitsGiveIdenticalQuadrants) {
  const auto data = synthesize_dataset(150, 2);
  SplitPair split{Dataset(data.records(), "X"), Dataset(data.records(), "Y")};
  auto config = quick_config();
  config.subset_sizes = {3, 6};
  const auto result = run_strategy(split, config);
  std::vector<const StrategyCell*> aa, bb;
  for (const auto& c : result.cells) {
    if (c.quadrant == Quadrant::AA) aa.push_back(&c);
    if (c.quadrant == Quadrant::BB) bb.push_back(&c);
  }
  ASSERT_EQ(aa.size(), 2u);
  ASSERT_EQ(bb.size(), 2u);
  for (std::size_t i = 0; i < aa.size(); ++i) {
    EXPECT_EQ(aa[i]->subset.features, bb[i]->subset.features);
    EXPECT_EQ(aa[i]->metrics.mae, bb[i]->metrics.mae);
    EXPECT_EQ(aa[i]->metrics.mse, bb[i]->metrics.mse);
    EXPECT_EQ(aa[i]->model_size_bytes, bb[i]->model_size_bytes);
  }
}

TEST(RunStrategy, EmptyListAndMissingSplit) {
  const auto data = synthesize_dataset(80, 3);
  auto config = quick_config();
  config.subset_sizes.clear();
  EXPECT_THROW(run_strategy(split_ab(data), config), ValidationError);

  config = quick_config();
  config.subset_sizes = {2};
  const auto only_a = split_ab(data, [](const ProteinRecord&) { return true; });
  const auto result = run_strategy(only_a, config);
  ASSERT_EQ(result.cells.size(), 1u);
  EXPECT_EQ(result.cells[0].quadrant, Quadrant::AA);
}

TEST(EvaluateCell, NoLeakageFromTestSide) {
  const auto data = synthesize_dataset(200, 4);
  const auto part = train_test_partition(data, 0.2, 4);
  const FeatureSubset subset{"F5_A", {"l", "beta_t", "fold", "ln_ku", "ph"}};
  const auto config = quick_config();
  const auto base = evaluate_cell(Quadrant::AA, part.train, part.test, subset, config, false);

  auto perturbed = part.test.records();
  pfk_test::TestRng rng(9);
  for (auto& r : perturbed) {
    *r.ln_kf += rng.uniform(-5, 5);
    r.ph = rng.uniform(0, 14);
  }
  const Dataset changed(perturbed, part.test.label());
  const auto again = evaluate_cell(Quadrant::AA, part.train, changed, subset, config, false);
  EXPECT_EQ(model_bytes(again.model), model_bytes(base.model));
  EXPECT_EQ(again.fitted, base.fitted);
  EXPECT_NE(again.cell.metrics.mae, base.cell.metrics.mae);

  const auto smaller = evaluate_cell(Quadrant::AA, part.train, Dataset({part.test[0]}, "one"), subset, config, false);
  EXPECT_EQ(smaller.fitted, base.fitted);
}

TEST(EvaluateCell, EmptySubsetRejected) {
  const auto data = synthesize_dataset(40, 5);
  const auto part = train_test_partition(data, 0.2, 5);
  EXPECT_THROW(evaluate_cell(Quadrant::AA, part.train, part.test, FeatureSubset{"x", {}}, quick_config(), false),
               ValidationError);
}

TEST(EvaluateCell, SmallSplitUsesOneBatch) {
  const auto data = synthesize_dataset(12, 6);
  const auto part = train_test_partition(data, 0.2, 6);
  auto config = quick_config();
  config.bonsai.batch_size = 64;
  EXPECT_NO_THROW(evaluate_cell(Quadrant::AA, part.train, part.test, FeatureSubset{"F2_A", {"l", "fold"}}, config, false));
}

TEST(BatchTrend, PartitionArithmeticAndReassembly) {
  const auto data = synthesize_dataset(60, 7);
  PreprocessConfig pc;
  pc.features = {"l", "beta_t", "fold"};
  const auto fitted = fit_pipeline(data, pc);
  const Dataset test({data[0], data[1], data[2], data[3], data[4], data[5], data[6], data[7], data[8], data[9]}, "t");
  auto predict_fn = [](std::span<const double> x) { return 0.3 * x[0] - 0.2 * x[1] + 0.1 * x[2]; };

  const auto trend = batch_trend(predict_fn, fitted, test, 3);
  ASSERT_EQ(trend.size(), 4u);
  EXPECT_EQ(trend[0].n, 3u);
  EXPECT_EQ(trend[1].n, 3u);
  EXPECT_EQ(trend[2].n, 3u);
  EXPECT_EQ(trend[3].n, 1u);

  const auto whole = batch_trend(predict_fn, fitted, test, 10);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(batch_trend(predict_fn, fitted, test, 50).front().mae, whole.front().mae);
  double weighted_mae = 0, weighted_mse = 0;
  for (const auto& b : trend) {
    weighted_mae += b.mae * b.n;
    weighted_mse += b.mse * b.n;
  }
  EXPECT_NEAR(weighted_mae / 10, whole[0].mae, 1e-12);
  EXPECT_NEAR(weighted_mse / 10, whole[0].mse, 1e-12);
  EXPECT_THROW(batch_trend(predict_fn, fitted, test, 0), ValidationError);
}

TEST(Latency, SingleRepAndFractions) {
  const auto data = synthesize_dataset(80, 8);
  PreprocessConfig pc;
  pc.features = {"l", "beta_t", "fold", "ln_ku"};
  const auto fitted = fit_pipeline(data, pc);
  BonsaiConfig bc;
  bc.input_dim = 4;
  const auto model = init_model(bc);

  const auto one = measure_latency(model, fitted, data.records(), 0, 1);
  EXPECT_EQ(one.model_only.count, 1u);
  EXPECT_EQ(one.pipeline.count, 1u);

  const auto lat = measure_latency(model, fitted, data.records(), 2, 25);
  EXPECT_EQ(lat.model_only.count, 25u);
  ASSERT_EQ(lat.stages.size(), 4u);
  double total = 0;
  for (const auto& s : lat.stages) total += s.fraction;
  EXPECT_NEAR(total, 1.0, 0.01);
  EXPECT_GE(lat.model_only.p95_ms, lat.model_only.median_ms);
  EXPECT_GT(lat.model_only.median_ms, 0.0);
  EXPECT_GE(lat.pipeline.median_ms, lat.model_only.median_ms);

  EXPECT_THROW(measure_latency(model, fitted, data.records(), 0, 0), ValidationError);
  EXPECT_THROW(measure_latency(model, fitted, std::span<const ProteinRecord>{}, 0, 1), ValidationError);
}

TEST(Latency, SummaryStatistics) {
  const auto s = summarize_latency({4, 1, 3, 2, 5});
  EXPECT_DOUBLE_EQ(s.median_ms, 3.0);
  EXPECT_DOUBLE_EQ(s.mean_ms, 3.0);
  EXPECT_EQ(s.count, 5u);
  EXPECT_GE(s.p95_ms, s.median_ms);
}

TEST(GridCsv, RoundTrip) {
  std::vector<GridRow> rows = {{"D_AA", "F2_A", 0.5, 0.25, 0.875, 0.9375, 0.001, 0.004},
                               {"D_AB", "F4_A|F9_B", 1e-17, 3.0, std::numeric_limits<double>::quiet_NaN(), 1, 2, 3}};
  const auto text = grid_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), kGridHeader);
  const auto back = parse_grid_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], rows[0]);
  EXPECT_EQ(back[1].subset, "F4_A|F9_B");
  EXPECT_TRUE(std::isnan(back[1].r2));
  EXPECT_EQ(back[1].mse, 1e-17);
  EXPECT_THROW(parse_grid_csv("a,b\n"), ParseError);
  EXPECT_THROW(parse_grid_csv(std::string(kGridHeader) + "\nD_ZZ,F,1,1,1,1,1,1\n"), ValidationError);
}

TEST(StrategyJson, NullR2) {
  MetricsReport m;
  m.n = 1;
  EXPECT_TRUE(to_json(m)["r2"].is_null());
}
