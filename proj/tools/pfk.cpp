// pfk: command-line front end for the folding-rate pipeline.
//
//   pfk synth     --seed 0 --n 500 --out data.csv
//   pfk train     --input data.csv --seed 0 --out run/
//   pfk evaluate  --input data.csv --seed 0 --subsets 2,4,6 --out run/
//   pfk predict   --model run/model.bnsi --preprocessor run/preprocessor.json --input new.csv
//   pfk sweep     --config configs/default.json --input data.csv --out run/
//   pfk benchmark --input data.csv --seed 0 --out run/
//
// Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pfk/pfk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::optional<std::string> input;
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> subsets;
  std::string format = "csv";
  std::optional<std::string> model;
  std::optional<std::string> preprocessor;
  std::optional<std::size_t> n;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pfk::IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw pfk::IoError("error while reading '" + path + "'");
  return ss.str();
}

// Collects outputs in memory and writes them only once the command has
// finished, each through a temporary file and a rename, so a failing command
// never leaves partial artifacts behind.
class Artifacts {
 public:
  void add(std::string path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

  void commit() {
    for (const auto& [path, content] : files_) {
      const fs::path p(path);
      std::error_code ec;
      if (p.has_parent_path()) {
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw pfk::IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
      }
      const fs::path tmp = p.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw pfk::IoError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw pfk::IoError("error while writing '" + tmp.string() + "'");
      }
      fs::rename(tmp, p, ec);
      if (ec) {
        fs::remove(tmp, ec);
        throw pfk::IoError("cannot move output into place at '" + path + "'");
      }
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

std::vector<std::size_t> parse_subsets(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (pfk::detail::trim(item).empty()) continue;
    auto v = pfk::detail::parse_int(item);
    if (!v || *v < 1 || *v > 9) throw pfk::ValidationError("subsets", "subset sizes must be integers in [1, 9]");
    out.push_back(static_cast<std::size_t>(*v));
  }
  if (out.empty()) throw pfk::ValidationError("subsets", "no subsets");
  return out;
}

// Config file first, then flags on top. The seed must come from one of them.
pfk::RunConfig resolve_config(const Options& o) {
  json j = json::object();
  if (o.config) {
    try {
      j = json::parse(read_file(*o.config));
    } catch (const json::parse_error& e) {
      throw pfk::ValidationError("config", std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw pfk::ValidationError("config", "must be a JSON object");
  }
  if (o.seed) j["seed"] = *o.seed;
  if (o.input) j["input"] = *o.input;
  if (o.out) j["out"] = *o.out;
  if (o.n) j["synth_n"] = *o.n;
  auto c = pfk::config_from_json(j);
  if (o.subsets) c.subsets = parse_subsets(*o.subsets);
  if (c.subsets.empty()) throw pfk::ValidationError("subsets", "no subsets");
  return c;
}

pfk::Dataset load_dataset(const pfk::RunConfig& c) {
  if (!c.input) throw pfk::ValidationError("input", "no input dataset given");
  return pfk::Dataset(pfk::parse_records(read_file(*c.input)), fs::path(*c.input).stem().string());
}

std::string require_out(const pfk::RunConfig& c) {
  if (!c.out) throw pfk::ValidationError("out", "no output directory given");
  return *c.out;
}

json train_report_json(const pfk::PipelineRun& run, const pfk::RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["features"] = run.fitted.feature_order;
  j["train_rows"] = run.setup.partition.train.size();
  j["test_rows"] = run.setup.partition.test.size();
  j["removed_outliers"] = run.fitted.removed_outliers;
  j["epoch_loss"] = run.report.epoch_loss;
  j["nnz"] = {{"projection", run.report.nnz_projection},
              {"predictor", run.report.nnz_predictor},
              {"gate", run.report.nnz_gate},
              {"branch", run.report.nnz_branch}};
  j["model_size_bytes"] = pfk::model_size(run.model);
  j["test_metrics"] = pfk::to_json(run.test_metrics);
  j["wall_time_ms"] = run.report.wall_time_ms;
  return j;
}

int cmd_synth(const Options& o) {
  auto c = resolve_config(o);
  const auto data = pfk::synthesize_dataset(c.synth_n, c.seed);
  const auto csv = pfk::serialize_records(data.records());
  if (!c.out) {
    std::cout << csv;
    return 0;
  }
  Artifacts a;
  a.add(*c.out, csv);
  a.commit();
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = resolve_config(o);
  const auto data = load_dataset(c);
  const auto out = require_out(c);
  const auto run = pfk::run_pipeline(data, c);
  const auto bytes = pfk::serialize(run.model);

  Artifacts a;
  a.add(join(out, "model.bnsi"), std::string(bytes.begin(), bytes.end()));
  a.add(join(out, "preprocessor.json"), pfk::to_json(run.fitted).dump(2) + "\n");
  a.add(join(out, "train_report.json"), train_report_json(run, c).dump(2) + "\n");
  a.add(join(out, "ranking.csv"), pfk::ranking_csv(run.setup.ranking));
  a.commit();
  std::cout << "model " << bytes.size() << " bytes, test mae " << pfk::detail::format_double(run.test_metrics.mae)
            << ", r2 " << pfk::detail::format_double(run.test_metrics.r2) << "\n";
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto c = resolve_config(o);
  const auto data = load_dataset(c);
  const auto out = require_out(c);
  const auto scfg = pfk::strategy_config(c);
  const auto split = pfk::split_ab(data);
  const auto result = pfk::run_strategy(split, scfg);
  const auto comparisons = pfk::compare_with_cart(result, scfg, c.cart);
  const auto summary = pfk::analyze(result.cells);

  json report = pfk::to_json(result);
  report["seed"] = c.seed;
  report["config"] = pfk::config_to_json(c);
  report["analysis"] = pfk::to_json(summary, result.cells);
  report["baseline"] = json::array();
  for (const auto& cmp : comparisons) report["baseline"].push_back(pfk::to_json(cmp));

  const auto csv = pfk::grid_csv(result.cells);
  Artifacts a;
  a.add(join(out, "results.csv"), csv);
  a.add(join(out, "report.json"), report.dump(2) + "\n");
  a.commit();
  if (o.format == "json") std::cout << report.dump(2) << "\n";
  else std::cout << csv;
  return 0;
}

int cmd_predict(const Options& o) {
  if (!o.model || !o.preprocessor || !o.input)
    throw pfk::ValidationError("", "predict needs --model, --preprocessor and --input");
  const auto raw = read_file(*o.model);
  const auto model = pfk::deserialize(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
  json pj;
  try {
    pj = json::parse(read_file(*o.preprocessor));
  } catch (const json::parse_error& e) {
    throw pfk::ValidationError("preprocessor", std::string("not valid JSON: ") + e.what());
  }
  const auto fitted = pfk::preprocessor_from_json(pj);
  if (fitted.feature_order.size() != static_cast<std::size_t>(model.config.input_dim))
    throw pfk::ValidationError("model", "model and preprocessor disagree on the number of features");
  const auto records = pfk::parse_records(read_file(*o.input));

  std::string text;
  json arr = json::array();
  if (o.format == "csv") text = "psn,ln_kf_pred\n";
  for (const auto& r : records) {
    const double y = pfk::predict(model, pfk::transform(r, fitted));
    if (o.format == "csv") text += pfk::detail::quote_csv(r.psn) + ',' + pfk::detail::format_double(y) + '\n';
    else arr.push_back({{"psn", r.psn}, {"ln_kf_pred", y}});
  }
  if (o.format == "json") text = arr.dump(2) + "\n";
  if (!o.out) {
    std::cout << text;
    return 0;
  }
  Artifacts a;
  a.add(*o.out, text);
  a.commit();
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto c = resolve_config(o);
  const auto data = load_dataset(c);
  const auto out = require_out(c);
  const auto setup = pfk::setup_pipeline(data, c);
  const auto spec = pfk::sweep_spec(c, setup.preprocess);
  const auto loop = pfk::optimize_loop(spec, setup.partition.train, setup.partition.test, c.sweep_rounds);

  pfk::SweepResult all;
  for (const auto& h : loop.history)
    for (auto t : h.sweep.trials) {
      t.index = all.trials.size();
      all.trials.push_back(std::move(t));
    }
  all.best = pfk::best_trial(all.trials, spec.objective);

  auto best = pfk::adopt(c, loop.best.params, setup.preprocess);
  best.input.reset();
  best.out.reset();
  Artifacts a;
  a.add(join(out, "sweep.csv"), pfk::sweep_csv(all));
  a.add(join(out, "history.csv"), pfk::history_csv(loop, spec.objective));
  a.add(join(out, "best_config.json"), pfk::config_to_json(best).dump(2) + "\n");
  a.commit();
  std::cout << "best " << pfk::to_string(spec.objective) << " "
            << pfk::detail::format_double(loop.history.back().best_objective * (spec.objective == pfk::Objective::r2 ? -1 : 1))
            << " with " << pfk::to_json(loop.best.params).dump() << "\n";
  return 0;
}

int cmd_benchmark(const Options& o) {
  const auto c = resolve_config(o);
  const auto data = load_dataset(c);
  const auto out = require_out(c);
  pfk::LatencyReport lat;
  std::size_t samples = 0;
  if (o.model || o.preprocessor) {
    if (!o.model || !o.preprocessor) throw pfk::ValidationError("", "give both --model and --preprocessor");
    const auto raw = read_file(*o.model);
    const auto model = pfk::deserialize(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
    const auto fitted = pfk::preprocessor_from_json(json::parse(read_file(*o.preprocessor)));
    lat = pfk::measure_latency(model, fitted, data.records(), c.latency_warmup, c.latency_reps);
    samples = data.size();
  } else {
    const auto run = pfk::run_pipeline(data, c);
    const auto& test = run.setup.partition.test;
    lat = pfk::measure_latency(run.model, run.fitted, test.records(), c.latency_warmup, c.latency_reps);
    samples = test.size();
  }
  json j = pfk::to_json(lat);
  j["samples"] = samples;
  j["warmup"] = c.latency_warmup;
  j["reps"] = c.latency_reps;
  Artifacts a;
  a.add(join(out, "latency.json"), j.dump(2) + "\n");
  a.commit();
  std::cout << "model median " << pfk::detail::format_double(lat.model_only.median_ms) << " ms, pipeline median "
            << pfk::detail::format_double(lat.pipeline.median_ms) << " ms per sample\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Protein folding-rate pipeline"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--input", o.input, "Input dataset CSV");
    sub->add_option("--config", o.config, "Flat JSON run configuration");
    sub->add_option("--out", o.out, "Output directory (file for synth and predict)");
    sub->add_option("--seed", o.seed, "Seed for every random choice");
    sub->add_option("--subsets", o.subsets, "Comma-separated subset sizes, e.g. 2,4,6");
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  };
  auto* synth = app.add_subcommand("synth", "Emit a synthetic dataset");
  auto* train = app.add_subcommand("train", "Fit preprocessor and model");
  auto* evaluate = app.add_subcommand("evaluate", "Run the four-quadrant strategy grid");
  auto* predict = app.add_subcommand("predict", "Predict ln k_f for new records");
  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sweep with grid narrowing");
  auto* benchmark = app.add_subcommand("benchmark", "Inference latency with stage breakdown");
  for (auto* s : {synth, train, evaluate, predict, sweep, benchmark}) common(s);
  synth->add_option("--n", o.n, "Number of records");
  for (auto* s : {predict, benchmark}) {
    s->add_option("--model", o.model, "Model file");
    s->add_option("--preprocessor", o.preprocessor, "Preprocessor JSON");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*predict) return cmd_predict(o);
    if (*sweep) return cmd_sweep(o);
    if (*benchmark) return cmd_benchmark(o);
  } catch (const pfk::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pfk::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pfk::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
