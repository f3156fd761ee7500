#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "btof/config.hpp"
#include "btof/diagonal.hpp"
#include "btof/error.hpp"
#include "btof/eval.hpp"
#include "btof/orderbook.hpp"
#include "btof/pipeline.hpp"
#include "btof/stats.hpp"
#include "btof/synth.hpp"

#ifndef BTOF_VERSION
#define BTOF_VERSION "0.1.0"
#endif

namespace btof::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Collects what a command read and wrote; saved as JSON next to the outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path, const std::string& content) {
    inputs_.push_back({{"path", path}, {"fnv1a64", hex64(fnv1a(content))}, {"bytes", content.size()}});
  }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }

  // Writes `content` to `path`, creating parent directories, and records it.
  void output(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write output file '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
    outputs_.push_back(path.string());
  }
  template <class Fn>
  void output_with(const fs::path& path, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    output(path, os.str());
  }

  void save(const fs::path& path) {
    json j;
    j["command"] = command_;
    j["tool_version"] = BTOF_VERSION;
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json extra_ = json::object();
};

struct InputOptions {
  std::string path;
  Semantics semantics = Semantics::gross;
  int horizon = 4;
  double min_nonzero_frac = 0.0;
};

// Parses an order-book CSV into a gross cube (net input is accumulated) and
// applies the non-zero-period filter.
inline DemandCube load_cube(const InputOptions& opt, RunManifest& manifest, json* info = nullptr) {
  const std::string text = read_file(opt.path);
  manifest.input(opt.path, text);
  std::istringstream in(text);
  const auto records = parse_orders(in, opt.horizon);
  DemandCube cube = build_cube(records, opt.horizon, opt.semantics);
  if (opt.semantics == Semantics::net) cube = accumulate(cube);
  const std::size_t before = cube.item_count();
  const std::size_t violations = cube.monotonicity_violations();
  if (violations) log_warning(std::to_string(violations) + " gross-monotonicity violations in '" + opt.path + "'");
  if (opt.min_nonzero_frac > 0.0) cube = filter_items(cube, opt.min_nonzero_frac);
  if (info) {
    (*info)["records"] = records.size();
    (*info)["merged_duplicates"] = cube.merged_duplicates;
    (*info)["items_read"] = before;
    (*info)["items_kept"] = cube.item_count();
    (*info)["first_period"] = cube.first_period();
    (*info)["last_period"] = cube.last_period();
    (*info)["periods"] = cube.periods();
    (*info)["horizon"] = cube.horizon();
    (*info)["input_semantics"] = to_string(opt.semantics);
    (*info)["min_nonzero_frac"] = opt.min_nonzero_frac;
    (*info)["monotonicity_violations"] = violations;
  }
  return cube;
}

inline void add_input_options(CLI::App* cmd, InputOptions& opt, bool filter = true) {
  cmd->add_option("--input", opt.path, "order-book CSV (item_code,period,delivery_date,quantity)")->required();
  cmd->add_option("--semantics", opt.semantics, "quantity semantics of the input")
      ->transform(CLI::CheckedTransformer(std::map<std::string, Semantics>{{"gross", Semantics::gross},
                                                                          {"net", Semantics::net}}));
  cmd->add_option("--horizon", opt.horizon, "number of delivery dates H")->check(CLI::PositiveNumber);
  if (filter)
    cmd->add_option("--min-nonzero-frac", opt.min_nonzero_frac, "keep items with at least this share of non-zero periods")
        ->check(CLI::Range(0.0, 1.0));
}

inline std::string fmt(double v, int precision = 4) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline void print_method_table(std::ostream& out, const EvalReport& r) {
  out << std::left << std::setw(16) << "method" << std::setw(15) << "mode" << std::setw(10) << "transform"
      << std::right << std::setw(10) << "smape" << std::setw(10) << "smape_%" << std::setw(10) << "slot0" << '\n';
  for (const auto& m : r.methods) {
    const bool ok = !m.agg.s_j.empty() && !m.agg.items.empty();
    out << std::left << std::setw(16) << m.method << std::setw(15) << m.mode << std::setw(10) << m.transform
        << std::right << std::setw(10) << (ok ? fmt(m.agg.overall()) : "NA") << std::setw(10)
        << (ok ? fmt(100.0 * m.agg.overall(), 2) : "NA") << std::setw(10) << (ok ? fmt(m.agg.s_j[0]) : "NA") << '\n';
  }
}

inline void write_forecasts_csv(std::ostream& out, const std::vector<ForecastRow>& rows) {
  out << "method,item,t,slot_j,period,delivery_date,actual,forecast\n";
  for (const auto& r : rows)
    out << r.method << ',' << csv::quote(r.item) << ',' << r.t << ',' << r.slot << ',' << r.period << ','
        << r.delivery_date << ',' << csv::format_double(r.actual) << ',' << r.forecast << '\n';
}

inline void write_report_files(RunManifest& manifest, const fs::path& dir, const EvalReport& report) {
  manifest.output(dir / "report.json", report_json(report).dump(2) + "\n");
  manifest.output_with(dir / "scores.csv", [&](std::ostream& os) { write_scores_csv(os, report); });
  manifest.output_with(dir / "scores_jit.csv", [&](std::ostream& os) { write_scores_jit_csv(os, report); });
  manifest.output_with(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, report); });
}

// ---- commands ---------------------------------------------------------------

inline void cmd_ingest(const InputOptions& opt, const std::string& out_dir, std::ostream& out) {
  RunManifest manifest("ingest");
  json info;
  const DemandCube cube = load_cube(opt, manifest, &info);
  const fs::path dir(out_dir);
  manifest.output_with(dir / "cube.csv", [&](std::ostream& os) { write_orders_csv(os, cube); });
  manifest.output(dir / "ingest_summary.json", info.dump(2) + "\n");
  manifest.save(dir / "manifest.json");
  out << "ingested " << cube.item_count() << " items x " << cube.periods() << " periods x " << cube.horizon()
      << " delivery dates (" << info["monotonicity_violations"].get<std::size_t>() << " monotonicity violations)\n";
}

inline void cmd_summarize(const InputOptions& opt, const std::string& out_dir, std::ostream& out) {
  RunManifest manifest("summarize");
  const DemandCube cube = load_cube(opt, manifest);
  const CubeSummary s = summarize(cube);
  const fs::path dir(out_dir);
  manifest.output_with(dir / "zeros_per_item.csv", [&](std::ostream& os) { write_zeros_per_item(os, s); });
  manifest.output_with(dir / "quantity_by_delivery.csv", [&](std::ostream& os) { write_quantity_by_delivery(os, s); });
  manifest.save(dir / "manifest.json");
  double mean_zero = 0.0;
  for (auto z : s.zero_period_count) mean_zero += static_cast<double>(z);
  out << s.item_count << " items, " << s.period_count << " periods, mean zero periods per item "
      << fmt(s.item_count ? mean_zero / static_cast<double>(s.item_count) : 0.0, 2) << '\n';
}

inline void cmd_corr(const InputOptions& opt, int lags, bool differenced, const std::string& out_dir,
                     std::size_t threads, std::ostream& out) {
  RunManifest manifest("corr");
  const DemandCube cube = load_cube(opt, manifest);
  const FrontierLayout layout = FrontierLayout::make(cube.horizon(), lags);
  const fs::path dir(out_dir);
  const int kx = layout.x_index(1, 1), ky = layout.y_index(1, 0);
  auto run = [&](const DemandCube& c, const std::string& name) {
    const CorrTable t = correlation_table(pool_frontiers(frontiers_for_all(c, layout), layout), threads);
    manifest.output_with(dir / name, [&](std::ostream& os) { write_corr_csv(os, t); });
    if (kx >= 0 && ky >= 0) {
      const auto v = t.at(static_cast<std::size_t>(kx), layout.x.size() + static_cast<std::size_t>(ky));
      out << name << ": spearman(q[t+1][1], q[t+1][0]) = " << (v ? fmt(*v) : "NA") << '\n';
    }
    if (auto u = t.undefined_columns(); !u.empty())
      out << name << ": " << u.size() << " constant column(s) reported as NA\n";
  };
  run(cube, "corr_gross.csv");
  if (differenced) run(difference(cube), "corr_differenced.csv");
  manifest.set("lags", lags);
  manifest.save(dir / "manifest.json");
}

inline void cmd_transform(const InputOptions& opt, int lags, bool diff, const std::string& out_dir, std::ostream& out) {
  RunManifest manifest("transform");
  DemandCube cube = load_cube(opt, manifest);
  if (diff) cube = difference(cube);
  const FrontierLayout layout = FrontierLayout::make(cube.horizon(), lags);
  const Dataset d = pool_frontiers(frontiers_for_all(cube, layout), layout);
  const fs::path dir(out_dir);
  manifest.output_with(dir / "dataset.csv", [&](std::ostream& os) { write_dataset_csv(os, d); });
  json lj = layout_json(d);
  lj["differenced"] = diff;
  manifest.output(dir / "layout.json", lj.dump(2) + "\n");
  manifest.set("lags", lags);
  manifest.set("difference", diff);
  manifest.save(dir / "manifest.json");
  out << d.size() << " frontiers, " << d.X.cols() << " features, " << d.Y.cols() << " targets\n";
}

inline void cmd_synth(const SynthConfig& cfg, const std::string& out_path, std::ostream& out) {
  RunManifest manifest("synth");
  const DemandCube cube = generate(cfg);
  manifest.output_with(out_path, [&](std::ostream& os) { write_orders_csv(os, cube); });
  manifest.set("seed", cfg.seed);
  manifest.set("config", {{"items", cfg.n_items},
                          {"periods", cfg.periods},
                          {"horizon", cfg.horizon},
                          {"rho", cfg.rho},
                          {"sparsity", cfg.sparsity}});
  manifest.save(out_path + ".manifest.json");
  out << "wrote " << cfg.n_items << " items x " << cfg.periods << " periods to " << out_path << '\n';
}

inline void cmd_train(const std::string& config_path, const std::string& input_override, const std::string& out_override,
                      int threads_override, std::ostream& out) {
  RunManifest manifest("train");
  const std::string config_text = read_file(config_path);
  manifest.input(config_path, config_text);
  std::istringstream cs(config_text);
  TrainConfig cfg = parse_train_config(cs);
  if (!input_override.empty()) cfg.input = input_override;
  if (!out_override.empty()) cfg.out = out_override;
  if (threads_override > 0) cfg.threads = threads_override;
  if (cfg.input.empty()) throw Error("train: no input given (set `input` in the config or pass --input)");
  if (cfg.threads < 1) throw Error("threads must be >= 1");
  cfg.experiment.grid = expand_grid(cfg);

  const InputOptions opt{cfg.input, cfg.semantics, cfg.horizon, cfg.min_nonzero_frac};
  json info;
  const DemandCube cube = load_cube(opt, manifest, &info);
  ExperimentResult res = run_experiment(cfg.experiment, cube, static_cast<std::size_t>(cfg.threads));

  auto& md = res.report.metadata;
  md["config_hash"] = hex64(fnv1a(cfg.canonical()));
  md["input_hash"] = hex64(fnv1a(read_file(cfg.input)));
  md["input_semantics"] = to_string(cfg.semantics);
  md["min_nonzero_frac"] = cfg.min_nonzero_frac;
  md["items_read"] = info["items_read"];
  md["tool_version"] = BTOF_VERSION;

  const fs::path dir(cfg.out);
  write_report_files(manifest, dir, res.report);
  manifest.output_with(dir / "forecasts.csv", [&](std::ostream& os) { write_forecasts_csv(os, res.forecasts); });
  for (auto& b : res.bundles) {
    b.semantics = to_string(cfg.semantics);
    b.min_nonzero_frac = cfg.min_nonzero_frac;
    manifest.output(dir / "models" / (b.method + ".json"), b.to_json().dump() + "\n");
  }
  manifest.output(dir / "config.effective", cfg.defaults_text());
  manifest.set("config", config_path);
  manifest.set("seed", cfg.experiment.seed);
  manifest.save(dir / "manifest.json");
  print_method_table(out, res.report);
}

inline void cmd_evaluate(const std::string& model_path, const std::string& input, bool holdout,
                         const std::string& out_dir, std::ostream& out) {
  RunManifest manifest("evaluate");
  const std::string text = read_file(model_path);
  manifest.input(model_path, text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("model file '" + model_path + "' is not valid JSON");
  }
  const ModelBundle bundle = ModelBundle::from_json(j);
  const InputOptions opt{input, parse_semantics(bundle.semantics), bundle.horizon, bundle.min_nonzero_frac};
  const DemandCube cube = load_cube(opt, manifest);
  PreparedData prep = prepare_data(bundle.config(), cube);
  if (!holdout) prep.split.holdout = prep.split.dev;  // in-sample fit check
  EvalReport report;
  report.slots = prep.layout.y.size();
  std::vector<ForecastRow> forecasts;
  report.methods.push_back(evaluate_bundle(bundle, prep, bundle.entries.front().pipeline.transform.kind, &forecasts));
  report.metadata = {{"model", model_path},
                     {"model_hash", hex64(fnv1a(text))},
                     {"input_hash", hex64(fnv1a(read_file(input)))},
                     {"split", holdout ? "holdout" : "dev"}};
  const fs::path dir(out_dir);
  write_report_files(manifest, dir, report);
  manifest.output_with(dir / "forecasts.csv", [&](std::ostream& os) { write_forecasts_csv(os, forecasts); });
  manifest.save(dir / "manifest.json");
  print_method_table(out, report);
}

inline void cmd_report(const std::string& scores_path, const std::string& out_dir, std::ostream& out) {
  RunManifest manifest("report");
  const std::string text = read_file(scores_path);
  manifest.input(scores_path, text);
  std::istringstream in(text);
  EvalReport report = read_scores_jit_csv(in);
  report.metadata = {{"scores", scores_path}, {"scores_hash", hex64(fnv1a(text))}};
  const fs::path dir(out_dir);
  manifest.output(dir / "report.json", report_json(report).dump(2) + "\n");
  manifest.output_with(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, report); });
  manifest.save(dir / "manifest.json");
  print_method_table(out, report);
  for (const auto& row : reference_comparison(report)) {
    out << "reference " << row["name"].get<std::string>() << ": published " << fmt(row["published"].get<double>(), 2)
        << ", observed " << (row["observed"].is_null() ? "NA" : fmt(row["observed"].get<double>()))
        << ", deviation " << (row["deviation"].is_null() ? "NA" : fmt(row["deviation"].get<double>())) << '\n';
  }
}

// ---- dispatch ---------------------------------------------------------------

// Returns the process exit code. Errors go to `err` as one "error: ..." line.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"btof: diagonal-feeding forecasting for build-to-order order books", "btof"};
  app.set_version_flag("--version", std::string(BTOF_VERSION));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (results do not depend on it)")->check(CLI::NonNegativeNumber);

  InputOptions ingest_opt, sum_opt, corr_opt, tr_opt;
  std::string ingest_out = "btof-ingest", sum_out = "btof-summary", corr_out = "btof-corr", tr_out = "btof-transform";
  auto* ingest = app.add_subcommand("ingest", "parse and validate an order book; write the dense cube");
  add_input_options(ingest, ingest_opt);
  ingest->add_option("--out", ingest_out, "output directory");

  auto* summ = app.add_subcommand("summarize", "zero-period counts per item and totals per delivery date");
  add_input_options(summ, sum_opt);
  summ->add_option("--out", sum_out, "output directory");

  int corr_lags = 1;
  bool corr_diff = false;
  corr_opt.min_nonzero_frac = 0.6;
  auto* corr = app.add_subcommand("corr", "Spearman table over pooled frontier slots");
  add_input_options(corr, corr_opt);
  corr->add_option("--lags", corr_lags, "lagged rows in the frontier")->check(CLI::NonNegativeNumber);
  corr->add_flag("--differenced", corr_diff, "also write the table for net (differenced) volumes");
  corr->add_option("--out", corr_out, "output directory");

  int tr_lags = 1;
  bool tr_diff = false;
  auto* trans = app.add_subcommand("transform", "write the pooled frontier dataset and its layout");
  add_input_options(trans, tr_opt);
  trans->add_option("--lags", tr_lags, "lagged rows in the frontier")->check(CLI::NonNegativeNumber);
  trans->add_flag("--difference", tr_diff, "difference the cube first");
  trans->add_option("--out", tr_out, "output directory");

  SynthConfig sc;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic gross order book");
  synth->add_option("--items", sc.n_items, "number of items")->check(CLI::PositiveNumber);
  synth->add_option("--periods", sc.periods, "number of periods T");
  synth->add_option("--horizon", sc.horizon, "delivery dates H")->check(CLI::PositiveNumber);
  synth->add_option("--rho", sc.rho, "share of demand booked one period ahead")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--sparsity", sc.sparsity, "probability of a zero-demand period")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--base-volume", sc.base_volume, "mean demand level");
  synth->add_option("--noise", sc.noise, "relative innovation scale");
  synth->add_option("--ar", sc.ar_coef, "AR(1) coefficient");
  synth->add_option("--trend", sc.trend, "relative level change per period");
  synth->add_option("--seed", sc.seed, "random seed");
  synth->add_option("--out", synth_out, "output CSV")->required();

  std::string train_config, train_input, train_out;
  auto* train = app.add_subcommand("train", "model selection and holdout evaluation");
  train->add_option("--config", train_config, "key = value config file")->required();
  train->add_option("--input", train_input, "override the config's input");
  train->add_option("--out", train_out, "override the config's output directory");

  std::string ev_model, ev_input, ev_out = "btof-eval";
  bool ev_holdout = false;
  auto* evaluate = app.add_subcommand("evaluate", "score a saved model bundle");
  evaluate->add_option("--model", ev_model, "models/<method>.json from train")->required();
  evaluate->add_option("--input", ev_input, "order-book CSV")->required();
  evaluate->add_flag("--holdout", ev_holdout, "score the holdout frontiers (default: development frontiers)");
  evaluate->add_option("--out", ev_out, "output directory");

  std::string rep_scores, rep_out = "btof-report";
  auto* report = app.add_subcommand("report", "rebuild aggregates from scores_jit.csv");
  report->add_option("--scores", rep_scores, "scores_jit.csv from train or evaluate")->required();
  report->add_option("--out", rep_out, "output directory");

  bool defaults = false;
  auto* config = app.add_subcommand("config", "print configuration");
  config->add_flag("--defaults", defaults, "print every train setting with its default")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << '\n' << app.help();
    return 2;
  }

  const std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : 1;
  try {
    if (*ingest)
      cmd_ingest(ingest_opt, ingest_out, out);
    else if (*summ)
      cmd_summarize(sum_opt, sum_out, out);
    else if (*corr)
      cmd_corr(corr_opt, corr_lags, corr_diff, corr_out, workers, out);
    else if (*trans)
      cmd_transform(tr_opt, tr_lags, tr_diff, tr_out, out);
    else if (*synth)
      cmd_synth(sc, synth_out, out);
    else if (*train)
      cmd_train(train_config, train_input, train_out, threads, out);
    else if (*evaluate)
      cmd_evaluate(ev_model, ev_input, ev_holdout, ev_out, out);
    else if (*report)
      cmd_report(rep_scores, rep_out, out);
    else if (*config)
      out << TrainConfig{}.defaults_text();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace btof::cli
