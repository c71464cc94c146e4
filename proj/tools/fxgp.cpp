// fxgp: synth, evolve, backtest, report and export subcommands.

#include <fmt/core.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fxgp/analytics.hpp"
#include "fxgp/artifact.hpp"
#include "fxgp/config.hpp"
#include "fxgp/error.hpp"
#include "fxgp/evolution.hpp"
#include "fxgp/numeric_text.hpp"

namespace fs = std::filesystem;
using namespace fxgp;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> workers;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

fs::path make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

RunConfig config_from(const GlobalFlags& flags) {
  if (flags.config.empty()) throw ConfigError("--config is required");
  RunConfig config = load_config(flags.config);
  if (flags.workers) {
    if (*flags.workers < 1) throw ConfigError("--workers must be >= 1");
    config.workers = *flags.workers;
  }
  if (!flags.out.empty()) config.output = flags.out;
  return config;
}

void print_partitions(const LoadedData& d) {
  for (auto name : {PartitionName::Training, PartitionName::Validation, PartitionName::OutOfSample}) {
    const Partition& p = d.split.get(name);
    fmt::print("{:<11} rows={} days={} [{} .. {}]\n", to_string(name), p.size(), p.day_count(),
               format_rfc3339(p.timestamp(0)), format_rfc3339(p.timestamp(p.size() - 1)));
  }
}

int cmd_synth(const GlobalFlags& flags) {
  RunConfig config = config_from(flags);
  if (!config.data.synth) throw ConfigError("synth needs a data.synth section");
  if (flags.seed) config.data.synth->seed = *flags.seed;
  fs::path target = config.data.synth_output.value_or(config.output / "bars.csv");
  if (!flags.out.empty()) target = fs::path(flags.out) / "bars.csv";
  if (target.has_parent_path()) make_dir(target.parent_path());

  const LoadedData d = load_data(config.data);
  auto out = open_out(target);
  write_bars(out, *d.data);
  fmt::print("wrote {} ({} timestamps x {} instruments)\n", target.string(), d.data->rows(),
             d.data->instrument_count());
  print_partitions(d);
  return 0;
}

int cmd_evolve(const GlobalFlags& flags) {
  RunConfig config = config_from(flags);
  if (flags.seed) config.seed = *flags.seed;
  resolve_seed(config);
  const LoadedData d = load_data(config.data);
  print_partitions(d);
  fmt::print("seed={} population={} generations={} workers={}\n", *config.seed,
             config.gp.population_size, config.gp.generations, config.workers);

  EvolveOptions options;
  options.workers = config.workers;
  options.on_generation = [](const GenerationStats& g) {
    fmt::print(stderr, "gen {:>3} best={:.6f} mean={:.6f} median={:.6f} penalized={}\n",
               g.generation, g.best, g.mean, g.median, g.penalized);
  };
  const RunArtifact run = evolve(config.gp, d.split, d.traded, config.sim, options);
  const VariableUniverse universe(d.data->instruments());
  write_run(config.output, run, universe, snapshot_text(config));

  for (const Selection* s : {&run.selection_tr, &run.selection_trva}) {
    std::size_t profitable = 0;
    for (const auto& r : s->ranked) profitable += r.f_t.profitable() ? 1 : 0;
    fmt::print("{}: {} selected, {} with f_t < 1", to_string(s->criterion), s->ranked.size(),
               profitable);
    if (s->empty_reason) fmt::print(" ({})", *s->empty_reason);
    fmt::print("\n");
  }
  if (run.selection_tr.ranked.empty() || !run.selection_tr.ranked.front().f_t.profitable()) {
    fmt::print("no profitable strategy was found\n");
  }
  fmt::print("artifact written to {}\n", config.output.string());
  return 0;
}

void write_series_files(const fs::path& dir, const std::string& stem, const StrategyReport& r) {
  {
    auto out = open_out(dir / ("nav_" + stem + ".csv"));
    write_day_series(out, r.days, r.relative_nav);
  }
  auto out = open_out(dir / ("ma_" + stem + ".csv"));
  write_day_series(out, r.days, moving_average(r.daily_returns, 30).value);
}

void print_report_line(const StrategyReport& r) {
  fmt::print("{:<18} ret={:.4f} days>0={:.2f}% rho={} p={:.3g} mdd={:.2f}% trades={:.0f} "
             "win={:.2f}% long={:.2f}%\n",
             r.label, r.return_ratio, 100.0 * r.days_gt0,
             r.rho ? fmt::format("{:.2f}", *r.rho) : std::string("undefined"), r.binomial_p,
             100.0 * r.max_drawdown, r.trades, 100.0 * r.winning_ratio, 100.0 * r.long_ratio);
}

int cmd_backtest(const GlobalFlags& flags, const std::string& strategy_file,
                 const std::string& partition_name) {
  RunConfig config = config_from(flags);
  const PartitionName which = parse_partition_name(partition_name);
  const LoadedData d = load_data(config.data);
  const VariableUniverse universe(d.data->instruments());
  const auto entries = read_strategies(fs::path(strategy_file), universe, config.gp.limits());
  if (entries.empty()) throw DataError(strategy_file + ": no strategies");

  const Partition& part = d.split.get(which);
  const DailySeries bench_series = instrument_daily_series(part, d.traded);
  const StrategyReport bench = buy_and_hold_benchmark(part, d.traded);
  const fs::path dir = make_dir(flags.out.empty() ? fs::path("backtest") : fs::path(flags.out));

  std::vector<StrategyReport> reports{bench};
  print_report_line(bench);
  write_series_files(dir, "benchmark", bench);
  std::size_t checked = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    const SimulationResult result = run_simulation(e.tree, part, d.traded, config.sim);
    const FitnessScore f = compute_fitness(result, config.gp.min_trades);
    const std::optional<double> recorded =
        which == PartitionName::Training ? e.f_t
        : which == PartitionName::Validation ? e.f_v
                                             : std::nullopt;
    if (recorded) {
      if (f.value != *recorded) {
        throw InvariantError(fmt::format("strategy at line {}: recomputed fitness {} differs from "
                                         "recorded {}", e.line, format_double(f.value),
                                         format_double(*recorded)));
      }
      ++checked;
    }
    StrategyReport r = make_report("strategy " + std::to_string(k + 1), result, bench_series);
    print_report_line(r);
    const std::string stem = "strategy_" + std::to_string(k + 1);
    write_series_files(dir, stem, r);
    auto orders = open_out(dir / ("orders_" + stem + ".csv"));
    write_orders_csv(orders, result.orders);
    reports.push_back(std::move(r));
  }
  {
    auto out = open_out(dir / "report.csv");
    write_report_rows(out, reports);
  }
  nlohmann::ordered_json j;
  j["partition"] = std::string(to_string(which));
  j["benchmark"] = to_json(bench);
  j["strategies"] = nlohmann::ordered_json::array();
  for (std::size_t k = 1; k < reports.size(); ++k) j["strategies"].push_back(to_json(reports[k]));
  open_out(dir / "report.json") << j.dump(2) << '\n';
  if (checked) fmt::print("{} recorded fitness value(s) reproduced exactly\n", checked);
  fmt::print("reports written to {}\n", dir.string());
  return 0;
}

nlohmann::ordered_json structure_json(const StructureStats& s, const VariableUniverse& universe) {
  nlohmann::ordered_json j;
  j["trees"] = s.trees;
  j["mean_length"] = s.mean_length;
  j["sd_length"] = s.sd_length;
  j["mean_variables"] = s.mean_variables;
  j["sd_variables"] = s.sd_variables;
  nlohmann::ordered_json inst, fields;
  for (std::size_t i = 0; i < universe.instrument_count(); ++i) {
    inst[universe.instruments()[i].str()] = s.instrument_frequency[i];
  }
  const char* names[] = {"O", "H", "L", "C"};
  for (std::size_t f = 0; f < 4; ++f) fields[names[f]] = s.field_frequency[f];
  j["instrument_frequency"] = inst;
  j["field_frequency"] = fields;
  return j;
}

void report_criterion(const std::vector<fs::path>& runs, Criterion criterion,
                      const RunConfig& config, const LoadedData& d, PartitionName which,
                      const fs::path& dir) {
  const VariableUniverse universe(d.data->instruments());
  const Partition& part = d.split.get(which);
  const DailySeries bench_series = instrument_daily_series(part, d.traded);
  const StrategyReport bench = buy_and_hold_benchmark(part, d.traded);

  std::vector<RunReports> run_reports;
  std::vector<double> winner_key;
  std::vector<ExprTree> all_trees;
  nlohmann::ordered_json structure;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto selected = load_selected(runs[r], criterion, universe, config.gp.limits());
    RunReports rr;
    rr.name = "Run " + std::to_string(r + 1);
    std::vector<ExprTree> trees;
    for (std::size_t k = 0; k < selected.size(); ++k) {
      const auto result = run_simulation(selected[k].tree, part, d.traded, config.sim,
                                         SimOptions{false, false});
      rr.members.push_back(make_report(rr.name + " #" + std::to_string(k + 1), result, bench_series));
      trees.push_back(selected[k].tree);
    }
    if (selected.empty()) {
      throw DataError(fmt::format("{} has no {} selection; Winners needs one strategy per run",
                                  runs[r].string(), to_string(criterion)));
    }
    const auto& top = selected.front();
    winner_key.push_back(criterion == Criterion::Tr
                             ? *top.f_t
                             : combined_score(*top.f_t, top.f_v.value_or(kPenaltyFitness))
                                   .value_or(kPenaltyFitness));
    structure[rr.name] = structure_json(structure_stats(trees, universe), universe);
    all_trees.insert(all_trees.end(), trees.begin(), trees.end());
    run_reports.push_back(std::move(rr));
  }
  structure["All"] = structure_json(structure_stats(all_trees, universe), universe);

  const GroupedReports g = group_reports(run_reports, winner_key, bench_series);
  const ActivitySummary activity = summarize_activity(g, run_reports, bench);

  const std::string crit(to_string(criterion));
  std::vector<StrategyReport> rows{bench};
  rows.insert(rows.end(), g.per_run.begin(), g.per_run.end());
  rows.push_back(g.best_individual);
  rows.push_back(g.winners);
  rows.push_back(g.best_run);
  rows.push_back(g.global_average);
  {
    auto out = open_out(dir / ("report_" + crit + ".csv"));
    write_report_rows(out, rows);
  }
  {
    std::vector<StrategyReport> members;
    for (const auto& rr : run_reports) members.insert(members.end(), rr.members.begin(), rr.members.end());
    auto out = open_out(dir / ("members_" + crit + ".csv"));
    write_report_rows(out, members);
  }
  write_series_files(dir, "benchmark", bench);
  write_series_files(dir, crit + "_best_individual", g.best_individual);
  write_series_files(dir, crit + "_winners", g.winners);
  write_series_files(dir, crit + "_best_run", g.best_run);
  write_series_files(dir, crit + "_avg_run", g.global_average);

  nlohmann::ordered_json j;
  j["criterion"] = crit;
  j["partition"] = std::string(to_string(which));
  j["runs"] = runs.size();
  j["benchmark"] = to_json(bench);
  j["best_individual"] = to_json(g.best_individual);
  j["winners"] = to_json(g.winners);
  j["best_run"] = to_json(g.best_run);
  j["best_run_index"] = g.best_run_index + 1;
  j["avg_run"] = to_json(g.global_average);
  j["per_run"] = nlohmann::ordered_json::array();
  for (const auto& r : g.per_run) j["per_run"].push_back(to_json(r, false));
  j["activity"] = to_json(activity);
  j["structure"] = structure;
  open_out(dir / ("report_" + crit + ".json")) << j.dump(2) << '\n';

  fmt::print("[{}] {} partition, {} run(s)\n", crit, to_string(which), runs.size());
  for (const auto& r : rows) print_report_line(r);
}

int cmd_report(const GlobalFlags& flags, const std::vector<std::string>& run_dirs,
               const std::string& criterion_text, const std::string& partition_name) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  std::vector<fs::path> runs(run_dirs.begin(), run_dirs.end());
  const RunConfig config = load_config(runs.front() / kSnapshotFile);
  const auto data_section = snapshot(config)["data"];
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (snapshot(load_config(runs[r] / kSnapshotFile))["data"] != data_section) {
      throw ConfigError(runs[r].string() + " was evolved on a different dataset than " +
                        runs.front().string());
    }
  }
  const PartitionName which = parse_partition_name(partition_name);
  const LoadedData d = load_data(config.data);
  const fs::path dir = make_dir(flags.out.empty() ? fs::path("report") : fs::path(flags.out));
  std::vector<Criterion> criteria;
  if (criterion_text == "both") {
    criteria = {Criterion::Tr, Criterion::TrVa};
  } else {
    criteria = {parse_criterion(criterion_text)};
  }
  for (Criterion c : criteria) report_criterion(runs, c, config, d, which, dir);
  fmt::print("reports written to {}\n", dir.string());
  return 0;
}

int cmd_export(const GlobalFlags& flags, const std::string& run_dir, const std::string& criterion_text) {
  const fs::path run(run_dir);
  const RunConfig config = load_config(run / kSnapshotFile);
  const Criterion criterion = parse_criterion(criterion_text);
  const VariableUniverse universe(config.data.instruments);
  const auto selected = load_selected(run, criterion, universe, config.gp.limits());
  if (flags.out.empty()) {
    write_strategies(std::cout, selected, universe);
    return 0;
  }
  const fs::path target = make_dir(flags.out) / (std::string(to_string(criterion)) + ".strategies");
  auto out = open_out(target);
  write_strategies(out, selected, universe);
  fmt::print("{} strategies written to {}\n", selected.size(), target.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Genetic-programming FX strategy evolution and backtesting"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags flags;
  std::uint64_t seed_value = 0;
  unsigned workers_value = 1;
  app.add_option("--config", flags.config, "Run configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed_value, "GP seed (synth: data seed)");
  app.add_option("--out", flags.out, "Output directory");
  auto* workers_opt = app.add_option("--workers", workers_value, "Evaluation threads");

  auto* synth = app.add_subcommand("synth", "Write synthetic bars described by data.synth");
  auto* evolve_cmd = app.add_subcommand("evolve", "Run one evolution and write its artifact");

  auto* backtest = app.add_subcommand("backtest", "Simulate strategies on one partition");
  std::string strategy_file;
  std::string partition = "oos";
  backtest->add_option("strategies", strategy_file, "Strategy file")->required();
  backtest->add_option("--partition", partition, "training, validation or oos");

  auto* report = app.add_subcommand("report", "Aggregate reports across run directories");
  std::vector<std::string> run_dirs;
  std::string criterion = "both";
  std::string report_partition = "oos";
  report->add_option("runs", run_dirs, "Run directories")->required();
  report->add_option("--criterion", criterion, "tr, trva or both");
  report->add_option("--partition", report_partition, "training, validation or oos");

  auto* export_cmd = app.add_subcommand("export", "Extract selected strategies from a run");
  std::string export_run;
  std::string export_criterion = "tr";
  export_cmd->add_option("run", export_run, "Run directory")->required();
  export_cmd->add_option("--criterion", export_criterion, "tr or trva");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) flags.seed = seed_value;
  if (*workers_opt) flags.workers = workers_value;

  try {
    if (*synth) return cmd_synth(flags);
    if (*evolve_cmd) return cmd_evolve(flags);
    if (*backtest) return cmd_backtest(flags, strategy_file, partition);
    if (*report) return cmd_report(flags, run_dirs, criterion, report_partition);
    if (*export_cmd) return cmd_export(flags, export_run, export_criterion);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
