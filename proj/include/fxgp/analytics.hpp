#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fxgp/market_data.hpp"
#include "fxgp/simulator.hpp"
#include "json.hpp"

namespace fxgp {

/// End-of-day values of one curve. The first daily return is taken against
/// the opening value, so n days give n returns.
struct DailySeries {
  double opening = 0.0;
  std::vector<TradingDay> days;
  std::vector<double> eod;
  std::vector<double> daily_returns;

  std::size_t size() const noexcept { return days.size(); }
  double final_ratio() const { return eod.empty() ? 1.0 : eod.back() / opening; }
};

DailySeries daily_series(std::span<const TradingDay> days, std::span<const double> eod,
                         double opening);

/// EoD NAV of a simulation, opening at its initial NAV.
DailySeries daily_series(const SimulationResult& result);

/// Close-price EoD series of one instrument, opening at the first close.
DailySeries instrument_daily_series(const Partition& partition, std::size_t instrument);

/// Current / opening x 100 per day.
std::vector<double> relative_curve(const DailySeries& series);

/// Sample Pearson correlation; nullopt when either side has zero variance.
/// Throws DataError on length mismatch or fewer than two points.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

/// P(X >= k) for X ~ Bin(n, 1/2), summed in log space.
double binom_p(std::size_t n, std::size_t k);

/// Largest (peak - value) / peak seen so far; 0 for a monotone series.
double max_drawdown(std::span<const double> series);

struct MovingAverage {
  std::vector<double> value;
  std::vector<bool> partial;  // fewer than `window` points available
};

/// Trailing mean over the last `window` points. Throws ConfigError if window is 0.
MovingAverage moving_average(std::span<const double> series, std::size_t window = 30);

struct StrategyReport {
  std::string label;
  std::size_t members = 1;
  std::vector<TradingDay> days;
  std::vector<double> relative_nav;  // opening = 100
  std::vector<double> daily_returns;
  double return_ratio = 1.0;         // final / initial
  double return_pct = 0.0;
  std::size_t positive_days = 0;
  double days_gt0 = 0.0;
  std::optional<double> rho;         // vs the traded instrument's daily returns
  double binomial_p = 1.0;
  double max_drawdown = 0.0;
  double trades = 0.0;
  double winning_ratio = 0.0;
  double long_ratio = 0.0;
  double trades_sd = 0.0;
  double winning_ratio_sd = 0.0;
  double long_ratio_sd = 0.0;
};

/// Report of one simulation; `benchmark` supplies the returns for rho.
StrategyReport make_report(std::string label, const SimulationResult& result,
                           const DailySeries& benchmark);

/// Buy-and-hold report for the traded instrument (no trades; rho with itself).
StrategyReport buy_and_hold_benchmark(const Partition& partition, std::size_t instrument);

/// Pointwise average of the members' relative NAV curves. Curve statistics
/// are recomputed from the average; trade statistics are member means with
/// sample sd. Throws DataError on an empty group or mismatched days.
StrategyReport aggregate(std::span<const StrategyReport> members, const DailySeries& benchmark,
                         std::string label);

/// Members of one run in selection-rank order.
struct RunReports {
  std::string name;
  std::vector<StrategyReport> members;
};

struct GroupedReports {
  StrategyReport best_individual;  // best-ranked winner across runs
  StrategyReport winners;          // average of each run's rank-1 member
  StrategyReport best_run;         // per-run average with the highest return
  std::size_t best_run_index = 0;
  StrategyReport global_average;   // average of every member
  std::vector<StrategyReport> per_run;
};

/// `winner_key[r]` ranks run r's rank-1 member for the best-individual
/// choice (lower wins, ties to the earlier run).
/// Throws DataError if no runs are given or any run is empty.
GroupedReports group_reports(std::span<const RunReports> runs,
                             std::span<const double> winner_key, const DailySeries& benchmark);

/// Trading-activity summary over all members of all runs.
struct ActivitySummary {
  std::size_t profitable_runs = 0;
  std::size_t profitable_members = 0;
  std::size_t runs_beating_benchmark = 0;
  std::size_t members_beating_benchmark = 0;
  double mean_daily_return = 0.0;
  double mean_daily_return_sd = 0.0;
  double trades = 0.0;
  double trades_sd = 0.0;
  double winning_ratio = 0.0;
  double winning_ratio_sd = 0.0;
  double long_ratio = 0.0;
  double long_ratio_sd = 0.0;
  double max_winning_ratio = 0.0;
  double max_long_ratio = 0.0;
};

ActivitySummary summarize_activity(const GroupedReports& groups, std::span<const RunReports> runs,
                                   const StrategyReport& benchmark);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_sd(std::span<const double> values);

nlohmann::ordered_json to_json(const StrategyReport& report, bool with_curves = true);
nlohmann::ordered_json to_json(const ActivitySummary& summary);

/// One row per report with the scalar columns.
void write_report_rows(std::ostream& out, std::span<const StrategyReport> reports);

/// Two-column plot-ready series: day,value.
void write_day_series(std::ostream& out, std::span<const TradingDay> days,
                      std::span<const double> values);

}  // namespace fxgp
