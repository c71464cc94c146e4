#include "fxgp/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "fxgp/error.hpp"
#include "fxgp/numeric_text.hpp"

namespace fxgp {

DailySeries daily_series(std::span<const TradingDay> days, std::span<const double> eod,
                         double opening) {
  if (days.size() != eod.size()) throw DataError("day labels and EoD values differ in length");
  DailySeries s;
  s.opening = opening;
  s.days.assign(days.begin(), days.end());
  s.eod.assign(eod.begin(), eod.end());
  s.daily_returns.reserve(eod.size());
  double prev = opening;
  for (double v : eod) {
    s.daily_returns.push_back(v / prev - 1.0);
    prev = v;
  }
  return s;
}

DailySeries daily_series(const SimulationResult& result) {
  std::vector<TradingDay> days;
  std::vector<double> eod;
  days.reserve(result.eod_nav.size());
  eod.reserve(result.eod_nav.size());
  for (const auto& d : result.eod_nav) {
    days.push_back(d.day);
    eod.push_back(d.nav);
  }
  return daily_series(days, eod, result.initial_nav);
}

DailySeries instrument_daily_series(const Partition& partition, std::size_t instrument) {
  if (!partition.data || partition.empty()) throw DataError("empty partition");
  if (instrument >= partition.data->instrument_count()) {
    throw DataError("instrument is not in the dataset basket");
  }
  std::vector<TradingDay> days;
  std::vector<double> eod;
  const std::size_t n = partition.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 == n || partition.day(i + 1) != partition.day(i)) {
      days.push_back(partition.day(i));
      eod.push_back(partition.close(i, instrument));
    }
  }
  return daily_series(days, eod, partition.close(0, instrument));
}

std::vector<double> relative_curve(const DailySeries& series) {
  std::vector<double> out;
  out.reserve(series.eod.size());
  for (double v : series.eod) out.push_back(v / series.opening * 100.0);
  return out;
}

std::pair<double, double> mean_sd(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("pearson: length mismatch");
  if (xs.size() < 2) throw DataError("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double binom_p(std::size_t n, std::size_t k) {
  if (k > n) throw DataError("binom_p: k exceeds n");
  if (k == 0) return 1.0;
  const double nd = static_cast<double>(n);
  const double log_half_n = nd * std::log(0.5);
  const double lg_n = std::lgamma(nd + 1.0);
  const auto log_pmf = [&](std::size_t j) {
    const double jd = static_cast<double>(j);
    return lg_n - std::lgamma(jd + 1.0) - std::lgamma(nd - jd + 1.0) + log_half_n;
  };
  // The pmf of Bin(n, 1/2) peaks at n/2, so the largest tail term is at
  // max(k, n/2).
  const std::size_t peak = std::max(k, n / 2);
  const double top = log_pmf(peak);
  double sum = 0.0;
  for (std::size_t j = k; j <= n; ++j) sum += std::exp(log_pmf(j) - top);
  return std::min(1.0, std::exp(top + std::log(sum)));
}

double max_drawdown(std::span<const double> series) {
  double peak = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double v : series) {
    peak = std::max(peak, v);
    if (peak > 0.0) worst = std::max(worst, (peak - v) / peak);
  }
  return worst;
}

MovingAverage moving_average(std::span<const double> series, std::size_t window) {
  if (window == 0) throw ConfigError("moving average window must be >= 1");
  MovingAverage out;
  out.value.reserve(series.size());
  out.partial.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t from = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = from; j <= i; ++j) sum += series[j];
    out.value.push_back(sum / static_cast<double>(i + 1 - from));
    out.partial.push_back(i + 1 < window);
  }
  return out;
}

namespace {

/// Fills every curve-derived field from days and relative_nav.
void derive_curve_stats(StrategyReport& r, const DailySeries& benchmark) {
  const std::size_t n = r.relative_nav.size();
  r.daily_returns.clear();
  r.daily_returns.reserve(n);
  double prev = 100.0;
  for (double v : r.relative_nav) {
    r.daily_returns.push_back(v / prev - 1.0);
    prev = v;
  }
  r.return_ratio = n ? r.relative_nav.back() / 100.0 : 1.0;
  r.return_pct = (r.return_ratio - 1.0) * 100.0;
  r.positive_days = static_cast<std::size_t>(
      std::count_if(r.daily_returns.begin(), r.daily_returns.end(), [](double x) { return x > 0.0; }));
  r.days_gt0 = n ? static_cast<double>(r.positive_days) / static_cast<double>(n) : 0.0;
  r.binomial_p = binom_p(n, r.positive_days);

  std::vector<double> curve;
  curve.reserve(n + 1);
  curve.push_back(100.0);
  curve.insert(curve.end(), r.relative_nav.begin(), r.relative_nav.end());
  r.max_drawdown = max_drawdown(curve);

  const std::size_t common = std::min(n, benchmark.daily_returns.size());
  r.rho = common >= 2 ? pearson(std::span(r.daily_returns).first(common),
                                std::span(benchmark.daily_returns).first(common))
                      : std::nullopt;
}

}  // namespace

StrategyReport make_report(std::string label, const SimulationResult& result,
                           const DailySeries& benchmark) {
  StrategyReport r;
  r.label = std::move(label);
  const DailySeries series = daily_series(result);
  r.days = series.days;
  r.relative_nav = relative_curve(series);
  derive_curve_stats(r, benchmark);
  r.trades = static_cast<double>(result.trade_count);
  r.winning_ratio = result.winning_ratio();
  r.long_ratio = result.long_ratio();
  return r;
}

StrategyReport buy_and_hold_benchmark(const Partition& partition, std::size_t instrument) {
  const DailySeries series = instrument_daily_series(partition, instrument);
  StrategyReport r;
  r.label = partition.data->instruments()[instrument].str();
  r.days = series.days;
  r.relative_nav = relative_curve(series);
  derive_curve_stats(r, series);
  return r;
}

StrategyReport aggregate(std::span<const StrategyReport> members, const DailySeries& benchmark,
                         std::string label) {
  if (members.empty()) throw DataError("cannot aggregate an empty group");
  const auto& first = members.front();
  for (const auto& m : members) {
    if (m.days != first.days) {
      throw DataError("cannot aggregate '" + m.label + "': its trading days differ from '" +
                      first.label + "'");
    }
  }
  StrategyReport r;
  r.label = std::move(label);
  r.members = members.size();
  r.days = first.days;
  r.relative_nav.assign(first.days.size(), 0.0);
  for (std::size_t i = 0; i < r.relative_nav.size(); ++i) {
    double sum = 0.0;
    for (const auto& m : members) sum += m.relative_nav[i];
    r.relative_nav[i] = sum / static_cast<double>(members.size());
  }
  derive_curve_stats(r, benchmark);

  std::vector<double> trades, winning, longs;
  for (const auto& m : members) {
    trades.push_back(m.trades);
    winning.push_back(m.winning_ratio);
    longs.push_back(m.long_ratio);
  }
  std::tie(r.trades, r.trades_sd) = mean_sd(trades);
  std::tie(r.winning_ratio, r.winning_ratio_sd) = mean_sd(winning);
  std::tie(r.long_ratio, r.long_ratio_sd) = mean_sd(longs);
  return r;
}

GroupedReports group_reports(std::span<const RunReports> runs, std::span<const double> winner_key,
                             const DailySeries& benchmark) {
  if (runs.empty()) throw DataError("report needs at least one run");
  if (winner_key.size() != runs.size()) throw InvariantError("one winner key per run expected");
  for (const auto& run : runs) {
    if (run.members.empty()) {
      throw DataError("run '" + run.name + "' has no selected strategies; Winners needs one per run");
    }
  }
  GroupedReports g;
  std::vector<StrategyReport> winners, everyone;
  std::size_t best_winner = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    winners.push_back(runs[r].members.front());
    everyone.insert(everyone.end(), runs[r].members.begin(), runs[r].members.end());
    g.per_run.push_back(aggregate(runs[r].members, benchmark, runs[r].name));
    if (winner_key[r] < winner_key[best_winner]) best_winner = r;
  }
  g.best_individual = runs[best_winner].members.front();
  g.best_individual.label = "Best Individual";
  g.winners = aggregate(winners, benchmark, "Winners");
  g.global_average = aggregate(everyone, benchmark, "Avg Run");
  for (std::size_t r = 1; r < g.per_run.size(); ++r) {
    if (g.per_run[r].return_ratio > g.per_run[g.best_run_index].return_ratio) g.best_run_index = r;
  }
  g.best_run = g.per_run[g.best_run_index];
  g.best_run.label = "Best Run";
  return g;
}

ActivitySummary summarize_activity(const GroupedReports& groups, std::span<const RunReports> runs,
                                   const StrategyReport& benchmark) {
  ActivitySummary s;
  for (const auto& run : groups.per_run) {
    if (run.return_ratio > 1.0) ++s.profitable_runs;
    if (run.return_ratio > benchmark.return_ratio) ++s.runs_beating_benchmark;
  }
  std::vector<double> daily, trades, winning, longs;
  for (const auto& run : runs) {
    for (const auto& m : run.members) {
      if (m.return_ratio > 1.0) ++s.profitable_members;
      if (m.return_ratio > benchmark.return_ratio) ++s.members_beating_benchmark;
      daily.push_back(mean_sd(m.daily_returns).first);
      trades.push_back(m.trades);
      winning.push_back(m.winning_ratio);
      longs.push_back(m.long_ratio);
      s.max_winning_ratio = std::max(s.max_winning_ratio, m.winning_ratio);
      s.max_long_ratio = std::max(s.max_long_ratio, m.long_ratio);
    }
  }
  std::tie(s.mean_daily_return, s.mean_daily_return_sd) = mean_sd(daily);
  std::tie(s.trades, s.trades_sd) = mean_sd(trades);
  std::tie(s.winning_ratio, s.winning_ratio_sd) = mean_sd(winning);
  std::tie(s.long_ratio, s.long_ratio_sd) = mean_sd(longs);
  return s;
}

nlohmann::ordered_json to_json(const StrategyReport& r, bool with_curves) {
  nlohmann::ordered_json j;
  j["label"] = r.label;
  j["members"] = r.members;
  j["days"] = r.days.size();
  j["return_ratio"] = r.return_ratio;
  j["return_pct"] = r.return_pct;
  j["positive_days"] = r.positive_days;
  j["days_gt0"] = r.days_gt0;
  j["rho"] = r.rho ? nlohmann::ordered_json(*r.rho) : nlohmann::ordered_json(nullptr);
  j["binomial_p"] = r.binomial_p;
  j["max_drawdown"] = r.max_drawdown;
  j["trades"] = r.trades;
  j["trades_sd"] = r.trades_sd;
  j["winning_ratio"] = r.winning_ratio;
  j["winning_ratio_sd"] = r.winning_ratio_sd;
  j["long_ratio"] = r.long_ratio;
  j["long_ratio_sd"] = r.long_ratio_sd;
  if (with_curves) {
    std::vector<std::string> labels;
    for (TradingDay d : r.days) labels.push_back(format_day(d));
    j["day_labels"] = labels;
    j["relative_nav"] = r.relative_nav;
    j["daily_returns"] = r.daily_returns;
  }
  return j;
}

nlohmann::ordered_json to_json(const ActivitySummary& s) {
  nlohmann::ordered_json j;
  j["profitable_runs"] = s.profitable_runs;
  j["profitable_members"] = s.profitable_members;
  j["runs_beating_benchmark"] = s.runs_beating_benchmark;
  j["members_beating_benchmark"] = s.members_beating_benchmark;
  j["mean_daily_return"] = s.mean_daily_return;
  j["mean_daily_return_sd"] = s.mean_daily_return_sd;
  j["trades"] = s.trades;
  j["trades_sd"] = s.trades_sd;
  j["winning_ratio"] = s.winning_ratio;
  j["winning_ratio_sd"] = s.winning_ratio_sd;
  j["long_ratio"] = s.long_ratio;
  j["long_ratio_sd"] = s.long_ratio_sd;
  j["max_winning_ratio"] = s.max_winning_ratio;
  j["max_long_ratio"] = s.max_long_ratio;
  return j;
}

void write_report_rows(std::ostream& out, std::span<const StrategyReport> reports) {
  out << "label,members,days,return_ratio,return_pct,positive_days,days_gt0,rho,binomial_p,"
         "max_drawdown,trades,trades_sd,winning_ratio,winning_ratio_sd,long_ratio,long_ratio_sd\n";
  for (const auto& r : reports) {
    out << r.label << ',' << r.members << ',' << r.days.size() << ',' << format_double(r.return_ratio)
        << ',' << format_double(r.return_pct) << ',' << r.positive_days << ','
        << format_double(r.days_gt0) << ',' << (r.rho ? format_double(*r.rho) : std::string())
        << ',' << format_double(r.binomial_p) << ',' << format_double(r.max_drawdown) << ','
        << format_double(r.trades) << ',' << format_double(r.trades_sd) << ','
        << format_double(r.winning_ratio) << ',' << format_double(r.winning_ratio_sd) << ','
        << format_double(r.long_ratio) << ',' << format_double(r.long_ratio_sd) << '\n';
  }
}

void write_day_series(std::ostream& out, std::span<const TradingDay> days,
                      std::span<const double> values) {
  if (days.size() != values.size()) throw InvariantError("series length mismatch");
  out << "day,value\n";
  for (std::size_t i = 0; i < days.size(); ++i) {
    out << format_day(days[i]) << ',' << format_double(values[i]) << '\n';
  }
}

}  // namespace fxgp
