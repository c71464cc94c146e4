#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fxgp/analytics.hpp"
#include "fxgp/error.hpp"
#include "support.hpp"

using namespace fxgp;

namespace {

// Exact tail via a Pascal row; no logarithms or gamma functions.
double binom_tail_oracle(std::size_t n, std::size_t k) {
  std::vector<double> row{1.0};
  for (std::size_t m = 1; m <= n; ++m) {
    std::vector<double> next(m + 1, 1.0);
    for (std::size_t i = 1; i < m; ++i) next[i] = row[i - 1] + row[i];
    row = std::move(next);
  }
  double tail = 0.0;
  for (std::size_t i = k; i <= n; ++i) tail += row[i];
  return tail / std::ldexp(1.0, static_cast<int>(n));
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return (cov / (n - 1)) / (std::sqrt(vx / (n - 1)) * std::sqrt(vy / (n - 1)));
}

double mdd_oracle(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i; j < v.size(); ++j) worst = std::max(worst, (v[i] - v[j]) / v[i]);
  return worst;
}

std::vector<TradingDay> day_labels(std::size_t n) {
  std::vector<TradingDay> d(n);
  std::iota(d.begin(), d.end(), TradingDay{15'768});
  return d;
}

SimulationResult curve_result(const std::vector<double>& eod, double initial = 100.0, std::size_t trades = 0) {
  SimulationResult r;
  r.initial_nav = initial;
  const auto days = day_labels(eod.size());
  for (std::size_t i = 0; i < eod.size(); ++i) r.eod_nav.push_back(DayNav{days[i], eod[i]});
  r.final_nav = eod.back();
  r.trade_count = trades;
  return r;
}

DailySeries flat_benchmark(std::size_t n, double drift = 0.001) {
  std::vector<double> v;
  double x = 1.0;
  for (std::size_t i = 0; i < n; ++i) v.push_back(x *= 1.0 + drift * ((i % 3) - 1.0));
  const auto days = day_labels(n);
  return daily_series(days, v, 1.0);
}

// Curve from daily relative changes, opening at 100.
std::vector<double> compound(const std::vector<double>& changes) {
  std::vector<double> v;
  double x = 100.0;
  for (double c : changes) v.push_back(x *= 1.0 + c);
  return v;
}

}  // namespace

TEST_CASE("daily series") {
  const auto days = day_labels(3);
  const DailySeries flat = daily_series(days, std::vector<double>{5, 5, 5}, 5.0);
  for (double r : flat.daily_returns) CHECK(r == 0.0);
  const DailySeries dbl = daily_series(days, std::vector<double>{5, 10, 10}, 5.0);
  CHECK(dbl.daily_returns == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(relative_curve(dbl) == std::vector<double>{100.0, 200.0, 200.0});
  CHECK_THROWS_AS(daily_series(days, std::vector<double>{1, 2}, 1.0), DataError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> eod;
  double x = 1e6;
  for (int i = 0; i < 254; ++i) eod.push_back(x *= 1.0 + noise(rng));
  const DailySeries s = daily_series(day_labels(254), eod, 1e6);
  double product = 1.0;
  for (double r : s.daily_returns) product *= 1.0 + r;
  CHECK(std::abs(product / s.final_ratio() - 1.0) < 1e-9);
}

TEST_CASE("simulation EoD series covers every day") {
  const auto data = test::make_synth(test::lead_lag_spec(2, "2013-03-04", "2013-03-16"));
  const ExprTree zero = ExprTree::from_prefix({Node::constant(0.0, 1.0)});
  const Partition p = whole(data);
  const DailySeries s = daily_series(run_simulation(zero, p, 1, SimConfig{}));
  CHECK(s.size() == p.day_count());
  const DailySeries inst = instrument_daily_series(p, 1);
  CHECK(inst.size() == p.day_count());
  CHECK(inst.opening == p.close(0, 1));
  CHECK(inst.eod.back() == p.close(p.size() - 1, 1));
}

TEST_CASE("pearson") {
  const std::vector<double> xs{0.3, -1.2, 2.5, 0.0, 1.1, -0.7, 3.3, 0.9, -2.0, 1.6};
  const std::vector<double> ys{0.1, -0.4, 1.9, 0.5, 0.2, -1.5, 2.1, 1.3, -0.9, 0.4};
  CHECK(*pearson(xs, xs) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> neg(xs.size());
  std::transform(xs.begin(), xs.end(), neg.begin(), [](double v) { return -v; });
  CHECK(*pearson(xs, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(*pearson(xs, ys) == doctest::Approx(pearson_oracle(xs, ys)).epsilon(1e-12));
  std::vector<double> affine(ys.size());
  std::transform(ys.begin(), ys.end(), affine.begin(), [](double v) { return 3.5 * v - 17.0; });
  CHECK(std::abs(*pearson(xs, affine) - *pearson(xs, ys)) <= 1e-12);
  CHECK_FALSE(pearson(xs, std::vector<double>(10, 2.0)));
  CHECK_THROWS_AS(pearson(xs, std::vector<double>(9, 1.0)), DataError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1.0}, std::vector<double>{1.0}), DataError);
}

TEST_CASE("binomial tail") {
  CHECK(binom_p(213, 121) == doctest::Approx(binom_tail_oracle(213, 121)).epsilon(1e-10));
  CHECK(binom_p(213, 141) == doctest::Approx(binom_tail_oracle(213, 141)).epsilon(1e-10));
  // Values quoted for 56.81% and 66.20% positive days out of 213.
  CHECK(std::abs(binom_p(213, 121) - 0.027) < 0.0005);
  CHECK(std::abs(binom_p(213, 141) - 1.31e-6) < 0.005e-6);
  CHECK(binom_p(213, 0) == 1.0);
  CHECK(binom_p(10, 10) == doctest::Approx(1.0 / 1024).epsilon(1e-12));
  for (std::size_t k = 1; k <= 300; ++k) REQUIRE(binom_p(300, k) <= binom_p(300, k - 1));
  CHECK(binom_p(300, 150) >= 0.5);
  for (std::size_t n : {1u, 7u, 40u, 254u, 500u}) {
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 13)) {
      REQUIRE(test::rel_err(binom_p(n, k), binom_tail_oracle(n, k)) < 1e-9);
    }
  }
  const double big = binom_p(100'000, 50'500);
  CHECK(big > 0.0);
  CHECK(big < 0.001);
  CHECK_THROWS_AS(binom_p(3, 4), DataError);
}

TEST_CASE("max drawdown") {
  CHECK(max_drawdown(std::vector<double>{100, 101, 150}) == 0.0);
  CHECK(max_drawdown(std::vector<double>{100, 80, 120}) == doctest::Approx(0.2).epsilon(1e-15));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v;
    double x = 100.0;
    for (int i = 0; i < 200; ++i) v.push_back(x *= 1.0 + noise(rng));
    REQUIRE(max_drawdown(v) == doctest::Approx(mdd_oracle(v)).epsilon(1e-12));
    std::vector<double> scaled(v);
    for (auto& s : scaled) s *= 37.0;
    REQUIRE(max_drawdown(scaled) == doctest::Approx(max_drawdown(v)).epsilon(1e-12));
  }
}

TEST_CASE("moving average") {
  const MovingAverage c = moving_average(std::vector<double>(50, 3.25));
  for (double v : c.value) CHECK(v == 3.25);
  std::vector<double> ramp(100);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  const MovingAverage m = moving_average(ramp, 30);
  CHECK(m.value[29] == doctest::Approx(15.5).epsilon(1e-15));
  CHECK(m.partial[28]);
  CHECK_FALSE(m.partial[29]);
  CHECK(m.value[99] == doctest::Approx(85.5).epsilon(1e-12));
  CHECK(moving_average(ramp, 1).value == ramp);
  CHECK_THROWS_AS(moving_average(ramp, 0), ConfigError);
}

TEST_CASE("strategy report") {
  const auto eod = compound({0.01, -0.02, 0.03, 0.0, 0.05});
  const DailySeries bench = flat_benchmark(5);
  const StrategyReport r = make_report("s", curve_result(eod, 100.0, 12), bench);
  CHECK(r.return_ratio == doctest::Approx(eod.back() / 100.0).epsilon(1e-15));
  CHECK(r.return_pct == doctest::Approx((eod.back() / 100.0 - 1.0) * 100.0).epsilon(1e-12));
  CHECK(r.positive_days == 3);
  CHECK(r.days_gt0 == doctest::Approx(0.6));
  CHECK(r.binomial_p == doctest::Approx(binom_tail_oracle(5, 3)).epsilon(1e-12));
  CHECK(r.max_drawdown == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(r.trades == 12.0);
  REQUIRE(r.rho);
  CHECK(*r.rho == doctest::Approx(pearson_oracle(r.daily_returns, bench.daily_returns)).epsilon(1e-12));
  CHECK(r.relative_nav.size() == 5);
}

TEST_CASE("aggregation") {
  const DailySeries bench = flat_benchmark(4);
  SUBCASE("singleton is the identity") {
    const StrategyReport m = make_report("m", curve_result(compound({0.01, -0.03, 0.02, 0.04}), 1e6, 9), bench);
    const StrategyReport a = aggregate(std::span(&m, 1), bench, "m");
    CHECK(to_json(a).dump() == to_json(m).dump());
  }
  SUBCASE("mirror curves average to a flat line") {
    const std::vector<double> up{110, 120, 115, 130};
    std::vector<double> down;
    for (double v : up) down.push_back(200.0 - v);
    const std::vector<StrategyReport> ms{make_report("u", curve_result(up), bench),
                                         make_report("d", curve_result(down), bench)};
    const StrategyReport a = aggregate(ms, bench, "avg");
    for (double r : a.daily_returns) CHECK(r == 0.0);
    CHECK(a.days_gt0 == 0.0);
    CHECK(a.return_ratio == 1.0);
  }
  SUBCASE("an aggregate can have more positive days than any member") {
    const std::vector<StrategyReport> ms{
        make_report("a", curve_result(compound({0.10, -0.01, -0.01})), bench),
        make_report("b", curve_result(compound({-0.01, 0.10, -0.01})), bench),
        make_report("c", curve_result(compound({-0.01, -0.01, 0.10})), bench)};
    const DailySeries b3 = flat_benchmark(3);
    const StrategyReport a = aggregate(ms, b3, "avg");
    for (const auto& m : ms) CHECK(m.days_gt0 == doctest::Approx(1.0 / 3));
    CHECK(a.days_gt0 == 1.0);
    // Direct computation of the averaged curve.
    CHECK(a.relative_nav[0] == doctest::Approx((110.0 + 99.0 + 99.0) / 3).epsilon(1e-12));
  }
  SUBCASE("trade statistics are member means with sample sd") {
    const std::vector<StrategyReport> ms{make_report("a", curve_result(compound({0.01, 0, 0, 0}), 100, 10), bench),
                                         make_report("b", curve_result(compound({0, 0.01, 0, 0}), 100, 20), bench)};
    const StrategyReport a = aggregate(ms, bench, "avg");
    CHECK(a.trades == 15.0);
    CHECK(a.trades_sd == doctest::Approx(std::sqrt(50.0)));
    CHECK(a.members == 2);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(aggregate(std::span<const StrategyReport>{}, bench, "x"), DataError);
    const std::vector<StrategyReport> ms{make_report("a", curve_result(compound({0.01, 0, 0, 0})), bench),
                                         make_report("b", curve_result(compound({0.01, 0, 0})), flat_benchmark(3))};
    CHECK_THROWS_AS(aggregate(ms, bench, "x"), DataError);
  }
}

TEST_CASE("buy and hold benchmark") {
  std::vector<double> prices;
  for (int d = 0; d < 5 * 288; ++d) prices.push_back(90.0 * (1.0 + 0.11 * d / (5.0 * 288 - 1)));
  const auto data = test::flat_bars(InstrumentId{"USD", "JPY"}, prices);
  const StrategyReport b = buy_and_hold_benchmark(whole(data), 0);
  CHECK(b.return_ratio == doctest::Approx(1.11).epsilon(1e-12));
  REQUIRE(b.rho);
  CHECK(*b.rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.trades == 0.0);

  const auto flat = test::flat_bars(InstrumentId{"USD", "JPY"}, std::vector<double>(3 * 288, 90.0));
  const StrategyReport f = buy_and_hold_benchmark(whole(flat), 0);
  CHECK(f.return_ratio == 1.0);
  CHECK(f.days_gt0 == 0.0);
  CHECK_FALSE(f.rho);
}

TEST_CASE("grouping runs") {
  const DailySeries bench = flat_benchmark(3);
  const auto member = [&](double a, double b, double c) {
    return make_report("m", curve_result(compound({a, b, c}), 100, 5), bench);
  };
  const std::vector<RunReports> runs{
      RunReports{"r0", {member(0.01, 0.01, 0.01), member(0.0, 0.0, 0.0)}},
      RunReports{"r1", {member(0.02, 0.02, 0.02), member(0.05, 0.0, 0.0)}}};
  const std::vector<double> key{0.5, 0.7};
  const GroupedReports g = group_reports(runs, key, bench);
  CHECK(g.best_individual.return_ratio == runs[0].members[0].return_ratio);
  CHECK(g.per_run.size() == 2);
  CHECK(g.best_run_index == 1);
  CHECK(g.winners.members == 2);
  CHECK(g.global_average.members == 4);
  CHECK(g.global_average.label == "Avg Run");
  CHECK(g.winners.relative_nav[0] == doctest::Approx(101.5));

  const ActivitySummary s = summarize_activity(g, runs, buy_and_hold_benchmark(
      whole(test::flat_bars(InstrumentId{"USD", "JPY"}, std::vector<double>(3 * 288, 90.0))), 0));
  CHECK(s.profitable_members == 3);
  CHECK(s.profitable_runs == 2);
  CHECK(s.trades == 5.0);
  CHECK(s.trades_sd == 0.0);
  CHECK_THROWS_AS(group_reports(std::span<const RunReports>{}, key, bench), DataError);
}

TEST_CASE("report output") {
  const DailySeries bench = flat_benchmark(2);
  const StrategyReport r = make_report("s", curve_result({101.0, 102.0}), bench);
  std::ostringstream rows, series;
  write_report_rows(rows, std::span(&r, 1));
  CHECK(rows.str().rfind("label,members,days,return_ratio,return_pct,positive_days,days_gt0,rho,", 0) == 0);
  write_day_series(series, r.days, r.relative_nav);
  CHECK(series.str().rfind("day,value\n", 0) == 0);
  const auto j = to_json(r, false);
  CHECK(j["label"] == "s");
  CHECK_FALSE(j.contains("relative_nav"));
  const auto mean = mean_sd(std::vector<double>{1.0, 3.0});
  CHECK(mean.first == 2.0);
  CHECK(mean.second == doctest::Approx(std::sqrt(2.0)));
  CHECK(mean_sd(std::vector<double>{4.0}).second == 0.0);
}
