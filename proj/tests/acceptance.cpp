// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>

#include "fxgp/analytics.hpp"
#include "fxgp/artifact.hpp"
#include "fxgp/evolution.hpp"
#include "fxgp/scoring.hpp"
#include "support.hpp"

using namespace fxgp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

SimulationResult with_return(double r, std::size_t trades = 100) {
  SimulationResult s;
  s.initial_nav = 1.0;
  s.final_nav = 1.0 + r;
  s.trade_count = trades;
  return s;
}

double pascal_tail(std::size_t n, std::size_t k) {
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

Outcome ac1() {
  Outcome o;
  const double f0 = compute_fitness(with_return(0.0), 50).value;
  const double f1 = compute_fitness(with_return(std::log(2.0)), 50).value;
  const double f2 = compute_fitness(with_return(-std::log(2.0)), 50).value;
  o.require(std::abs(f0 - 1.0) <= 1e-12, "f(0) != 1");
  o.require(std::abs(f1 - 0.5) <= 1e-12, "f(ln 2) != 0.5");
  o.require(std::abs(f2 - 2.0) <= 1e-12, "f(-ln 2) != 2");
  const double near_ruin = compute_fitness(with_return(-1.0 + 1e-9), 50).value;
  o.require(std::abs(near_ruin - std::exp(1.0)) <= 1e-6, "limit at return -1 is not e");
  o.detail = o.pass ? fmt("f = %.15g, %.15g, %.15g", f0, f1, f2) + fmt("; limit %.9f", near_ruin) : o.detail;
  return o;
}

Outcome ac2() {
  Outcome o;
  Rng rng(2024);
  std::uniform_real_distribution<double> f(std::nextafter(0.0, 1.0), 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = f(rng), b = f(rng);
    worst = std::max(worst, std::abs(*combined_score(a, a) - a));
    o.require(*combined_score(a, b) == *combined_score(b, a), "asymmetric");
  }
  o.require(worst <= 1e-12, "diagonal identity off by more than 1e-12");
  const double hand = *combined_score(0.8, 0.9);
  o.require(std::abs(hand - 0.941886) <= 1e-6, "s(0.8, 0.9) wrong");
  if (o.pass) o.detail = fmt("max |s(f,f)-f| = %.3g; s(0.8,0.9) = %.9f", worst, hand);
  return o;
}

Outcome ac3() {
  Outcome o;
  const double p1 = binom_p(213, 121), p2 = binom_p(213, 141);
  o.require(p1 >= 0.025 && p1 <= 0.029, "p(213,121) out of [0.025, 0.029]");
  o.require(p2 >= 5e-7 && p2 <= 5e-6, "p(213,141) out of [5e-7, 5e-6]");
  o.require(test::rel_err(p1, pascal_tail(213, 121)) < 1e-10, "p(213,121) differs from exact sum");
  o.require(std::abs(p2 - pascal_tail(213, 141)) / p2 < 1e-10, "p(213,141) differs from exact sum");
  if (o.pass) o.detail = fmt("p(213,121) = %.6g, p(213,141) = %.6g", p1, p2);
  return o;
}

// Datasets for randomized simulator episodes.
std::vector<std::shared_ptr<const AlignedDataset>> episode_data() {
  std::vector<std::shared_ptr<const AlignedDataset>> out;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto spec = test::lead_lag_spec(100 + s, "2013-03-04", "2013-03-07", 0.5);
    for (auto& p : spec.instruments) p.vol *= 4.0;  // livelier prices, more orders
    out.push_back(test::make_synth(spec));
  }
  return out;
}

struct EpisodeCheck {
  double worst_step = 0.0;   // relative per-step conservation error
  double worst_trade = 0.0;  // relative trade-matching conservation error
  std::size_t orders = 0;
  bool lots_ok = true;
  bool threshold_ok = true;
  bool zero_exact = true;
};

EpisodeCheck run_episodes() {
  EpisodeCheck c;
  const auto datasets = episode_data();
  Rng rng(4);
  SimOptions trace;
  trace.record_trace = true;
  const ExprTree zero = ExprTree::from_prefix({Node::constant(0.0, 1.0)});
  for (int episode = 0; episode < 1000; ++episode) {
    const auto& data = datasets[static_cast<std::size_t>(episode) % datasets.size()];
    const Partition p = whole(data);
    const std::size_t traded = static_cast<std::size_t>(episode / 10) % 4;
    SimConfig config;
    config.long_means = episode % 7 == 0 ? LongMeans::Quote : LongMeans::Base;
    const PairConvention pair(data->instruments()[traded]);
    const double direction = config.long_means == LongMeans::Base ? 1.0 : -1.0;
    const ExprTree tree = test::random_tree(rng, 16);
    const auto r = run_simulation(tree, p, traded, config, trace);

    double prev_nav = r.initial_nav, prev_price = p.close(0, traded), prev_quote = 0.0;
    std::int64_t prev_net = 0;
    std::size_t next_order = 0;
    for (std::size_t i = 0; i < r.steps; ++i) {
      const double price = p.close(i, traded);
      const double before = (static_cast<double>(prev_net) * prev_price + prev_quote) * pair.per_quote(prev_price);
      const double after = (static_cast<double>(prev_net) * price + prev_quote) * pair.per_quote(price);
      const auto& s = r.trace[i];
      c.worst_step = std::max(c.worst_step, std::abs((s.nav - prev_nav) - (after - before - s.cost)) / std::abs(prev_nav));

      const bool ordered = next_order < r.orders.size() && r.orders[next_order].step == i;
      if (ordered) {
        const double nav_pre = prev_nav + (after - before);
        const double exposure = direction * 200.0 * static_cast<double>(prev_net) * pair.per_base(price) / nav_pre;
        const double desired = std::clamp(evaluate(tree, p.row(i)), -100.0, 100.0);
        if (!(std::abs(desired - exposure) > 10.0)) c.threshold_ok = false;
        const auto& ord = r.orders[next_order];
        if (ord.size <= 0 || ord.size % 5'000 != 0) c.lots_ok = false;
        ++next_order;
      }
      prev_nav = s.nav;
      prev_price = price;
      prev_net = s.base_units;
      prev_quote = s.quote_units;
    }
    c.orders += r.orders.size();

    test::FifoOracle oracle;
    for (const auto& ord : r.orders) oracle.apply(ord, pair);
    const auto trades = match_trades(r.orders, pair, config.long_means);
    double trade_sum = 0.0;
    for (const auto& t : trades) trade_sum += t.pnl;
    const double last = p.close(r.steps - 1, traded);
    const double delta = r.final_nav - r.initial_nav;
    const double lhs = trade_sum + oracle.open_value(last, pair) - oracle.open_cost();
    c.worst_trade = std::max(c.worst_trade, std::abs(lhs - delta) / r.initial_nav);
    if (trades.size() != oracle.trade_pnl.size()) c.worst_trade = 1.0;
    for (std::size_t k = 0; k < trades.size() && k < oracle.trade_pnl.size(); ++k) {
      c.worst_trade = std::max(c.worst_trade, std::abs(trades[k].pnl - oracle.trade_pnl[k]) / r.initial_nav);
    }

    if (episode % 50 == 0) {
      const auto z = run_simulation(zero, p, traded, config);
      c.zero_exact = c.zero_exact && z.final_nav == z.initial_nav && z.orders.empty();
    }
  }
  return c;
}

const EpisodeCheck& episodes() {
  static const EpisodeCheck c = run_episodes();
  return c;
}

Outcome ac4() {
  Outcome o;
  const auto& c = episodes();
  o.require(c.worst_step <= 1e-9, "per-step conservation error above 1e-9");
  o.require(c.zero_exact, "constant zero strategy changed NAV");
  o.require(c.lots_ok, "order size not a positive multiple of 5,000");
  o.require(c.threshold_ok, "order fired within the 10-point threshold");
  o.require(c.orders > 1000, "too few orders to be meaningful");
  if (o.pass) o.detail = fmt("1000 episodes, %.0f orders, max step error %.3g", static_cast<double>(c.orders), c.worst_step);
  return o;
}

Outcome ac5() {
  Outcome o;
  const auto& c = episodes();
  o.require(c.worst_trade <= 1e-9, "trade P&L + open lots != NAV change");
  if (o.pass) o.detail = fmt("1000 episodes, max relative error %.3g", c.worst_trade);
  return o;
}

Outcome ac6() {
  Outcome o;
  const VariableUniverse universe(test::basket());
  const TreeLimits limits{};
  Rng rng(6);
  std::uniform_real_distribution<double> value(-1e4, 1e4);
  std::vector<double> row(16);
  for (int i = 0; i < 10'000; ++i) {
    const ExprTree a = test::random_tree(rng, 16);
    const ExprTree b = test::random_tree(rng, 16);
    const ExprTree x = crossover(rng, a, b, limits);
    const ExprTree m = mutate(rng, a, limits, 16);
    o.require(a.within(limits) && x.within(limits) && m.within(limits), "limit violation");
    for (const ExprTree* t : {&a, &x, &m}) {
      const std::string text = serialize(*t, universe);
      o.require(serialize(deserialize(text, universe, limits), universe) == text, "round trip not byte-equal");
      for (auto& v : row) v = value(rng);
      o.require(std::isfinite(evaluate(*t, row)), "non-finite output");
    }
  }
  if (o.pass) o.detail = "10000 trees, crossovers and mutations";
  return o;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_dirs(const fs::path& a, const fs::path& b) {
  for (const auto& e : fs::directory_iterator(a)) {
    if (read_file(e.path()) != read_file(b / e.path().filename())) return false;
  }
  return true;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fxgp_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DatasetSplit ac7_split() {
  const auto t = [](const char* s) { return parse_rfc3339(s); };
  return split(test::make_synth(test::lead_lag_spec(70, "2013-03-04", "2013-03-12")),
               {t("2013-03-04"), t("2013-03-07")}, {t("2013-03-07"), t("2013-03-08")},
               {t("2013-03-08"), t("2013-03-12")});
}

Outcome ac7() {
  Outcome o;
  const DatasetSplit sp = ac7_split();
  const VariableUniverse universe(sp.training.data->instruments());
  std::size_t runs = 0;
  for (std::uint64_t seed : {1u, 2u}) {
    for (std::size_t pop : {300u, 250u}) {
      GpConfig gp;
      gp.population_size = pop;
      gp.generations = 5;
      gp.min_trades = 10;
      gp.seed = seed;
      std::vector<fs::path> dirs;
      for (unsigned workers : {1u, 1u, 4u}) {
        EvolveOptions opt;
        opt.workers = workers;
        const RunArtifact run = evolve(gp, sp, 1, SimConfig{}, opt);
        ++runs;
        for (std::size_t g = 1; g < run.generations.size(); ++g) {
          o.require(run.generations[g].best <= run.generations[g - 1].best, "best f_t increased");
        }
        const auto validated = std::count_if(run.population.begin(), run.population.end(),
                                             [](const Individual& i) { return i.f_v.has_value(); });
        const auto expected = static_cast<std::ptrdiff_t>(std::ceil(0.10 * static_cast<double>(pop) - 1e-9));
        o.require(validated == expected, "validated count is not ceil(0.1 pop)");
        dirs.push_back(scratch("ac7_" + std::to_string(dirs.size())));
        write_run(dirs.back(), run, universe, "seed " + std::to_string(seed) + "\n");
      }
      o.require(same_dirs(dirs[0], dirs[1]), "rerun produced different bytes");
      o.require(same_dirs(dirs[0], dirs[2]), "workers 1 vs 4 produced different bytes");
      for (const auto& d : dirs) fs::remove_all(d);
    }
  }
  if (o.pass) o.detail = fmt("%.0f runs byte-identical per (seed, pop); best f_t monotone", static_cast<double>(runs));
  return o;
}

struct LearnResult {
  bool ok = false;
  double f_t = 0.0;
  std::size_t train_trades = 0;
  std::size_t oos_trades = 0;
  double ratio = 0.0;
};

struct Ac8Data {
  DatasetSplit split;
  std::vector<RunArtifact> runs;
};

const Ac8Data& ac8_runs() {
  static const Ac8Data data = [] {
    const auto t = [](const char* s) { return parse_rfc3339(s); };
    Ac8Data d{split(test::make_synth(test::lead_lag_spec(8, "2013-03-03", "2013-04-06", 0.8)),
                    {t("2013-03-03"), t("2013-03-16")}, {t("2013-03-16"), t("2013-03-23")},
                    {t("2013-03-23"), t("2013-04-06")}),
              {}};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      GpConfig gp;
      gp.population_size = 2'000;
      gp.generations = 15;
      gp.min_trades = 50;
      gp.seed = seed;
      d.runs.push_back(evolve(gp, d.split, 1, SimConfig{}));
    }
    return d;
  }();
  return data;
}

Outcome ac8() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const Ac8Data& d = ac8_runs();
  std::size_t good = 0;
  std::ostringstream detail;
  for (std::size_t i = 0; i < d.runs.size(); ++i) {
    const auto& sel = d.runs[i].selection_tr;
    if (sel.ranked.empty()) continue;
    const auto& top = sel.ranked.front();
    const ExprTree tree = d.runs[i].population[top.individual].tree;
    SimOptions counts;
    counts.record_orders = false;
    const auto train = run_simulation(tree, d.split.training, 1, SimConfig{}, counts);
    const auto oos = run_simulation(tree, d.split.oos, 1, SimConfig{}, counts);
    const double tr_rate = static_cast<double>(train.trade_count) / static_cast<double>(d.split.training.day_count());
    const double oos_rate = static_cast<double>(oos.trade_count) / static_cast<double>(d.split.oos.day_count());
    const double ratio = tr_rate > 0 ? oos_rate / tr_rate : 0.0;
    const bool ok = top.f_t.value < 1.0 && !top.f_t.penalty && train.trade_count >= 50 && !oos.bankrupt &&
                    ratio >= 1.0 / 3.0 && ratio <= 3.0;
    good += ok;
    detail << " seed" << i + 1 << ":f_t=" << fmt("%.4f", top.f_t.value) << ",trades=" << train.trade_count
           << ",oos/tr=" << fmt("%.2f", ratio) << (ok ? "" : "(fail)");
  }
  o.require(good >= 4, "fewer than 4 of 5 seeds learned a profitable strategy");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.detail = std::to_string(good) + "/5 seeds ok in " + fmt("%.0fs;", secs) + detail.str();
  return o;
}

Outcome ac9() {
  Outcome o;
  Rng rng(9);
  std::normal_distribution<double> noise(0.0, 0.015);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> v;
    double x = 100.0;
    for (int i = 0; i < 150; ++i) v.push_back(x *= 1.0 + noise(rng));
    double brute = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i; j < v.size(); ++j) brute = std::max(brute, (v[i] - v[j]) / v[i]);
    o.require(std::abs(max_drawdown(v) - brute) <= 1e-12, "MDD differs from brute force");

    std::vector<TradingDay> days(v.size());
    std::iota(days.begin(), days.end(), TradingDay{15'800});
    const DailySeries s = daily_series(days, v, 100.0);
    double product = 1.0;
    for (double r : s.daily_returns) product *= 1.0 + r;
    o.require(std::abs(product / s.final_ratio() - 1.0) <= 1e-9, "compounding does not reconstruct NAV ratio");
  }

  const auto report = [](std::vector<double> changes) {
    SimulationResult r;
    r.initial_nav = 100.0;
    double x = 100.0;
    TradingDay day = 15'800;
    for (double c : changes) r.eod_nav.push_back(DayNav{day++, x *= 1.0 + c});
    r.final_nav = x;
    r.trade_count = 7;
    std::vector<TradingDay> days;
    std::vector<double> bench;
    for (std::size_t i = 0; i < changes.size(); ++i) {
      days.push_back(static_cast<TradingDay>(15'800 + i));
      bench.push_back(1.0 + 0.01 * static_cast<double>(i % 2));
    }
    return std::pair{make_report("m", r, daily_series(days, bench, 1.0)), daily_series(days, bench, 1.0)};
  };
  const auto [single, bench4] = report({0.01, -0.02, 0.015, 0.03});
  o.require(to_json(aggregate(std::span(&single, 1), bench4, "m")).dump() == to_json(single).dump(),
            "aggregate of one is not the identity");

  const auto a = report({0.10, -0.01, -0.01});
  const auto b = report({-0.01, 0.10, -0.01});
  const auto c = report({-0.01, -0.01, 0.10});
  const std::vector<StrategyReport> members{a.first, b.first, c.first};
  const StrategyReport avg = aggregate(members, a.second, "avg");
  double best_member = 0.0;
  for (const auto& m : members) best_member = std::max(best_member, m.days_gt0);
  o.require(avg.days_gt0 > best_member, "aggregate days>0 does not exceed every member");
  if (o.pass) o.detail = fmt("aggregate days>0 = %.2f vs best member %.2f", avg.days_gt0, best_member);
  return o;
}

Outcome ac10() {
  Outcome o;
  const Ac8Data& d = ac8_runs();
  const VariableUniverse universe(d.split.training.data->instruments());
  std::size_t checked = 0;
  for (std::size_t i = 0; i < d.runs.size(); ++i) {
    const fs::path dir = scratch("ac10_" + std::to_string(i));
    write_run(dir, d.runs[i], universe, "{}\n");
    for (Criterion crit : {Criterion::Tr, Criterion::TrVa}) {
      const auto selected = load_selected(dir, crit, universe, d.runs[i].config.limits());
      std::ostringstream exported;
      write_strategies(exported, selected, universe);
      std::istringstream in(exported.str());
      for (const auto& e : read_strategies(in, universe, d.runs[i].config.limits(), "export")) {
        const FitnessScore f = evaluate_fitness(e.tree, d.split.training, 1, SimConfig{}, d.runs[i].config.min_trades);
        o.require(e.f_t.has_value() && f.value == *e.f_t, "re-simulated f_t differs from the recorded value");
        if (e.f_v) {
          const FitnessScore v = evaluate_fitness(e.tree, d.split.validation, 1, SimConfig{}, d.runs[i].config.min_trades);
          o.require(v.value == *e.f_v, "re-simulated f_v differs from the recorded value");
        }
        ++checked;
      }
    }
    fs::remove_all(dir);
  }
  o.require(checked > 0, "no exported strategies to check");
  if (o.pass) o.detail = std::to_string(checked) + " exported strategies reproduce their recorded fitness bit-exactly";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1 fitness formula", ac1},        {"AC2 combined score", ac2},
      {"AC3 binomial p", ac3},             {"AC4 simulator conservation", ac4},
      {"AC5 trade matching", ac5},         {"AC6 tree engine", ac6},
      {"AC7 evolution determinism", ac7},  {"AC8 end-to-end learnability", ac8},
      {"AC9 analytics", ac9},              {"AC10 backtest reproducibility", ac10}};
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
