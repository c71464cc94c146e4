#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "fxgp/market_data.hpp"
#include "fxgp/strategy_tree.hpp"

namespace fxgp::test {

inline const std::vector<InstrumentId>& basket() {
  static const std::vector<InstrumentId> ids{InstrumentId{"EUR", "USD"}, InstrumentId{"USD", "JPY"},
                                             InstrumentId{"GBP", "USD"}, InstrumentId{"AUD", "USD"}};
  return ids;
}

/// Four-instrument random walk with EUR.USD leading USD.JPY by one bar.
inline SynthSpec lead_lag_spec(std::uint64_t seed, const std::string& start, const std::string& end,
                               double strength = 0.8) {
  SynthSpec s;
  s.instruments = {InstrumentProcess{basket()[0], 1.30, 0.0, 2e-4},
                   InstrumentProcess{basket()[1], 80.0, 0.0, 4e-4},
                   InstrumentProcess{basket()[2], 1.55, 0.0, 2e-4},
                   InstrumentProcess{basket()[3], 1.02, 0.0, 3e-4}};
  s.start = parse_rfc3339(start);
  s.end = parse_rfc3339(end);
  s.seed = seed;
  s.lead_lag = LeadLag{basket()[0], basket()[1], 1, strength};
  return s;
}

inline std::shared_ptr<const AlignedDataset> make_synth(const SynthSpec& spec) {
  return std::make_shared<const AlignedDataset>(synthesize(spec));
}

/// Single-instrument dataset with O=H=L=C=price on consecutive trading-week bars.
inline std::shared_ptr<const AlignedDataset> flat_bars(const InstrumentId& id,
                                                       const std::vector<double>& prices,
                                                       Timestamp start = parse_rfc3339("2013-03-04T00:00:00Z")) {
  std::vector<Timestamp> ts;
  std::vector<double> values;
  Timestamp t = start;
  for (double p : prices) {
    while (!in_trading_week(t)) t += kBarSeconds;
    ts.push_back(t);
    values.insert(values.end(), {p, p, p, p});
    t += kBarSeconds;
  }
  return std::make_shared<const AlignedDataset>(std::vector<InstrumentId>{id}, ts, values);
}

/// Random tree over `variables` columns under the given limits.
inline ExprTree random_tree(Rng& rng, std::size_t variables, TreeLimits limits = {}) {
  return generate_random(rng, limits, variables);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace fxgp::test

#include <deque>

#include "fxgp/simulator.hpp"

namespace fxgp::test {

/// Independent FIFO replay of an order blotter relative to the neutral
/// position. Value units follow the pair's accounting currency.
struct FifoOracle {
  struct Lot {
    std::int64_t units;
    double price;
    double cost;  // entry cost still attached to these units
  };
  std::deque<Lot> lots;
  std::vector<double> trade_pnl;
  double realized = 0.0;  // gains of closed units, before costs
  double costs = 0.0;     // every order's cost

  void apply(const Order& o, const PairConvention& pair) {
    costs += o.cost;
    std::int64_t left = o.signed_size();
    const double exit_cpu = o.cost / static_cast<double>(o.size);
    while (left != 0 && !lots.empty() && (lots.front().units > 0) != (left > 0)) {
      Lot& lot = lots.front();
      const std::int64_t take = std::min(std::llabs(lot.units), std::llabs(left));
      const double sign = lot.units > 0 ? 1.0 : -1.0;
      const double share = static_cast<double>(take) / static_cast<double>(std::llabs(lot.units));
      const double gain = sign * static_cast<double>(take) * (o.price - lot.price) * pair.per_quote(o.price);
      const double entry_cost = lot.cost * share;
      realized += gain;
      trade_pnl.push_back(gain - entry_cost - exit_cpu * static_cast<double>(take));
      lot.cost -= entry_cost;
      lot.units -= static_cast<std::int64_t>(sign) * take;
      left += static_cast<std::int64_t>(sign) * take;
      if (lot.units == 0) lots.pop_front();
    }
    if (left != 0) lots.push_back(Lot{left, o.price, exit_cpu * static_cast<double>(std::llabs(left))});
  }

  double open_value(double price, const PairConvention& pair) const {
    double v = 0.0;
    for (const auto& l : lots) v += static_cast<double>(l.units) * (price - l.price) * pair.per_quote(price);
    return v;
  }

  double open_cost() const {
    double c = 0.0;
    for (const auto& l : lots) c += l.cost;
    return c;
  }
};

}  // namespace fxgp::test
