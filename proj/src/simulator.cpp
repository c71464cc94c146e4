#include "fxgp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include "fxgp/error.hpp"
#include "fxgp/numeric_text.hpp"

namespace fxgp {

LongMeans parse_long_means(std::string_view text) {
  if (text == "base") return LongMeans::Base;
  if (text == "quote") return LongMeans::Quote;
  throw ConfigError("long_means must be 'base' or 'quote', got '" + std::string(text) + "'");
}

std::string_view to_string(LongMeans value) {
  return value == LongMeans::Base ? "base" : "quote";
}

PairConvention::PairConvention(const InstrumentId& pair) {
  if (pair.base == "USD") {
    accounting_ = "USD";
    base_is_account_ = true;
  } else {
    accounting_ = pair.quote;
    base_is_account_ = false;
  }
}

namespace {

struct Lot {
  std::int64_t units = 0;  // signed; all open lots share one sign
  double price = 0.0;
  double cost_per_unit = 0.0;
  std::size_t order = 0;
  Timestamp time = 0;
};

/// FIFO lots of the net position. Closing fills realize P&L into the
/// accounting currency at the fill price.
class LotBook {
 public:
  LotBook(const PairConvention& pair, LongMeans long_means)
      : pair_(pair), long_is_base_(long_means == LongMeans::Base) {}

  std::int64_t net() const noexcept { return net_; }
  double basis() const noexcept { return basis_; }

  /// Mark-to-market of open lots in the accounting currency.
  double open_value(double price) const {
    return (static_cast<double>(net_) * price - basis_) * pair_.per_quote(price);
  }

  /// Applies a fill and returns the realized P&L before costs.
  template <class OnTrade>
  double fill(const Order& order, std::size_t order_index, OnTrade&& on_trade) {
    std::int64_t remaining = order.signed_size();
    const double price = order.price;
    const double exit_cpu = order.cost / static_cast<double>(order.size);
    double realized = 0.0;
    while (remaining != 0 && !lots_.empty() && (lots_.front().units > 0) != (remaining > 0)) {
      Lot& lot = lots_.front();
      const std::int64_t sign = lot.units > 0 ? 1 : -1;
      const std::int64_t k = std::min(std::abs(lot.units), std::abs(remaining));
      const double kd = static_cast<double>(k);
      const double gain = static_cast<double>(sign) * kd * (price - lot.price) * pair_.per_quote(price);
      realized += gain;
      on_trade(Trade{lot.order, order_index, k, (sign > 0) == long_is_base_,
                     gain - kd * (lot.cost_per_unit + exit_cpu), lot.time, order.timestamp});
      lot.units -= sign * k;
      remaining += sign * k;
      net_ -= sign * k;
      basis_ -= static_cast<double>(sign) * kd * lot.price;
      if (lot.units == 0) lots_.pop_front();
    }
    if (remaining != 0) {
      lots_.push_back(Lot{remaining, price, exit_cpu, order_index, order.timestamp});
      net_ += remaining;
      basis_ += static_cast<double>(remaining) * price;
    }
    if (lots_.empty()) basis_ = 0.0;
    return realized;
  }

 private:
  const PairConvention& pair_;
  bool long_is_base_;
  std::deque<Lot> lots_;
  std::int64_t net_ = 0;
  double basis_ = 0.0;
};

void check_inputs(const Partition& partition, std::size_t traded_instrument,
                  const SimConfig& config) {
  if (!partition.data || partition.empty()) throw DataError("cannot simulate an empty partition");
  if (traded_instrument >= partition.data->instrument_count()) {
    throw DataError("traded instrument is not in the dataset basket");
  }
  if (!(config.initial_equity > 0.0)) throw ConfigError("initial equity must be positive");
  if (config.lot_size <= 0) throw ConfigError("lot size must be positive");
  if (!(config.threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
  if (!(config.cost_per_million >= 0.0)) throw ConfigError("cost per million must be >= 0");
}

template <class Signal>
SimulationResult simulate(Signal&& signal, const Partition& partition,
                          std::size_t traded_instrument, const SimConfig& config,
                          const SimOptions& options) {
  check_inputs(partition, traded_instrument, config);
  const PairConvention pair(partition.data->instruments()[traded_instrument]);
  const double direction = config.long_means == LongMeans::Base ? 1.0 : -1.0;
  const double lot = static_cast<double>(config.lot_size);

  SimulationResult result;
  result.initial_nav = config.initial_equity;
  LotBook book(pair, config.long_means);
  double cash = 0.0;
  std::size_t order_count = 0;

  const auto on_trade = [&](const Trade& t) {
    ++result.trade_count;
    if (t.pnl > 0.0) ++result.winning_count;
    if (t.long_side) ++result.long_count;
    if (options.record_orders) result.trades.push_back(t);
  };

  const std::size_t n = partition.size();
  if (options.record_trace) result.trace.reserve(n);
  double nav = config.initial_equity;
  for (std::size_t i = 0; i < n; ++i) {
    const double price = partition.close(i, traded_instrument);
    nav = config.initial_equity + cash + book.open_value(price);
    double step_cost = 0.0;
    if (nav > 0.0) {
      const double per_base = pair.per_base(price);
      const double exposure = direction * 200.0 * static_cast<double>(book.net()) * per_base / nav;
      const double desired = std::clamp(static_cast<double>(signal(i)), -100.0, 100.0);
      if (std::abs(desired - exposure) > config.threshold) {
        const double target = direction * desired / 200.0 * nav / per_base;
        const auto lots = std::llround((target - static_cast<double>(book.net())) / lot);
        const std::int64_t qty = static_cast<std::int64_t>(lots) * config.lot_size;
        if (qty != 0) {
          Order order;
          order.step = i;
          order.timestamp = partition.timestamp(i);
          order.side = qty > 0 ? Side::Buy : Side::Sell;
          order.size = std::abs(qty);
          order.price = price;
          order.cost = config.cost_per_million * (static_cast<double>(order.size) * per_base) / 1e6;
          step_cost = order.cost;
          cash -= order.cost;
          cash += book.fill(order, order_count++, on_trade);
          if (options.record_orders) result.orders.push_back(order);
          nav = config.initial_equity + cash + book.open_value(price);
        }
      }
    }
    if (options.record_trace) {
      const double exposure =
          nav > 0.0 ? direction * 200.0 * static_cast<double>(book.net()) * pair.per_base(price) / nav
                    : 0.0;
      result.trace.push_back(
          StepState{nav, exposure, cash, book.net(), -book.basis(), step_cost});
    }
    result.steps = i + 1;
    const bool last_of_day = i + 1 == n || partition.day(i + 1) != partition.day(i);
    if (nav <= 0.0) {
      result.bankrupt = true;
      result.eod_nav.push_back(DayNav{partition.day(i), nav});
      break;
    }
    if (last_of_day) result.eod_nav.push_back(DayNav{partition.day(i), nav});
  }
  result.final_nav = nav;
  return result;
}

}  // namespace

SimulationResult run_simulation(const ExprTree& tree, const Partition& partition,
                                std::size_t traded_instrument, const SimConfig& config,
                                const SimOptions& options) {
  return simulate([&](std::size_t i) { return evaluate(tree, partition.row(i)); }, partition,
                  traded_instrument, config, options);
}

SimulationResult run_signal(std::span<const double> signal, const Partition& partition,
                            std::size_t traded_instrument, const SimConfig& config,
                            const SimOptions& options) {
  if (signal.size() != partition.size()) {
    throw DataError("signal length does not match partition length");
  }
  return simulate([&](std::size_t i) { return signal[i]; }, partition, traded_instrument, config,
                  options);
}

std::vector<Trade> match_trades(std::span<const Order> orders, const PairConvention& pair,
                                LongMeans long_means) {
  std::vector<Trade> trades;
  LotBook book(pair, long_means);
  for (std::size_t i = 0; i < orders.size(); ++i) {
    book.fill(orders[i], i, [&](const Trade& t) { trades.push_back(t); });
  }
  return trades;
}

void write_orders_csv(std::ostream& out, std::span<const Order> orders) {
  out << "timestamp,side,size,price,cost\n";
  for (const auto& o : orders) {
    out << format_rfc3339(o.timestamp) << ',' << (o.side == Side::Buy ? "buy" : "sell") << ','
        << o.size << ',' << format_double(o.price) << ',' << format_double(o.cost) << '\n';
  }
}

void write_eod_csv(std::ostream& out, std::span<const DayNav> eod) {
  out << "day,nav\n";
  for (const auto& d : eod) out << format_day(d.day) << ',' << format_double(d.nav) << '\n';
}

}  // namespace fxgp
