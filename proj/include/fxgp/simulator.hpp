#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fxgp/market_data.hpp"
#include "fxgp/strategy_tree.hpp"

namespace fxgp {

/// Which currency a positive exposure accumulates.
enum class LongMeans { Base, Quote };

LongMeans parse_long_means(std::string_view text);
std::string_view to_string(LongMeans value);

struct SimConfig {
  double initial_equity = 1'000'000.0;
  LongMeans long_means = LongMeans::Base;
  double threshold = 10.0;            // exposure points
  std::int64_t lot_size = 5'000;      // base-currency units
  double cost_per_million = 15.0;     // accounting currency per million transacted
};

/// Converts prices of one pair into the accounting currency: USD when the
/// pair contains USD, otherwise the pair's quote currency.
class PairConvention {
 public:
  explicit PairConvention(const InstrumentId& pair);

  const std::string& accounting_currency() const noexcept { return accounting_; }

  /// Accounting-currency value of one base unit at `price`.
  double per_base(double price) const { return base_is_account_ ? 1.0 : price; }
  /// Accounting-currency value of one quote unit at `price`.
  double per_quote(double price) const { return base_is_account_ ? 1.0 / price : 1.0; }

 private:
  std::string accounting_;
  bool base_is_account_ = false;
};

enum class Side { Buy, Sell };

struct Order {
  std::size_t step = 0;     // row within the partition
  Timestamp timestamp = 0;
  Side side = Side::Buy;    // of the base currency
  std::int64_t size = 0;    // positive, multiple of the lot size
  double price = 0.0;       // close of the traded pair
  double cost = 0.0;        // accounting currency

  std::int64_t signed_size() const { return side == Side::Buy ? size : -size; }
};

/// A matched entry/exit pair of FIFO lots relative to the neutral position.
struct Trade {
  std::size_t entry_order = 0;
  std::size_t exit_order = 0;
  std::int64_t size = 0;
  bool long_side = false;
  double pnl = 0.0;  // accounting currency, after allocated costs
  Timestamp entry_time = 0;
  Timestamp exit_time = 0;
};

struct DayNav {
  TradingDay day = 0;
  double nav = 0.0;
};

/// Portfolio after the decision at one step.
struct StepState {
  double nav = 0.0;
  double exposure = 0.0;
  double cash = 0.0;           // realized P&L net of costs, accounting currency
  std::int64_t base_units = 0; // net base position relative to neutral
  double quote_units = 0.0;    // quote balance backing the open lots
  double cost = 0.0;           // paid at this step
};

struct SimulationResult {
  double initial_nav = 0.0;
  double final_nav = 0.0;
  std::vector<DayNav> eod_nav;
  std::vector<Order> orders;
  std::vector<Trade> trades;
  std::size_t trade_count = 0;
  std::size_t winning_count = 0;
  std::size_t long_count = 0;
  bool bankrupt = false;
  std::size_t steps = 0;
  std::vector<StepState> trace;

  double winning_ratio() const {
    return trade_count ? static_cast<double>(winning_count) / static_cast<double>(trade_count) : 0.0;
  }
  double long_ratio() const {
    return trade_count ? static_cast<double>(long_count) / static_cast<double>(trade_count) : 0.0;
  }
};

struct SimOptions {
  bool record_orders = true;  // keep orders and trades (counts are always kept)
  bool record_trace = false;  // keep a StepState per step
};

/// Runs one strategy over one partition under the neutral-referenced trading
/// model. Throws DataError for an empty partition or bad instrument index.
SimulationResult run_simulation(const ExprTree& tree, const Partition& partition,
                                std::size_t traded_instrument, const SimConfig& config,
                                const SimOptions& options = {});

/// Same model driven by an explicit exposure signal instead of a tree
/// (signal[i] is the raw output for row i; it is clamped to [-100, 100]).
SimulationResult run_signal(std::span<const double> signal, const Partition& partition,
                            std::size_t traded_instrument, const SimConfig& config,
                            const SimOptions& options = {});

/// FIFO lot matching of an order blotter relative to the neutral position.
std::vector<Trade> match_trades(std::span<const Order> orders, const PairConvention& pair,
                                LongMeans long_means = LongMeans::Base);

/// Order blotter CSV: timestamp,side,size,price,cost.
void write_orders_csv(std::ostream& out, std::span<const Order> orders);

/// EoD NAV CSV: day,nav.
void write_eod_csv(std::ostream& out, std::span<const DayNav> eod);

}  // namespace fxgp
