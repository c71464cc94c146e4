#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fxgp/time.hpp"

namespace fxgp {

/// One instrument's quote over one 5-minute interval; `timestamp` is the bar
/// close time.
struct Bar {
  Timestamp timestamp = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

/// Describes why a bar breaks the OHLC invariants, or nullopt if it is sane.
std::optional<std::string> bar_violation(const Bar& bar);

/// A currency pair rendered as "BASE.QUOTE".
struct InstrumentId {
  std::string base;
  std::string quote;

  static InstrumentId parse(std::string_view text);
  std::string str() const { return base + "." + quote; }

  friend bool operator==(const InstrumentId&, const InstrumentId&) = default;
};

enum class PriceField : std::uint8_t { Open = 0, High = 1, Low = 2, Close = 3 };

inline constexpr std::size_t kFieldsPerInstrument = 4;

char field_code(PriceField field);

/// Column index of (instrument, field) within a dataset row.
constexpr std::size_t column_of(std::size_t instrument, PriceField field) {
  return instrument * kFieldsPerInstrument + static_cast<std::size_t>(field);
}

/// Timestamp-aligned bar matrix across an instrument basket. Immutable once
/// built; every (timestamp, instrument) cell is populated.
class AlignedDataset {
 public:
  /// `values` is row-major: one row per timestamp holding O,H,L,C for each
  /// instrument in basket order. Throws DataError if any invariant fails.
  AlignedDataset(std::vector<InstrumentId> instruments, std::vector<Timestamp> timestamps,
                 std::vector<double> values);

  std::size_t rows() const noexcept { return timestamps_.size(); }
  std::size_t instrument_count() const noexcept { return instruments_.size(); }
  std::size_t variable_count() const noexcept { return instruments_.size() * kFieldsPerInstrument; }

  const std::vector<InstrumentId>& instruments() const noexcept { return instruments_; }
  const std::vector<Timestamp>& timestamps() const noexcept { return timestamps_; }
  const std::vector<TradingDay>& trading_days() const noexcept { return days_; }

  std::span<const double> row(std::size_t t) const {
    return {values_.data() + t * variable_count(), variable_count()};
  }
  double price(std::size_t t, std::size_t instrument, PriceField field) const {
    return values_[t * variable_count() + column_of(instrument, field)];
  }
  Bar bar(std::size_t t, std::size_t instrument) const;

  std::optional<std::size_t> instrument_index(const InstrumentId& id) const;

  /// "BASE.QUOTE.F" names for every column, in column order.
  std::vector<std::string> variable_names() const;

  /// Index of the first row with timestamp >= ts.
  std::size_t lower_bound(Timestamp ts) const;

 private:
  std::vector<InstrumentId> instruments_;
  std::vector<Timestamp> timestamps_;
  std::vector<TradingDay> days_;
  std::vector<double> values_;
};

/// Half-open timestamp interval [begin, end).
struct TimeRange {
  Timestamp begin = 0;
  Timestamp end = 0;
};

/// A contiguous row range of a shared dataset.
struct Partition {
  std::shared_ptr<const AlignedDataset> data;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end == begin; }
  std::span<const double> row(std::size_t i) const { return data->row(begin + i); }
  double close(std::size_t i, std::size_t instrument) const {
    return data->price(begin + i, instrument, PriceField::Close);
  }
  Timestamp timestamp(std::size_t i) const { return data->timestamps()[begin + i]; }
  TradingDay day(std::size_t i) const { return data->trading_days()[begin + i]; }

  /// Number of distinct trading days covered.
  std::size_t day_count() const;
};

enum class PartitionName { Training, Validation, OutOfSample };

PartitionName parse_partition_name(std::string_view text);
std::string_view to_string(PartitionName name);

struct DatasetSplit {
  Partition training;
  Partition validation;
  Partition oos;

  const Partition& get(PartitionName name) const;
};

/// Partitions `data` into chronologically ordered, disjoint, nonempty ranges.
DatasetSplit split(std::shared_ptr<const AlignedDataset> data, TimeRange training,
                   TimeRange validation, TimeRange oos);

/// Whole dataset as one partition.
Partition whole(std::shared_ptr<const AlignedDataset> data);

struct LoadResult {
  AlignedDataset dataset;
  std::size_t input_rows = 0;
  std::size_t dropped_timestamps = 0;
};

/// Reads `timestamp,instrument,open,high,low,close` rows and keeps only the
/// timestamps at which every expected instrument has a bar.
LoadResult load_bars(std::istream& in, const std::vector<InstrumentId>& expected);
LoadResult load_bars(const std::filesystem::path& path, const std::vector<InstrumentId>& expected);

/// Writes the dataset in the same CSV schema: timestamp major, basket order.
void write_bars(std::ostream& out, const AlignedDataset& data);

struct InstrumentProcess {
  InstrumentId id;
  double start_price = 1.0;
  double drift = 0.0;  // mean log return per 5-minute bar
  double vol = 0.0;    // log-return standard deviation per 5-minute bar
};

/// Makes `follower`'s return at t+lag correlate with `leader`'s return at t.
struct LeadLag {
  InstrumentId leader;
  InstrumentId follower;
  int lag = 1;
  double strength = 0.0;
};

struct SynthSpec {
  std::vector<InstrumentProcess> instruments;
  Timestamp start = 0;
  Timestamp end = 0;
  std::uint64_t seed = 1;
  /// Correlation of the per-bar shocks; empty means identity.
  std::vector<std::vector<double>> correlation;
  std::optional<LeadLag> lead_lag;
  /// Restrict bars to the Sunday 17:00 to Friday 17:00 ET week.
  bool trading_week_only = true;
};

/// Correlated geometric random walk on the 5-minute grid. Deterministic in
/// the spec (including seed).
AlignedDataset synthesize(const SynthSpec& spec);

}  // namespace fxgp
