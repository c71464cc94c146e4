#include "fxgp/market_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "fxgp/error.hpp"
#include "fxgp/numeric_text.hpp"

namespace fxgp {

namespace {

bool is_currency_code(std::string_view code) {
  return code.size() == 3 &&
         std::all_of(code.begin(), code.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::optional<std::string> bar_violation(const Bar& bar) {
  for (double p : {bar.open, bar.high, bar.low, bar.close}) {
    if (!std::isfinite(p) || p <= 0.0) return "prices must be finite and positive";
  }
  if (bar.low > bar.high) return "high < low";
  if (bar.open < bar.low || bar.open > bar.high) return "open outside [low, high]";
  if (bar.close < bar.low || bar.close > bar.high) return "close outside [low, high]";
  return std::nullopt;
}

InstrumentId InstrumentId::parse(std::string_view text) {
  const auto dot = text.find('.');
  if (dot == std::string_view::npos) {
    throw DataError("instrument '" + std::string(text) + "' is not BASE.QUOTE");
  }
  InstrumentId id{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
  if (!is_currency_code(id.base) || !is_currency_code(id.quote)) {
    throw DataError("instrument '" + std::string(text) + "' needs two 3-letter currency codes");
  }
  if (id.base == id.quote) {
    throw DataError("instrument '" + std::string(text) + "' has identical base and quote");
  }
  return id;
}

char field_code(PriceField field) {
  static constexpr std::array<char, 4> kCodes{'O', 'H', 'L', 'C'};
  return kCodes[static_cast<std::size_t>(field)];
}

AlignedDataset::AlignedDataset(std::vector<InstrumentId> instruments,
                               std::vector<Timestamp> timestamps, std::vector<double> values)
    : instruments_(std::move(instruments)),
      timestamps_(std::move(timestamps)),
      values_(std::move(values)) {
  if (instruments_.empty()) throw DataError("dataset needs at least one instrument");
  for (std::size_t i = 0; i < instruments_.size(); ++i) {
    for (std::size_t j = i + 1; j < instruments_.size(); ++j) {
      if (instruments_[i] == instruments_[j]) {
        throw DataError("instrument " + instruments_[i].str() + " listed twice");
      }
    }
  }
  if (timestamps_.empty()) throw DataError("dataset has no rows");
  if (values_.size() != timestamps_.size() * variable_count()) {
    throw DataError("dataset value matrix does not match its shape");
  }
  days_.reserve(timestamps_.size());
  for (std::size_t t = 0; t < timestamps_.size(); ++t) {
    if (t > 0 && timestamps_[t] <= timestamps_[t - 1]) {
      throw DataError("timestamps are not strictly increasing at " +
                      format_rfc3339(timestamps_[t]));
    }
    for (std::size_t i = 0; i < instruments_.size(); ++i) {
      if (auto why = bar_violation(bar(t, i))) {
        throw DataError("bar " + instruments_[i].str() + " at " + format_rfc3339(timestamps_[t]) +
                        ": " + *why);
      }
    }
    days_.push_back(trading_day(timestamps_[t]));
  }
}

Bar AlignedDataset::bar(std::size_t t, std::size_t instrument) const {
  return Bar{timestamps_[t], price(t, instrument, PriceField::Open),
             price(t, instrument, PriceField::High), price(t, instrument, PriceField::Low),
             price(t, instrument, PriceField::Close)};
}

std::optional<std::size_t> AlignedDataset::instrument_index(const InstrumentId& id) const {
  const auto it = std::find(instruments_.begin(), instruments_.end(), id);
  if (it == instruments_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - instruments_.begin());
}

std::vector<std::string> AlignedDataset::variable_names() const {
  std::vector<std::string> names;
  names.reserve(variable_count());
  for (const auto& id : instruments_) {
    for (std::size_t f = 0; f < kFieldsPerInstrument; ++f) {
      names.push_back(id.str() + "." + field_code(static_cast<PriceField>(f)));
    }
  }
  return names;
}

std::size_t AlignedDataset::lower_bound(Timestamp ts) const {
  return static_cast<std::size_t>(std::lower_bound(timestamps_.begin(), timestamps_.end(), ts) -
                                  timestamps_.begin());
}

std::size_t Partition::day_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (i == 0 || day(i) != day(i - 1)) ++n;
  }
  return n;
}

PartitionName parse_partition_name(std::string_view text) {
  if (text == "training" || text == "train") return PartitionName::Training;
  if (text == "validation") return PartitionName::Validation;
  if (text == "oos" || text == "out-of-sample") return PartitionName::OutOfSample;
  throw ConfigError("unknown partition '" + std::string(text) +
                    "' (expected training, validation or oos)");
}

std::string_view to_string(PartitionName name) {
  switch (name) {
    case PartitionName::Training: return "training";
    case PartitionName::Validation: return "validation";
    case PartitionName::OutOfSample: return "oos";
  }
  return "?";
}

const Partition& DatasetSplit::get(PartitionName name) const {
  switch (name) {
    case PartitionName::Training: return training;
    case PartitionName::Validation: return validation;
    case PartitionName::OutOfSample: return oos;
  }
  throw InvariantError("bad partition name");
}

DatasetSplit split(std::shared_ptr<const AlignedDataset> data, TimeRange training,
                   TimeRange validation, TimeRange oos) {
  if (!data) throw DataError("split of a null dataset");
  const std::array<std::pair<const char*, TimeRange>, 3> ranges{
      {{"training", training}, {"validation", validation}, {"oos", oos}}};
  for (const auto& [name, r] : ranges) {
    if (r.end <= r.begin) throw ConfigError(std::string(name) + " range is empty or reversed");
  }
  if (training.end > validation.begin || validation.end > oos.begin) {
    throw ConfigError("ranges must be disjoint and ordered training < validation < oos");
  }
  DatasetSplit out;
  Partition* parts[3] = {&out.training, &out.validation, &out.oos};
  for (std::size_t i = 0; i < 3; ++i) {
    parts[i]->data = data;
    parts[i]->begin = data->lower_bound(ranges[i].second.begin);
    parts[i]->end = data->lower_bound(ranges[i].second.end);
    if (parts[i]->empty()) {
      throw DataError(std::string(ranges[i].first) + " partition contains no rows");
    }
  }
  return out;
}

Partition whole(std::shared_ptr<const AlignedDataset> data) {
  const std::size_t n = data->rows();
  return Partition{std::move(data), 0, n};
}

LoadResult load_bars(std::istream& in, const std::vector<InstrumentId>& expected) {
  if (expected.empty()) throw DataError("no expected instruments given");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < expected.size(); ++i) index.emplace(expected[i].str(), i);

  using Cells = std::vector<std::optional<std::array<double, 4>>>;
  std::map<Timestamp, Cells> table;
  std::size_t input_rows = 0;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (view != "timestamp,instrument,open,high,low,close") {
        throw DataError("line " + std::to_string(line_no) +
                        ": expected header timestamp,instrument,open,high,low,close");
      }
      continue;
    }
    const auto at = [&](const std::string& msg) {
      return DataError("line " + std::to_string(line_no) + ": " + msg);
    };
    const auto fields = split_commas(view);
    if (fields.size() != 6) throw at("expected 6 fields, got " + std::to_string(fields.size()));
    Timestamp ts = 0;
    try {
      ts = parse_rfc3339(fields[0]);
    } catch (const DataError& e) {
      throw at(e.what());
    }
    if (ts % kBarSeconds != 0) throw at("timestamp is not on the 5-minute grid");
    const auto inst = index.find(std::string(fields[1]));
    if (inst == index.end()) throw at("unknown instrument '" + std::string(fields[1]) + "'");
    std::array<double, 4> ohlc{};
    for (std::size_t f = 0; f < 4; ++f) {
      const auto v = parse_double(fields[2 + f]);
      if (!v) throw at("cannot parse price '" + std::string(fields[2 + f]) + "'");
      ohlc[f] = *v;
    }
    if (auto why = bar_violation(Bar{ts, ohlc[0], ohlc[1], ohlc[2], ohlc[3]})) {
      throw at("invalid bar: " + *why);
    }
    auto& cells = table[ts];
    if (cells.empty()) cells.resize(expected.size());
    if (cells[inst->second]) throw at("duplicate bar for " + inst->first);
    cells[inst->second] = ohlc;
    ++input_rows;
  }
  if (!header_seen) throw DataError("empty bar file");

  std::vector<Timestamp> timestamps;
  std::vector<double> values;
  std::size_t dropped = 0;
  for (const auto& [ts, cells] : table) {
    if (!std::all_of(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); })) {
      ++dropped;
      continue;
    }
    timestamps.push_back(ts);
    for (const auto& c : cells) values.insert(values.end(), c->begin(), c->end());
  }
  if (timestamps.empty()) throw DataError("no timestamp has bars for every instrument");
  return LoadResult{AlignedDataset(expected, std::move(timestamps), std::move(values)), input_rows,
                    dropped};
}

LoadResult load_bars(const std::filesystem::path& path, const std::vector<InstrumentId>& expected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bar file " + path.string());
  return load_bars(in, expected);
}

void write_bars(std::ostream& out, const AlignedDataset& data) {
  out << "timestamp,instrument,open,high,low,close\n";
  std::vector<std::string> names;
  for (const auto& id : data.instruments()) names.push_back(id.str());
  for (std::size_t t = 0; t < data.rows(); ++t) {
    const std::string ts = format_rfc3339(data.timestamps()[t]);
    for (std::size_t i = 0; i < data.instrument_count(); ++i) {
      const Bar b = data.bar(t, i);
      out << ts << ',' << names[i] << ',' << format_double(b.open) << ','
          << format_double(b.high) << ',' << format_double(b.low) << ','
          << format_double(b.close) << '\n';
    }
  }
}

namespace {

Eigen::MatrixXd correlation_factor(const SynthSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.instruments.size());
  if (spec.correlation.empty()) return Eigen::MatrixXd::Identity(n, n);
  if (spec.correlation.size() != spec.instruments.size()) {
    throw DataError("correlation matrix size does not match instrument count");
  }
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (spec.correlation[i].size() != spec.instruments.size()) {
      throw DataError("correlation matrix is not square");
    }
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = spec.correlation[i][j];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(c(i, i) - 1.0) > 1e-12) throw DataError("correlation diagonal must be 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(c(i, j) - c(j, i)) > 1e-12) throw DataError("correlation matrix not symmetric");
      if (std::abs(c(i, j)) > 1.0) throw DataError("correlation entry outside [-1, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-10) {
    throw DataError("correlation matrix is not positive semi-definite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

AlignedDataset synthesize(const SynthSpec& spec) {
  const std::size_t n = spec.instruments.size();
  if (n == 0) throw DataError("synthesis needs at least one instrument");
  std::vector<InstrumentId> ids;
  for (const auto& p : spec.instruments) {
    if (!(p.vol >= 0.0) || !std::isfinite(p.vol)) throw DataError("vol must be >= 0");
    if (!(p.start_price > 0.0) || !std::isfinite(p.start_price)) {
      throw DataError("start price must be positive");
    }
    if (!std::isfinite(p.drift)) throw DataError("drift must be finite");
    ids.push_back(p.id);
  }
  if (spec.end <= spec.start) throw DataError("synthesis range is empty");
  const Eigen::MatrixXd factor = correlation_factor(spec);

  std::optional<std::size_t> leader, follower;
  double strength = 0.0;
  int lag = 0;
  if (spec.lead_lag) {
    const auto find = [&](const InstrumentId& id) -> std::size_t {
      const auto it = std::find(ids.begin(), ids.end(), id);
      if (it == ids.end()) throw DataError("lead-lag instrument " + id.str() + " not in basket");
      return static_cast<std::size_t>(it - ids.begin());
    };
    leader = find(spec.lead_lag->leader);
    follower = find(spec.lead_lag->follower);
    strength = spec.lead_lag->strength;
    lag = spec.lead_lag->lag;
    if (*leader == *follower) throw DataError("lead-lag leader and follower must differ");
    if (lag < 1) throw DataError("lead-lag lag must be >= 1");
    if (!(std::abs(strength) <= 1.0)) throw DataError("lead-lag strength must lie in [-1, 1]");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Timestamp> timestamps;
  Timestamp ts = (spec.start + kBarSeconds - 1) / kBarSeconds * kBarSeconds;
  if (spec.start < 0 && spec.start % kBarSeconds != 0) ts -= kBarSeconds;
  for (; ts < spec.end; ts += kBarSeconds) {
    if (!spec.trading_week_only || in_trading_week(ts)) timestamps.push_back(ts);
  }
  if (timestamps.empty()) throw DataError("synthesis range holds no trading bars");

  std::vector<double> values(timestamps.size() * n * kFieldsPerInstrument);
  std::vector<double> last(n);
  for (std::size_t i = 0; i < n; ++i) last[i] = spec.instruments[i].start_price;

  std::vector<double> leader_shocks;
  Eigen::VectorXd white(static_cast<Eigen::Index>(n));
  std::array<double, 4> noise{};
  const double mix = std::sqrt(1.0 - strength * strength);

  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) white[static_cast<Eigen::Index>(i)] = normal(rng);
    Eigen::VectorXd z = factor * white;
    if (leader) {
      leader_shocks.push_back(z[static_cast<Eigen::Index>(*leader)]);
      if (t >= static_cast<std::size_t>(lag)) {
        auto& f = z[static_cast<Eigen::Index>(*follower)];
        f = strength * leader_shocks[t - static_cast<std::size_t>(lag)] + mix * f;
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = spec.instruments[i];
      const double r = p.drift + p.vol * z[static_cast<Eigen::Index>(i)];
      double mean_noise = 0.0;
      for (double& e : noise) {
        e = normal(rng);
        mean_noise += e / 4.0;
      }
      // Four intra-bar points whose log increments sum to the bar return.
      std::array<double, 4> path{};
      double log_step = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        log_step += r / 4.0 + 0.5 * p.vol * (noise[j] - mean_noise);
        path[j] = last[i] * std::exp(log_step);
      }
      path[3] = last[i] * std::exp(r);
      double* cell = values.data() + (t * n + i) * kFieldsPerInstrument;
      cell[0] = path[0];
      cell[1] = *std::max_element(path.begin(), path.end());
      cell[2] = *std::min_element(path.begin(), path.end());
      cell[3] = path[3];
      last[i] = path[3];
    }
  }
  return AlignedDataset(std::move(ids), std::move(timestamps), std::move(values));
}

}  // namespace fxgp
