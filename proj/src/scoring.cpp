#include "fxgp/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "fxgp/error.hpp"

namespace fxgp {

std::string_view to_string(PenaltyReason reason) {
  return reason == PenaltyReason::Bankrupt ? "bankrupt" : "insufficient_trades";
}

double compute_return(const SimulationResult& result) {
  return result.final_nav / result.initial_nav - 1.0;
}

FitnessScore compute_fitness(const SimulationResult& result, std::size_t min_trades) {
  if (result.bankrupt || result.final_nav <= 0.0) {
    return FitnessScore{kPenaltyFitness, PenaltyReason::Bankrupt};
  }
  if (result.trade_count < min_trades) {
    return FitnessScore{kPenaltyFitness, PenaltyReason::InsufficientTrades};
  }
  return FitnessScore{std::exp(-compute_return(result)), std::nullopt};
}

std::optional<double> combined_score(double f_t, double f_v) {
  if (!(f_t < 1.0) || !(f_v < 1.0)) return std::nullopt;
  const double a = 1.0 - f_t;
  const double b = 1.0 - f_v;
  return std::abs(f_t - f_v) + 1.0 - std::sqrt(a * a + b * b) / std::sqrt(2.0);
}

Criterion parse_criterion(std::string_view text) {
  if (text == "tr" || text == "Tr" || text == "TR") return Criterion::Tr;
  if (text == "trva" || text == "TrVa" || text == "TRVA") return Criterion::TrVa;
  throw ConfigError("criterion must be 'tr' or 'trva', got '" + std::string(text) + "'");
}

std::string_view to_string(Criterion criterion) {
  return criterion == Criterion::Tr ? "tr" : "trva";
}

SelectionRecord make_record(std::size_t individual, std::string strategy, FitnessScore f_t,
                            std::optional<FitnessScore> f_v) {
  SelectionRecord r{individual, std::move(strategy), f_t, f_v, std::nullopt};
  if (f_v && !f_t.penalty && !f_v->penalty) r.combined = combined_score(f_t.value, f_v->value);
  return r;
}

Selection select(std::span<const SelectionRecord> records, Criterion criterion, std::size_t k) {
  if (k == 0) throw ConfigError("selection size must be >= 1");
  Selection out;
  out.criterion = criterion;
  std::vector<const SelectionRecord*> pool;
  for (const auto& r : records) {
    if (criterion == Criterion::TrVa && !r.combined) continue;
    pool.push_back(&r);
  }
  if (pool.empty()) {
    out.empty_reason = criterion == Criterion::TrVa
                           ? "no strategy is profitable on both training and validation"
                           : "no strategies to rank";
    return out;
  }
  const auto key = [criterion](const SelectionRecord* r) {
    return criterion == Criterion::Tr ? r->f_t.value : *r->combined;
  };
  std::stable_sort(pool.begin(), pool.end(), [&](const auto* a, const auto* b) {
    if (key(a) != key(b)) return key(a) < key(b);
    if (a->f_t.value != b->f_t.value) return a->f_t.value < b->f_t.value;
    return a->strategy < b->strategy;
  });
  pool.resize(std::min(k, pool.size()));
  for (const auto* r : pool) out.ranked.push_back(*r);
  return out;
}

}  // namespace fxgp
