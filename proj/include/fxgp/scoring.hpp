#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fxgp/simulator.hpp"

namespace fxgp {

/// Fitness assigned to bankrupt or under-trading strategies; strictly worse
/// than the supremum e of the regular branch.
inline constexpr double kPenaltyFitness = 10.0;

enum class PenaltyReason { InsufficientTrades, Bankrupt };

std::string_view to_string(PenaltyReason reason);

/// Lower is better; regular values lie in (0, e).
struct FitnessScore {
  double value = kPenaltyFitness;
  std::optional<PenaltyReason> penalty;

  bool profitable() const { return !penalty && value < 1.0; }
};

/// Final NAV / initial NAV - 1.
double compute_return(const SimulationResult& result);

/// exp(-return), or the penalty value when bankrupt or under min_trades.
FitnessScore compute_fitness(const SimulationResult& result, std::size_t min_trades);

/// Combined training/validation score; nullopt unless both are < 1.
std::optional<double> combined_score(double f_t, double f_v);

enum class Criterion { Tr, TrVa };

Criterion parse_criterion(std::string_view text);
std::string_view to_string(Criterion criterion);

struct SelectionRecord {
  std::size_t individual = 0;
  std::string strategy;  // serialized tree, used for deterministic tie-breaks
  FitnessScore f_t;
  std::optional<FitnessScore> f_v;
  std::optional<double> combined;
};

/// Fills `combined` from f_t and f_v where eligible.
SelectionRecord make_record(std::size_t individual, std::string strategy, FitnessScore f_t,
                            std::optional<FitnessScore> f_v);

struct Selection {
  Criterion criterion = Criterion::Tr;
  std::vector<SelectionRecord> ranked;
  /// Set when nothing could be ranked (e.g. no TrVa-eligible record).
  std::optional<std::string> empty_reason;
};

/// Ranks records and keeps the best k. Ties: f_t, then serialized text.
Selection select(std::span<const SelectionRecord> records, Criterion criterion, std::size_t k);

}  // namespace fxgp
