#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fxgp/market_data.hpp"
#include "fxgp/scoring.hpp"
#include "fxgp/simulator.hpp"
#include "fxgp/strategy_tree.hpp"

namespace fxgp {

struct GpConfig {
  std::size_t population_size = 75'000;
  std::size_t generations = 15;  // breeding steps after the initial population
  double crossover_rate = 0.90;
  double mutation_rate = 0.15;
  int max_depth = 8;
  int max_length = 60;
  std::size_t elitism = 1;
  std::size_t tournament_size = 5;
  std::size_t min_trades = 50;
  double validated_fraction = 0.10;
  std::size_t selected_count = 10;
  std::uint64_t seed = 0;

  TreeLimits limits() const { return TreeLimits{max_depth, max_length}; }
};

/// Throws ConfigError when a field is out of range.
void validate(const GpConfig& config);

/// Number of individuals that get a validation score.
std::size_t validated_count(const GpConfig& config);

struct Individual {
  ExprTree tree;
  FitnessScore f_t;
  std::optional<FitnessScore> f_v;
};

struct GenerationStats {
  std::size_t generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double median = 0.0;
  std::size_t penalized = 0;
};

struct RunArtifact {
  GpConfig config;
  std::vector<GenerationStats> generations;
  std::vector<Individual> population;  // final generation
  Selection selection_tr;
  Selection selection_trva;
};

struct EvolveOptions {
  unsigned workers = 1;  // affects speed only
  std::function<void(const GenerationStats&)> on_generation;
};

/// Independent random stream for one (seed, generation, slot) triple.
Rng stream_rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t slot);

/// Draws `size` individuals with replacement; returns the index of the one
/// with the lowest training fitness (first drawn wins ties).
std::size_t tournament_select(Rng& rng, std::span<const Individual> population, std::size_t size);

/// Subtree swap into a copy of `a`; returns a copy of `a` if no compatible
/// pair is found within 20 attempts.
ExprTree crossover(Rng& rng, const ExprTree& a, const ExprTree& b, const TreeLimits& limits);

enum class MutationKind { ChangeKind, PerturbTerminal, RemoveSubtree, ReplaceSubtree };

/// Applies one mutation kind chosen uniformly among the applicable ones.
ExprTree mutate(Rng& rng, const ExprTree& tree, const TreeLimits& limits,
                std::size_t variable_count, MutationKind* applied = nullptr);

/// Simulates the tree on `partition` and scores it.
FitnessScore evaluate_fitness(const ExprTree& tree, const Partition& partition,
                              std::size_t traded_instrument, const SimConfig& sim,
                              std::size_t min_trades);

/// Full generational run: random start, elitism, tournament breeding,
/// training-only fitness; then validation of the top fraction and selection
/// under both criteria.
RunArtifact evolve(const GpConfig& config, const DatasetSplit& split,
                   std::size_t traded_instrument, const SimConfig& sim,
                   const EvolveOptions& options = {});

}  // namespace fxgp
