#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fxgp/evolution.hpp"
#include "fxgp/scoring.hpp"
#include "fxgp/strategy_tree.hpp"

namespace fxgp {

inline constexpr const char* kSnapshotFile = "config.snapshot";
inline constexpr const char* kGenerationsFile = "generations.csv";
inline constexpr const char* kPopulationFile = "population_final.strategies";

std::string selection_file(Criterion criterion);

/// 1-based line of individual i's tree in the population file.
inline std::size_t population_line(std::size_t individual) { return 2 * individual + 2; }

/// Writes the full artifact layout into `dir` (created if missing).
void write_run(const std::filesystem::path& dir, const RunArtifact& run,
               const VariableUniverse& universe, const std::string& snapshot);

void write_generations_csv(std::ostream& out, std::span<const GenerationStats> generations);
void write_selection_csv(std::ostream& out, const Selection& selection);

/// `# f_t=... f_v=...` header line for one scored strategy.
std::string annotation(const FitnessScore& f_t, const std::optional<FitnessScore>& f_v,
                       std::optional<std::size_t> rank = std::nullopt);

/// One strategy read from a strategy file, with the scores found in the
/// annotation line directly above it.
struct StrategyEntry {
  std::size_t line = 0;
  ExprTree tree;
  std::optional<double> f_t;
  std::optional<double> f_v;
};

/// Reads a strategy file: one prefix tree per line; `#` lines are comments
/// and may carry annotations. Throws DataError naming `source`, line and
/// column on malformed input.
std::vector<StrategyEntry> read_strategies(std::istream& in, const VariableUniverse& universe,
                                           const TreeLimits& limits, const std::string& source);
std::vector<StrategyEntry> read_strategies(const std::filesystem::path& path,
                                           const VariableUniverse& universe,
                                           const TreeLimits& limits);

struct SelectionRow {
  std::size_t rank = 0;
  double f_t = 0.0;
  std::optional<double> f_v;
  std::optional<double> combined;
  std::size_t strategy_file_line = 0;
};

std::vector<SelectionRow> read_selection_csv(const std::filesystem::path& path);

/// Selected strategies of a run directory, in rank order, with their scores.
std::vector<StrategyEntry> load_selected(const std::filesystem::path& run_dir, Criterion criterion,
                                         const VariableUniverse& universe,
                                         const TreeLimits& limits);

/// Strategy file of the selected strategies, annotated with rank and scores.
void write_strategies(std::ostream& out, std::span<const StrategyEntry> entries,
                      const VariableUniverse& universe);

}  // namespace fxgp
