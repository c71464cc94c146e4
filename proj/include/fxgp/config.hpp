#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fxgp/evolution.hpp"
#include "fxgp/market_data.hpp"
#include "fxgp/simulator.hpp"
#include "json.hpp"

namespace fxgp {

struct DataConfig {
  std::vector<InstrumentId> instruments;  // basket order
  InstrumentId traded;
  std::optional<std::filesystem::path> csv;
  std::optional<SynthSpec> synth;
  std::optional<std::filesystem::path> synth_output;  // where `synth` writes bars
  TimeRange training;
  TimeRange validation;
  TimeRange oos;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;  // GP seed; drawn from entropy when absent
  DataConfig data;
  GpConfig gp;
  SimConfig sim;
  std::filesystem::path output = "run";
  unsigned workers = 1;
};

/// Parses a config document; relative paths resolve against `base_dir`.
/// Unknown keys and bad values throw ConfigError.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Reads and parses a config file. Throws ConfigError if unreadable.
RunConfig load_config(const std::filesystem::path& path);

/// Fills a missing seed from std::random_device and copies it into gp.seed.
void resolve_seed(RunConfig& config);

/// Complete, explicit config (defaults materialized, absolute paths). Omits
/// output directory and worker count, which never influence results.
/// Requires a resolved seed.
nlohmann::ordered_json snapshot(const RunConfig& config);
std::string snapshot_text(const RunConfig& config);

struct LoadedData {
  std::shared_ptr<const AlignedDataset> data;
  DatasetSplit split;
  std::size_t traded = 0;
  std::size_t input_rows = 0;
  std::size_t dropped_timestamps = 0;
};

/// Loads the CSV or synthesizes the dataset, then splits it.
LoadedData load_data(const DataConfig& config);

}  // namespace fxgp
