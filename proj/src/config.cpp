#include "fxgp/config.hpp"

#include <fstream>
#include <random>
#include <set>

#include "fxgp/error.hpp"

namespace fxgp {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void get_opt(const json& obj, const std::string& key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

Timestamp get_time(const json& obj, const std::string& key, const std::string& where) {
  const auto text = get<std::string>(obj, key, where);
  try {
    return parse_rfc3339(text);
  } catch (const std::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

InstrumentId get_instrument(const json& value, const std::string& where) {
  try {
    return InstrumentId::parse(value.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

TimeRange parse_range(const json& obj, const std::string& where) {
  check_keys(obj, where, {"begin", "end"});
  return TimeRange{get_time(obj, "begin", where), get_time(obj, "end", where)};
}

SynthSpec parse_synth(const json& obj, DataConfig& data, const fs::path& base) {
  const std::string where = "data.synth";
  check_keys(obj, where,
             {"seed", "start", "end", "instruments", "correlation", "lead_lag",
              "trading_week_only", "output"});
  SynthSpec spec;
  get_opt(obj, "seed", where, spec.seed);
  spec.start = get_time(obj, "start", where);
  spec.end = get_time(obj, "end", where);
  get_opt(obj, "trading_week_only", where, spec.trading_week_only);
  get_opt(obj, "correlation", where, spec.correlation);
  if (!obj.contains("instruments") || !obj["instruments"].is_array()) {
    throw ConfigError(where + ".instruments must be an array");
  }
  for (const auto& p : obj["instruments"]) {
    const std::string pw = where + ".instruments[]";
    check_keys(p, pw, {"id", "start_price", "drift", "vol"});
    InstrumentProcess proc;
    proc.id = get_instrument(p.at("id"), pw + ".id");
    get_opt(p, "start_price", pw, proc.start_price);
    get_opt(p, "drift", pw, proc.drift);
    get_opt(p, "vol", pw, proc.vol);
    spec.instruments.push_back(proc);
  }
  if (obj.contains("lead_lag")) {
    const auto& ll = obj["lead_lag"];
    const std::string lw = where + ".lead_lag";
    check_keys(ll, lw, {"leader", "follower", "lag", "strength"});
    LeadLag lead;
    lead.leader = get_instrument(ll.at("leader"), lw + ".leader");
    lead.follower = get_instrument(ll.at("follower"), lw + ".follower");
    get_opt(ll, "lag", lw, lead.lag);
    get_opt(ll, "strength", lw, lead.strength);
    spec.lead_lag = lead;
  }
  if (obj.contains("output")) data.synth_output = base / get<std::string>(obj, "output", where);
  return spec;
}

DataConfig parse_data(const json& obj, const fs::path& base) {
  const std::string where = "data";
  check_keys(obj, where, {"instruments", "traded", "csv", "synth", "ranges"});
  DataConfig data;
  if (obj.contains("csv")) data.csv = fs::absolute(base / get<std::string>(obj, "csv", where));
  if (obj.contains("synth")) data.synth = parse_synth(obj["synth"], data, base);
  if (data.csv.has_value() == data.synth.has_value()) {
    throw ConfigError("data needs exactly one of 'csv' or 'synth'");
  }
  if (obj.contains("instruments")) {
    for (const auto& v : obj["instruments"]) data.instruments.push_back(get_instrument(v, "data.instruments"));
  } else if (data.synth) {
    for (const auto& p : data.synth->instruments) data.instruments.push_back(p.id);
  } else {
    throw ConfigError("data.instruments is required with a csv source");
  }
  if (data.synth) {
    std::vector<InstrumentId> synth_ids;
    for (const auto& p : data.synth->instruments) synth_ids.push_back(p.id);
    if (synth_ids != data.instruments) {
      throw ConfigError("data.instruments must match data.synth.instruments in order");
    }
  }
  if (!obj.contains("traded")) throw ConfigError("data.traded is required");
  data.traded = get_instrument(obj["traded"], "data.traded");
  if (std::find(data.instruments.begin(), data.instruments.end(), data.traded) ==
      data.instruments.end()) {
    throw ConfigError("data.traded '" + data.traded.str() + "' is not in the basket");
  }
  if (!obj.contains("ranges")) throw ConfigError("data.ranges is required");
  const auto& ranges = obj["ranges"];
  check_keys(ranges, "data.ranges", {"training", "validation", "oos"});
  for (const char* key : {"training", "validation", "oos"}) {
    if (!ranges.contains(key)) throw ConfigError(std::string("data.ranges.") + key + " is required");
  }
  data.training = parse_range(ranges["training"], "data.ranges.training");
  data.validation = parse_range(ranges["validation"], "data.ranges.validation");
  data.oos = parse_range(ranges["oos"], "data.ranges.oos");
  return data;
}

GpConfig parse_gp(const json& obj) {
  const std::string where = "gp";
  check_keys(obj, where,
             {"population_size", "generations", "crossover_rate", "mutation_rate", "max_depth",
              "max_length", "elitism", "tournament_size", "min_trades", "validated_fraction",
              "selected_count"});
  GpConfig gp;
  get_opt(obj, "population_size", where, gp.population_size);
  get_opt(obj, "generations", where, gp.generations);
  get_opt(obj, "crossover_rate", where, gp.crossover_rate);
  get_opt(obj, "mutation_rate", where, gp.mutation_rate);
  get_opt(obj, "max_depth", where, gp.max_depth);
  get_opt(obj, "max_length", where, gp.max_length);
  get_opt(obj, "elitism", where, gp.elitism);
  get_opt(obj, "tournament_size", where, gp.tournament_size);
  get_opt(obj, "min_trades", where, gp.min_trades);
  get_opt(obj, "validated_fraction", where, gp.validated_fraction);
  get_opt(obj, "selected_count", where, gp.selected_count);
  return gp;
}

SimConfig parse_sim(const json& obj) {
  const std::string where = "sim";
  check_keys(obj, where,
             {"initial_equity", "long_means", "threshold", "lot_size", "cost_per_million"});
  SimConfig sim;
  get_opt(obj, "initial_equity", where, sim.initial_equity);
  if (obj.contains("long_means")) sim.long_means = parse_long_means(get<std::string>(obj, "long_means", where));
  get_opt(obj, "threshold", where, sim.threshold);
  get_opt(obj, "lot_size", where, sim.lot_size);
  get_opt(obj, "cost_per_million", where, sim.cost_per_million);
  if (!(sim.initial_equity > 0.0)) throw ConfigError("sim.initial_equity must be positive");
  if (sim.lot_size <= 0) throw ConfigError("sim.lot_size must be positive");
  if (!(sim.threshold >= 0.0)) throw ConfigError("sim.threshold must be >= 0");
  if (!(sim.cost_per_million >= 0.0)) throw ConfigError("sim.cost_per_million must be >= 0");
  return sim;
}

ojson range_json(const TimeRange& r) {
  return ojson{{"begin", format_rfc3339(r.begin)}, {"end", format_rfc3339(r.end)}};
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  check_keys(doc, "config", {"seed", "output", "workers", "data", "gp", "sim"});
  RunConfig config;
  if (doc.contains("seed")) config.seed = get<std::uint64_t>(doc, "seed", "config");
  if (doc.contains("output")) config.output = base_dir / get<std::string>(doc, "output", "config");
  get_opt(doc, "workers", "config", config.workers);
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  if (!doc.contains("data")) throw ConfigError("config needs a 'data' section");
  config.data = parse_data(doc["data"], base_dir);
  if (doc.contains("gp")) config.gp = parse_gp(doc["gp"]);
  if (doc.contains("sim")) config.sim = parse_sim(doc["sim"]);
  validate(config.gp);
  if (config.seed) config.gp.seed = *config.seed;
  return config;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, fs::absolute(path).parent_path());
}

void resolve_seed(RunConfig& config) {
  if (!config.seed) {
    std::random_device rd;
    config.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  config.gp.seed = *config.seed;
}

ojson snapshot(const RunConfig& c) {
  if (!c.seed) throw InvariantError("snapshot requires a resolved seed");
  ojson doc;
  doc["seed"] = *c.seed;

  ojson data;
  std::vector<std::string> basket;
  for (const auto& id : c.data.instruments) basket.push_back(id.str());
  data["instruments"] = basket;
  data["traded"] = c.data.traded.str();
  if (c.data.csv) data["csv"] = fs::absolute(*c.data.csv).string();
  if (c.data.synth) {
    const SynthSpec& s = *c.data.synth;
    ojson synth;
    synth["seed"] = s.seed;
    synth["start"] = format_rfc3339(s.start);
    synth["end"] = format_rfc3339(s.end);
    synth["trading_week_only"] = s.trading_week_only;
    ojson procs = ojson::array();
    for (const auto& p : s.instruments) {
      procs.push_back(ojson{{"id", p.id.str()},
                            {"start_price", p.start_price},
                            {"drift", p.drift},
                            {"vol", p.vol}});
    }
    synth["instruments"] = procs;
    if (!s.correlation.empty()) synth["correlation"] = s.correlation;
    if (s.lead_lag) {
      synth["lead_lag"] = ojson{{"leader", s.lead_lag->leader.str()},
                                {"follower", s.lead_lag->follower.str()},
                                {"lag", s.lead_lag->lag},
                                {"strength", s.lead_lag->strength}};
    }
    data["synth"] = synth;
  }
  data["ranges"] = ojson{{"training", range_json(c.data.training)},
                         {"validation", range_json(c.data.validation)},
                         {"oos", range_json(c.data.oos)}};
  doc["data"] = data;

  const GpConfig& g = c.gp;
  doc["gp"] = ojson{{"population_size", g.population_size},
                    {"generations", g.generations},
                    {"crossover_rate", g.crossover_rate},
                    {"mutation_rate", g.mutation_rate},
                    {"max_depth", g.max_depth},
                    {"max_length", g.max_length},
                    {"elitism", g.elitism},
                    {"tournament_size", g.tournament_size},
                    {"min_trades", g.min_trades},
                    {"validated_fraction", g.validated_fraction},
                    {"selected_count", g.selected_count}};
  const SimConfig& s = c.sim;
  doc["sim"] = ojson{{"initial_equity", s.initial_equity},
                     {"long_means", std::string(to_string(s.long_means))},
                     {"threshold", s.threshold},
                     {"lot_size", s.lot_size},
                     {"cost_per_million", s.cost_per_million}};
  return doc;
}

std::string snapshot_text(const RunConfig& config) { return snapshot(config).dump(2) + "\n"; }

LoadedData load_data(const DataConfig& config) {
  LoadedData out;
  if (config.csv) {
    LoadResult loaded = load_bars(*config.csv, config.instruments);
    out.input_rows = loaded.input_rows;
    out.dropped_timestamps = loaded.dropped_timestamps;
    out.data = std::make_shared<const AlignedDataset>(std::move(loaded.dataset));
  } else if (config.synth) {
    out.data = std::make_shared<const AlignedDataset>(synthesize(*config.synth));
    out.input_rows = out.data->rows() * out.data->instrument_count();
  } else {
    throw ConfigError("data needs a csv or synth source");
  }
  const auto traded = out.data->instrument_index(config.traded);
  if (!traded) throw DataError("traded instrument " + config.traded.str() + " missing from data");
  out.traded = *traded;
  out.split = split(out.data, config.training, config.validation, config.oos);
  return out;
}

}  // namespace fxgp
