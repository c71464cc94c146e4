#include "fxgp/artifact.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "fxgp/error.hpp"
#include "fxgp/numeric_text.hpp"

namespace fxgp {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// Reads `key=value` tokens of an annotation comment.
std::map<std::string, std::string> annotation_fields(std::string_view comment) {
  std::map<std::string, std::string> fields;
  std::istringstream in{std::string(comment)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

}  // namespace

std::string selection_file(Criterion criterion) {
  return "selection_" + std::string(to_string(criterion)) + ".csv";
}

std::string annotation(const FitnessScore& f_t, const std::optional<FitnessScore>& f_v,
                       std::optional<std::size_t> rank) {
  std::string text = "#";
  if (rank) text += " rank=" + std::to_string(*rank);
  text += " f_t=" + format_double(f_t.value);
  if (f_t.penalty) text += " penalty=" + std::string(to_string(*f_t.penalty));
  text += " f_v=" + (f_v ? format_double(f_v->value) : std::string("na"));
  return text;
}

void write_generations_csv(std::ostream& out, std::span<const GenerationStats> generations) {
  out << "gen,best,mean,median,penalized\n";
  for (const auto& g : generations) {
    out << g.generation << ',' << format_double(g.best) << ',' << format_double(g.mean) << ','
        << format_double(g.median) << ',' << g.penalized << '\n';
  }
}

void write_selection_csv(std::ostream& out, const Selection& selection) {
  out << "rank,criterion,f_t,f_v,combined,strategy_file_line\n";
  std::size_t rank = 1;
  for (const auto& r : selection.ranked) {
    out << rank++ << ',' << to_string(selection.criterion) << ',' << format_double(r.f_t.value)
        << ',' << (r.f_v ? format_double(r.f_v->value) : std::string()) << ','
        << optional_text(r.combined) << ',' << population_line(r.individual) << '\n';
  }
}

void write_run(const fs::path& dir, const RunArtifact& run, const VariableUniverse& universe,
               const std::string& snapshot) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  open_out(dir / kSnapshotFile) << snapshot;
  {
    auto out = open_out(dir / kGenerationsFile);
    write_generations_csv(out, run.generations);
  }
  {
    auto out = open_out(dir / kPopulationFile);
    for (const auto& ind : run.population) {
      out << annotation(ind.f_t, ind.f_v) << '\n' << serialize(ind.tree, universe) << '\n';
    }
  }
  for (const Selection* s : {&run.selection_tr, &run.selection_trva}) {
    auto out = open_out(dir / selection_file(s->criterion));
    write_selection_csv(out, *s);
  }
}

std::vector<StrategyEntry> read_strategies(std::istream& in, const VariableUniverse& universe,
                                           const TreeLimits& limits, const std::string& source) {
  std::vector<StrategyEntry> entries;
  std::map<std::string, std::string> pending;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      pending = annotation_fields(std::string_view(line).substr(first + 1));
      continue;
    }
    StrategyEntry entry;
    entry.line = number;
    try {
      entry.tree = deserialize(line, universe, limits);
    } catch (const ParseError& e) {
      throw DataError(source + ":" + std::to_string(number) + ":" +
                      std::to_string(e.position() + 1) + ": " + e.detail());
    }
    const auto score = [&](const char* key) -> std::optional<double> {
      const auto it = pending.find(key);
      if (it == pending.end() || it->second == "na") return std::nullopt;
      const auto v = parse_double(it->second);
      if (!v) throw DataError(source + ":" + std::to_string(number - 1) + ": bad " + key + " value");
      return v;
    };
    entry.f_t = score("f_t");
    entry.f_v = score("f_v");
    pending.clear();
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<StrategyEntry> read_strategies(const fs::path& path, const VariableUniverse& universe,
                                           const TreeLimits& limits) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open strategy file " + path.string());
  return read_strategies(in, universe, limits, path.string());
}

std::vector<SelectionRow> read_selection_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  strip_cr(line);
  if (line != "rank,criterion,f_t,f_v,combined,strategy_file_line") {
    throw DataError(path.string() + ": unexpected header");
  }
  std::vector<SelectionRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const auto where = path.string() + ":" + std::to_string(number);
    if (f.size() != 6) throw DataError(where + ": expected 6 fields");
    const auto num = [&](const std::string& text) -> std::optional<double> {
      if (text.empty()) return std::nullopt;
      const auto v = parse_double(text);
      if (!v) throw DataError(where + ": bad number '" + text + "'");
      return v;
    };
    SelectionRow row;
    row.rank = static_cast<std::size_t>(num(f[0]).value_or(0));
    const auto ft = num(f[2]);
    if (!ft) throw DataError(where + ": missing f_t");
    row.f_t = *ft;
    row.f_v = num(f[3]);
    row.combined = num(f[4]);
    row.strategy_file_line = static_cast<std::size_t>(num(f[5]).value_or(0));
    rows.push_back(row);
  }
  return rows;
}

std::vector<StrategyEntry> load_selected(const fs::path& run_dir, Criterion criterion,
                                         const VariableUniverse& universe,
                                         const TreeLimits& limits) {
  const auto rows = read_selection_csv(run_dir / selection_file(criterion));
  const auto population = read_strategies(run_dir / kPopulationFile, universe, limits);
  std::map<std::size_t, const StrategyEntry*> by_line;
  for (const auto& e : population) by_line[e.line] = &e;
  std::vector<StrategyEntry> out;
  for (const auto& row : rows) {
    const auto it = by_line.find(row.strategy_file_line);
    if (it == by_line.end()) {
      throw DataError(run_dir.string() + ": selection refers to missing line " +
                      std::to_string(row.strategy_file_line));
    }
    StrategyEntry e = *it->second;
    e.f_t = row.f_t;
    e.f_v = row.f_v;
    out.push_back(std::move(e));
  }
  return out;
}

void write_strategies(std::ostream& out, std::span<const StrategyEntry> entries,
                      const VariableUniverse& universe) {
  std::size_t rank = 1;
  for (const auto& e : entries) {
    out << "# rank=" << rank++;
    out << " f_t=" << (e.f_t ? format_double(*e.f_t) : std::string("na"));
    out << " f_v=" << (e.f_v ? format_double(*e.f_v) : std::string("na")) << '\n';
    out << serialize(e.tree, universe) << '\n';
  }
}

}  // namespace fxgp
