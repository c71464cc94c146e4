#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

#include "fxgp/analytics.hpp"
#include "fxgp/artifact.hpp"
#include "fxgp/config.hpp"
#include "fxgp/error.hpp"
#include "fxgp/evolution.hpp"
#include "fxgp/scoring.hpp"
#include "fxgp/strategy_tree.hpp"

namespace py = pybind11;
using namespace fxgp;

namespace {

py::object from_json(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

/// A loaded configuration together with its dataset.
class Experiment {
 public:
  explicit Experiment(const std::filesystem::path& config_path)
      : config_(load_config(config_path)), data_(load_data(config_.data)),
        universe_(data_.data->instruments()) {}

  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < universe_.size(); ++i) out.push_back(universe_.name(i));
    return out;
  }

  std::size_t days(const std::string& partition) const {
    return data_.split.get(parse_partition_name(partition)).day_count();
  }

  ExprTree parse(const std::string& text) const {
    return deserialize(text, universe_, config_.gp.limits());
  }

  py::dict simulate(const std::string& strategy, const std::string& partition) const {
    const Partition& part = data_.split.get(parse_partition_name(partition));
    const SimulationResult r = run_simulation(parse(strategy), part, data_.traded, config_.sim);
    const FitnessScore f = compute_fitness(r, config_.gp.min_trades);
    py::dict out;
    out["final_nav"] = r.final_nav;
    out["return"] = compute_return(r);
    out["fitness"] = f.value;
    out["penalty"] = f.penalty ? py::object(py::str(std::string(to_string(*f.penalty)))) : py::none();
    out["trades"] = r.trade_count;
    out["winning_ratio"] = r.winning_ratio();
    out["long_ratio"] = r.long_ratio();
    out["orders"] = r.orders.size();
    std::vector<double> eod;
    for (const auto& d : r.eod_nav) eod.push_back(d.nav);
    out["eod_nav"] = eod;
    out["bankrupt"] = r.bankrupt;
    return out;
  }

  py::object report(const std::string& strategy, const std::string& partition) const {
    const Partition& part = data_.split.get(parse_partition_name(partition));
    const SimulationResult r = run_simulation(parse(strategy), part, data_.traded, config_.sim);
    return from_json(to_json(make_report("strategy", r, instrument_daily_series(part, data_.traded))));
  }

  py::dict evolve(std::optional<std::uint64_t> seed, unsigned workers,
                  std::optional<std::size_t> population, std::optional<std::size_t> generations) const {
    RunConfig config = config_;
    if (seed) config.seed = *seed;
    if (population) config.gp.population_size = *population;
    if (generations) config.gp.generations = *generations;
    resolve_seed(config);
    EvolveOptions options;
    options.workers = workers;
    RunArtifact run;
    {
      py::gil_scoped_release release;
      run = fxgp::evolve(config.gp, data_.split, data_.traded, config.sim, options);
    }
    py::list gens;
    for (const auto& g : run.generations) {
      py::dict d;
      d["gen"] = g.generation;
      d["best"] = g.best;
      d["mean"] = g.mean;
      d["median"] = g.median;
      d["penalized"] = g.penalized;
      gens.append(d);
    }
    const auto selection = [&](const Selection& s) {
      py::list rows;
      for (const auto& r : s.ranked) {
        py::dict d;
        d["strategy"] = r.strategy;
        d["f_t"] = r.f_t.value;
        d["f_v"] = r.f_v ? py::object(py::float_(r.f_v->value)) : py::none();
        d["combined"] = r.combined ? py::object(py::float_(*r.combined)) : py::none();
        rows.append(d);
      }
      return rows;
    };
    std::size_t validated = 0;
    for (const auto& ind : run.population) validated += ind.f_v ? 1 : 0;
    py::dict out;
    out["seed"] = *config.seed;
    out["generations"] = gens;
    out["validated"] = validated;
    out["selection_tr"] = selection(run.selection_tr);
    out["selection_trva"] = selection(run.selection_trva);
    return out;
  }

 private:
  RunConfig config_;
  LoadedData data_;
  VariableUniverse universe_;
};

}  // namespace

PYBIND11_MODULE(_fxgp, m) {
  m.doc() = "GP evolution and FX backtesting core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("fitness_from_return", [](double r) { return std::exp(-r); }, py::arg("ret"));
  m.def("combined_score", &combined_score, py::arg("f_t"), py::arg("f_v"));
  m.def("binom_p", &binom_p, py::arg("n"), py::arg("k"));
  m.def("max_drawdown", [](const std::vector<double>& s) { return max_drawdown(s); },
        py::arg("series"));
  m.def("pearson",
        [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
        py::arg("xs"), py::arg("ys"));
  m.def("moving_average",
        [](const std::vector<double>& s, std::size_t window) { return moving_average(s, window).value; },
        py::arg("series"), py::arg("window") = 30);

  m.def(
      "random_tree",
      [](std::uint64_t seed, const std::vector<std::string>& instruments, int max_depth,
         int max_length) {
        std::vector<InstrumentId> ids;
        for (const auto& s : instruments) ids.push_back(InstrumentId::parse(s));
        const VariableUniverse universe(ids);
        Rng rng(seed);
        return serialize(generate_random(rng, TreeLimits{max_depth, max_length}, universe.size()),
                         universe);
      },
      py::arg("seed"), py::arg("instruments"), py::arg("max_depth") = 8, py::arg("max_length") = 60);

  m.def(
      "tree_shape",
      [](const std::string& text, const std::vector<std::string>& instruments) {
        std::vector<InstrumentId> ids;
        for (const auto& s : instruments) ids.push_back(InstrumentId::parse(s));
        const VariableUniverse universe(ids);
        const ExprTree t = deserialize(text, universe);
        return py::make_tuple(t.length(), t.depth(), serialize(t, universe));
      },
      py::arg("text"), py::arg("instruments"));

  py::class_<Experiment>(m, "Experiment")
      .def(py::init<const std::filesystem::path&>(), py::arg("config"))
      .def_property_readonly("variables", &Experiment::variables)
      .def("days", &Experiment::days, py::arg("partition"))
      .def("simulate", &Experiment::simulate, py::arg("strategy"), py::arg("partition") = "training")
      .def("report", &Experiment::report, py::arg("strategy"), py::arg("partition") = "oos")
      .def("evolve", &Experiment::evolve, py::arg("seed") = py::none(), py::arg("workers") = 1,
           py::arg("population") = py::none(), py::arg("generations") = py::none());
}
