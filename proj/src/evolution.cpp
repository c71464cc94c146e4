#include "fxgp/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "fxgp/error.hpp"

namespace fxgp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::array<NodeKind, 6> kBinaryKinds{NodeKind::Addition,    NodeKind::Subtraction,
                                               NodeKind::Multiplication, NodeKind::Division,
                                               NodeKind::GreaterThan, NodeKind::LessThan};
constexpr std::array<NodeKind, 3> kUnaryKinds{NodeKind::Sine, NodeKind::Cosine, NodeKind::Tangent};

std::span<const NodeKind> same_arity_kinds(NodeKind kind) {
  switch (arity(kind)) {
    case 1: return kUnaryKinds;
    case 2: return kBinaryKinds;
    default: return {};
  }
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Runs fn(i) for every i in `indices` on `workers` threads.
template <class Fn>
void parallel_for(std::span<const std::size_t> indices, unsigned workers, Fn&& fn) {
  if (workers <= 1 || indices.size() < 2) {
    for (std::size_t i : indices) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= indices.size()) return;
      try {
        fn(indices[k]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = indices.size();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<unsigned>(workers, static_cast<unsigned>(indices.size()));
  for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

GenerationStats summarize(std::size_t generation, std::span<const Individual> population) {
  std::vector<double> values;
  values.reserve(population.size());
  GenerationStats s;
  s.generation = generation;
  double sum = 0.0;
  for (const auto& ind : population) {
    values.push_back(ind.f_t.value);
    sum += ind.f_t.value;
    if (ind.f_t.penalty) ++s.penalized;
  }
  std::sort(values.begin(), values.end());
  s.best = values.front();
  s.mean = sum / static_cast<double>(values.size());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

/// Indices ordered by training fitness, ties by index.
std::vector<std::size_t> rank_by_fitness(std::span<const Individual> population) {
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return population[a].f_t.value < population[b].f_t.value;
  });
  return order;
}

}  // namespace

void validate(const GpConfig& c) {
  const auto fail = [](const std::string& msg) { throw ConfigError("gp config: " + msg); };
  if (c.population_size < 1) fail("population_size must be >= 1");
  if (c.generations < 1) fail("generations must be >= 1");
  if (!(c.crossover_rate >= 0.0 && c.crossover_rate <= 1.0)) fail("crossover_rate must lie in [0, 1]");
  if (!(c.mutation_rate >= 0.0 && c.mutation_rate <= 1.0)) fail("mutation_rate must lie in [0, 1]");
  if (c.max_depth < 1) fail("max_depth must be >= 1");
  if (c.max_length < 1) fail("max_length must be >= 1");
  if (c.elitism >= c.population_size) fail("elitism must be smaller than population_size");
  if (c.tournament_size < 1) fail("tournament_size must be >= 1");
  if (!(c.validated_fraction > 0.0 && c.validated_fraction <= 1.0)) {
    fail("validated_fraction must lie in (0, 1]");
  }
  if (c.selected_count < 1) fail("selected_count must be >= 1");
}

std::size_t validated_count(const GpConfig& config) {
  const double raw = config.validated_fraction * static_cast<double>(config.population_size);
  // Guard against 0.1 * 200 = 20.000000000000004 rounding up to 21.
  const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(n, 1, config.population_size);
}

Rng stream_rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t slot) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ generation) ^ slot));
}

std::size_t tournament_select(Rng& rng, std::span<const Individual> population,
                              std::size_t size) {
  if (population.empty()) throw InvariantError("tournament on an empty population");
  std::size_t best = uniform_index(rng, population.size());
  for (std::size_t k = 1; k < size; ++k) {
    const std::size_t c = uniform_index(rng, population.size());
    if (population[c].f_t.value < population[best].f_t.value) best = c;
  }
  return best;
}

ExprTree crossover(Rng& rng, const ExprTree& a, const ExprTree& b, const TreeLimits& limits) {
  constexpr int kAttempts = 20;
  std::vector<int> donor_depth(b.length());
  for (std::size_t j = 0; j < b.length(); ++j) donor_depth[j] = b.subtree_depth(j);
  std::vector<std::size_t> compatible;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const std::size_t at = uniform_index(rng, a.length());
    const int depth_at = a.node_depth(at);
    const std::size_t rest = a.length() - a.subtree_size(at);
    compatible.clear();
    for (std::size_t j = 0; j < b.length(); ++j) {
      if (depth_at - 1 + donor_depth[j] <= limits.max_depth &&
          static_cast<int>(rest + b.subtree_size(j)) <= limits.max_length) {
        compatible.push_back(j);
      }
    }
    if (!compatible.empty()) {
      return a.replace_subtree(at, b, compatible[uniform_index(rng, compatible.size())]);
    }
  }
  return a;
}

ExprTree mutate(Rng& rng, const ExprTree& tree, const TreeLimits& limits,
                std::size_t variable_count, MutationKind* applied) {
  std::vector<std::size_t> swappable;  // non-terminals with a same-arity alternative
  std::vector<std::size_t> terminals;
  for (std::size_t i = 0; i < tree.length(); ++i) {
    const NodeKind k = tree.node(i).kind;
    if (is_terminal(k)) {
      terminals.push_back(i);
    } else if (same_arity_kinds(k).size() > 1) {
      swappable.push_back(i);
    }
  }
  std::vector<MutationKind> kinds;
  if (!swappable.empty()) kinds.push_back(MutationKind::ChangeKind);
  kinds.push_back(MutationKind::PerturbTerminal);
  if (tree.length() > 1) {
    kinds.push_back(MutationKind::RemoveSubtree);
    kinds.push_back(MutationKind::ReplaceSubtree);
  }
  const MutationKind kind = kinds[uniform_index(rng, kinds.size())];
  if (applied) *applied = kind;

  std::normal_distribution<double> noise(0.0, 1.0);
  switch (kind) {
    case MutationKind::ChangeKind: {
      const std::size_t i = swappable[uniform_index(rng, swappable.size())];
      const NodeKind current = tree.node(i).kind;
      std::vector<NodeKind> options;
      for (NodeKind k : same_arity_kinds(current)) {
        if (k != current) options.push_back(k);
      }
      return tree.with_node(i, Node::function(options[uniform_index(rng, options.size())]));
    }
    case MutationKind::PerturbTerminal: {
      const std::size_t i = terminals[uniform_index(rng, terminals.size())];
      Node n = tree.node(i);
      if (n.kind == NodeKind::Constant && std::bernoulli_distribution(0.5)(rng)) {
        n.value += noise(rng);
      } else {
        n.weight += noise(rng);
      }
      return tree.with_node(i, n);
    }
    case MutationKind::RemoveSubtree: {
      const std::size_t i = 1 + uniform_index(rng, tree.length() - 1);
      const ExprTree leaf = ExprTree::from_prefix({random_terminal(rng, variable_count)});
      return tree.replace_subtree(i, leaf, 0);
    }
    case MutationKind::ReplaceSubtree: {
      const std::size_t i = 1 + uniform_index(rng, tree.length() - 1);
      const TreeLimits room{limits.max_depth - tree.node_depth(i) + 1,
                            limits.max_length -
                                static_cast<int>(tree.length() - tree.subtree_size(i))};
      const ExprTree fresh = generate_random(rng, room, variable_count);
      return tree.replace_subtree(i, fresh, 0);
    }
  }
  throw InvariantError("unhandled mutation kind");
}

FitnessScore evaluate_fitness(const ExprTree& tree, const Partition& partition,
                              std::size_t traded_instrument, const SimConfig& sim,
                              std::size_t min_trades) {
  SimOptions options;
  options.record_orders = false;
  return compute_fitness(run_simulation(tree, partition, traded_instrument, sim, options),
                         min_trades);
}

RunArtifact evolve(const GpConfig& config, const DatasetSplit& split,
                   std::size_t traded_instrument, const SimConfig& sim,
                   const EvolveOptions& options) {
  validate(config);
  for (const Partition* p : {&split.training, &split.validation}) {
    if (!p->data || p->empty()) throw DataError("evolution needs nonempty partitions");
  }
  const AlignedDataset& data = *split.training.data;
  if (traded_instrument >= data.instrument_count()) {
    throw DataError("traded instrument is not in the dataset basket");
  }
  const VariableUniverse universe(data.instruments());
  const TreeLimits limits = config.limits();
  const std::size_t n = config.population_size;

  RunArtifact run;
  run.config = config;

  const auto evaluate_all = [&](std::vector<Individual>& pop, std::span<const std::size_t> which) {
    parallel_for(which, options.workers, [&](std::size_t i) {
      pop[i].f_t = evaluate_fitness(pop[i].tree, split.training, traded_instrument, sim,
                                    config.min_trades);
    });
  };
  const auto record = [&](std::size_t generation, std::span<const Individual> pop) {
    run.generations.push_back(summarize(generation, pop));
    if (options.on_generation) options.on_generation(run.generations.back());
  };

  std::vector<Individual> population(n);
  for (std::size_t slot = 0; slot < n; ++slot) {
    Rng rng = stream_rng(config.seed, 0, slot);
    population[slot].tree = generate_random(rng, limits, universe.size());
  }
  {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    evaluate_all(population, all);
  }
  record(0, population);

  for (std::size_t g = 1; g <= config.generations; ++g) {
    const auto order = rank_by_fitness(population);
    std::vector<Individual> next(n);
    for (std::size_t e = 0; e < config.elitism; ++e) next[e] = population[order[e]];

    std::vector<std::size_t> pending;
    for (std::size_t slot = config.elitism; slot < n; ++slot) {
      Rng rng = stream_rng(config.seed, g, slot);
      const std::size_t first = tournament_select(rng, population, config.tournament_size);
      const Individual& parent = population[first];
      ExprTree child = parent.tree;
      if (std::bernoulli_distribution(config.crossover_rate)(rng)) {
        const std::size_t second = tournament_select(rng, population, config.tournament_size);
        child = crossover(rng, child, population[second].tree, limits);
      }
      if (std::bernoulli_distribution(config.mutation_rate)(rng)) {
        child = mutate(rng, child, limits, universe.size());
      }
      if (!child.within(limits)) throw InvariantError("offspring violates tree limits");
      if (child == parent.tree) {
        next[slot] = parent;
      } else {
        next[slot].tree = std::move(child);
        pending.push_back(slot);
      }
    }
    evaluate_all(next, pending);
    population = std::move(next);
    record(g, population);
    if (run.generations[g].best > run.generations[g - 1].best) {
      throw InvariantError("best training fitness increased despite elitism");
    }
  }

  // Validation pass over the top fraction by training fitness.
  std::vector<std::string> text(n);
  for (std::size_t i = 0; i < n; ++i) text[i] = serialize(population[i].tree, universe);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (population[a].f_t.value != population[b].f_t.value) {
      return population[a].f_t.value < population[b].f_t.value;
    }
    return text[a] < text[b];
  });
  const std::vector<std::size_t> validated(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(validated_count(config)));
  parallel_for(validated, options.workers, [&](std::size_t i) {
    population[i].f_v = evaluate_fitness(population[i].tree, split.validation, traded_instrument,
                                         sim, config.min_trades);
  });

  // One record per distinct strategy; identical trees score identically.
  std::vector<SelectionRecord> records;
  std::map<std::string, bool> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.emplace(text[i], true).second) continue;
    records.push_back(make_record(i, text[i], population[i].f_t, population[i].f_v));
  }
  run.selection_tr = select(records, Criterion::Tr, config.selected_count);
  run.selection_trva = select(records, Criterion::TrVa, config.selected_count);
  run.population = std::move(population);
  return run;
}

}  // namespace fxgp
