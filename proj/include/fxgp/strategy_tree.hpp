#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fxgp/market_data.hpp"

namespace fxgp {

enum class NodeKind : std::uint8_t {
  Addition,
  Subtraction,
  Multiplication,
  Division,
  Sine,
  Cosine,
  Tangent,
  IfThenElse,
  GreaterThan,
  LessThan,
  Variable,
  Constant,
};

inline constexpr std::size_t kNodeKindCount = 12;

constexpr int arity(NodeKind kind) {
  switch (kind) {
    case NodeKind::Sine:
    case NodeKind::Cosine:
    case NodeKind::Tangent: return 1;
    case NodeKind::IfThenElse: return 3;
    case NodeKind::Variable:
    case NodeKind::Constant: return 0;
    default: return 2;
  }
}

constexpr bool is_terminal(NodeKind kind) { return arity(kind) == 0; }

/// Prefix-notation symbol ("add", "var", ...).
std::string_view symbol(NodeKind kind);
std::optional<NodeKind> kind_from_symbol(std::string_view symbol);

/// One tree node. `variable` is a dataset column for Variable nodes; `value`
/// is the literal for Constant nodes; both terminals carry `weight`.
struct Node {
  NodeKind kind = NodeKind::Constant;
  std::uint16_t variable = 0;
  double value = 0.0;
  double weight = 1.0;

  static Node function(NodeKind kind) { return Node{kind, 0, 0.0, 1.0}; }
  static Node var(std::uint16_t column, double weight) {
    return Node{NodeKind::Variable, column, 0.0, weight};
  }
  static Node constant(double value, double weight) {
    return Node{NodeKind::Constant, 0, value, weight};
  }

  friend bool operator==(const Node&, const Node&) = default;
};

struct TreeLimits {
  int max_depth = 8;
  int max_length = 60;
};

/// An evolvable expression stored as a prefix-ordered node array. A subtree
/// rooted at index i spans [i, i + subtree_size(i)).
class ExprTree {
 public:
  /// Single Constant(0, weight 1) node.
  ExprTree();

  /// Validates arity (throws ParseError at the offending node index) and
  /// computes cached sizes and depth.
  static ExprTree from_prefix(std::vector<Node> nodes);

  std::size_t length() const noexcept { return nodes_.size(); }
  int depth() const noexcept { return depth_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t subtree_size(std::size_t i) const { return sizes_[i]; }
  std::span<const std::uint16_t> subtree_sizes() const noexcept { return sizes_; }

  /// Depth of node i counted from the root (root = 1).
  int node_depth(std::size_t i) const;

  /// Depth of the subtree rooted at i (a leaf has depth 1).
  int subtree_depth(std::size_t i) const;

  bool within(const TreeLimits& limits) const {
    return depth_ <= limits.max_depth && static_cast<int>(length()) <= limits.max_length;
  }

  /// Copy with the subtree at `at` replaced by `donor`'s subtree at `donor_at`.
  ExprTree replace_subtree(std::size_t at, const ExprTree& donor, std::size_t donor_at) const;

  /// Copy with node i replaced by `node`, which must have the same arity.
  ExprTree with_node(std::size_t i, const Node& node) const;

  friend bool operator==(const ExprTree& a, const ExprTree& b) { return a.nodes_ == b.nodes_; }

 private:
  void rebuild();

  std::vector<Node> nodes_;
  std::vector<std::uint16_t> sizes_;
  int depth_ = 1;
};

/// Protected-division threshold: |denominator| below this yields 1.0.
inline constexpr double kDivisionGuard = 1e-12;

/// Evaluates the tree on one dataset row. Total: always returns a finite
/// value for finite input.
double evaluate(const ExprTree& tree, std::span<const double> row);

/// Same, also listing the indices of the nodes actually evaluated.
double evaluate(const ExprTree& tree, std::span<const double> row,
                std::vector<std::size_t>& visited);

/// Names the dataset columns ("EUR.USD.O", ...) that Variable nodes index.
class VariableUniverse {
 public:
  explicit VariableUniverse(std::vector<InstrumentId> instruments);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t instrument_count() const noexcept { return instruments_.size(); }
  const std::vector<InstrumentId>& instruments() const noexcept { return instruments_; }
  const std::string& name(std::size_t column) const { return names_.at(column); }
  std::optional<std::size_t> find(std::string_view name) const;

  static std::size_t instrument_of(std::size_t column) { return column / kFieldsPerInstrument; }
  static PriceField field_of(std::size_t column) {
    return static_cast<PriceField>(column % kFieldsPerInstrument);
  }

 private:
  std::vector<InstrumentId> instruments_;
  std::vector<std::string> names_;
};

using Rng = std::mt19937_64;

/// Random terminal: Variable or Constant with equal odds; column uniform,
/// constant value uniform in [-100, 100], weight uniform in [-10, 10].
Node random_terminal(Rng& rng, std::size_t variable_count);

/// Probabilistic tree growth under `limits`; see README for the procedure.
ExprTree generate_random(Rng& rng, const TreeLimits& limits, std::size_t variable_count);

/// Canonical prefix form, e.g. `(mul (var USD.JPY.C w=1.5) (const 0.25 w=-2))`.
std::string serialize(const ExprTree& tree, const VariableUniverse& universe);

/// Parses one serialized tree. Throws ParseError (with a character offset)
/// on syntax, arity, symbol or limit violations.
ExprTree deserialize(std::string_view text, const VariableUniverse& universe,
                     const TreeLimits& limits = {});

struct StructureStats {
  std::size_t trees = 0;
  double mean_length = 0.0;
  double sd_length = 0.0;
  double mean_variables = 0.0;
  double sd_variables = 0.0;
  std::size_t variable_nodes = 0;
  /// Relative frequency of each basket instrument among Variable nodes.
  std::vector<double> instrument_frequency;
  /// Relative frequency of O, H, L, C among Variable nodes.
  std::array<double, 4> field_frequency{};
};

/// Throws DataError on an empty input.
StructureStats structure_stats(std::span<const ExprTree> trees, const VariableUniverse& universe);

}  // namespace fxgp
