#include "fxgp/strategy_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fxgp/error.hpp"
#include "fxgp/numeric_text.hpp"

namespace fxgp {

namespace {

constexpr std::array<std::string_view, kNodeKindCount> kSymbols{
    "add", "sub", "mul", "div", "sin", "cos", "tan", "if", "gt", "lt", "var", "const"};

constexpr std::array<NodeKind, kNodeKindCount> kAllKinds{
    NodeKind::Addition,    NodeKind::Subtraction, NodeKind::Multiplication, NodeKind::Division,
    NodeKind::Sine,        NodeKind::Cosine,      NodeKind::Tangent,        NodeKind::IfThenElse,
    NodeKind::GreaterThan, NodeKind::LessThan,    NodeKind::Variable,       NodeKind::Constant};

double finite_or_zero(double x) { return std::isfinite(x) ? x : 0.0; }

/// `visit` is called with the index of every node evaluated.
template <class Visit>
double eval_node(const Node* nodes, const std::uint16_t* sizes, std::size_t i, const double* row,
                 Visit& visit) {
  visit(i);
  const Node& n = nodes[i];
  const auto child = [&](std::size_t at) { return eval_node(nodes, sizes, at, row, visit); };
  switch (n.kind) {
    case NodeKind::Variable: return finite_or_zero(n.weight * row[n.variable]);
    case NodeKind::Constant: return finite_or_zero(n.weight * n.value);
    case NodeKind::Sine: return std::sin(child(i + 1));
    case NodeKind::Cosine: return std::cos(child(i + 1));
    case NodeKind::Tangent: return finite_or_zero(std::tan(child(i + 1)));
    case NodeKind::IfThenElse: {
      const std::size_t then_at = i + 1 + sizes[i + 1];
      const std::size_t else_at = then_at + sizes[then_at];
      return child(i + 1) > 0.0 ? child(then_at) : child(else_at);
    }
    default: break;
  }
  const double a = child(i + 1);
  const double b = child(i + 1 + sizes[i + 1]);
  switch (n.kind) {
    case NodeKind::Addition: return finite_or_zero(a + b);
    case NodeKind::Subtraction: return finite_or_zero(a - b);
    case NodeKind::Multiplication: return finite_or_zero(a * b);
    case NodeKind::Division: return std::abs(b) < kDivisionGuard ? 1.0 : finite_or_zero(a / b);
    case NodeKind::GreaterThan: return a > b ? 1.0 : -1.0;
    case NodeKind::LessThan: return a < b ? 1.0 : -1.0;
    default: break;
  }
  throw InvariantError("unhandled node kind");
}

}  // namespace

std::string_view symbol(NodeKind kind) { return kSymbols[static_cast<std::size_t>(kind)]; }

std::optional<NodeKind> kind_from_symbol(std::string_view sym) {
  for (std::size_t k = 0; k < kNodeKindCount; ++k) {
    if (kSymbols[k] == sym) return static_cast<NodeKind>(k);
  }
  return std::nullopt;
}

ExprTree::ExprTree() : nodes_{Node::constant(0.0, 1.0)}, sizes_{1}, depth_(1) {}

ExprTree ExprTree::from_prefix(std::vector<Node> nodes) {
  if (nodes.empty()) throw ParseError(0, "empty tree");
  if (nodes.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ParseError(0, "tree too long");
  }
  // Walk the prefix sequence counting open child slots.
  std::size_t open = 1;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (open == 0) throw ParseError(i, "trailing nodes after a complete tree");
    open = open - 1 + static_cast<std::size_t>(arity(nodes[i].kind));
  }
  if (open != 0) throw ParseError(nodes.size(), "tree is missing " + std::to_string(open) + " children");
  ExprTree t;
  t.nodes_ = std::move(nodes);
  t.rebuild();
  return t;
}

void ExprTree::rebuild() {
  const std::size_t n = nodes_.size();
  sizes_.assign(n, 1);
  std::vector<int> depth(n, 1);
  // Reverse scan: children of i are laid out immediately after it.
  for (std::size_t i = n; i-- > 0;) {
    std::size_t child = i + 1;
    std::size_t size = 1;
    int d = 0;
    for (int c = 0; c < arity(nodes_[i].kind); ++c) {
      size += sizes_[child];
      d = std::max(d, depth[child]);
      child += sizes_[child];
    }
    sizes_[i] = static_cast<std::uint16_t>(size);
    depth[i] = d + 1;
  }
  depth_ = depth[0];
}

int ExprTree::node_depth(std::size_t target) const {
  std::size_t i = 0;
  int d = 1;
  while (i != target) {
    std::size_t child = i + 1;
    while (child + sizes_[child] <= target) child += sizes_[child];
    i = child;
    ++d;
  }
  return d;
}

int ExprTree::subtree_depth(std::size_t root) const {
  int best = 1;
  // Depth relative to root for every node in the subtree, via an explicit stack.
  std::vector<std::pair<std::size_t, int>> stack{{root, 1}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    std::size_t child = i + 1;
    for (int c = 0; c < arity(nodes_[i].kind); ++c) {
      stack.emplace_back(child, d + 1);
      child += sizes_[child];
    }
  }
  return best;
}

ExprTree ExprTree::replace_subtree(std::size_t at, const ExprTree& donor,
                                   std::size_t donor_at) const {
  std::vector<Node> out;
  out.reserve(length() - sizes_[at] + donor.sizes_[donor_at]);
  out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(at));
  const auto d0 = donor.nodes_.begin() + static_cast<std::ptrdiff_t>(donor_at);
  out.insert(out.end(), d0, d0 + donor.sizes_[donor_at]);
  out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(at + sizes_[at]),
             nodes_.end());
  ExprTree t;
  t.nodes_ = std::move(out);
  t.rebuild();
  return t;
}

ExprTree ExprTree::with_node(std::size_t i, const Node& node) const {
  if (arity(node.kind) != arity(nodes_[i].kind)) {
    throw InvariantError("with_node must preserve arity");
  }
  ExprTree t = *this;
  t.nodes_[i] = node;
  return t;
}

double evaluate(const ExprTree& tree, std::span<const double> row) {
  const auto ignore = [](std::size_t) {};
  return eval_node(tree.nodes().data(), tree.subtree_sizes().data(), 0, row.data(), ignore);
}

double evaluate(const ExprTree& tree, std::span<const double> row,
                std::vector<std::size_t>& visited) {
  visited.clear();
  auto record = [&](std::size_t i) { visited.push_back(i); };
  return eval_node(tree.nodes().data(), tree.subtree_sizes().data(), 0, row.data(), record);
}

VariableUniverse::VariableUniverse(std::vector<InstrumentId> instruments)
    : instruments_(std::move(instruments)) {
  for (const auto& id : instruments_) {
    for (std::size_t f = 0; f < kFieldsPerInstrument; ++f) {
      names_.push_back(id.str() + "." + field_code(static_cast<PriceField>(f)));
    }
  }
}

std::optional<std::size_t> VariableUniverse::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

namespace {

Node make_terminal(NodeKind kind, Rng& rng, std::size_t variable_count) {
  std::uniform_real_distribution<double> weight(-10.0, 10.0);
  if (kind == NodeKind::Variable) {
    const auto c = static_cast<std::uint16_t>(
        std::uniform_int_distribution<std::size_t>(0, variable_count - 1)(rng));
    return Node::var(c, weight(rng));
  }
  const double value = std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
  return Node::constant(value, weight(rng));
}

}  // namespace

Node random_terminal(Rng& rng, std::size_t variable_count) {
  const bool variable = std::bernoulli_distribution(0.5)(rng);
  return make_terminal(variable ? NodeKind::Variable : NodeKind::Constant, rng, variable_count);
}

ExprTree generate_random(Rng& rng, const TreeLimits& limits, std::size_t variable_count) {
  if (variable_count == 0) throw InvariantError("variable universe is empty");
  if (limits.max_depth < 1 || limits.max_length < 1) throw InvariantError("limits must be >= 1");
  const int lo = std::min(3, limits.max_length);
  const int target = std::uniform_int_distribution<int>(lo, limits.max_length)(rng);

  // Grow a pointer tree first, then flatten to prefix order.
  struct Proto {
    Node node;
    std::vector<std::size_t> children;
  };
  struct Slot {
    std::size_t parent;  // index into protos, or npos for the root
    int depth;
  };
  constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);
  std::vector<Proto> protos;
  std::vector<Slot> open{{kNoParent, 1}};
  int committed = 1;  // placed nodes plus open slots

  std::vector<NodeKind> feasible;
  while (!open.empty()) {
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng);
    const Slot slot = open[pick];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

    feasible.clear();
    for (NodeKind k : kAllKinds) {
      const int a = arity(k);
      if (a == 0 || (slot.depth < limits.max_depth && committed + a <= target)) {
        feasible.push_back(k);
      }
    }
    const NodeKind kind =
        feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)];

    const Node node =
        is_terminal(kind) ? make_terminal(kind, rng, variable_count) : Node::function(kind);
    const std::size_t id = protos.size();
    protos.push_back(Proto{node, {}});
    if (slot.parent != kNoParent) protos[slot.parent].children.push_back(id);
    for (int c = 0; c < arity(kind); ++c) open.push_back(Slot{id, slot.depth + 1});
    committed += arity(kind);
  }

  std::vector<Node> prefix;
  prefix.reserve(protos.size());
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    prefix.push_back(protos[id].node);
    for (auto it = protos[id].children.rbegin(); it != protos[id].children.rend(); ++it) {
      stack.push_back(*it);
    }
  }
  return ExprTree::from_prefix(std::move(prefix));
}

std::string serialize(const ExprTree& tree, const VariableUniverse& universe) {
  std::string out;
  std::vector<int> remaining;  // children still to emit for each open paren
  for (const Node& n : tree.nodes()) {
    if (!remaining.empty()) out += ' ';
    out += '(';
    out += symbol(n.kind);
    if (n.kind == NodeKind::Variable) {
      out += ' ';
      out += universe.name(n.variable);
      out += " w=";
      out += format_double(n.weight);
    } else if (n.kind == NodeKind::Constant) {
      out += ' ';
      out += format_double(n.value);
      out += " w=";
      out += format_double(n.weight);
    }
    if (is_terminal(n.kind)) {
      out += ')';
      while (!remaining.empty() && --remaining.back() == 0) {
        out += ')';
        remaining.pop_back();
      }
    } else {
      remaining.push_back(arity(n.kind));
    }
  }
  return out;
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const VariableUniverse& universe)
      : text_(text), universe_(universe) {}

  std::vector<Node> parse_all() {
    parse_expr();
    skip_space();
    if (pos_ != text_.size()) throw ParseError(pos_, "unexpected text after expression");
    return std::move(nodes_);
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\r' || text_[pos_] == '\n')) {
      ++pos_;
    }
  }

  std::string_view token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' &&
           text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != '\r' && text_[pos_] != '\n') {
      ++pos_;
    }
    if (start == pos_) throw ParseError(start, "expected a token");
    return text_.substr(start, pos_ - start);
  }

  double number(std::string_view tok, std::size_t at) {
    const auto v = parse_double(tok);
    if (!v || !std::isfinite(*v)) throw ParseError(at, "invalid number '" + std::string(tok) + "'");
    return *v;
  }

  double weight() {
    skip_space();
    const std::size_t at = pos_;
    const auto tok = token();
    if (tok.substr(0, 2) != "w=") throw ParseError(at, "expected w=<weight>");
    return number(tok.substr(2), at + 2);
  }

  void expect_close(std::size_t open_at) {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unbalanced '(' opened at " + std::to_string(open_at));
    if (text_[pos_] != ')') throw ParseError(pos_, "expected ')'");
    ++pos_;
  }

  void parse_expr() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of text");
    if (text_[pos_] != '(') throw ParseError(pos_, "expected '('");
    const std::size_t open_at = pos_++;
    skip_space();
    const std::size_t sym_at = pos_;
    const auto sym = token();
    const auto kind = kind_from_symbol(sym);
    if (!kind) throw ParseError(sym_at, "unknown symbol '" + std::string(sym) + "'");

    if (*kind == NodeKind::Variable) {
      skip_space();
      const std::size_t at = pos_;
      const auto name = token();
      const auto col = universe_.find(name);
      if (!col) throw ParseError(at, "unknown variable '" + std::string(name) + "'");
      nodes_.push_back(Node::var(static_cast<std::uint16_t>(*col), weight()));
      expect_close(open_at);
      return;
    }
    if (*kind == NodeKind::Constant) {
      skip_space();
      const std::size_t at = pos_;
      const double value = number(token(), at);
      nodes_.push_back(Node::constant(value, weight()));
      expect_close(open_at);
      return;
    }

    nodes_.push_back(Node::function(*kind));
    int children = 0;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) throw ParseError(pos_, "unbalanced '(' opened at " + std::to_string(open_at));
      if (text_[pos_] == ')') break;
      parse_expr();
      ++children;
    }
    if (children != arity(*kind)) {
      throw ParseError(sym_at, "'" + std::string(sym) + "' takes " + std::to_string(arity(*kind)) +
                                   " children, got " + std::to_string(children));
    }
    ++pos_;
  }

  std::string_view text_;
  const VariableUniverse& universe_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
};

}  // namespace

ExprTree deserialize(std::string_view text, const VariableUniverse& universe,
                     const TreeLimits& limits) {
  auto nodes = Parser(text, universe).parse_all();
  ExprTree tree = ExprTree::from_prefix(std::move(nodes));
  if (static_cast<int>(tree.length()) > limits.max_length) {
    throw ParseError(0, "tree length " + std::to_string(tree.length()) + " exceeds limit " +
                            std::to_string(limits.max_length));
  }
  if (tree.depth() > limits.max_depth) {
    throw ParseError(0, "tree depth " + std::to_string(tree.depth()) + " exceeds limit " +
                            std::to_string(limits.max_depth));
  }
  return tree;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

StructureStats structure_stats(std::span<const ExprTree> trees, const VariableUniverse& universe) {
  if (trees.empty()) throw DataError("structure statistics need at least one tree");
  StructureStats s;
  s.trees = trees.size();
  s.instrument_frequency.assign(universe.instrument_count(), 0.0);
  std::vector<double> lengths, var_counts;
  for (const auto& t : trees) {
    lengths.push_back(static_cast<double>(t.length()));
    std::size_t vars = 0;
    for (const Node& n : t.nodes()) {
      if (n.kind != NodeKind::Variable) continue;
      ++vars;
      s.instrument_frequency[VariableUniverse::instrument_of(n.variable)] += 1.0;
      s.field_frequency[static_cast<std::size_t>(VariableUniverse::field_of(n.variable))] += 1.0;
    }
    var_counts.push_back(static_cast<double>(vars));
    s.variable_nodes += vars;
  }
  std::tie(s.mean_length, s.sd_length) = mean_sd(lengths);
  std::tie(s.mean_variables, s.sd_variables) = mean_sd(var_counts);
  if (s.variable_nodes > 0) {
    const double total = static_cast<double>(s.variable_nodes);
    for (double& f : s.instrument_frequency) f /= total;
    for (double& f : s.field_frequency) f /= total;
  }
  return s;
}

}  // namespace fxgp
