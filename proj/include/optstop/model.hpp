#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optstop/arithmetic.hpp"
#include "optstop/errors.hpp"

namespace optstop {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

// EXACT_TREE: node identity encodes the whole path history, so node = atom of
// F_t and any per-node map is adapted. MARKOV_LATTICE: recombining, valid only
// for (level, state) rewards; node identity under-represents F_t there.
enum class ModelKind { ExactTree, MarkovLattice };

enum class Decision : std::uint8_t { Stop, Continue };

inline const char* to_string(ModelKind k) {
  return k == ModelKind::ExactTree ? "exact_tree" : "markov_lattice";
}

// Uniform grid on [0, horizon]; times[0] = 0, times[n_steps] = horizon.
struct TimeGrid {
  int n_steps = 1;
  double horizon = 1.0;
  std::vector<double> times;

  TimeGrid() : TimeGrid(1, 1.0) {}
  TimeGrid(int n, double T) : n_steps(n), horizon(T) {
    if (n < 1) fail(Errc::ParameterOutOfRange, "time grid needs n_steps >= 1");
    if (!(T > 0.0)) fail(Errc::ParameterOutOfRange, "horizon must be positive");
    times.resize(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
      times[static_cast<std::size_t>(i)] = T * static_cast<double>(i) / static_cast<double>(n);
    times.back() = T;
  }
};

template <class T>
struct Edge {
  NodeId to = kNoNode;
  T prob{};
};

// A family of values indexed by node; "defined on every node" means
// size() == model.n_nodes().
template <class T>
using AdaptedFamily = std::vector<T>;

// Per-node stop/continue map. With every terminal node mapped to Stop this
// induces a stopping time on every path: theta(path) = first Stop along it.
struct StoppingRule {
  std::vector<Decision> decision;

  bool stops_at(NodeId n) const { return decision[n] == Decision::Stop; }

  template <class M>
  static StoppingRule immediate(const M& model) {
    return StoppingRule{std::vector<Decision>(model.n_nodes(), Decision::Stop)};
  }
  template <class M>
  static StoppingRule at_horizon(const M& model) {
    StoppingRule r{std::vector<Decision>(model.n_nodes(), Decision::Continue)};
    for (NodeId n : model.level_nodes(model.n_steps())) r.decision[n] = Decision::Stop;
    return r;
  }

  friend bool operator==(const StoppingRule& a, const StoppingRule& b) {
    return a.decision == b.decision;
  }
};

namespace detail {
inline std::uint64_t next_object_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

// Finite filtered probability space in discrete time. Immutable after
// construction and safely shareable across threads.
template <class T>
class Model {
 public:
  using Traits = ArithmeticTraits<T>;

  struct NodeData {
    int level = 0;
    T state{};
    std::vector<Edge<T>> children;
  };

  Model(TimeGrid grid, ModelKind kind, std::vector<NodeData> nodes,
        std::vector<std::string> names = {})
      : grid_(std::move(grid)),
        kind_(kind),
        nodes_(std::move(nodes)),
        names_(std::move(names)),
        id_(detail::next_object_id()) {
    validate();
  }

  int n_steps() const { return grid_.n_steps; }
  std::size_t n_nodes() const { return nodes_.size(); }
  ModelKind kind() const { return kind_; }
  const TimeGrid& grid() const { return grid_; }
  std::uint64_t id() const { return id_; }

  NodeId root() const { return levels_[0][0]; }
  int level_of(NodeId n) const { return nodes_[n].level; }
  const T& state(NodeId n) const { return nodes_[n].state; }
  const std::vector<Edge<T>>& children(NodeId n) const { return nodes_[n].children; }
  bool is_terminal(NodeId n) const { return nodes_[n].level == grid_.n_steps; }

  // Single parent on exact trees; first parent on lattices, kNoNode at the root.
  NodeId parent(NodeId n) const { return parent_[n]; }

  const std::vector<NodeId>& level_nodes(int t) const {
    if (t < 0 || t > grid_.n_steps)
      fail(Errc::LevelOutOfRange, "level " + std::to_string(t) + " outside [0, " +
                                      std::to_string(grid_.n_steps) + "]");
    return levels_[static_cast<std::size_t>(t)];
  }

  std::string node_name(NodeId n) const {
    if (n < names_.size() && !names_[n].empty()) return names_[n];
    return "n" + std::to_string(n);
  }

  std::size_t interior_count() const {
    std::size_t c = 0;
    for (NodeId n = 0; n < n_nodes(); ++n)
      if (!is_terminal(n)) ++c;
    return c;
  }

 private:
  void validate() {
    const int N = grid_.n_steps;
    if (nodes_.empty()) fail(Errc::MalformedSpec, "model has no nodes");
    if (!names_.empty() && names_.size() != nodes_.size())
      fail(Errc::MalformedSpec, "node name table size mismatch");

    levels_.assign(static_cast<std::size_t>(N) + 1, {});
    for (NodeId n = 0; n < nodes_.size(); ++n) {
      const int lv = nodes_[n].level;
      if (lv < 0 || lv > N)
        fail(Errc::MalformedSpec, "node " + node_name(n) + " has level outside the grid");
      levels_[static_cast<std::size_t>(lv)].push_back(n);
    }
    for (int t = 0; t <= N; ++t)
      if (levels_[static_cast<std::size_t>(t)].empty())
        fail(Errc::MalformedSpec, "level " + std::to_string(t) + " has no nodes");
    if (levels_[0].size() != 1)
      fail(Errc::MalformedSpec, "exactly one root node required (F_0 trivial)");

    parent_.assign(nodes_.size(), kNoNode);
    std::vector<int> parent_count(nodes_.size(), 0);
    for (NodeId n = 0; n < nodes_.size(); ++n) {
      const auto& node = nodes_[n];
      if (node.level == N) {
        if (!node.children.empty())
          fail(Errc::MalformedSpec, "terminal node " + node_name(n) + " has children");
        continue;
      }
      if (node.children.empty())
        fail(Errc::MalformedSpec, "non-terminal node " + node_name(n) + " has no children");
      T sum = T(0);
      for (const auto& e : node.children) {
        if (e.to >= nodes_.size())
          fail(Errc::MalformedSpec, "edge from " + node_name(n) + " points outside the model");
        if (nodes_[e.to].level != node.level + 1)
          fail(Errc::MalformedSpec, "edge " + node_name(n) + " -> " + node_name(e.to) +
                                        " does not advance one level");
        if (!(e.prob > T(0)))
          fail(Errc::MalformedSpec, "edge " + node_name(n) + " -> " + node_name(e.to) +
                                        " has nonpositive probability");
        sum += e.prob;
        ++parent_count[e.to];
        if (parent_[e.to] == kNoNode) parent_[e.to] = n;
      }
      if (!Traits::eq(sum, T(1), Traits::model_tol))
        fail(Errc::ProbabilitySumViolation,
             "child probabilities of " + node_name(n) + " sum to " + Traits::str(sum) +
                 (Traits::exact ? " (use exact \"p/q\" or decimal strings in rational mode)"
                                : ""));
    }
    for (NodeId n = 0; n < nodes_.size(); ++n) {
      if (n == root()) continue;
      if (parent_count[n] == 0)
        fail(Errc::OrphanNode, "node " + node_name(n) + " has no parent");
      if (kind_ == ModelKind::ExactTree && parent_count[n] > 1)
        fail(Errc::MalformedSpec,
             "node " + node_name(n) + " has multiple parents in an exact tree");
    }
  }

  TimeGrid grid_;
  ModelKind kind_;
  std::vector<NodeData> nodes_;
  std::vector<std::string> names_;
  std::vector<std::vector<NodeId>> levels_;
  std::vector<NodeId> parent_;
  std::uint64_t id_;
};

// ---------------------------------------------------------------------------
// Builders

// Standard CRR-style multiplicative model: state(child) = state . up or
// state . down. EXACT_TREE carries 2^t nodes at level t (path space);
// MARKOV_LATTICE recombines to t+1. Zero-probability branches are pruned, so
// p = 1 (or 0) yields a single deterministic path.
template <class T>
Model<T> build_binomial(const T& s0, const T& up, const T& down, const T& p, int n_steps,
                        double horizon, ModelKind kind) {
  if (!(s0 > T(0))) fail(Errc::ParameterOutOfRange, "s0 must be positive");
  if (!(up > T(1))) fail(Errc::ParameterOutOfRange, "up factor must exceed 1");
  if (!(down > T(0)) || !(down < T(1)))
    fail(Errc::ParameterOutOfRange, "down factor must lie in (0,1)");
  if (p < T(0) || p > T(1)) fail(Errc::ParameterOutOfRange, "p must lie in [0,1]");
  if (n_steps < 1) fail(Errc::ParameterOutOfRange, "n_steps must be >= 1");
  TimeGrid grid(n_steps, horizon);

  const bool has_up = p > T(0);
  const bool has_down = p < T(1);
  std::vector<typename Model<T>::NodeData> nodes;
  std::vector<std::string> names;

  if (kind == ModelKind::ExactTree) {
    nodes.push_back({0, s0, {}});
    names.push_back("root");
    std::vector<NodeId> current{0};
    for (int t = 0; t < n_steps; ++t) {
      std::vector<NodeId> next;
      for (NodeId n : current) {
        const std::string base = n == 0 ? "" : names[n];
        if (has_up) {
          const NodeId c = static_cast<NodeId>(nodes.size());
          nodes.push_back({t + 1, nodes[n].state * up, {}});
          names.push_back(base + "u");
          nodes[n].children.push_back({c, p});
          next.push_back(c);
        }
        if (has_down) {
          const NodeId c = static_cast<NodeId>(nodes.size());
          nodes.push_back({t + 1, nodes[n].state * down, {}});
          names.push_back(base + "d");
          nodes[n].children.push_back({c, T(1) - p});
          next.push_back(c);
        }
      }
      current = std::move(next);
    }
  } else {
    // Level t holds nodes (t, i) for i up-moves, listed with i descending so
    // states print from highest to lowest. Degenerate p collapses to a chain.
    auto ups_range = [&](int t) {
      if (!has_down) return std::pair<int, int>{t, t};
      if (!has_up) return std::pair<int, int>{0, 0};
      return std::pair<int, int>{t, 0};
    };
    std::vector<std::vector<NodeId>> ids(static_cast<std::size_t>(n_steps) + 1);
    std::vector<std::vector<int>> ups(static_cast<std::size_t>(n_steps) + 1);
    for (int t = 0; t <= n_steps; ++t) {
      const auto [hi, lo] = ups_range(t);
      for (int i = hi; i >= lo; --i) {
        const NodeId id = static_cast<NodeId>(nodes.size());
        T state = s0;
        if (t > 0) {
          // derive from a previous-level neighbor so states stay incremental
          const auto& prev_ups = ups[static_cast<std::size_t>(t - 1)];
          const auto& prev_ids = ids[static_cast<std::size_t>(t - 1)];
          bool derived = false;
          for (std::size_t k = 0; k < prev_ups.size() && !derived; ++k) {
            if (prev_ups[k] == i) {
              state = nodes[prev_ids[k]].state * down;
              derived = true;
            }
          }
          for (std::size_t k = 0; k < prev_ups.size() && !derived; ++k) {
            if (prev_ups[k] == i - 1) {
              state = nodes[prev_ids[k]].state * up;
              derived = true;
            }
          }
        }
        nodes.push_back({t, state, {}});
        ids[static_cast<std::size_t>(t)].push_back(id);
        ups[static_cast<std::size_t>(t)].push_back(i);
        names.push_back("t" + std::to_string(t) + "i" + std::to_string(i));
      }
    }
    for (int t = 0; t < n_steps; ++t) {
      const auto& lvl = ids[static_cast<std::size_t>(t)];
      const auto& lvl_ups = ups[static_cast<std::size_t>(t)];
      const auto& nxt = ids[static_cast<std::size_t>(t + 1)];
      const auto& nxt_ups = ups[static_cast<std::size_t>(t + 1)];
      auto find_next = [&](int i) {
        for (std::size_t k = 0; k < nxt_ups.size(); ++k)
          if (nxt_ups[k] == i) return nxt[k];
        fail(Errc::MalformedSpec, "internal lattice wiring error");
      };
      for (std::size_t k = 0; k < lvl.size(); ++k) {
        if (has_up) nodes[lvl[k]].children.push_back({find_next(lvl_ups[k] + 1), p});
        if (has_down) nodes[lvl[k]].children.push_back({find_next(lvl_ups[k]), T(1) - p});
      }
    }
  }
  return Model<T>(std::move(grid), kind, std::move(nodes), std::move(names));
}

// ---------------------------------------------------------------------------
// Conditional expectation

// One-step operator E[h_{t+1} | F_t], returned in level_nodes(t) order.
// h must be defined on every node (values off level t+1 are ignored).
template <class T>
std::vector<T> conditional_expectation(const Model<T>& model, const AdaptedFamily<T>& h,
                                       int t) {
  if (t < 0 || t >= model.n_steps())
    fail(Errc::LevelOutOfRange,
         "conditional expectation needs 0 <= t < N, got " + std::to_string(t));
  if (h.size() != model.n_nodes())
    fail(Errc::ModelRewardMismatch, "family is not defined on every node");
  const auto& lvl = model.level_nodes(t);
  std::vector<T> out;
  out.reserve(lvl.size());
  for (NodeId n : lvl) {
    T acc = T(0);
    for (const auto& e : model.children(n)) acc += e.prob * h[e.to];
    out.push_back(std::move(acc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path enumeration (exact trees)

// Streaming depth-first cursor over root-to-leaf paths; probabilities sum to 1.
template <class T>
class PathCursor {
 public:
  struct Atom {
    std::vector<NodeId> nodes;
    T prob{};
  };

  explicit PathCursor(const Model<T>& model) : model_(&model) {
    if (model.kind() != ModelKind::ExactTree)
      fail(Errc::UnsupportedModelKind, "path enumeration requires an exact tree");
  }

  bool next(Atom& out) {
    if (done_) return false;
    if (stack_.empty()) {
      stack_.push_back({model_->root(), 0, T(1)});
      descend();
    } else {
      stack_.pop_back();
      while (!stack_.empty() &&
             stack_.back().next_child >= model_->children(stack_.back().node).size())
        stack_.pop_back();
      if (stack_.empty()) {
        done_ = true;
        return false;
      }
      descend();
    }
    out.nodes.clear();
    out.nodes.reserve(stack_.size());
    for (const auto& f : stack_) out.nodes.push_back(f.node);
    out.prob = stack_.back().prob;
    return true;
  }

 private:
  struct Frame {
    NodeId node;
    std::size_t next_child;
    T prob;
  };

  void descend() {
    while (!model_->children(stack_.back().node).empty()) {
      Frame& f = stack_.back();
      const auto& e = model_->children(f.node)[f.next_child++];
      stack_.push_back({e.to, 0, f.prob * e.prob});
    }
  }

  const Model<T>* model_;
  std::vector<Frame> stack_;
  bool done_ = false;
};

template <class T>
PathCursor<T> path_measure(const Model<T>& model) {
  return PathCursor<T>(model);
}

template <class T>
std::vector<typename PathCursor<T>::Atom> enumerate_paths(const Model<T>& model) {
  std::vector<typename PathCursor<T>::Atom> out;
  PathCursor<T> cursor(model);
  typename PathCursor<T>::Atom atom;
  while (cursor.next(atom)) out.push_back(atom);
  return out;
}

// ---------------------------------------------------------------------------
// Rule validity and stopped expectations

struct RuleDiagnostics {
  bool valid = true;
  std::vector<std::string> issues;
  explicit operator bool() const { return valid; }
};

template <class T>
RuleDiagnostics is_valid_rule(const Model<T>& model, const StoppingRule& rule) {
  RuleDiagnostics d;
  if (rule.decision.size() != model.n_nodes()) {
    d.valid = false;
    d.issues.push_back("decision map covers " + std::to_string(rule.decision.size()) +
                       " of " + std::to_string(model.n_nodes()) + " nodes");
    return d;
  }
  for (NodeId n : model.level_nodes(model.n_steps())) {
    if (rule.decision[n] != Decision::Stop) {
      d.valid = false;
      d.issues.push_back("terminal node " + model.node_name(n) +
                         " marked CONTINUE (theta <= T requires STOP)");
    }
  }
  return d;
}

namespace detail {

template <class T>
void require_valid_rule(const Model<T>& model, const StoppingRule& rule, const char* what) {
  const auto d = is_valid_rule(model, rule);
  if (!d.valid) fail(Errc::InvalidRule, std::string(what) + ": " + d.issues.front());
}

template <class T>
struct StoppedExpectation {
  T value{};
  std::vector<T> level_mass;  // P(theta = t), indexed by level
};

// Forward pass over levels tracking, per node, the arriving probability mass
// that has (q1) / has not (q0) yet passed the start rule `from`. The induced
// stopping time is the first `rule` STOP at a time >= from(path); exact on
// lattices as well because the trigger state is carried in the mass split.
template <class T>
StoppedExpectation<T> stopped_expectation(const Model<T>& model, const StoppingRule& rule,
                                          const AdaptedFamily<T>& h,
                                          const StoppingRule& from) {
  StoppedExpectation<T> result;
  result.level_mass.assign(static_cast<std::size_t>(model.n_steps()) + 1, T(0));
  std::vector<T> q0(model.n_nodes(), T(0)), q1(model.n_nodes(), T(0));
  q0[model.root()] = T(1);
  for (int t = 0; t <= model.n_steps(); ++t) {
    for (NodeId n : model.level_nodes(t)) {
      T a0 = std::move(q0[n]);
      T a1 = std::move(q1[n]);
      if (a0 == T(0) && a1 == T(0)) continue;
      if (from.decision[n] == Decision::Stop) {
        a1 += a0;
        a0 = T(0);
      }
      if (rule.decision[n] == Decision::Stop && a1 != T(0)) {
        result.value += a1 * h[n];
        result.level_mass[static_cast<std::size_t>(t)] += a1;
        a1 = T(0);
      }
      for (const auto& e : model.children(n)) {
        if (a0 != T(0)) q0[e.to] += a0 * e.prob;
        if (a1 != T(0)) q1[e.to] += a1 * e.prob;
      }
    }
  }
  return result;
}

}  // namespace detail

// E[h(theta)] for the stopping time induced by `rule` started at `from`
// (theta = first rule-STOP at time >= from(path)).
template <class T>
T expectation_of_family(const Model<T>& model, const StoppingRule& rule,
                        const AdaptedFamily<T>& h, const StoppingRule& from) {
  detail::require_valid_rule(model, rule, "rule");
  detail::require_valid_rule(model, from, "start rule");
  if (h.size() != model.n_nodes())
    fail(Errc::ModelRewardMismatch, "family is not defined on every node");
  return detail::stopped_expectation(model, rule, h, from).value;
}

template <class T>
T expectation_of_family(const Model<T>& model, const StoppingRule& rule,
                        const AdaptedFamily<T>& h) {
  return expectation_of_family(model, rule, h, StoppingRule::immediate(model));
}

// Stop level of the induced stopping time on each root-to-leaf path, in
// path_measure order. Exact trees only.
template <class T>
std::vector<int> induced_stop_levels(const Model<T>& model, const StoppingRule& rule,
                                     const StoppingRule& from) {
  detail::require_valid_rule(model, rule, "rule");
  detail::require_valid_rule(model, from, "start rule");
  std::vector<int> out;
  PathCursor<T> cursor(model);
  typename PathCursor<T>::Atom atom;
  while (cursor.next(atom)) {
    bool triggered = false;
    int stop_level = model.n_steps();
    for (std::size_t i = 0; i < atom.nodes.size(); ++i) {
      const NodeId n = atom.nodes[i];
      if (from.decision[n] == Decision::Stop) triggered = true;
      if (triggered && rule.decision[n] == Decision::Stop) {
        stop_level = static_cast<int>(i);
        break;
      }
    }
    out.push_back(stop_level);
  }
  return out;
}

template <class T>
std::vector<int> induced_stop_levels(const Model<T>& model, const StoppingRule& rule) {
  return induced_stop_levels(model, rule, StoppingRule::immediate(model));
}

}  // namespace optstop
