#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optstop/snell.hpp"

namespace optstop {

enum class PenaltyKind { Multiplicative, Additive };

// Penalization parameter for epsilon-optimal stopping; epsilon in (0,1).
template <class T>
struct EpsilonMode {
  PenaltyKind mode = PenaltyKind::Multiplicative;
  T epsilon{};
};

template <class T>
struct StoppingReport {
  StoppingRule rule;
  T value{};                       // E[phi(theta)] started at `from`
  T gap{};                         // E[v at from] - value; zero iff optimal
  std::vector<T> time_distribution;  // P(theta = t) by level, sums to 1
};

// Float-mode watch list: nodes where an equality test v = phi or
// v = continuation was decided within a whisker of the 1e-9 tolerance.
struct TieDiagnostics {
  std::vector<NodeId> near_ties;
};

namespace stopping {

namespace detail {

// Per-node flag "from(path) <= t(n)" for the start rule. On an exact tree the
// flag is always well defined. On a lattice different histories can disagree;
// such a start rule is not representable per node and is rejected.
template <class T>
std::vector<std::uint8_t> from_trigger(const Model<T>& model, const StoppingRule& from) {
  optstop::detail::require_valid_rule(model, from, "start rule");
  const std::size_t n = model.n_nodes();
  std::vector<std::uint8_t> in_true(n, 0), in_false(n, 0), out(n, 0);
  in_false[model.root()] = 1;
  for (int t = 0; t <= model.n_steps(); ++t) {
    for (NodeId node : model.level_nodes(t)) {
      if (!in_true[node] && !in_false[node]) continue;
      const bool stop_here = from.decision[node] == Decision::Stop;
      const bool out_true = in_true[node] || (stop_here && in_false[node]);
      const bool out_false = in_false[node] && !stop_here;
      if (out_true && out_false)
        fail(Errc::UnsupportedModelKind,
             "start rule is path-dependent at node " + model.node_name(node) +
                 "; not representable on a recombining lattice");
      out[node] = out_true ? 1 : 0;
      for (const auto& e : model.children(node)) {
        if (out_true) in_true[e.to] = 1;
        if (out_false) in_false[e.to] = 1;
      }
    }
  }
  return out;
}

template <class T, class Pred>
StoppingRule first_hit_rule(const Model<T>& model, const StoppingRule& from, Pred&& stops) {
  const auto trig = from_trigger(model, from);
  StoppingRule rule{std::vector<Decision>(model.n_nodes(), Decision::Continue)};
  for (NodeId n = 0; n < model.n_nodes(); ++n) {
    if (model.is_terminal(n) || (trig[n] && stops(n)))
      rule.decision[n] = Decision::Stop;
  }
  return rule;
}

}  // namespace detail

// Minimal optimal stopping time theta*: from `from` onward, stop at the first
// node where v = phi. Tie-break: a node with v = phi = continuation stops --
// that is what makes theta* minimal.
template <class T>
StoppingRule minimal_optimal(const SnellResult<T>& result, const RewardFamily<T>& reward,
                             const StoppingRule& from, TieDiagnostics* diag = nullptr) {
  using Tr = ArithmeticTraits<T>;
  snell::require_fresh(result, reward);
  const Model<T>& model = *result.model;
  if (diag)
    for (NodeId n = 0; n < model.n_nodes(); ++n)
      if (Tr::near_tie(result.v[n], reward.at(n))) diag->near_ties.push_back(n);
  return detail::first_hit_rule(model, from, [&](NodeId n) {
    return Tr::eq(result.v[n], reward.at(n), Tr::stop_tol);
  });
}

template <class T>
StoppingRule minimal_optimal(const SnellResult<T>& result, const RewardFamily<T>& reward) {
  return minimal_optimal(result, reward, StoppingRule::immediate(*result.model));
}

// Maximal optimal stopping time theta-check: stop at the first strict
// supermartingale node v > continuation, equivalently the last instant before
// the Doob compensator increases. Tie-break: v = phi = continuation continues.
template <class T>
StoppingRule maximal_optimal(const SnellResult<T>& result, const RewardFamily<T>& reward,
                             const StoppingRule& from, TieDiagnostics* diag = nullptr) {
  using Tr = ArithmeticTraits<T>;
  snell::require_fresh(result, reward);
  const Model<T>& model = *result.model;
  if (diag)
    for (NodeId n = 0; n < model.n_nodes(); ++n)
      if (!model.is_terminal(n) && Tr::near_tie(result.v[n], result.vplus[n]))
        diag->near_ties.push_back(n);
  return detail::first_hit_rule(model, from, [&](NodeId n) {
    return !model.is_terminal(n) && Tr::less(result.vplus[n], result.v[n], Tr::stop_tol);
  });
}

template <class T>
StoppingRule maximal_optimal(const SnellResult<T>& result, const RewardFamily<T>& reward) {
  return maximal_optimal(result, reward, StoppingRule::immediate(*result.model));
}

// Penalized stopping time theta^eps: stop at the first node where the reward
// is within the penalty of the value,
//   multiplicative: phi >= (1 - eps) v      additive: phi >= v - eps.
// Before theta^eps the envelope is a martingale (phi < v there forces
// v = continuation), which yields the tested guarantees
//   E[phi(theta^eps)] >= (1 - eps) E[v at from]   resp.   >= E[v at from] - eps.
template <class T>
StoppingRule epsilon_optimal(const SnellResult<T>& result, const RewardFamily<T>& reward,
                             const EpsilonMode<T>& eps, const StoppingRule& from) {
  snell::require_fresh(result, reward);
  if (!(eps.epsilon > T(0)) || !(eps.epsilon < T(1)))
    fail(Errc::EpsilonOutOfRange,
         "epsilon must lie in (0,1), got " + ArithmeticTraits<T>::str(eps.epsilon));
  const Model<T>& model = *result.model;
  if (eps.mode == PenaltyKind::Multiplicative) {
    const T keep = T(1) - eps.epsilon;
    return detail::first_hit_rule(
        model, from, [&](NodeId n) { return reward.at(n) >= keep * result.v[n]; });
  }
  return detail::first_hit_rule(
      model, from, [&](NodeId n) { return reward.at(n) >= result.v[n] - eps.epsilon; });
}

template <class T>
StoppingRule epsilon_optimal(const SnellResult<T>& result, const RewardFamily<T>& reward,
                             const EpsilonMode<T>& eps) {
  return epsilon_optimal(result, reward, eps, StoppingRule::immediate(*result.model));
}

// Largest certified collapse threshold: for every eps <= the returned value,
// theta^eps coincides with theta*. Computed as half the minimal positive
// penalty gap over nodes with v > phi (at the full gap itself the penalized
// rule already stops early, so the bound must stay strictly below it).
template <class T>
T epsilon_collapse_threshold(const SnellResult<T>& result, const RewardFamily<T>& reward,
                             PenaltyKind mode = PenaltyKind::Multiplicative) {
  using Tr = ArithmeticTraits<T>;
  snell::require_fresh(result, reward);
  const T half = T(1) / T(2);
  bool found = false;
  T min_gap{};
  for (NodeId n = 0; n < result.v.size(); ++n) {
    if (!Tr::less(reward.at(n), result.v[n], Tr::stop_tol)) continue;  // v = phi
    const T gap = mode == PenaltyKind::Multiplicative
                      ? T((result.v[n] - reward.at(n)) / result.v[n])
                      : T(result.v[n] - reward.at(n));
    if (!found || gap < min_gap) {
      min_gap = gap;
      found = true;
    }
  }
  if (!found) return half;  // v = phi everywhere: every epsilon collapses
  const T candidate = min_gap / T(2);
  return candidate < half ? candidate : half;
}

// Value, optimality gap and stop-time distribution of an arbitrary rule.
template <class T>
StoppingReport<T> evaluate(const Model<T>& model, const StoppingRule& rule,
                           const RewardFamily<T>& reward, const SnellResult<T>& result,
                           const StoppingRule& from) {
  snell::require_fresh(result, reward);
  if (result.model_id != model.id())
    fail(Errc::StaleResult, "snell result belongs to a different model");
  optstop::detail::require_valid_rule(model, rule, "rule");
  optstop::detail::require_valid_rule(model, from, "start rule");
  const auto stopped = optstop::detail::stopped_expectation(model, rule, reward.values, from);
  // E[v(S)] is the expectation of the family v stopped at S itself.
  const T start_value =
      optstop::detail::stopped_expectation(model, from, result.v, from).value;
  StoppingReport<T> report;
  report.rule = rule;
  report.value = stopped.value;
  report.gap = start_value - stopped.value;
  report.time_distribution = stopped.level_mass;
  return report;
}

template <class T>
StoppingReport<T> evaluate(const Model<T>& model, const StoppingRule& rule,
                           const RewardFamily<T>& reward, const SnellResult<T>& result) {
  return evaluate(model, rule, reward, result, StoppingRule::immediate(model));
}

// The envelope stopped at an optimal time is a martingale on [from, theta):
// every node strictly inside the continuation region must satisfy
// v = continuation. Holds for theta* and theta-check; fails for any rule that
// continues through a strict supermartingale node.
template <class T>
NodeViolationReport martingale_interval_check(const Model<T>& model,
                                              const SnellResult<T>& result,
                                              const StoppingRule& from,
                                              const StoppingRule& rule) {
  using Tr = ArithmeticTraits<T>;
  if (result.model_id != model.id())
    fail(Errc::StaleResult, "snell result belongs to a different model");
  optstop::detail::require_valid_rule(model, rule, "rule");
  optstop::detail::require_valid_rule(model, from, "start rule");
  // Boolean forward reachability with states (triggered, not yet stopped) and
  // (not triggered); a node is strictly interior if some path arrives
  // triggered and leaves unstopped. Correct on lattices as well.
  const std::size_t n_nodes = model.n_nodes();
  std::vector<std::uint8_t> reach_t(n_nodes, 0), reach_f(n_nodes, 0);
  reach_f[model.root()] = 1;
  NodeViolationReport report;
  for (int t = 0; t <= model.n_steps(); ++t) {
    for (NodeId n : model.level_nodes(t)) {
      const bool triggered =
          reach_t[n] || (reach_f[n] && from.decision[n] == Decision::Stop);
      const bool untriggered = reach_f[n] && from.decision[n] == Decision::Continue;
      if (triggered && rule.decision[n] == Decision::Continue) {
        if (!model.is_terminal(n) &&
            !Tr::eq(result.v[n], result.vplus[n], Tr::stop_tol))
          report.nodes.push_back(n);
        for (const auto& e : model.children(n)) reach_t[e.to] = 1;
      }
      if (untriggered)
        for (const auto& e : model.children(n)) reach_f[e.to] = 1;
    }
  }
  return report;
}

// Exercise region {n : v(n) = phi(n)}; its hitting time from S realizes
// theta*(S).
template <class T>
std::vector<NodeId> exercise_region(const SnellResult<T>& result,
                                    const RewardFamily<T>& reward) {
  using Tr = ArithmeticTraits<T>;
  snell::require_fresh(result, reward);
  std::vector<NodeId> region;
  for (NodeId n = 0; n < result.v.size(); ++n)
    if (Tr::eq(result.v[n], reward.at(n), Tr::stop_tol)) region.push_back(n);
  return region;
}

// Clamp the induced stopping time into the window [S(path), S'(path)]
// (T_[S,S']), stopping at S' when no STOP is encountered. With strict = true
// only stops strictly after S count (T_]S,S']); on {S = T} the stop at T is
// forced, matching the convention for strictly-later stopping times.
template <class T>
StoppingRule restrict_window(const Model<T>& model, const StoppingRule& rule,
                             const StoppingRule& window_start,
                             const StoppingRule& window_end, bool strict = false) {
  if (model.kind() != ModelKind::ExactTree)
    fail(Errc::UnsupportedModelKind, "window restriction requires an exact tree");
  optstop::detail::require_valid_rule(model, rule, "rule");
  optstop::detail::require_valid_rule(model, window_start, "window start");
  optstop::detail::require_valid_rule(model, window_end, "window end");

  const std::size_t n_nodes = model.n_nodes();
  std::vector<std::uint8_t> s_in(n_nodes, 0), s_out(n_nodes, 0), e_out(n_nodes, 0),
      stop_seen(n_nodes, 0);
  for (int t = 0; t <= model.n_steps(); ++t) {
    for (NodeId n : model.level_nodes(t)) {
      const NodeId par = model.parent(n);
      s_in[n] = par == kNoNode ? 0 : s_out[par];
      s_out[n] = s_in[n] || window_start.decision[n] == Decision::Stop;
      const std::uint8_t e_in = par == kNoNode ? 0 : e_out[par];
      e_out[n] = e_in || window_end.decision[n] == Decision::Stop;
      if (e_out[n] && !s_out[n])
        fail(Errc::WindowOrderViolation,
             "window end triggers before window start at node " + model.node_name(n));
      const std::uint8_t in_window = strict ? s_in[n] : s_out[n];
      const std::uint8_t seen_in = par == kNoNode ? 0 : stop_seen[par];
      stop_seen[n] = seen_in || (in_window && rule.decision[n] == Decision::Stop);
    }
  }
  StoppingRule out{std::vector<Decision>(n_nodes, Decision::Continue)};
  for (NodeId n = 0; n < n_nodes; ++n) {
    const std::uint8_t in_window = strict ? s_in[n] : s_out[n];
    if (model.is_terminal(n) || (in_window && (stop_seen[n] || e_out[n])))
      out.decision[n] = Decision::Stop;
  }
  return out;
}

// Canonical representative under induced-theta equality: STOP at a node iff
// the rule has stopped at it or an ancestor. Two rules induce the same
// stopping time on every path iff their canonical forms are equal; decisions
// at nodes unreachable after an earlier stop are irrelevant.
template <class T>
StoppingRule canonical_form(const Model<T>& model, const StoppingRule& rule) {
  if (model.kind() != ModelKind::ExactTree)
    fail(Errc::UnsupportedModelKind, "canonical form requires an exact tree");
  optstop::detail::require_valid_rule(model, rule, "rule");
  StoppingRule out{std::vector<Decision>(model.n_nodes(), Decision::Continue)};
  for (int t = 0; t <= model.n_steps(); ++t) {
    for (NodeId n : model.level_nodes(t)) {
      const NodeId par = model.parent(n);
      const bool stopped = (par != kNoNode && out.decision[par] == Decision::Stop) ||
                           rule.decision[n] == Decision::Stop;
      if (stopped) out.decision[n] = Decision::Stop;
    }
  }
  return out;
}

}  // namespace stopping
}  // namespace optstop
