#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "optstop/reward.hpp"
#include "optstop/rng.hpp"

namespace optstop {

// Value function pair (v, v+) from the backward recursion
//   v_N = phi_N,   v_t = max(phi_t, E[v_{t+1} | F_t]).
// vplus is the strictly-later value: the continuation E[v_{t+1}|F_t] on
// non-terminal nodes and phi on terminal nodes (a stopping time strictly
// after T does not exist, so v+(T) = phi(T) by convention). This keeps
// v = phi v vplus literally true at every node.
template <class T>
struct SnellResult {
  const Model<T>* model = nullptr;  // non-owning; the model must outlive the result
  AdaptedFamily<T> v;
  AdaptedFamily<T> vplus;
  std::uint64_t model_id = 0;
  std::uint64_t reward_id = 0;

  // Continuation value; meaningful on non-terminal nodes, where it equals vplus.
  const T& continuation(NodeId n) const { return vplus[n]; }
};

// v = M - A with M a martingale and A the predictable nondecreasing
// compensator, A(root) = 0. Siblings share A because A_{t+1} is
// F_t-measurable.
template <class T>
struct DoobDecomposition {
  AdaptedFamily<T> M;
  AdaptedFamily<T> A;
  std::uint64_t model_id = 0;
};

struct NodeViolationReport {
  std::vector<NodeId> nodes;
  bool ok() const { return nodes.empty(); }
};

namespace snell {

template <class T>
void require_fresh(const SnellResult<T>& result, const RewardFamily<T>& reward) {
  if (result.model == nullptr || result.model_id != result.model->id())
    fail(Errc::StaleResult, "snell result does not match its model");
  if (reward.model_id != result.model_id || reward.family_id != result.reward_id)
    fail(Errc::StaleResult, "snell result was computed for a different model/reward pair");
}

// Backward induction for the Snell envelope. Level-synchronous and exact in
// finitely many steps; rational mode makes every v = phi comparison exact.
template <class T>
SnellResult<T> compute(const Model<T>& model, const RewardFamily<T>& reward) {
  if (reward.model_id != model.id())
    fail(Errc::ModelRewardMismatch, "reward was built on a different model");
  SnellResult<T> result;
  result.model = &model;
  result.model_id = model.id();
  result.reward_id = reward.family_id;
  result.v.assign(model.n_nodes(), T(0));
  result.vplus.assign(model.n_nodes(), T(0));

  for (NodeId n : model.level_nodes(model.n_steps())) {
    result.v[n] = reward.at(n);
    result.vplus[n] = reward.at(n);
  }
  for (int t = model.n_steps() - 1; t >= 0; --t) {
    const auto cont = conditional_expectation(model, result.v, t);
    const auto& lvl = model.level_nodes(t);
    for (std::size_t i = 0; i < lvl.size(); ++i) {
      const NodeId n = lvl[i];
      result.vplus[n] = cont[i];
      result.v[n] = std::max(reward.at(n), cont[i]);
    }
  }
  return result;
}

// Nodes where h < E[h_{t+1}|F_t] beyond tolerance; empty for any envelope.
template <class T>
NodeViolationReport check_supermartingale(const Model<T>& model, const AdaptedFamily<T>& h) {
  using Tr = ArithmeticTraits<T>;
  if (h.size() != model.n_nodes())
    fail(Errc::ModelRewardMismatch, "family is not defined on every node");
  NodeViolationReport report;
  for (int t = 0; t < model.n_steps(); ++t) {
    const auto cont = conditional_expectation(model, h, t);
    const auto& lvl = model.level_nodes(t);
    for (std::size_t i = 0; i < lvl.size(); ++i)
      if (Tr::less(h[lvl[i]], cont[i], Tr::model_tol)) report.nodes.push_back(lvl[i]);
  }
  return report;
}

// Nodes where h < phi beyond tolerance.
template <class T>
NodeViolationReport check_dominance(const AdaptedFamily<T>& h, const RewardFamily<T>& reward) {
  using Tr = ArithmeticTraits<T>;
  if (h.size() != reward.values.size())
    fail(Errc::ModelRewardMismatch, "family and reward sizes differ");
  NodeViolationReport report;
  for (NodeId n = 0; n < h.size(); ++n)
    if (Tr::less(h[n], reward.at(n), Tr::model_tol)) report.nodes.push_back(n);
  return report;
}

struct SmallestCheck {
  bool applicable = false;  // u is a supermartingale dominating phi
  std::vector<NodeId> counterexamples;
  bool ok() const { return !applicable || counterexamples.empty(); }
};

// The envelope is the smallest supermartingale dominating phi: any u passing
// both checks must satisfy u >= v nodewise. A counterexample would be an
// engine bug.
template <class T>
SmallestCheck check_smallest(const Model<T>& model, const AdaptedFamily<T>& u,
                             const RewardFamily<T>& reward, const SnellResult<T>& result) {
  using Tr = ArithmeticTraits<T>;
  require_fresh(result, reward);
  SmallestCheck check;
  check.applicable =
      check_supermartingale(model, u).ok() && check_dominance(u, reward).ok();
  if (!check.applicable) return check;
  for (NodeId n = 0; n < u.size(); ++n)
    if (Tr::less(u[n], result.v[n], Tr::model_tol)) check.counterexamples.push_back(n);
  return check;
}

// Nodes where v != max(phi, vplus); empty by construction, and the identity
// v(S) = phi(S) v v+(S) is part of the acceptance gate.
template <class T>
NodeViolationReport vplus_identity_check(const SnellResult<T>& result,
                                         const RewardFamily<T>& reward) {
  using Tr = ArithmeticTraits<T>;
  require_fresh(result, reward);
  NodeViolationReport report;
  for (NodeId n = 0; n < result.v.size(); ++n) {
    const T expected = std::max(reward.at(n), result.vplus[n]);
    if (!Tr::eq(result.v[n], expected, Tr::model_tol)) report.nodes.push_back(n);
  }
  return report;
}

// Discrete Doob decomposition of the envelope:
//   A(root) = 0,  A(c) = A(n) + (v(n) - continuation(n)) for every child c,
//   M = v + A.
// Exact trees only: A accumulates along the path, so on a recombining lattice
// it is not representable per node.
template <class T>
DoobDecomposition<T> doob_decompose(const Model<T>& model, const SnellResult<T>& result) {
  if (result.model_id != model.id())
    fail(Errc::StaleResult, "snell result belongs to a different model");
  if (model.kind() != ModelKind::ExactTree)
    fail(Errc::UnsupportedModelKind,
         "the compensator is a path functional; exact tree required");
  DoobDecomposition<T> doob;
  doob.model_id = model.id();
  doob.A.assign(model.n_nodes(), T(0));
  doob.M.assign(model.n_nodes(), T(0));
  const NodeId root = model.root();
  doob.A[root] = T(0);
  doob.M[root] = result.v[root];
  for (int t = 0; t < model.n_steps(); ++t) {
    for (NodeId n : model.level_nodes(t)) {
      const T increment = result.v[n] - result.vplus[n];  // v - continuation >= 0
      for (const auto& e : model.children(n)) {
        doob.A[e.to] = doob.A[n] + increment;
        doob.M[e.to] = result.v[e.to] + doob.A[e.to];
      }
    }
  }
  return doob;
}

// Non-terminal nodes where the envelope is a strict supermartingale,
// v > continuation. Strictness forces exercise: the region is contained in
// {v = phi}, which is tested, not assumed.
template <class T>
std::vector<NodeId> strict_supermartingale_region(const SnellResult<T>& result,
                                                  const RewardFamily<T>& reward) {
  using Tr = ArithmeticTraits<T>;
  require_fresh(result, reward);
  const Model<T>& model = *result.model;
  std::vector<NodeId> region;
  for (NodeId n = 0; n < result.v.size(); ++n)
    if (!model.is_terminal(n) && Tr::less(result.vplus[n], result.v[n], Tr::stop_tol))
      region.push_back(n);
  return region;
}

// Raw node sets {v = v+} and {v > v+}, exposed for inspection.
template <class T>
std::pair<std::vector<NodeId>, std::vector<NodeId>> vplus_partition(
    const SnellResult<T>& result) {
  using Tr = ArithmeticTraits<T>;
  std::pair<std::vector<NodeId>, std::vector<NodeId>> parts;
  for (NodeId n = 0; n < result.v.size(); ++n) {
    if (Tr::eq(result.v[n], result.vplus[n], Tr::stop_tol))
      parts.first.push_back(n);
    else
      parts.second.push_back(n);
  }
  return parts;
}

// Random supermartingale dominating phi, built backward:
//   u_N = phi_N + xi_N,  u_t = max(phi_t, E[u_{t+1}|F_t]) + xi_t,  xi >= 0.
// Fixture for the smallest-dominating-supermartingale property.
template <class T>
AdaptedFamily<T> random_dominating_supermartingale(const Model<T>& model,
                                                   const RewardFamily<T>& reward,
                                                   SplitMix64& rng) {
  auto xi = [&rng]() {
    const long long num = static_cast<long long>(rng.below(6));
    const long long den = 1 + static_cast<long long>(rng.below(5));
    return ArithmeticTraits<T>::from_int(num) / ArithmeticTraits<T>::from_int(den);
  };
  AdaptedFamily<T> u(model.n_nodes(), T(0));
  for (NodeId n : model.level_nodes(model.n_steps())) u[n] = reward.at(n) + xi();
  for (int t = model.n_steps() - 1; t >= 0; --t) {
    const auto cont = conditional_expectation(model, u, t);
    const auto& lvl = model.level_nodes(t);
    for (std::size_t i = 0; i < lvl.size(); ++i)
      u[lvl[i]] = std::max(reward.at(lvl[i]), cont[i]) + xi();
  }
  return u;
}

}  // namespace snell
}  // namespace optstop
