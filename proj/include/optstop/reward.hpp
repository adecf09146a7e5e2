#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "optstop/model.hpp"

namespace optstop {

// Admissible nonnegative reward family, one value per node. On an exact tree
// the node encodes the whole path, so path-dependent rewards are representable
// and the family's consistency conditions hold structurally.
template <class T>
struct RewardFamily {
  AdaptedFamily<T> values;
  std::string label;
  std::uint64_t model_id = 0;
  std::uint64_t family_id = 0;

  const T& at(NodeId n) const { return values[n]; }
};

namespace rewards {

template <class T>
RewardFamily<T> from_values(const Model<T>& model, AdaptedFamily<T> values,
                            std::string label) {
  if (values.size() != model.n_nodes())
    fail(Errc::ModelRewardMismatch, "reward family is not defined on every node");
  for (NodeId n = 0; n < values.size(); ++n)
    if (values[n] < T(0))
      fail(Errc::NegativeReward,
           "reward at node " + model.node_name(n) + " is negative: " +
               ArithmeticTraits<T>::str(values[n]));
  return RewardFamily<T>{std::move(values), std::move(label), model.id(),
                         detail::next_object_id()};
}

// phi(n) = f(level(n), state(n)); f must be nonnegative on all visited states.
template <class T, class F>
RewardFamily<T> from_function(const Model<T>& model, F&& f, std::string label = "custom") {
  AdaptedFamily<T> values(model.n_nodes());
  for (NodeId n = 0; n < model.n_nodes(); ++n)
    values[n] = f(model.level_of(n), model.state(n));
  return from_values(model, std::move(values), std::move(label));
}

// Indicator of the closed set {x >= K}: the canonical USC payoff.
template <class T>
RewardFamily<T> digital_usc(const Model<T>& model, const T& strike) {
  return from_function(
      model, [&](int, const T& x) { return x >= strike ? T(1) : T(0); },
      "digital_usc(K=" + ArithmeticTraits<T>::str(strike) + ")");
}

// Indicator of the open set {x > K}: LSC counterpart, built for contrast runs.
template <class T>
RewardFamily<T> digital_lsc(const Model<T>& model, const T& strike) {
  return from_function(
      model, [&](int, const T& x) { return x > strike ? T(1) : T(0); },
      "digital_lsc(K=" + ArithmeticTraits<T>::str(strike) + ")");
}

template <class T>
RewardFamily<T> put(const Model<T>& model, const T& strike) {
  return from_function(
      model, [&](int, const T& x) { return x < strike ? strike - x : T(0); },
      "put(K=" + ArithmeticTraits<T>::str(strike) + ")");
}

template <class T>
RewardFamily<T> call(const Model<T>& model, const T& strike) {
  return from_function(
      model, [&](int, const T& x) { return x > strike ? x - strike : T(0); },
      "call(K=" + ArithmeticTraits<T>::str(strike) + ")");
}

template <class T>
RewardFamily<T> constant(const Model<T>& model, const T& c) {
  if (c < T(0))
    fail(Errc::NegativeReward, "constant reward must be nonnegative");
  return from_values(model, AdaptedFamily<T>(model.n_nodes(), c),
                     "constant(" + ArithmeticTraits<T>::str(c) + ")");
}

// phi(n) = max state along the path to n. Path-dependent, so exact trees only.
template <class T>
RewardFamily<T> path_lookback_max(const Model<T>& model) {
  if (model.kind() != ModelKind::ExactTree)
    fail(Errc::UnsupportedModelKind,
         "lookback rewards are path-dependent; exact tree required");
  AdaptedFamily<T> values(model.n_nodes());
  values[model.root()] = model.state(model.root());
  for (int t = 1; t <= model.n_steps(); ++t)
    for (NodeId n : model.level_nodes(t))
      values[n] = std::max(values[model.parent(n)], model.state(n));
  return from_values(model, std::move(values), "lookback_max");
}

// ---------------------------------------------------------------------------
// Semicontinuity-in-expectation diagnostic

template <class T>
struct UscDiagnostic {
  std::vector<T> expectations;  // E[phi(theta_i)] along the sequence
  T tail_expectation{};         // E[phi(theta_k)], the finite-grid limsup proxy
  T limit_expectation{};
  bool violation = false;       // tail exceeds the value at the limit
  std::string note;
};

// Checks limsup_n E[phi(theta_n)] <= E[phi(limit)] for a pathwise nondecreasing
// sequence theta_1 <= ... <= theta_k <= limit. On a fixed finite grid the
// sequence is eventually constant, so the tail expectation stands in for the
// limsup; this is a finite-sample diagnostic, not a proof of the
// continuous-time hypothesis.
template <class T>
UscDiagnostic<T> usc_in_expectation_diagnostic(const Model<T>& model,
                                               const RewardFamily<T>& reward,
                                               const std::vector<StoppingRule>& rules,
                                               const StoppingRule& limit) {
  if (model.kind() != ModelKind::ExactTree)
    fail(Errc::UnsupportedModelKind, "pathwise monotone sequences require an exact tree");
  if (reward.model_id != model.id())
    fail(Errc::ModelRewardMismatch, "reward was built on a different model");
  if (rules.empty()) fail(Errc::NonMonotoneSequence, "empty stopping-time sequence");

  std::vector<std::vector<int>> levels;
  levels.reserve(rules.size() + 1);
  for (const auto& r : rules) levels.push_back(induced_stop_levels(model, r));
  levels.push_back(induced_stop_levels(model, limit));
  for (std::size_t i = 0; i + 1 < levels.size(); ++i)
    for (std::size_t p = 0; p < levels[i].size(); ++p)
      if (levels[i][p] > levels[i + 1][p])
        fail(Errc::NonMonotoneSequence,
             "theta_" + std::to_string(i + 1) + " exceeds " +
                 (i + 2 == levels.size() ? std::string("the limit")
                                         : "theta_" + std::to_string(i + 2)) +
                 " on path " + std::to_string(p));

  UscDiagnostic<T> diag;
  for (const auto& r : rules)
    diag.expectations.push_back(expectation_of_family(model, r, reward.values));
  diag.tail_expectation = diag.expectations.back();
  diag.limit_expectation = expectation_of_family(model, limit, reward.values);
  using Tr = ArithmeticTraits<T>;
  diag.violation = Tr::less(diag.limit_expectation, diag.tail_expectation, Tr::model_tol);
  diag.note =
      "finite-sample check on a fixed grid; not a proof of upper "
      "semicontinuity in expectation along stopping times";
  return diag;
}

}  // namespace rewards

// Spec-facing alias: expectation of a reward under a stopping rule, optionally
// started at `from` (theta = first STOP at time >= from(path)).
template <class T>
T expectation_under_rule(const Model<T>& model, const StoppingRule& rule,
                         const RewardFamily<T>& reward, const StoppingRule& from) {
  if (reward.model_id != model.id())
    fail(Errc::ModelRewardMismatch, "reward was built on a different model");
  return expectation_of_family(model, rule, reward.values, from);
}

template <class T>
T expectation_under_rule(const Model<T>& model, const StoppingRule& rule,
                         const RewardFamily<T>& reward) {
  return expectation_under_rule(model, rule, reward, StoppingRule::immediate(model));
}

}  // namespace optstop
