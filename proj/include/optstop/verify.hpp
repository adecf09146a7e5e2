#pragma once

#include <string>
#include <vector>

#include "optstop/oracle.hpp"
#include "optstop/rng.hpp"

namespace optstop {

// Invariant battery over one model/reward instance, shared by the `verify`
// subcommand. Collects one line per violated invariant; empty = pass.
struct VerifyOptions {
  bool with_oracle = true;            // skipped with a notice above the size cap
  int supermartingale_samples = 5;    // random dominating supermartingales
  std::uint64_t sample_seed = 1;
  bool inject_fault = false;          // test fixture: corrupts v before checking
};

struct VerifyOutcome {
  std::vector<std::string> failures;
  std::vector<std::string> notices;
  bool ok() const { return failures.empty(); }
};

template <class T>
VerifyOutcome verify_instance(const Model<T>& model, const RewardFamily<T>& reward,
                              const VerifyOptions& options = {}) {
  using Tr = ArithmeticTraits<T>;
  VerifyOutcome outcome;
  auto result = snell::compute(model, reward);

  if (options.inject_fault) {
    // push v below the continuation value at the root's first child
    const NodeId victim = model.children(model.root()).front().to;
    result.v[victim] = result.v[victim] == T(0) ? T(1) : result.v[victim] * T(2);
  }

  auto expect = [&](bool condition, const std::string& what) {
    if (!condition) outcome.failures.push_back(what);
  };

  // envelope fixed point v = max(phi, E[v_{t+1}|F_t]) and v = phi v vplus
  bool fixed_point = true;
  for (int t = 0; t < model.n_steps(); ++t) {
    const auto cont = conditional_expectation(model, result.v, t);
    const auto& lvl = model.level_nodes(t);
    for (std::size_t i = 0; i < lvl.size(); ++i)
      if (!Tr::eq(result.v[lvl[i]], std::max(reward.at(lvl[i]), cont[i]), Tr::model_tol))
        fixed_point = false;
  }
  expect(fixed_point, "envelope fixed point v = max(phi, E[v|F_t])");
  expect(snell::vplus_identity_check(result, reward).ok(), "identity v = phi v vplus");
  expect(snell::check_supermartingale(model, result.v).ok(), "v is a supermartingale");
  expect(snell::check_dominance(result.v, reward).ok(), "v dominates phi");

  SplitMix64 rng(options.sample_seed);
  for (int s = 0; s < options.supermartingale_samples; ++s) {
    const auto u = snell::random_dominating_supermartingale(model, reward, rng);
    expect(snell::check_smallest(model, u, reward, result).ok(),
           "v is the smallest dominating supermartingale");
  }

  // strictness forces exercise
  {
    const auto strict = snell::strict_supermartingale_region(result, reward);
    const auto exercise = stopping::exercise_region(result, reward);
    std::vector<std::uint8_t> in_ex(model.n_nodes(), 0);
    for (NodeId n : exercise) in_ex[n] = 1;
    bool contained = true;
    for (NodeId n : strict)
      if (!in_ex[n]) contained = false;
    expect(contained, "strict supermartingale region inside {v = phi}");
  }

  const auto minimal = stopping::minimal_optimal(result, reward);
  const auto maximal = stopping::maximal_optimal(result, reward);
  const T root_value = result.v[model.root()];
  expect(Tr::eq(expectation_under_rule(model, minimal, reward), root_value, Tr::model_tol),
         "E[phi(theta*)] = v(root)");
  expect(Tr::eq(expectation_under_rule(model, maximal, reward), root_value, Tr::model_tol),
         "E[phi(theta-check)] = v(root)");
  expect(stopping::martingale_interval_check(model, result, StoppingRule::immediate(model),
                                             minimal)
             .ok(),
         "v is a martingale strictly before theta*");

  if (model.kind() == ModelKind::ExactTree) {
    const auto doob = snell::doob_decompose(model, result);
    expect(doob.A[model.root()] == T(0), "A(root) = 0");
    bool recompose = true, nondecreasing = true, siblings = true, first_increase = true;
    for (NodeId n = 0; n < model.n_nodes(); ++n) {
      if (!Tr::eq(doob.M[n] - doob.A[n], result.v[n], Tr::model_tol)) recompose = false;
      const T* shared = nullptr;
      for (const auto& e : model.children(n)) {
        if (doob.A[e.to] < doob.A[n]) nondecreasing = false;
        if (shared && !(*shared == doob.A[e.to])) siblings = false;
        shared = &doob.A[e.to];
      }
    }
    expect(recompose, "v = M - A");
    expect(nondecreasing, "A nondecreasing along paths");
    expect(siblings, "siblings share A (predictability)");
    expect(snell::check_supermartingale(model, doob.M).ok() &&
               [&] {
                 for (int t = 0; t < model.n_steps(); ++t) {
                   const auto cm = conditional_expectation(model, doob.M, t);
                   const auto& lvl = model.level_nodes(t);
                   for (std::size_t i = 0; i < lvl.size(); ++i)
                     if (!Tr::eq(doob.M[lvl[i]], cm[i], Tr::model_tol)) return false;
                 }
                 return true;
               }(),
           "M is a martingale");
    // theta-check = first time the compensator increases
    StoppingRule first_inc{std::vector<Decision>(model.n_nodes(), Decision::Continue)};
    for (NodeId n = 0; n < model.n_nodes(); ++n) {
      if (model.is_terminal(n)) {
        first_inc.decision[n] = Decision::Stop;
        continue;
      }
      const auto& kids = model.children(n);
      if (!kids.empty() && doob.A[kids.front().to] > doob.A[n])
        first_inc.decision[n] = Decision::Stop;
    }
    if (stopping::canonical_form(model, first_inc) !=
        stopping::canonical_form(model, maximal))
      first_increase = false;
    expect(first_increase, "theta-check = first compensator increase");

    if (options.with_oracle) {
      if (model.interior_count() <= static_cast<std::size_t>(oracle::kMaxInteriorNodes)) {
        if constexpr (Tr::exact) {
          const auto report = oracle::verify_theorems(model, reward);
          expect(report.ok(), report.ok() ? ""
                                          : "oracle verification: " +
                                                (report.counterexample.empty()
                                                     ? std::string("value mismatch")
                                                     : report.counterexample));
        } else {
          outcome.notices.push_back("oracle skipped: requires rational arithmetic");
        }
      } else {
        outcome.notices.push_back("oracle skipped: model above the enumeration cap");
      }
    }
  }
  return outcome;
}

}  // namespace optstop
