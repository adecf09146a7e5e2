#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "optstop/stopping.hpp"

namespace optstop {

// Exhaustive enumeration result. optimal_rules holds the exact argmax set in
// canonical form (rules identified up to induced-theta equality); rule_count
// counts raw interior decision maps, 2^interior.
template <class T>
struct OracleResult {
  T max_value{};
  std::vector<StoppingRule> optimal_rules;
  std::uint64_t rule_count = 0;
};

namespace oracle {

// 2^24 rules is the hard cap; the default test corpus stays at <= 15 interior
// nodes so the full suite runs in seconds.
inline constexpr int kMaxInteriorNodes = 24;

namespace detail {

template <class T>
std::vector<NodeId> interior_nodes_checked(const Model<T>& model) {
  if (model.kind() != ModelKind::ExactTree)
    fail(Errc::UnsupportedModelKind, "the oracle enumerates rules on exact trees only");
  std::vector<NodeId> interior;
  for (NodeId n = 0; n < model.n_nodes(); ++n)
    if (!model.is_terminal(n)) interior.push_back(n);
  if (interior.size() > static_cast<std::size_t>(kMaxInteriorNodes))
    fail(Errc::ModelTooLarge, "model has " + std::to_string(interior.size()) +
                                  " interior nodes; enumeration is capped at " +
                                  std::to_string(kMaxInteriorNodes));
  return interior;
}

}  // namespace detail

// Streams every map interior-node -> {STOP, CONTINUE} (terminal nodes STOP).
template <class T>
class RuleEnumerator {
 public:
  explicit RuleEnumerator(const Model<T>& model)
      : model_(&model), interior_(detail::interior_nodes_checked(model)) {
    count_ = std::uint64_t(1) << interior_.size();
  }

  std::uint64_t rule_count() const { return count_; }

  bool next(StoppingRule& out) {
    if (mask_ >= count_) return false;
    out.decision.assign(model_->n_nodes(), Decision::Stop);
    for (std::size_t i = 0; i < interior_.size(); ++i)
      out.decision[interior_[i]] =
          (mask_ >> i) & 1 ? Decision::Stop : Decision::Continue;
    ++mask_;
    return true;
  }

 private:
  const Model<T>* model_;
  std::vector<NodeId> interior_;
  std::uint64_t count_ = 0;
  std::uint64_t mask_ = 0;
};

template <class T>
RuleEnumerator<T> enumerate_rules(const Model<T>& model) {
  return RuleEnumerator<T>(model);
}

// Ground truth for the value supremum: evaluates every stopping rule and
// returns the exact maximum with the full argmax set. A rule's expectation
// depends only on its induced stopping time, so evaluation is cached per
// distinct stop-position vector; every one of the 2^interior raw maps is
// still visited. Rational arithmetic is required -- the argmax set is defined
// by exact equalities.
template <class T>
OracleResult<T> brute_force(const Model<T>& model, const RewardFamily<T>& reward) {
  using Tr = ArithmeticTraits<T>;
  if constexpr (!Tr::exact)
    fail(Errc::FloatModeRejected, "brute force enumeration requires rational arithmetic");
  if (reward.model_id != model.id())
    fail(Errc::ModelRewardMismatch, "reward was built on a different model");
  const auto interior = detail::interior_nodes_checked(model);
  std::vector<std::uint32_t> rank(model.n_nodes(), 0);
  for (std::size_t i = 0; i < interior.size(); ++i) rank[interior[i]] = static_cast<std::uint32_t>(i);

  struct PathInfo {
    std::vector<NodeId> nodes;
    std::vector<std::uint32_t> interior_ranks;  // ranks of nodes[0..d-1]
    std::vector<T> contribution;                // prob * phi(nodes[pos])
  };
  std::vector<PathInfo> paths;
  for (const auto& atom : enumerate_paths(model)) {
    PathInfo info;
    info.nodes = atom.nodes;
    for (std::size_t i = 0; i + 1 < atom.nodes.size(); ++i)
      info.interior_ranks.push_back(rank[atom.nodes[i]]);
    for (const NodeId n : atom.nodes) info.contribution.push_back(atom.prob * reward.at(n));
    paths.push_back(std::move(info));
  }

  const std::uint64_t total = std::uint64_t(1) << interior.size();
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<std::pair<std::string, T>> distinct;  // stop vector -> value
  std::string key(paths.size(), '\0');
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (std::size_t p = 0; p < paths.size(); ++p) {
      const auto& ranks = paths[p].interior_ranks;
      std::size_t pos = ranks.size();  // terminal stop by default
      for (std::size_t i = 0; i < ranks.size(); ++i) {
        if ((mask >> ranks[i]) & 1) {
          pos = i;
          break;
        }
      }
      key[p] = static_cast<char>(pos);
    }
    if (seen.emplace(key, distinct.size()).second) {
      T value = T(0);
      for (std::size_t p = 0; p < paths.size(); ++p)
        value += paths[p].contribution[static_cast<std::size_t>(key[p])];
      distinct.emplace_back(key, std::move(value));
    }
  }

  OracleResult<T> result;
  result.rule_count = total;
  result.max_value = distinct.front().second;
  for (const auto& [k, v] : distinct)
    if (v > result.max_value) result.max_value = v;
  for (const auto& [k, v] : distinct) {
    if (v != result.max_value) continue;
    // canonical rule: mark per-path stop nodes, then close downward
    StoppingRule rule = StoppingRule::at_horizon(model);
    for (std::size_t p = 0; p < paths.size(); ++p)
      rule.decision[paths[p].nodes[static_cast<std::size_t>(k[p])]] = Decision::Stop;
    result.optimal_rules.push_back(stopping::canonical_form(model, rule));
  }
  return result;
}

// Independent verification of the constructive claims on one instance:
//   (i)   brute-force maximum equals the envelope root value, exactly;
//   (ii)  theta* and theta-check are members of the optimal set;
//   (iii) every optimal rule is sandwiched pathwise: theta* <= tau <= theta-check,
//         and E[phi(theta*)] = E[phi(theta-check)] = v(root).
template <class T>
struct TheoremReport {
  T oracle_value{};
  T envelope_value{};
  bool value_match = false;
  bool minimal_in_optimal_set = false;
  bool maximal_in_optimal_set = false;
  bool sandwich_ok = false;
  bool optimal_values_match = false;
  std::string counterexample;

  bool ok() const {
    return value_match && minimal_in_optimal_set && maximal_in_optimal_set &&
           sandwich_ok && optimal_values_match;
  }
};

template <class T>
TheoremReport<T> verify_theorems(const Model<T>& model, const RewardFamily<T>& reward) {
  TheoremReport<T> report;
  const auto oracle = brute_force(model, reward);
  const auto result = snell::compute(model, reward);
  report.oracle_value = oracle.max_value;
  report.envelope_value = result.v[model.root()];
  report.value_match = report.oracle_value == report.envelope_value;

  const auto minimal = stopping::canonical_form(model, stopping::minimal_optimal(result, reward));
  const auto maximal = stopping::canonical_form(model, stopping::maximal_optimal(result, reward));
  for (const auto& rule : oracle.optimal_rules) {
    if (rule == minimal) report.minimal_in_optimal_set = true;
    if (rule == maximal) report.maximal_in_optimal_set = true;
  }
  if (!report.minimal_in_optimal_set) report.counterexample = "theta* not in the optimal set";
  if (!report.maximal_in_optimal_set) report.counterexample = "theta-check not in the optimal set";

  report.optimal_values_match =
      expectation_under_rule(model, minimal, reward) == report.envelope_value &&
      expectation_under_rule(model, maximal, reward) == report.envelope_value;
  if (!report.optimal_values_match)
    report.counterexample = "E[phi(theta*)] or E[phi(theta-check)] differs from v(root)";

  const auto min_levels = induced_stop_levels(model, minimal);
  const auto max_levels = induced_stop_levels(model, maximal);
  report.sandwich_ok = true;
  for (const auto& rule : oracle.optimal_rules) {
    const auto levels = induced_stop_levels(model, rule);
    for (std::size_t p = 0; p < levels.size(); ++p) {
      if (min_levels[p] > levels[p] || levels[p] > max_levels[p]) {
        report.sandwich_ok = false;
        report.counterexample =
            "sandwich fails on path " + std::to_string(p) + ": theta*=" +
            std::to_string(min_levels[p]) + " tau=" + std::to_string(levels[p]) +
            " theta-check=" + std::to_string(max_levels[p]);
        break;
      }
    }
    if (!report.sandwich_ok) break;
  }
  return report;
}

}  // namespace oracle
}  // namespace optstop
