#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optstop/reward.hpp"
#include "optstop/rng.hpp"

namespace optstop {

// Reproducible randomized test corpus: binary exact trees of depth 2..4 with
// small-denominator rational probabilities and rewards. Small denominators
// make exact ties common, which stresses the theta*/theta-check tie-break
// rules. The default corpus (seed 271828, 200 instances) is what `verify`
// and the acceptance suite run on.
inline constexpr std::uint64_t kCorpusSeed = 271828;
inline constexpr int kCorpusSize = 200;

struct CorpusInstance {
  Model<Rational> model;
  RewardFamily<Rational> reward;
  std::string name;
};

inline CorpusInstance random_corpus_instance(SplitMix64& rng, int index) {
  const int depth = 2 + static_cast<int>(rng.below(3));
  const std::size_t n_nodes = (std::size_t(1) << (depth + 1)) - 1;

  std::vector<Model<Rational>::NodeData> nodes(n_nodes);
  // heap layout: level t occupies [2^t - 1, 2^{t+1} - 1); children of k are
  // 2k+1 (up) and 2k+2 (down)
  nodes[0].level = 0;
  nodes[0].state = Rational(4);
  for (std::size_t k = 0; k < n_nodes; ++k) {
    const int level = nodes[k].level;
    if (level == depth) continue;
    const std::size_t up = 2 * k + 1, down = 2 * k + 2;
    const long long den = 2 + static_cast<long long>(rng.below(9));   // q in [2,10]
    const long long num = 1 + static_cast<long long>(rng.below(den - 1));
    const Rational p(num, den);
    nodes[k].children = {{static_cast<NodeId>(up), p},
                         {static_cast<NodeId>(down), Rational(1) - p}};
    nodes[up].level = nodes[down].level = level + 1;
    nodes[up].state = nodes[k].state * 2;
    nodes[down].state = nodes[k].state / 2;
  }
  Model<Rational> model(TimeGrid(depth, 1.0), ModelKind::ExactTree, std::move(nodes));

  AdaptedFamily<Rational> values(model.n_nodes());
  for (auto& v : values) {
    const long long num = static_cast<long long>(rng.below(21));  // numerator in [0,20]
    const long long den = 1 + static_cast<long long>(rng.below(10));
    v = Rational(num, den);
  }
  auto reward = rewards::from_values(model, std::move(values),
                                     "corpus#" + std::to_string(index));
  return CorpusInstance{std::move(model), std::move(reward),
                        "corpus#" + std::to_string(index)};
}

inline std::vector<CorpusInstance> make_corpus(int count = kCorpusSize,
                                               std::uint64_t seed = kCorpusSeed) {
  SplitMix64 rng(seed);
  std::vector<CorpusInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(random_corpus_instance(rng, i));
  return out;
}

// Random valid rule (interior decisions uniform, terminal forced STOP).
template <class T>
StoppingRule random_rule(const Model<T>& model, SplitMix64& rng) {
  StoppingRule rule{std::vector<Decision>(model.n_nodes(), Decision::Stop)};
  for (NodeId n = 0; n < model.n_nodes(); ++n)
    if (!model.is_terminal(n))
      rule.decision[n] = rng.below(2) ? Decision::Stop : Decision::Continue;
  return rule;
}

}  // namespace optstop
