#include "support/test_util.hpp"

using namespace testutil;

TEST_CASE("put payoff from a function of (level, state)", "[reward]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  CHECK(put.at(by_name(m, "root")) == 1);
  CHECK(put.at(by_name(m, "u")) == 0);
  CHECK(put.at(by_name(m, "d")) == 3);
  CHECK(put.at(by_name(m, "uu")) == 0);
  CHECK(put.at(by_name(m, "ud")) == 1);
  CHECK(put.at(by_name(m, "du")) == 1);
  CHECK(put.at(by_name(m, "dd")) == 4);
}

TEST_CASE("from_function rejects negative rewards and accepts zero", "[reward]") {
  const auto m = seven_node_tree();
  CHECK_NOTHROW(rewards::from_function(m, [](int, const Rational&) { return Rational(0); }));
  try {
    rewards::from_function(m, [](int, const Rational& x) { return x - Rational(100); });
    FAIL("expected NEGATIVE_REWARD");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NegativeReward);
  }
}

TEST_CASE("digital payoffs split exactly at the threshold", "[reward]") {
  const auto m = seven_node_tree();

  SECTION("usc digital: indicator of {x >= K}") {
    const auto usc = rewards::digital_usc(m, Rational(4));
    CHECK(usc.at(by_name(m, "root")) == 1);
    CHECK(usc.at(by_name(m, "u")) == 1);
    CHECK(usc.at(by_name(m, "d")) == 0);
    CHECK(usc.at(by_name(m, "uu")) == 1);
    CHECK(usc.at(by_name(m, "ud")) == 1);
    CHECK(usc.at(by_name(m, "du")) == 1);
    CHECK(usc.at(by_name(m, "dd")) == 0);
  }

  SECTION("K = 0 and K above the range are constant") {
    const auto all = rewards::digital_usc(m, Rational(0));
    const auto none = rewards::digital_usc(m, Rational(17));
    for (NodeId n = 0; n < m.n_nodes(); ++n) {
      CHECK(all.at(n) == 1);
      CHECK(none.at(n) == 0);
    }
  }

  SECTION("lsc digital: indicator of {x > K}") {
    const auto lsc = rewards::digital_lsc(m, Rational(4));
    CHECK(lsc.at(by_name(m, "root")) == 0);
    CHECK(lsc.at(by_name(m, "u")) == 1);
    CHECK(lsc.at(by_name(m, "d")) == 0);
    CHECK(lsc.at(by_name(m, "uu")) == 1);
    CHECK(lsc.at(by_name(m, "ud")) == 0);
    CHECK(lsc.at(by_name(m, "du")) == 0);
    CHECK(lsc.at(by_name(m, "dd")) == 0);
  }

  SECTION("usc - lsc is the indicator of {x = K}") {
    SplitMix64 rng(5);
    for (const auto& inst : make_corpus(15, 77)) {
      const long long num = static_cast<long long>(rng.below(32));
      const Rational k(num, 2);  // sometimes hits grid states exactly
      const auto usc = rewards::digital_usc(inst.model, k);
      const auto lsc = rewards::digital_lsc(inst.model, k);
      for (NodeId n = 0; n < inst.model.n_nodes(); ++n) {
        REQUIRE(lsc.at(n) <= usc.at(n));
        REQUIRE(usc.at(n) - lsc.at(n) ==
                (inst.model.state(n) == k ? Rational(1) : Rational(0)));
      }
    }
  }

  SECTION("K below every state gives the constant 1") {
    const auto lsc = rewards::digital_lsc(m, rat("1/2"));
    for (NodeId n = 0; n < m.n_nodes(); ++n) CHECK(lsc.at(n) == 1);
  }
}

TEST_CASE("constant families", "[reward]") {
  const auto m = seven_node_tree();
  const auto ones = rewards::constant(m, Rational(1));
  const auto zero = rewards::constant(m, Rational(0));
  for (NodeId n = 0; n < m.n_nodes(); ++n) {
    CHECK(ones.at(n) == 1);
    CHECK(zero.at(n) == 0);
  }
  try {
    rewards::constant(m, Rational(-1));
    FAIL("expected NEGATIVE_REWARD");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NegativeReward);
  }
}

TEST_CASE("lookback max follows the running path maximum", "[reward]") {
  const auto m = seven_node_tree();
  const auto lb = rewards::path_lookback_max(m);
  CHECK(lb.at(by_name(m, "root")) == 4);   // root carries s0
  CHECK(lb.at(by_name(m, "dd")) == 4);     // path 4 -> 2 -> 1, max 4
  CHECK(lb.at(by_name(m, "uu")) == 16);    // monotone-up path ends at its terminal state
  CHECK(lb.at(by_name(m, "du")) == 4);
  CHECK(lb.at(by_name(m, "ud")) == 8);

  const auto lattice = build_binomial<Rational>(Rational(4), Rational(2), rat("1/2"),
                                                rat("1/2"), 2, 1.0, ModelKind::MarkovLattice);
  try {
    rewards::path_lookback_max(lattice);
    FAIL("expected UNSUPPORTED_MODEL_KIND");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnsupportedModelKind);
  }
}

TEST_CASE("pointwise max of functions builds the pointwise max family", "[reward][property]") {
  SplitMix64 rng(13);
  for (const auto& inst : make_corpus(10, 55)) {
    auto f = [](int t, const Rational& x) { return Rational(x / (t + 1)); };
    auto g = [](int, const Rational& x) { return x > 3 ? x - 3 : Rational(0); };
    const auto ff = rewards::from_function(inst.model, f);
    const auto gg = rewards::from_function(inst.model, g);
    const auto fg = rewards::from_function(
        inst.model, [&](int t, const Rational& x) { return std::max(f(t, x), g(t, x)); });
    for (NodeId n = 0; n < inst.model.n_nodes(); ++n)
      REQUIRE(fg.at(n) == std::max(ff.at(n), gg.at(n)));
  }
  (void)rng;
}

TEST_CASE("semicontinuity-in-expectation diagnostic", "[reward]") {
  SECTION("constant rewards never violate") {
    const auto m = seven_node_tree();
    const auto c = rewards::constant(m, rat("3/2"));
    const std::vector<StoppingRule> seq{StoppingRule::immediate(m),
                                        rule_stopping_at(m, {"u", "d"}),
                                        StoppingRule::at_horizon(m)};
    const auto diag =
        rewards::usc_in_expectation_diagnostic(m, c, seq, StoppingRule::at_horizon(m));
    CHECK_FALSE(diag.violation);
    for (const auto& e : diag.expectations) CHECK(e == rat("3/2"));
    CHECK(diag.limit_expectation == rat("3/2"));
    CHECK_FALSE(diag.note.empty());
  }

  SECTION("a sequence equal to its limit from some index on is a tail equality") {
    const auto m = seven_node_tree();
    const auto put = rewards::put(m, Rational(5));
    const auto limit = rule_stopping_at(m, {"d"});
    const std::vector<StoppingRule> seq{StoppingRule::immediate(m), limit, limit};
    const auto diag = rewards::usc_in_expectation_diagnostic(m, put, seq, limit);
    CHECK_FALSE(diag.violation);
    CHECK(diag.tail_expectation == diag.limit_expectation);
  }

  SECTION("lsc digital flags states approaching K from above") {
    // Deterministic descending staircase: states K 2^(N-t) down to K at the
    // horizon. Stopping one step before the end sees state 2K (> K, payoff 1);
    // the limit stops at K (payoff 0). Checked on a family of refinements.
    for (int n_steps : {2, 4, 8, 16}) {
      const Rational strike(3);
      const auto chain = build_binomial<Rational>(
          strike * Rational(BigInt(1) << n_steps), Rational(2), rat("1/2"), Rational(0),
          n_steps, 1.0, ModelKind::ExactTree);
      const auto lsc = rewards::digital_lsc(chain, strike);
      std::vector<StoppingRule> seq;
      for (int t = 1; t < n_steps; ++t) {
        StoppingRule r = StoppingRule::at_horizon(chain);
        for (NodeId node : chain.level_nodes(t)) r.decision[node] = Decision::Stop;
        seq.push_back(r);
      }
      const auto diag = rewards::usc_in_expectation_diagnostic(
          chain, lsc, seq, StoppingRule::at_horizon(chain));
      CHECK(diag.violation);
      CHECK(diag.tail_expectation == 1);   // E[phi(theta_n)] = 1 strictly above K
      CHECK(diag.limit_expectation == 0);  // at the limit the state equals K

      // the usc digital on the same sequence is clean
      const auto usc = rewards::digital_usc(chain, strike);
      CHECK_FALSE(rewards::usc_in_expectation_diagnostic(chain, usc, seq,
                                                         StoppingRule::at_horizon(chain))
                      .violation);
    }
  }

  SECTION("non-monotone sequences are rejected") {
    const auto m = seven_node_tree();
    const auto c = rewards::constant(m, Rational(1));
    const std::vector<StoppingRule> seq{StoppingRule::at_horizon(m),
                                        StoppingRule::immediate(m)};
    try {
      rewards::usc_in_expectation_diagnostic(m, c, seq, StoppingRule::at_horizon(m));
      FAIL("expected NON_MONOTONE_SEQUENCE");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonMonotoneSequence);
    }
  }
}

TEST_CASE("reward families are nonnegative everywhere", "[reward][property]") {
  SplitMix64 rng(17);
  for (const auto& inst : make_corpus(20, 99)) {
    for (NodeId n = 0; n < inst.model.n_nodes(); ++n) REQUIRE(inst.reward.at(n) >= 0);
    const auto lb = rewards::path_lookback_max(inst.model);
    for (NodeId n = 0; n < inst.model.n_nodes(); ++n) REQUIRE(lb.at(n) >= 0);
  }
  (void)rng;
}
