#include "support/test_util.hpp"

using namespace testutil;

namespace {

bool contains(const std::vector<NodeId>& nodes, NodeId n) {
  return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
}

}  // namespace

TEST_CASE("snell envelope of the put example", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto result = snell::compute(m, put);

  // level 2 terminal values equal phi
  CHECK(result.v[by_name(m, "uu")] == 0);
  CHECK(result.v[by_name(m, "ud")] == 1);
  CHECK(result.v[by_name(m, "du")] == 1);
  CHECK(result.v[by_name(m, "dd")] == 4);
  // interior values: exhaustive rule enumeration (see oracle tests) gives 7/4
  CHECK(result.v[by_name(m, "u")] == rat("1/2"));
  CHECK(result.v[by_name(m, "d")] == 3);
  CHECK(result.v[m.root()] == rat("7/4"));
  // strictly-later values
  CHECK(result.vplus[m.root()] == rat("7/4"));
  CHECK(result.vplus[by_name(m, "d")] == rat("5/2"));
  CHECK(result.vplus[by_name(m, "dd")] == 4);  // terminal: vplus = phi

  SECTION("terminal nodes carry v = phi = vplus") {
    for (NodeId n : m.level_nodes(2)) {
      CHECK(result.v[n] == put.at(n));
      CHECK(result.vplus[n] == put.at(n));
    }
  }
}

TEST_CASE("snell envelope of the digital example", "[snell]") {
  const auto m = seven_node_tree();
  const auto usc = rewards::digital_usc(m, Rational(4));
  const auto result = snell::compute(m, usc);
  CHECK(result.v[m.root()] == 1);
  CHECK(result.vplus[m.root()] == rat("3/4"));
}

TEST_CASE("constant rewards give a constant envelope", "[snell]") {
  const auto m = seven_node_tree();
  const auto c = rewards::constant(m, rat("5/3"));
  const auto result = snell::compute(m, c);
  for (NodeId n = 0; n < m.n_nodes(); ++n) {
    CHECK(result.v[n] == rat("5/3"));
    CHECK(result.vplus[n] == rat("5/3"));
  }
}

TEST_CASE("compute rejects mismatched rewards", "[snell]") {
  const auto m = seven_node_tree();
  const auto other = seven_node_tree();
  const auto put = rewards::put(other, Rational(5));
  try {
    snell::compute(m, put);
    FAIL("expected MODEL_REWARD_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ModelRewardMismatch);
  }
}

TEST_CASE("supermartingale and dominance checks", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto result = snell::compute(m, put);

  SECTION("the envelope passes both") {
    CHECK(snell::check_supermartingale(m, result.v).ok());
    CHECK(snell::check_dominance(result.v, put).ok());
  }

  SECTION("phi itself fails the supermartingale check at the u node") {
    const auto report = snell::check_supermartingale(m, put.values);
    REQUIRE_FALSE(report.ok());
    // continuation at u is (0+1)/2 = 1/2 > 0 = phi(u)
    CHECK(contains(report.nodes, by_name(m, "u")));
  }

  SECTION("martingales have no supermartingale violations") {
    const auto doob = snell::doob_decompose(m, result);
    CHECK(snell::check_supermartingale(m, doob.M).ok());
  }

  SECTION("the zero family fails dominance exactly on positive-phi nodes") {
    const AdaptedFamily<Rational> zero(m.n_nodes(), Rational(0));
    const auto report = snell::check_dominance(zero, put);
    for (NodeId n = 0; n < m.n_nodes(); ++n)
      CHECK(contains(report.nodes, n) == (put.at(n) > 0));
  }

  SECTION("h = phi trivially dominates") {
    CHECK(snell::check_dominance(put.values, put).ok());
  }
}

TEST_CASE("smallest dominating supermartingale", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto result = snell::compute(m, put);

  SECTION("u = v passes with equality") {
    const auto check = snell::check_smallest(m, result.v, put, result);
    CHECK(check.applicable);
    CHECK(check.ok());
  }

  SECTION("an additive shift stays above") {
    AdaptedFamily<Rational> u = result.v;
    for (auto& x : u) x += 1;
    const auto check = snell::check_smallest(m, u, put, result);
    CHECK(check.applicable);
    CHECK(check.ok());
  }

  SECTION("100 random dominating supermartingales stay above v") {
    SplitMix64 rng(2024);
    for (int i = 0; i < 100; ++i) {
      const auto u = snell::random_dominating_supermartingale(m, put, rng);
      const auto check = snell::check_smallest(m, u, put, result);
      REQUIRE(check.applicable);
      REQUIRE(check.ok());
    }
  }

  SECTION("a family that is not applicable is reported as such") {
    AdaptedFamily<Rational> u(m.n_nodes(), Rational(0));
    const auto check = snell::check_smallest(m, u, put, result);
    CHECK_FALSE(check.applicable);
    CHECK(check.ok());  // vacuous
  }
}

TEST_CASE("envelope identity v = phi v vplus", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto result = snell::compute(m, put);
  CHECK(snell::vplus_identity_check(result, put).ok());
  // spot check at the u node: max(0, 1/2) = 1/2 = v
  CHECK(std::max(put.at(by_name(m, "u")), result.vplus[by_name(m, "u")]) ==
        result.v[by_name(m, "u")]);

  SECTION("exact on random instances") {
    for (const auto& inst : make_corpus(30, 41)) {
      const auto r = snell::compute(inst.model, inst.reward);
      REQUIRE(snell::vplus_identity_check(r, inst.reward).ok());
    }
  }

  SECTION("within 1e-12 relative on a 200-step float lattice") {
    const int n = 200;
    const double sigma = 0.2;
    const double up = std::exp(sigma * std::sqrt(1.0 / n));
    const auto lattice =
        build_binomial<double>(100.0, up, 1.0 / up, 0.5, n, 1.0, ModelKind::MarkovLattice);
    const auto put_f = rewards::put(lattice, 100.0);
    const auto r = snell::compute(lattice, put_f);
    CHECK(snell::vplus_identity_check(r, put_f).ok());
    using Tr = ArithmeticTraits<double>;
    for (NodeId node = 0; node < lattice.n_nodes(); ++node)
      REQUIRE(Tr::eq(r.v[node], std::max(put_f.at(node), r.vplus[node]), 1e-12));
  }
}

TEST_CASE("envelope fixed point", "[snell][property]") {
  for (const auto& inst : make_corpus(30, 57)) {
    const auto r = snell::compute(inst.model, inst.reward);
    for (int t = 0; t < inst.model.n_steps(); ++t) {
      const auto cont = conditional_expectation(inst.model, r.v, t);
      const auto& lvl = inst.model.level_nodes(t);
      for (std::size_t i = 0; i < lvl.size(); ++i)
        REQUIRE(r.v[lvl[i]] == std::max(inst.reward.at(lvl[i]), cont[i]));
    }
  }
}

TEST_CASE("doob decomposition of the put envelope", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto result = snell::compute(m, put);
  const auto doob = snell::doob_decompose(m, result);

  CHECK(doob.A[m.root()] == 0);
  // v(d) = 3, continuation(d) = 5/2: both children of d carry A = 1/2
  CHECK(doob.A[by_name(m, "du")] == rat("1/2"));
  CHECK(doob.A[by_name(m, "dd")] == rat("1/2"));
  for (const char* name : {"u", "d", "uu", "ud"})
    CHECK(doob.A[by_name(m, name)] == 0);

  SECTION("v = M - A and M is a martingale") {
    for (NodeId n = 0; n < m.n_nodes(); ++n) REQUIRE(doob.M[n] - doob.A[n] == result.v[n]);
    for (int t = 0; t < m.n_steps(); ++t) {
      const auto ce = conditional_expectation(m, doob.M, t);
      const auto& lvl = m.level_nodes(t);
      for (std::size_t i = 0; i < lvl.size(); ++i) REQUIRE(doob.M[lvl[i]] == ce[i]);
    }
  }
}

TEST_CASE("doob decomposition properties", "[snell][property]") {
  SECTION("constant rewards decompose into a constant martingale") {
    const auto m = seven_node_tree();
    const auto c = rewards::constant(m, rat("2/3"));
    const auto result = snell::compute(m, c);
    const auto doob = snell::doob_decompose(m, result);
    for (NodeId n = 0; n < m.n_nodes(); ++n) {
      CHECK(doob.A[n] == 0);
      CHECK(doob.M[n] == rat("2/3"));
    }
  }

  SECTION("siblings share A, A grows along paths, v = M - A") {
    for (const auto& inst : make_corpus(30, 73)) {
      const auto& m = inst.model;
      const auto result = snell::compute(m, inst.reward);
      const auto doob = snell::doob_decompose(m, result);
      REQUIRE(doob.A[m.root()] == 0);
      for (NodeId n = 0; n < m.n_nodes(); ++n) {
        REQUIRE(doob.M[n] - doob.A[n] == result.v[n]);
        const auto& kids = m.children(n);
        for (std::size_t i = 0; i < kids.size(); ++i) {
          REQUIRE(doob.A[kids[i].to] >= doob.A[n]);
          if (i > 0) REQUIRE(doob.A[kids[i].to] == doob.A[kids[0].to]);
        }
      }
      for (int t = 0; t < m.n_steps(); ++t) {
        const auto ce = conditional_expectation(m, doob.M, t);
        const auto& lvl = m.level_nodes(t);
        for (std::size_t i = 0; i < lvl.size(); ++i) REQUIRE(doob.M[lvl[i]] == ce[i]);
      }
    }
  }

  SECTION("rejected on lattices") {
    const auto lattice = build_binomial<Rational>(Rational(4), Rational(2), rat("1/2"),
                                                  rat("1/2"), 2, 1.0, ModelKind::MarkovLattice);
    const auto put = rewards::put(lattice, Rational(5));
    const auto result = snell::compute(lattice, put);
    try {
      snell::doob_decompose(lattice, result);
      FAIL("expected UNSUPPORTED_MODEL_KIND");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnsupportedModelKind);
    }
  }
}

TEST_CASE("strict supermartingale region forces exercise", "[snell]") {
  const auto m = seven_node_tree();

  SECTION("put example: exactly the d node") {
    const auto put = rewards::put(m, Rational(5));
    const auto result = snell::compute(m, put);
    const auto region = snell::strict_supermartingale_region(result, put);
    REQUIRE(region == std::vector<NodeId>{by_name(m, "d")});
  }

  SECTION("constant reward: empty") {
    const auto c = rewards::constant(m, Rational(2));
    const auto result = snell::compute(m, c);
    CHECK(snell::strict_supermartingale_region(result, c).empty());
  }

  SECTION("digital example: exactly the root (1 > 3/4)") {
    const auto usc = rewards::digital_usc(m, Rational(4));
    const auto result = snell::compute(m, usc);
    REQUIRE(snell::strict_supermartingale_region(result, usc) ==
            std::vector<NodeId>{m.root()});
  }

  SECTION("region is contained in {v = phi} on random instances") {
    for (const auto& inst : make_corpus(40, 61)) {
      const auto result = snell::compute(inst.model, inst.reward);
      const auto strict = snell::strict_supermartingale_region(result, inst.reward);
      for (NodeId n : strict) REQUIRE(result.v[n] == inst.reward.at(n));
    }
  }
}

TEST_CASE("vplus partition exposes {v = v+} and {v > v+}", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto result = snell::compute(m, put);
  const auto [eq, gt] = snell::vplus_partition(result);
  CHECK(eq.size() + gt.size() == m.n_nodes());
  CHECK(contains(gt, by_name(m, "d")));
  for (NodeId n : m.level_nodes(2)) CHECK(contains(eq, n));
}

TEST_CASE("envelope is monotone in the reward", "[snell][property]") {
  SplitMix64 rng(31);
  for (const auto& inst : make_corpus(20, 83)) {
    AdaptedFamily<Rational> bigger = inst.reward.values;
    for (auto& v : bigger) v += Rational(rng.below(5), 1 + rng.below(4));
    const auto phi2 = rewards::from_values(inst.model, std::move(bigger), "bigger");
    const auto r1 = snell::compute(inst.model, inst.reward);
    const auto r2 = snell::compute(inst.model, phi2);
    for (NodeId n = 0; n < inst.model.n_nodes(); ++n) REQUIRE(r2.v[n] >= r1.v[n]);
  }
}

TEST_CASE("stale results are rejected", "[snell]") {
  const auto m = seven_node_tree();
  const auto put = rewards::put(m, Rational(5));
  const auto call = rewards::call(m, Rational(5));
  const auto result = snell::compute(m, put);
  try {
    snell::vplus_identity_check(result, call);
    FAIL("expected STALE_RESULT");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::StaleResult);
  }
}
