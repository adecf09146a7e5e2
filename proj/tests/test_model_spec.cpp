#include "support/test_util.hpp"

#include <functional>
#include <optional>

using namespace testutil;
using nlohmann::json;

namespace {

json seven_node_spec() {
  return json{
      {"grid", {{"n_steps", 2}, {"horizon", 1.0}}},
      {"kind", "exact_tree"},
      {"arithmetic", "rational"},
      {"nodes",
       json::array({{{"id", "root"}, {"level", 0}, {"state", "4"}},
                    {{"id", "u"}, {"level", 1}, {"state", "8"}},
                    {{"id", "d"}, {"level", 1}, {"state", "2"}},
                    {{"id", "uu"}, {"level", 2}, {"state", "16"}},
                    {{"id", "ud"}, {"level", 2}, {"state", "4"}},
                    {{"id", "du"}, {"level", 2}, {"state", "4"}},
                    {{"id", "dd"}, {"level", 2}, {"state", "1"}}})},
      {"edges",
       json::array({{{"from", "root"}, {"to", "u"}, {"prob", "1/2"}},
                    {{"from", "root"}, {"to", "d"}, {"prob", "1/2"}},
                    {{"from", "u"}, {"to", "uu"}, {"prob", "0.5"}},
                    {{"from", "u"}, {"to", "ud"}, {"prob", "0.5"}},
                    {{"from", "d"}, {"to", "du"}, {"prob", "1/2"}},
                    {{"from", "d"}, {"to", "dd"}, {"prob", "1/2"}}})},
  };
}

template <class T>
void expect_structurally_equal(const Model<T>& a, const Model<T>& b) {
  REQUIRE(a.n_nodes() == b.n_nodes());
  REQUIRE(a.n_steps() == b.n_steps());
  REQUIRE(a.kind() == b.kind());
  for (int t = 0; t <= a.n_steps(); ++t)
    REQUIRE(a.level_nodes(t).size() == b.level_nodes(t).size());
  for (NodeId n = 0; n < a.n_nodes(); ++n) {
    REQUIRE(a.level_of(n) == b.level_of(n));
    REQUIRE(a.state(n) == b.state(n));
    const auto& ca = a.children(n);
    const auto& cb = b.children(n);
    REQUIRE(ca.size() == cb.size());
    for (std::size_t i = 0; i < ca.size(); ++i) {
      REQUIRE(ca[i].to == cb[i].to);
      REQUIRE(ca[i].prob == cb[i].prob);
    }
  }
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an engine error");
  return Errc::MalformedSpec;
}

}  // namespace

TEST_CASE("spec file round-trips the builder output", "[model_spec]") {
  const auto from_spec = build_from_spec<Rational>(seven_node_spec());
  expect_structurally_equal(from_spec, seven_node_tree());
  CHECK(spec_arithmetic(seven_node_spec()) == std::optional<std::string>{"rational"});
}

TEST_CASE("spec files parse decimal strings and p/q in both modes", "[model_spec]") {
  auto j = seven_node_spec();
  const auto mf = build_from_spec<double>(j);
  CHECK(mf.state(by_name(mf, "root")) == 4.0);
  for (const auto& e : mf.children(mf.root())) CHECK(e.prob == 0.5);
}

TEST_CASE("spec validation failures carry the right codes", "[model_spec]") {
  SECTION("probabilities that do not sum to one") {
    auto j = seven_node_spec();
    j["edges"][0]["prob"] = "0.6";
    j["edges"][1]["prob"] = "0.5";
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::ProbabilitySumViolation);
  }

  SECTION("empty node list") {
    auto j = seven_node_spec();
    j["nodes"] = json::array();
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("level with no nodes") {
    auto j = seven_node_spec();
    json pruned = json::array();
    for (const auto& n : j["nodes"])
      if (n["level"].get<int>() != 1) pruned.push_back(n);
    j["nodes"] = pruned;
    j["edges"] = json::array({json{{"from", "root"}, {"to", "uu"}, {"prob", "1"}}});
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("orphan node") {
    auto j = seven_node_spec();
    json edges = json::array();
    for (const auto& e : j["edges"])
      if (e["to"].get<std::string>() != "dd") edges.push_back(e);
    edges.back()["prob"] = "1";  // d -> du takes all the mass, dd is orphaned
    j["edges"] = edges;
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::OrphanNode);
  }

  SECTION("duplicate node id") {
    auto j = seven_node_spec();
    j["nodes"][2]["id"] = "u";
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("edge to an unknown node") {
    auto j = seven_node_spec();
    j["edges"][0]["to"] = "nope";
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("missing required fields") {
    auto j = seven_node_spec();
    j.erase("grid");
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("unknown kind") {
    auto j = seven_node_spec();
    j["kind"] = "trinomial";
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("unparseable numeric literal") {
    auto j = seven_node_spec();
    j["edges"][0]["prob"] = "one half";
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
  }

  SECTION("multiple parents require a lattice") {
    auto j = seven_node_spec();
    // route u -> du as well, giving du two parents
    j["edges"].push_back(json{{"from", "u"}, {"to", "du"}, {"prob", "1/4"}});
    j["edges"][2]["prob"] = "1/4";  // u -> uu
    j["edges"][3]["prob"] = "1/2";  // u -> ud
    CHECK(code_of([&] { build_from_spec<Rational>(j); }) == Errc::MalformedSpec);
    j["kind"] = "markov_lattice";
    CHECK_NOTHROW(build_from_spec<Rational>(j));
  }
}

TEST_CASE("numeric literal parsing is exact", "[model_spec][arithmetic]") {
  using Tr = ArithmeticTraits<Rational>;
  CHECK(Tr::parse("1/2") == Rational(1, 2));
  CHECK(Tr::parse("-3/9") == Rational(-1, 3));
  CHECK(Tr::parse("0.125") == Rational(1, 8));
  CHECK(Tr::parse("2.5e-1") == Rational(1, 4));
  CHECK(Tr::parse("25e2") == Rational(2500));
  CHECK(Tr::parse("17") == Rational(17));
  CHECK_THROWS_AS(Tr::parse("1/0"), Error);
  CHECK_THROWS_AS(Tr::parse(""), Error);
  CHECK_THROWS_AS(Tr::parse("1.2.3"), Error);

  using Trf = ArithmeticTraits<double>;
  CHECK(Trf::parse("1/2") == 0.5);
  CHECK(Trf::parse("0.25") == 0.25);
  CHECK_THROWS_AS(Trf::parse("abc"), Error);

  // round trip through the exact printer
  CHECK(Tr::parse(Tr::str(Rational(-7, 3))) == Rational(-7, 3));
}
