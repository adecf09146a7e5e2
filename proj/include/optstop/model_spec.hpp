#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "optstop/model.hpp"

namespace optstop {

// Model spec files are JSON with sections
//   grid  {n_steps, horizon}
//   nodes [{id, level, state}]
//   edges [{from, to, prob}]
//   kind  "exact_tree" | "markov_lattice"   (optional, default exact_tree)
//   arithmetic "rational" | "float"          (optional hint, see spec_arithmetic)
// States and probabilities may be JSON numbers or strings; strings accept
// decimals and "p/q" rationals and are the exact-mode-safe form.

namespace detail {

template <class T>
T parse_spec_value(const nlohmann::json& j, const std::string& what) {
  if (j.is_string()) return ArithmeticTraits<T>::parse(j.get<std::string>());
  if (j.is_number_integer()) return ArithmeticTraits<T>::from_int(j.get<long long>());
  if (j.is_number()) return ArithmeticTraits<T>::from_double(j.get<double>());
  fail(Errc::MalformedSpec, what + " must be a number or numeric string");
}

inline const nlohmann::json& spec_field(const nlohmann::json& j, const char* key,
                                        const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    fail(Errc::MalformedSpec, where + " is missing required field '" + key + "'");
  return j.at(key);
}

}  // namespace detail

inline std::optional<std::string> spec_arithmetic(const nlohmann::json& j) {
  if (j.contains("arithmetic") && j["arithmetic"].is_string())
    return j["arithmetic"].get<std::string>();
  return std::nullopt;
}

template <class T>
Model<T> build_from_spec(const nlohmann::json& j) {
  if (!j.is_object()) fail(Errc::MalformedSpec, "model spec must be a JSON object");

  const auto& grid_j = detail::spec_field(j, "grid", "model spec");
  const auto& n_steps_j = detail::spec_field(grid_j, "n_steps", "grid");
  const auto& horizon_j = detail::spec_field(grid_j, "horizon", "grid");
  if (!n_steps_j.is_number_integer()) fail(Errc::MalformedSpec, "grid.n_steps must be an integer");
  if (!horizon_j.is_number()) fail(Errc::MalformedSpec, "grid.horizon must be a number");
  const int n_steps = n_steps_j.get<int>();
  if (n_steps < 1) fail(Errc::MalformedSpec, "grid.n_steps must be >= 1");
  TimeGrid grid(n_steps, horizon_j.get<double>());

  ModelKind kind = ModelKind::ExactTree;
  if (j.contains("kind")) {
    const std::string k = j["kind"].get<std::string>();
    if (k == "exact_tree")
      kind = ModelKind::ExactTree;
    else if (k == "markov_lattice")
      kind = ModelKind::MarkovLattice;
    else
      fail(Errc::MalformedSpec, "unknown model kind '" + k + "'");
  }

  const auto& nodes_j = detail::spec_field(j, "nodes", "model spec");
  if (!nodes_j.is_array() || nodes_j.empty())
    fail(Errc::MalformedSpec, "nodes section must be a nonempty array");

  std::vector<typename Model<T>::NodeData> nodes;
  std::vector<std::string> names;
  std::map<std::string, NodeId> by_name;
  for (const auto& nj : nodes_j) {
    const auto& id_j = detail::spec_field(nj, "id", "node");
    const std::string name =
        id_j.is_string() ? id_j.get<std::string>() : std::to_string(id_j.get<long long>());
    const auto& level_j = detail::spec_field(nj, "level", "node " + name);
    if (!level_j.is_number_integer())
      fail(Errc::MalformedSpec, "node " + name + " level must be an integer");
    if (by_name.count(name)) fail(Errc::MalformedSpec, "duplicate node id '" + name + "'");
    by_name[name] = static_cast<NodeId>(nodes.size());
    nodes.push_back({level_j.get<int>(),
                     detail::parse_spec_value<T>(detail::spec_field(nj, "state", "node"),
                                                 "node " + name + " state"),
                     {}});
    names.push_back(name);
  }

  const auto& edges_j = detail::spec_field(j, "edges", "model spec");
  if (!edges_j.is_array()) fail(Errc::MalformedSpec, "edges section must be an array");
  for (const auto& ej : edges_j) {
    const std::string from = detail::spec_field(ej, "from", "edge").get<std::string>();
    const std::string to = detail::spec_field(ej, "to", "edge").get<std::string>();
    const auto fi = by_name.find(from);
    const auto ti = by_name.find(to);
    if (fi == by_name.end()) fail(Errc::MalformedSpec, "edge references unknown node '" + from + "'");
    if (ti == by_name.end()) fail(Errc::MalformedSpec, "edge references unknown node '" + to + "'");
    nodes[fi->second].children.push_back(
        {ti->second, detail::parse_spec_value<T>(detail::spec_field(ej, "prob", "edge"),
                                                 "edge " + from + " -> " + to + " prob")});
  }

  return Model<T>(std::move(grid), kind, std::move(nodes), std::move(names));
}

template <class T>
Model<T> build_from_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MalformedSpec, "cannot open model spec file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(Errc::MalformedSpec, "model spec '" + path + "' is not valid JSON: " + e.what());
  }
  return build_from_spec<T>(j);
}

}  // namespace optstop
