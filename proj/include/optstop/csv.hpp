#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "optstop/snell.hpp"
#include "optstop/stopping.hpp"

namespace optstop {
namespace csv {

// All writers emit a schema comment line first so downstream plotting can pin
// column layouts, and go through a temp file + rename so readers never see a
// partial file.
inline void atomic_write(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& body) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(Errc::ParameterOutOfRange, "cannot write to " + tmp.string());
    body(out);
  }
  fs::rename(tmp, path);
}

// One row per node: id, level, state, phi, v, vplus and, when a Doob
// decomposition is supplied, the compensator A and martingale part M.
template <class T>
void write_snell(const std::filesystem::path& path, const Model<T>& model,
                 const RewardFamily<T>& reward, const SnellResult<T>& result,
                 const DoobDecomposition<T>* doob = nullptr) {
  using Tr = ArithmeticTraits<T>;
  atomic_write(path, [&](std::ostream& out) {
    out << "# schema: optstop.snell.v1 arithmetic=" << Tr::name() << "\n";
    out << "node,level,state,phi,v,vplus,A,M\n";
    for (NodeId n = 0; n < model.n_nodes(); ++n) {
      out << model.node_name(n) << ',' << model.level_of(n) << ','
          << Tr::str(model.state(n)) << ',' << Tr::str(reward.at(n)) << ','
          << Tr::str(result.v[n]) << ',' << Tr::str(result.vplus[n]) << ',';
      if (doob) out << Tr::str(doob->A[n]) << ',' << Tr::str(doob->M[n]);
      else out << ',';
      out << '\n';
    }
  });
}

template <class T>
void write_rule(const std::filesystem::path& path, const Model<T>& model,
                const StoppingRule& rule, const std::string& label) {
  atomic_write(path, [&](std::ostream& out) {
    out << "# schema: optstop.rule.v1 label=" << label << "\n";
    out << "node,level,decision\n";
    for (NodeId n = 0; n < model.n_nodes(); ++n)
      out << model.node_name(n) << ',' << model.level_of(n) << ','
          << (rule.decision[n] == Decision::Stop ? "STOP" : "CONTINUE") << '\n';
  });
}

template <class T>
void write_distribution(const std::filesystem::path& path, const TimeGrid& grid,
                        const std::vector<T>& mass, const std::string& label) {
  using Tr = ArithmeticTraits<T>;
  atomic_write(path, [&](std::ostream& out) {
    out << "# schema: optstop.distribution.v1 label=" << label << "\n";
    out << "t,time,mass\n";
    for (std::size_t t = 0; t < mass.size(); ++t)
      out << t << ',' << ArithmeticTraits<double>::str(grid.times[t]) << ','
          << Tr::str(mass[t]) << '\n';
  });
}

template <class T>
void write_regions(const std::filesystem::path& path, const Model<T>& model,
                   const RewardFamily<T>& reward, const SnellResult<T>& result,
                   const std::vector<NodeId>& exercise, const std::vector<NodeId>& strict,
                   const StoppingRule& minimal, const StoppingRule& maximal) {
  using Tr = ArithmeticTraits<T>;
  std::vector<std::uint8_t> in_ex(model.n_nodes(), 0), in_strict(model.n_nodes(), 0);
  for (NodeId n : exercise) in_ex[n] = 1;
  for (NodeId n : strict) in_strict[n] = 1;
  atomic_write(path, [&](std::ostream& out) {
    out << "# schema: optstop.regions.v1\n";
    out << "node,level,state,phi,v,vplus,in_exercise,in_strict,v_eq_vplus,"
           "theta_star_stop,theta_check_stop\n";
    for (NodeId n = 0; n < model.n_nodes(); ++n) {
      out << model.node_name(n) << ',' << model.level_of(n) << ','
          << Tr::str(model.state(n)) << ',' << Tr::str(reward.at(n)) << ','
          << Tr::str(result.v[n]) << ',' << Tr::str(result.vplus[n]) << ','
          << int(in_ex[n]) << ',' << int(in_strict[n]) << ','
          << (Tr::eq(result.v[n], result.vplus[n], Tr::stop_tol) ? 1 : 0) << ','
          << (minimal.decision[n] == Decision::Stop ? 1 : 0) << ','
          << (maximal.decision[n] == Decision::Stop ? 1 : 0) << '\n';
    }
  });
}

}  // namespace csv
}  // namespace optstop
