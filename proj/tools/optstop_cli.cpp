// optstop: discrete-time optimal stopping engine CLI.
//
// Subcommands: price, verify, oracle, converge, epsilon, lsmc, region.
// Exit codes: 0 success, 1 invariant failure, 2 configuration error,
// 3 engine error.

#include <CLI11.hpp>
#include <json.hpp>

#include <optstop/optstop.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace optstop;

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;
constexpr int kExitEngine = 3;

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string arithmetic;
  long long seed = -1;
  bool quiet = false;
};

struct LoadedConfig {
  json root;
  fs::path base_dir;  // config file directory, for relative spec_file paths
};

LoadedConfig load_config(const CliOptions& cli) {
  if (cli.config_path.empty()) fail(Errc::MalformedSpec, "--config is required");
  std::ifstream in(cli.config_path);
  if (!in) fail(Errc::MalformedSpec, "cannot open config file '" + cli.config_path + "'");
  LoadedConfig cfg;
  try {
    in >> cfg.root;
  } catch (const std::exception& e) {
    fail(Errc::MalformedSpec, "config is not valid JSON: " + std::string(e.what()));
  }
  cfg.base_dir = fs::absolute(fs::path(cli.config_path)).parent_path();
  return cfg;
}

const json& section(const json& root, const char* name) {
  if (!root.contains(name))
    fail(Errc::MalformedSpec, std::string("config is missing the '") + name + "' section");
  return root.at(name);
}

json section_or_empty(const json& root, const char* name) {
  return root.contains(name) ? root.at(name) : json::object();
}

std::string resolve_arithmetic(const CliOptions& cli, const LoadedConfig& cfg) {
  std::string mode = "rational";
  const json run = section_or_empty(cfg.root, "run");
  if (run.contains("arithmetic")) mode = run.at("arithmetic").get<std::string>();
  if (!cli.arithmetic.empty()) mode = cli.arithmetic;
  if (mode != "rational" && mode != "float")
    fail(Errc::MalformedSpec, "arithmetic must be 'rational' or 'float', got '" + mode + "'");
  return mode;
}

fs::path resolve_out_dir(const CliOptions& cli, const LoadedConfig& cfg) {
  if (!cli.out_dir.empty()) return cli.out_dir;
  const json output = section_or_empty(cfg.root, "output");
  if (output.contains("dir")) return output.at("dir").get<std::string>();
  if (const char* env = std::getenv("OPTSTOP_OUT_DIR")) return env;
  return ".";
}

bool output_toggle(const LoadedConfig& cfg, const char* name, bool fallback) {
  const json output = section_or_empty(cfg.root, "output");
  return output.value(name, fallback);
}

template <class T>
T parse_value(const json& j, const std::string& what) {
  return optstop::detail::parse_spec_value<T>(j, what);
}

template <class T>
T field_value(const json& sec, const char* key, const std::string& what) {
  if (!sec.contains(key)) fail(Errc::MalformedSpec, what + " is missing '" + key + "'");
  return parse_value<T>(sec.at(key), what + "." + key);
}

template <class T>
Model<T> build_model(const LoadedConfig& cfg) {
  const json& model = section(cfg.root, "model");
  const std::string builder = model.value("builder", "binomial");
  if (builder == "spec_file") {
    if (!model.contains("path")) fail(Errc::MalformedSpec, "model.path is required");
    fs::path path = model.at("path").get<std::string>();
    if (path.is_relative()) path = cfg.base_dir / path;
    return build_from_spec_file<T>(path.string());
  }
  if (builder != "binomial")
    fail(Errc::MalformedSpec, "unknown model builder '" + builder + "'");
  ModelKind kind = ModelKind::ExactTree;
  const std::string kind_name = model.value("kind", "exact_tree");
  if (kind_name == "markov_lattice")
    kind = ModelKind::MarkovLattice;
  else if (kind_name != "exact_tree")
    fail(Errc::MalformedSpec, "unknown model kind '" + kind_name + "'");
  return build_binomial<T>(field_value<T>(model, "s0", "model"),
                           field_value<T>(model, "up", "model"),
                           field_value<T>(model, "down", "model"),
                           field_value<T>(model, "p", "model"),
                           model.value("n_steps", 1), model.value("horizon", 1.0), kind);
}

template <class T>
RewardFamily<T> build_reward(const Model<T>& model, const LoadedConfig& cfg) {
  const json& reward = section(cfg.root, "reward");
  const std::string payoff = reward.value("payoff", "");
  if (payoff == "put") return rewards::put(model, field_value<T>(reward, "K", "reward"));
  if (payoff == "call") return rewards::call(model, field_value<T>(reward, "K", "reward"));
  if (payoff == "digital_usc")
    return rewards::digital_usc(model, field_value<T>(reward, "K", "reward"));
  if (payoff == "digital_lsc")
    return rewards::digital_lsc(model, field_value<T>(reward, "K", "reward"));
  if (payoff == "constant")
    return rewards::constant(model, field_value<T>(reward, "c", "reward"));
  if (payoff == "lookback_max") return rewards::path_lookback_max(model);
  fail(Errc::MalformedSpec, "unknown payoff '" + payoff + "'");
}

template <class T>
std::string show(const T& value) {
  using Tr = ArithmeticTraits<T>;
  if constexpr (Tr::exact)
    return Tr::str(value) + " (= " + ArithmeticTraits<double>::str(Tr::to_double(value)) + ")";
  else
    return Tr::str(value);
}

template <class T>
double expected_stop_time(const TimeGrid& grid, const std::vector<T>& mass) {
  double acc = 0.0;
  for (std::size_t t = 0; t < mass.size(); ++t)
    acc += grid.times[t] * ArithmeticTraits<T>::to_double(mass[t]);
  return acc;
}

// ---------------------------------------------------------------------------
// price

template <class T>
int run_price(const CliOptions& cli, const LoadedConfig& cfg) {
  const auto model = build_model<T>(cfg);
  const auto reward = build_reward<T>(model, cfg);
  const fs::path out = resolve_out_dir(cli, cfg);

  const auto result = snell::compute(model, reward);
  const auto minimal = stopping::minimal_optimal(result, reward);
  const auto maximal = stopping::maximal_optimal(result, reward);
  const auto min_report = stopping::evaluate(model, minimal, reward, result);
  const auto max_report = stopping::evaluate(model, maximal, reward, result);

  if (!cli.quiet) {
    std::cout << "model: " << model.n_nodes() << " nodes, " << to_string(model.kind())
              << ", N=" << model.n_steps() << ", arithmetic="
              << ArithmeticTraits<T>::name() << "\n";
    std::cout << "reward: " << reward.label << "\n";
    std::cout << "v(root) = " << show(result.v[model.root()]) << "\n";
    std::cout << "E[phi(theta*)] = " << show(min_report.value)
              << "  gap = " << show(min_report.gap) << "\n";
    std::cout << "E[phi(theta_check)] = " << show(max_report.value)
              << "  gap = " << show(max_report.gap) << "\n";
    auto print_dist = [&](const char* name, const std::vector<T>& mass) {
      std::cout << name << " stop-time distribution:";
      for (std::size_t t = 0; t < mass.size(); ++t)
        std::cout << "  t=" << t << ": " << ArithmeticTraits<T>::str(mass[t]);
      std::cout << "\n";
    };
    print_dist("theta*", min_report.time_distribution);
    print_dist("theta_check", max_report.time_distribution);
  }

  if (output_toggle(cfg, "snell_csv", true)) {
    if (model.kind() == ModelKind::ExactTree) {
      const auto doob = snell::doob_decompose(model, result);
      csv::write_snell(out / "snell.csv", model, reward, result, &doob);
    } else {
      csv::write_snell(out / "snell.csv", model, reward, result);
    }
  }
  if (output_toggle(cfg, "rules_csv", true)) {
    csv::write_rule(out / "theta_star.csv", model, minimal, "theta_star");
    csv::write_rule(out / "theta_check.csv", model, maximal, "theta_check");
  }
  if (output_toggle(cfg, "distributions_csv", true)) {
    csv::write_distribution(out / "theta_star_distribution.csv", model.grid(),
                            min_report.time_distribution, "theta_star");
    csv::write_distribution(out / "theta_check_distribution.csv", model.grid(),
                            max_report.time_distribution, "theta_check");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

template <class T>
int run_verify(const CliOptions& cli, const LoadedConfig& cfg) {
  const json run = section_or_empty(cfg.root, "run");
  VerifyOptions options;
  options.with_oracle = run.value("oracle", true);
  options.supermartingale_samples = run.value("supermartingale_samples", 5);
  options.inject_fault = run.value("inject_fault", false);

  int failures = 0;
  std::vector<std::string> notices;
  auto check_instance = [&](const Model<T>& model, const RewardFamily<T>& reward,
                            const std::string& name, bool fault) {
    VerifyOptions opts = options;
    opts.inject_fault = fault;
    const auto outcome = verify_instance(model, reward, opts);
    for (const auto& f : outcome.failures) {
      std::cout << "FAIL " << name << ": " << f << "\n";
      ++failures;
    }
    for (const auto& n : outcome.notices) notices.push_back(name + ": " + n);
    if (!cli.quiet && outcome.ok()) std::cout << "ok   " << name << "\n";
  };

  int checked = 0;
  if (run.contains("corpus")) {
    if constexpr (!ArithmeticTraits<T>::exact) {
      fail(Errc::FloatModeRejected, "the verification corpus runs in rational arithmetic");
    } else {
      const json& corpus_cfg = run.at("corpus");
      const int count = corpus_cfg.value("count", kCorpusSize);
      const std::uint64_t seed =
          cli.seed >= 0 ? static_cast<std::uint64_t>(cli.seed)
                        : corpus_cfg.value("seed", kCorpusSeed);
      const auto corpus = make_corpus(count, seed);
      for (const auto& inst : corpus) {
        check_instance(inst.model, inst.reward, inst.name,
                       options.inject_fault && checked == 0);
        ++checked;
      }
    }
  } else {
    const auto model = build_model<T>(cfg);
    const auto reward = build_reward<T>(model, cfg);
    check_instance(model, reward, "instance", options.inject_fault);
    ++checked;
  }

  for (const auto& n : notices) std::cout << "note " << n << "\n";
  std::cout << (failures == 0 ? "verify: all invariants hold on " : "verify: FAILURES on ")
            << checked << " instance(s)\n";
  return failures == 0 ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// oracle

template <class T>
int run_oracle(const CliOptions& cli, const LoadedConfig& cfg) {
  const auto model = build_model<T>(cfg);
  const auto reward = build_reward<T>(model, cfg);
  const fs::path out = resolve_out_dir(cli, cfg);

  if constexpr (!ArithmeticTraits<T>::exact) {
    fail(Errc::FloatModeRejected, "the oracle requires rational arithmetic");
  } else {
    const auto report = oracle::verify_theorems(model, reward);
    const auto result = oracle::brute_force(model, reward);
    std::cout << "rules enumerated: " << result.rule_count << "\n";
    std::cout << "max_value = " << show(result.max_value) << "\n";
    std::cout << "optimal stopping times: " << result.optimal_rules.size() << "\n";
    std::cout << "envelope agreement: " << (report.value_match ? "exact" : "MISMATCH") << "\n";
    std::cout << "sandwich theta* <= tau <= theta_check: "
              << (report.sandwich_ok && report.minimal_in_optimal_set &&
                          report.maximal_in_optimal_set
                      ? "verified"
                      : "VIOLATED")
              << "\n";
    if (!report.ok() && !report.counterexample.empty())
      std::cout << "counterexample: " << report.counterexample << "\n";
    if (output_toggle(cfg, "optimal_set_csv", false)) {
      csv::atomic_write(out / "optimal_set.csv", [&](std::ostream& os) {
        os << "# schema: optstop.optimal_set.v1\n";
        os << "rule,node,decision\n";
        for (std::size_t r = 0; r < result.optimal_rules.size(); ++r)
          for (NodeId n = 0; n < model.n_nodes(); ++n)
            os << r << ',' << model.node_name(n) << ','
               << (result.optimal_rules[r].decision[n] == Decision::Stop ? "STOP"
                                                                         : "CONTINUE")
               << '\n';
      });
    }
    return report.ok() ? kExitOk : kExitInvariant;
  }
}

// ---------------------------------------------------------------------------
// converge

// In-the-money exercise region {v = phi, phi > 0}. The containment study
// compares these: where both digitals pay zero the bare sets {v = phi} are
// incomparable by construction, see the regions CSV for the raw sets.
template <class T>
std::vector<std::uint8_t> positive_exercise_flags(const Model<T>& model,
                                                  const RewardFamily<T>& reward,
                                                  const SnellResult<T>& result) {
  std::vector<std::uint8_t> flags(model.n_nodes(), 0);
  for (NodeId n : stopping::exercise_region(result, reward))
    if (reward.at(n) > T(0)) flags[n] = 1;
  return flags;
}

int run_converge(const CliOptions& cli, const LoadedConfig& cfg) {
  const json run = section_or_empty(cfg.root, "run");
  const json& reward_cfg = section(cfg.root, "reward");
  const Rational strike = field_value<Rational>(reward_cfg, "K", "reward");
  if (!(strike > 0)) fail(Errc::MalformedSpec, "converge needs a positive strike");
  const double horizon = run.value("horizon", 1.0);
  const double volatility = run.value("volatility", 0.2);
  if (!(volatility > 0)) fail(Errc::MalformedSpec, "converge needs positive volatility");
  const Rational p = run.contains("p") ? parse_value<Rational>(run.at("p"), "run.p")
                                       : Rational(1, 2);
  std::vector<int> refinements;
  for (const auto& j : run.value("refinements", json::array({10, 20, 40, 80, 160})))
    refinements.push_back(j.get<int>());
  if (refinements.empty()) fail(Errc::MalformedSpec, "run.refinements must be nonempty");

  const fs::path out = resolve_out_dir(cli, cfg);
  bool all_ok = true;
  struct DiffTrack {
    double value = 0.0, diff = 0.0;
    bool have_value = false, have_diff = false;
  } track_usc, track_lsc;
  auto report_diff = [&](DiffTrack& track, const char* name, double v, bool quiet) {
    if (track.have_value && !quiet) {
      const double diff = std::fabs(v - track.value);
      std::cout << "    |" << name << "(N) - " << name << "(prev)| = "
                << ArithmeticTraits<double>::str(diff);
      if (track.have_diff)
        std::cout << (diff <= track.diff ? "  (shrinking)" : "  (grew)");
      std::cout << "\n";
      track.diff = diff;
      track.have_diff = true;
    }
    track.value = v;
    track.have_value = true;
  };

  std::vector<std::string> rows;
  for (const int n : refinements) {
    if (n < 1) fail(Errc::MalformedSpec, "refinement steps must be >= 1");
    // CRR factor for this refinement, frozen to an exact rational so that
    // up * down = 1 and the lattice hits the strike exactly at i = j.
    const Rational up =
        ArithmeticTraits<Rational>::from_double(std::exp(volatility * std::sqrt(horizon / n)));
    const auto lattice = build_binomial<Rational>(strike, up, Rational(1) / up, p, n,
                                                  horizon, ModelKind::MarkovLattice);
    const auto usc = rewards::digital_usc(lattice, strike);
    const auto lsc = rewards::digital_lsc(lattice, strike);
    const auto r_usc = snell::compute(lattice, usc);
    const auto r_lsc = snell::compute(lattice, lsc);

    const auto usc_flags = positive_exercise_flags(lattice, usc, r_usc);
    const auto lsc_flags = positive_exercise_flags(lattice, lsc, r_lsc);
    bool contained = true;
    for (NodeId node = 0; node < lattice.n_nodes(); ++node)
      if (lsc_flags[node] && !usc_flags[node]) contained = false;
    bool strict_at_strike = true;
    std::size_t strike_nodes = 0;
    for (NodeId node = 0; node < lattice.n_nodes(); ++node) {
      if (lattice.state(node) != strike) continue;
      ++strike_nodes;
      if (!usc_flags[node] || lsc_flags[node]) strict_at_strike = false;
    }
    const bool value_order = r_usc.v[lattice.root()] >= r_lsc.v[lattice.root()];
    all_ok = all_ok && contained && strict_at_strike && value_order;

    auto describe = [&](const RewardFamily<Rational>& reward,
                        const SnellResult<Rational>& result) {
      const auto minimal = stopping::minimal_optimal(result, reward);
      const auto maximal = stopping::maximal_optimal(result, reward);
      const auto lo = stopping::evaluate(lattice, minimal, reward, result);
      const auto hi = stopping::evaluate(lattice, maximal, reward, result);
      return std::pair<double, double>{
          expected_stop_time(lattice.grid(), lo.time_distribution),
          expected_stop_time(lattice.grid(), hi.time_distribution)};
    };
    const auto [usc_lo, usc_hi] = describe(usc, r_usc);
    const auto [lsc_lo, lsc_hi] = describe(lsc, r_lsc);
    const double v_usc = ArithmeticTraits<Rational>::to_double(r_usc.v[lattice.root()]);
    const double v_lsc = ArithmeticTraits<Rational>::to_double(r_lsc.v[lattice.root()]);

    using D = ArithmeticTraits<double>;
    rows.push_back(std::to_string(n) + ",digital_usc," + D::str(v_usc) + "," +
                   D::str(usc_lo) + "," + D::str(usc_hi));
    rows.push_back(std::to_string(n) + ",digital_lsc," + D::str(v_lsc) + "," +
                   D::str(lsc_lo) + "," + D::str(lsc_hi));

    if (!cli.quiet)
      std::cout << "N=" << n << "  v_usc=" << D::str(v_usc) << "  v_lsc=" << D::str(v_lsc)
                << "  usc>=lsc " << (value_order ? "ok" : "VIOLATED")
                << "  region usc contains lsc: " << (contained ? "ok" : "VIOLATED")
                << "  strict at strike (" << strike_nodes
                << " nodes): " << (strict_at_strike ? "ok" : "VIOLATED") << "\n";
    report_diff(track_usc, "v_usc", v_usc, cli.quiet);
    report_diff(track_lsc, "v_lsc", v_lsc, cli.quiet);
  }

  csv::atomic_write(out / "converge.csv", [&](std::ostream& os) {
    os << "# schema: optstop.converge.v1\n";
    os << "n_steps,payoff,v_root,e_theta_star,e_theta_check\n";
    for (const auto& row : rows) os << row << '\n';
  });
  return all_ok ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// epsilon

template <class T>
int run_epsilon(const CliOptions& cli, const LoadedConfig& cfg) {
  using Tr = ArithmeticTraits<T>;
  const auto model = build_model<T>(cfg);
  const auto reward = build_reward<T>(model, cfg);
  const json run = section_or_empty(cfg.root, "run");
  const std::string mode_name = run.value("epsilon_mode", "multiplicative");
  PenaltyKind mode;
  if (mode_name == "multiplicative")
    mode = PenaltyKind::Multiplicative;
  else if (mode_name == "additive")
    mode = PenaltyKind::Additive;
  else
    fail(Errc::MalformedSpec, "epsilon_mode must be multiplicative or additive");
  std::vector<T> epsilons;
  for (const auto& j : run.value("epsilons", json::array({"1/2", "1/10", "1/100"})))
    epsilons.push_back(parse_value<T>(j, "run.epsilons"));
  if (epsilons.empty()) fail(Errc::MalformedSpec, "run.epsilons must be nonempty");

  const fs::path out = resolve_out_dir(cli, cfg);
  const auto result = snell::compute(model, reward);
  const auto minimal = stopping::minimal_optimal(result, reward);
  const auto star_levels = model.kind() == ModelKind::ExactTree
                               ? induced_stop_levels(model, minimal)
                               : std::vector<int>{};
  const T eps0 = stopping::epsilon_collapse_threshold(result, reward, mode);
  const T v0 = result.v[model.root()];
  if (!cli.quiet)
    std::cout << "v(root) = " << show(v0) << "\n"
              << "collapse threshold eps0 = " << show(eps0) << "\n";

  bool all_ok = true;
  std::vector<std::string> rows;
  std::vector<std::string> dist_rows;
  for (const auto& eps : epsilons) {
    const auto rule =
        stopping::epsilon_optimal(result, reward, EpsilonMode<T>{mode, eps});
    const auto report = stopping::evaluate(model, rule, reward, result);
    const bool guarantee = mode == PenaltyKind::Multiplicative
                               ? report.value >= (T(1) - eps) * v0
                               : report.value >= v0 - eps;
    bool equals_star;
    if (model.kind() == ModelKind::ExactTree)
      equals_star = induced_stop_levels(model, rule) == star_levels;
    else
      equals_star = rule == minimal;
    if (!guarantee) all_ok = false;
    if (!(eps > eps0) && !equals_star) all_ok = false;  // collapse below eps0

    rows.push_back(Tr::str(eps) + "," + Tr::str(report.value) + "," +
                   (guarantee ? "1" : "0") + "," + (equals_star ? "1" : "0"));
    for (std::size_t t = 0; t < report.time_distribution.size(); ++t)
      dist_rows.push_back(Tr::str(eps) + "," + std::to_string(t) + "," +
                          ArithmeticTraits<double>::str(model.grid().times[t]) + "," +
                          Tr::str(report.time_distribution[t]));
    if (!cli.quiet)
      std::cout << "eps=" << Tr::str(eps) << "  value=" << show(report.value)
                << "  guarantee " << (guarantee ? "ok" : "VIOLATED")
                << "  equals theta*: " << (equals_star ? "yes" : "no") << "\n";
  }

  csv::atomic_write(out / "epsilon.csv", [&](std::ostream& os) {
    os << "# schema: optstop.epsilon.v1 mode=" << mode_name << "\n";
    os << "epsilon,value,guarantee_ok,equals_theta_star\n";
    for (const auto& row : rows) os << row << '\n';
  });
  csv::atomic_write(out / "epsilon_distributions.csv", [&](std::ostream& os) {
    os << "# schema: optstop.epsilon_distributions.v1 mode=" << mode_name << "\n";
    os << "epsilon,t,time,mass\n";
    for (const auto& row : dist_rows) os << row << '\n';
  });
  return all_ok ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// lsmc

int run_lsmc(const CliOptions& cli, const LoadedConfig& cfg) {
  const json run = section_or_empty(cfg.root, "run");
  const json lcfg = run.contains("lsmc") ? run.at("lsmc") : json::object();
  const double s0 = lcfg.value("s0", 36.0);
  const double rate = lcfg.value("rate", 0.06);
  const double volatility = lcfg.value("volatility", 0.2);
  const double horizon = lcfg.value("horizon", 1.0);
  const int n_steps = lcfg.value("n_steps", 50);
  const std::size_t n_fit = lcfg.value("n_fit_paths", std::size_t{100000});
  const std::size_t n_eval = lcfg.value("n_eval_paths", std::size_t{100000});
  const int basis_degree = lcfg.value("basis_degree", 3);
  std::uint64_t fit_seed = lcfg.value("fit_seed", std::uint64_t{9001});
  std::uint64_t eval_seed = lcfg.value("eval_seed", std::uint64_t{9002});
  if (cli.seed >= 0) {
    fit_seed = static_cast<std::uint64_t>(cli.seed);
    eval_seed = fit_seed + 1;
  }

  const json& reward_cfg = section(cfg.root, "reward");
  const std::string payoff_name = reward_cfg.value("payoff", "put");
  double strike = 0.0;
  if (payoff_name != "constant") strike = field_value<double>(reward_cfg, "K", "reward");
  const double constant_c =
      payoff_name == "constant" ? field_value<double>(reward_cfg, "c", "reward") : 0.0;
  auto intrinsic = [&](double x) -> double {
    if (payoff_name == "put") return strike > x ? strike - x : 0.0;
    if (payoff_name == "call") return x > strike ? x - strike : 0.0;
    if (payoff_name == "digital_usc") return x >= strike ? 1.0 : 0.0;
    if (payoff_name == "digital_lsc") return x > strike ? 1.0 : 0.0;
    if (payoff_name == "constant") return constant_c;
    fail(Errc::MalformedSpec, "payoff '" + payoff_name + "' is not supported by lsmc");
  };
  const bool discontinuous = payoff_name == "digital_usc" || payoff_name == "digital_lsc";

  const TimeGrid grid(n_steps, horizon);
  auto reward_fn = [&](int t, double x) {
    return std::exp(-rate * grid.times[static_cast<std::size_t>(t)]) * intrinsic(x);
  };

  const fs::path out = resolve_out_dir(cli, cfg);

  // exact reference: risk-neutral CRR lattice on the same exercise grid
  const double dt = horizon / n_steps;
  const double up = std::exp(volatility * std::sqrt(dt));
  const double down = 1.0 / up;
  const double q = (std::exp(rate * dt) - down) / (up - down);
  if (!(q > 0.0) || !(q < 1.0))
    fail(Errc::ParameterOutOfRange, "risk-neutral probability outside (0,1)");
  const auto lattice =
      build_binomial<double>(s0, up, down, q, n_steps, horizon, ModelKind::MarkovLattice);
  const auto lattice_reward = rewards::from_function(
      lattice, [&](int t, double x) { return reward_fn(t, x); }, "discounted " + payoff_name);
  const double lattice_value =
      snell::compute(lattice, lattice_reward).v[lattice.root()];

  const auto fit_ensemble = lsmc::simulate_gbm(s0, rate, volatility, grid, n_fit, fit_seed);
  const auto policy = lsmc::fit_policy(fit_ensemble, reward_fn, basis_degree);
  const auto eval_ensemble =
      lsmc::simulate_gbm(s0, rate, volatility, grid, n_eval, eval_seed);
  const auto value = lsmc::policy_value(eval_ensemble, policy, reward_fn);
  const auto cmp = lsmc::compare_to_lattice(
      value, lattice_value,
      discontinuous ? "discontinuous payoff: regression smooths the threshold; only the "
                      "lower-bound property is asserted"
                    : "");

  using D = ArithmeticTraits<double>;
  if (value.seed_reuse_warning)
    std::cout << "warning: evaluation ensemble reuses the fit seed\n";
  if (!cli.quiet) {
    std::cout << "lattice reference  = " << D::str(lattice_value) << "\n";
    std::cout << "policy estimate    = " << D::str(value.estimate) << " +/- "
              << D::str(value.standard_error) << " (1 se, " << value.n_paths
              << " paths)\n";
    std::cout << "gap (lattice - est) = " << D::str(cmp.gap) << "\n";
    std::cout << "lower-bound check  : " << (cmp.flagged ? "VIOLATED" : "ok") << "\n";
    if (!cmp.note.empty()) std::cout << "note: " << cmp.note << "\n";
  }

  csv::atomic_write(out / "lsmc.csv", [&](std::ostream& os) {
    os << "# schema: optstop.lsmc.v1 payoff=" << payoff_name << "\n";
    os << "estimate,stderr,lattice_ref,gap,verdict\n";
    os << D::str(value.estimate) << ',' << D::str(value.standard_error) << ','
       << D::str(lattice_value) << ',' << D::str(cmp.gap) << ','
       << (cmp.flagged ? "flagged" : "ok") << '\n';
  });
  csv::atomic_write(out / "lsmc_coefficients.csv", [&](std::ostream& os) {
    os << "# schema: optstop.lsmc_coefficients.v1 basis_degree=" << basis_degree << "\n";
    os << "t,fitted,coefficients\n";
    for (int t = 1; t < n_steps; ++t) {
      const auto& stage = policy.stages[static_cast<std::size_t>(t)];
      os << t << ',' << (stage.fitted ? 1 : 0);
      for (double c : stage.coef) os << ',' << D::str(c);
      os << '\n';
    }
  });
  return cmp.flagged ? kExitInvariant : kExitOk;
}

// ---------------------------------------------------------------------------
// region

template <class T>
int run_region(const CliOptions& cli, const LoadedConfig& cfg) {
  const auto model = build_model<T>(cfg);
  const auto reward = build_reward<T>(model, cfg);
  const fs::path out = resolve_out_dir(cli, cfg);

  const auto result = snell::compute(model, reward);
  const auto exercise = stopping::exercise_region(result, reward);
  const auto strict = snell::strict_supermartingale_region(result, reward);
  const auto [v_eq, v_gt] = snell::vplus_partition(result);
  const auto minimal = stopping::minimal_optimal(result, reward);
  const auto maximal = stopping::maximal_optimal(result, reward);

  if (!cli.quiet) {
    std::cout << "exercise region {v = phi}: " << exercise.size() << " of "
              << model.n_nodes() << " nodes\n";
    std::cout << "strict supermartingale region {v > continuation}: " << strict.size()
              << " nodes\n";
    std::cout << "{v = v+}: " << v_eq.size() << " nodes, {v > v+}: " << v_gt.size()
              << " nodes\n";
  }
  csv::write_regions(out / "regions.csv", model, reward, result, exercise, strict, minimal,
                     maximal);
  return kExitOk;
}

// ---------------------------------------------------------------------------

template <class F, class G>
int dispatch(const CliOptions& cli, F&& rational_run, G&& float_run) {
  bool config_phase = true;
  try {
    const LoadedConfig cfg = load_config(cli);
    const std::string mode = resolve_arithmetic(cli, cfg);
    config_phase = false;
    return mode == "rational" ? rational_run(cli, cfg) : float_run(cli, cfg);
  } catch (const Error& e) {
    std::cerr << "optstop: " << e.what() << "\n";
    const bool config_error = config_phase || e.code() == Errc::MalformedSpec;
    return config_error ? kExitConfig : kExitEngine;
  } catch (const std::exception& e) {
    std::cerr << "optstop: " << e.what() << "\n";
    return kExitEngine;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-time optimal stopping engine"};
  app.require_subcommand(1);

  CliOptions cli;
  app.add_option("--config", cli.config_path, "experiment config file (JSON)");
  app.add_option("--out", cli.out_dir,
                 "output directory (default: config output.dir, then $OPTSTOP_OUT_DIR, then .)");
  app.add_option("--arithmetic", cli.arithmetic, "rational | float (overrides the config)");
  app.add_option("--seed", cli.seed, "seed override for corpus / simulation runs");
  app.add_flag("--quiet", cli.quiet, "suppress informational output");

  auto* price = app.add_subcommand("price", "Snell envelope value and optimal rules");
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  auto* oracle_cmd = app.add_subcommand("oracle", "exhaustive stopping-rule enumeration");
  auto* converge = app.add_subcommand("converge", "usc/lsc digital refinement ladder");
  auto* epsilon = app.add_subcommand("epsilon", "penalized stopping times vs epsilon");
  auto* lsmc_cmd = app.add_subcommand("lsmc", "least-squares Monte Carlo lower bound");
  auto* region = app.add_subcommand("region", "exercise and strictness regions");
  for (auto* sub : {price, verify, oracle_cmd, converge, epsilon, lsmc_cmd, region})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (price->parsed()) return dispatch(cli, run_price<Rational>, run_price<double>);
  if (verify->parsed()) return dispatch(cli, run_verify<Rational>, run_verify<double>);
  if (oracle_cmd->parsed()) return dispatch(cli, run_oracle<Rational>, run_oracle<double>);
  if (converge->parsed())
    return dispatch(
        cli, [](const CliOptions& c, const LoadedConfig& g) { return run_converge(c, g); },
        [](const CliOptions& c, const LoadedConfig& g) { return run_converge(c, g); });
  if (epsilon->parsed()) return dispatch(cli, run_epsilon<Rational>, run_epsilon<double>);
  if (lsmc_cmd->parsed())
    return dispatch(
        cli, [](const CliOptions& c, const LoadedConfig& g) { return run_lsmc(c, g); },
        [](const CliOptions& c, const LoadedConfig& g) { return run_lsmc(c, g); });
  if (region->parsed()) return dispatch(cli, run_region<Rational>, run_region<double>);
  return kExitConfig;
}
