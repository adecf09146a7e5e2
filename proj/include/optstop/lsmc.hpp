#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "optstop/errors.hpp"
#include "optstop/model.hpp"
#include "optstop/rng.hpp"

namespace optstop {

// Simulated path ensemble; states is row-major n_paths x (n_steps + 1).
struct PathEnsemble {
  std::size_t n_paths = 0;
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::vector<double> states;

  double at(std::size_t path, int t) const {
    return states[path * (static_cast<std::size_t>(grid.n_steps) + 1) +
                  static_cast<std::size_t>(t)];
  }
};

// Regression continuation-value policy: stop at t iff phi(t, x) > 0 and
// phi(t, x) >= fitted continuation. t = 0 compares against the in-sample mean
// (all paths share one state); t = N is a forced stop. Where phi = 0 the
// policy never stops before T -- with nonnegative rewards that is weakly
// dominated anyway.
struct RegressionPolicy {
  struct Stage {
    bool fitted = false;
    std::vector<double> mean, scale;  // per power 1..degree; scale 0 = dead column
    std::vector<double> coef;         // intercept + one entry per live column
  };

  int basis_degree = 0;
  int n_steps = 0;
  std::uint64_t fit_seed = 0;
  double t0_continuation = 0.0;
  std::vector<Stage> stages;  // index 1..n_steps-1

  double continuation(int t, double x) const {
    const Stage& s = stages[static_cast<std::size_t>(t)];
    double acc = s.coef[0];
    std::size_t ci = 1;
    double power = 1.0;
    for (int k = 0; k < basis_degree; ++k) {
      power *= x;
      if (s.scale[static_cast<std::size_t>(k)] == 0.0) continue;
      acc += s.coef[ci++] * (power - s.mean[static_cast<std::size_t>(k)]) /
             s.scale[static_cast<std::size_t>(k)];
    }
    return acc;
  }

  bool should_stop(int t, double x, double payoff) const {
    if (payoff <= 0.0) return false;
    if (t == 0) return payoff >= t0_continuation;
    if (t >= n_steps) return true;
    const Stage& s = stages[static_cast<std::size_t>(t)];
    if (!s.fitted) return false;
    return payoff >= continuation(t, x);
  }
};

struct PolicyValue {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t n_paths = 0;
  bool seed_reuse_warning = false;  // evaluation ensemble reused the fit seed
};

struct LatticeComparison {
  double estimate = 0.0;
  double standard_error = 0.0;
  double lattice_value = 0.0;
  double gap = 0.0;    // lattice - estimate
  bool flagged = false;  // estimate significantly exceeds the exact value
  std::string note;
};

namespace lsmc {

using RewardFn = std::function<double(int, double)>;

// Geometric Brownian motion with exact-in-distribution lognormal increments.
// Streams are seeded per path (counter-based), so the ensemble is identical
// no matter how simulation work is partitioned.
inline PathEnsemble simulate_gbm(double s0, double drift, double volatility,
                                 const TimeGrid& grid, std::size_t n_paths,
                                 std::uint64_t seed) {
  if (!(s0 > 0.0)) fail(Errc::ParameterOutOfRange, "s0 must be positive");
  if (!(volatility >= 0.0)) fail(Errc::ParameterOutOfRange, "volatility must be >= 0");
  if (n_paths < 1) fail(Errc::ParameterOutOfRange, "need at least one path");

  PathEnsemble ens;
  ens.n_paths = n_paths;
  ens.grid = grid;
  ens.seed = seed;
  const std::size_t cols = static_cast<std::size_t>(grid.n_steps) + 1;
  ens.states.resize(n_paths * cols);

  for (std::size_t p = 0; p < n_paths; ++p) {
    SplitMix64 rng(mix64(seed ^ mix64(p + 1)));
    double cached_normal = 0.0;
    bool have_cached = false;
    auto normal = [&]() {
      if (have_cached) {
        have_cached = false;
        return cached_normal;
      }
      const double u1 = (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;
      const double u2 = rng.unit();
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 6.283185307179586476925286766559 * u2;
      cached_normal = radius * std::sin(angle);
      have_cached = true;
      return radius * std::cos(angle);
    };
    double x = s0;
    ens.states[p * cols] = x;
    for (int t = 1; t <= grid.n_steps; ++t) {
      const double dt = grid.times[static_cast<std::size_t>(t)] -
                        grid.times[static_cast<std::size_t>(t - 1)];
      x *= std::exp((drift - 0.5 * volatility * volatility) * dt +
                    volatility * std::sqrt(dt) * normal());
      ens.states[p * cols + static_cast<std::size_t>(t)] = x;
    }
  }
  return ens;
}

namespace detail {

// Least squares on standardized monomials with a rank-revealing QR first and
// a small ridge (1e-8 of the average diagonal) on rank deficiency.
inline Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& design,
                                           const Eigen::VectorXd& target) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::VectorXd coef;
  if (qr.rank() == design.cols()) {
    coef = qr.solve(target);
  } else {
    Eigen::MatrixXd gram = design.transpose() * design;
    const double ridge = 1e-8 * gram.trace() / static_cast<double>(gram.cols());
    gram.diagonal().array() += ridge > 0.0 ? ridge : 1e-12;
    coef = gram.ldlt().solve(design.transpose() * target);
  }
  if (!coef.allFinite())
    fail(Errc::SingularRegression,
         "design matrix is rank-deficient even after ridge regularization");
  return coef;
}

}  // namespace detail

// Longstaff-Schwartz backward fit of exercise thresholds. Regression uses
// in-the-money paths only (phi > 0); realized cashflows carry whatever
// discounting the caller folded into the reward.
inline RegressionPolicy fit_policy(const PathEnsemble& ensemble, const RewardFn& reward,
                                   int basis_degree) {
  if (basis_degree < 1) fail(Errc::ParameterOutOfRange, "basis_degree must be >= 1");
  if (ensemble.n_paths <= 10 * static_cast<std::size_t>(basis_degree + 1))
    fail(Errc::ParameterOutOfRange, "need n_paths > 10 * (basis_degree + 1)");
  const int n_steps = ensemble.grid.n_steps;

  RegressionPolicy policy;
  policy.basis_degree = basis_degree;
  policy.n_steps = n_steps;
  policy.fit_seed = ensemble.seed;
  policy.stages.resize(static_cast<std::size_t>(n_steps));

  auto phi = [&](int t, double x) {
    const double value = reward(t, x);
    if (value < 0.0)
      fail(Errc::NegativeReward, "reward function returned a negative value");
    return value;
  };

  std::vector<double> cash(ensemble.n_paths);
  for (std::size_t p = 0; p < ensemble.n_paths; ++p)
    cash[p] = phi(n_steps, ensemble.at(p, n_steps));

  std::vector<std::size_t> itm;
  for (int t = n_steps - 1; t >= 1; --t) {
    itm.clear();
    for (std::size_t p = 0; p < ensemble.n_paths; ++p)
      if (phi(t, ensemble.at(p, t)) > 0.0) itm.push_back(p);
    RegressionPolicy::Stage& stage = policy.stages[static_cast<std::size_t>(t)];
    stage.mean.assign(static_cast<std::size_t>(basis_degree), 0.0);
    stage.scale.assign(static_cast<std::size_t>(basis_degree), 0.0);
    if (itm.size() <= static_cast<std::size_t>(basis_degree) + 1) continue;  // not enough data

    // column statistics for powers x^1..x^degree
    std::vector<std::vector<double>> powers(static_cast<std::size_t>(basis_degree),
                                            std::vector<double>(itm.size()));
    for (std::size_t i = 0; i < itm.size(); ++i) {
      double power = 1.0;
      const double x = ensemble.at(itm[i], t);
      for (int k = 0; k < basis_degree; ++k) {
        power *= x;
        powers[static_cast<std::size_t>(k)][i] = power;
      }
    }
    std::vector<int> live;
    for (int k = 0; k < basis_degree; ++k) {
      const auto& col = powers[static_cast<std::size_t>(k)];
      double mean = 0.0;
      for (double v : col) mean += v;
      mean /= static_cast<double>(col.size());
      double var = 0.0;
      for (double v : col) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(col.size()));
      stage.mean[static_cast<std::size_t>(k)] = mean;
      if (sd > 0.0 && std::isfinite(sd) && std::isfinite(mean)) {
        stage.scale[static_cast<std::size_t>(k)] = sd;
        live.push_back(k);
      }
    }

    Eigen::MatrixXd design(itm.size(), live.size() + 1);
    Eigen::VectorXd target(itm.size());
    for (std::size_t i = 0; i < itm.size(); ++i) {
      design(static_cast<Eigen::Index>(i), 0) = 1.0;
      for (std::size_t c = 0; c < live.size(); ++c) {
        const int k = live[c];
        design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) =
            (powers[static_cast<std::size_t>(k)][i] - stage.mean[static_cast<std::size_t>(k)]) /
            stage.scale[static_cast<std::size_t>(k)];
      }
      target(static_cast<Eigen::Index>(i)) = cash[itm[i]];
    }
    const Eigen::VectorXd coef = detail::solve_least_squares(design, target);
    stage.coef.assign(coef.data(), coef.data() + coef.size());
    stage.fitted = true;

    for (std::size_t i = 0; i < itm.size(); ++i) {
      const double exercise = phi(t, ensemble.at(itm[i], t));
      if (exercise >= policy.continuation(t, ensemble.at(itm[i], t)))
        cash[itm[i]] = exercise;
    }
  }

  double mean_cash = 0.0;
  for (double c : cash) mean_cash += c;
  policy.t0_continuation = mean_cash / static_cast<double>(ensemble.n_paths);
  return policy;
}

// Out-of-sample value of a fixed policy. A fixed stopping rule's value is a
// lower bound for the optimal one, which is what compare_to_lattice tests.
inline PolicyValue policy_value(const PathEnsemble& ensemble, const RegressionPolicy& policy,
                                const RewardFn& reward) {
  if (ensemble.grid.n_steps != policy.n_steps)
    fail(Errc::ParameterOutOfRange, "ensemble and policy grids disagree");
  PolicyValue result;
  result.n_paths = ensemble.n_paths;
  result.seed_reuse_warning = ensemble.seed == policy.fit_seed;

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
    double payoff = 0.0;
    for (int t = 0; t <= policy.n_steps; ++t) {
      const double x = ensemble.at(p, t);
      const double value = reward(t, x);
      if (value < 0.0)
        fail(Errc::NegativeReward, "reward function returned a negative value");
      if (t == policy.n_steps || policy.should_stop(t, x, value)) {
        payoff = value;
        break;
      }
    }
    sum += payoff;
    sum_sq += payoff * payoff;
  }
  const double n = static_cast<double>(ensemble.n_paths);
  result.estimate = sum / n;
  if (ensemble.n_paths > 1) {
    const double var = (sum_sq - n * result.estimate * result.estimate) / (n - 1.0);
    result.standard_error = std::sqrt(var > 0.0 ? var : 0.0) / std::sqrt(n);
  }
  return result;
}

// Flags an estimate that significantly exceeds the exact lattice value: a
// lower-bound estimator must not do that (3 standard errors).
inline LatticeComparison compare_to_lattice(const PolicyValue& value, double lattice_value,
                                            std::string note = "") {
  LatticeComparison cmp;
  cmp.estimate = value.estimate;
  cmp.standard_error = value.standard_error;
  cmp.lattice_value = lattice_value;
  cmp.gap = lattice_value - value.estimate;
  cmp.flagged = value.estimate > lattice_value + 3.0 * value.standard_error;
  cmp.note = std::move(note);
  return cmp;
}

}  // namespace lsmc
}  // namespace optstop
