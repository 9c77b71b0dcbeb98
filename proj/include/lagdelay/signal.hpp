#pragma once

/** @file
 * Synthetic experiments: the finite-spectrum input, its analytically
 * delayed samples, Gaussian measurement noise, and the dataset file format
 * (CSV `t,z` plus a JSON sidecar).
 */

#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Dense>

#include "lagdelay/delay_operator.hpp"
#include "lagdelay/laguerre.hpp"

namespace lagdelay {

/// Designed input: spectrum u_0..u_I at parameter p plus the experiment
/// settings it was tuned for.
struct InputDesign {
  double p = 1.0;
  Eigen::VectorXd u;          ///< u_0 ... u_I
  double energy_bound = 0.0;  ///< eta
  double horizon = 0.0;       ///< T [s]
  double delta = 0.0;         ///< sampling time [s]
  double tau_guess = 0.0;     ///< rough delay the design was conditioned on [s]

  Spectrum spectrum() const { return {u, p}; }
  int input_order() const { return static_cast<int>(u.size()) - 1; }
  /// floor(T / delta) + 1 samples cover [0, T].
  int n_samples() const;
  void validate() const;
};

struct Dataset {
  Eigen::VectorXd z;
  double delta = 0.0;
  double noise_var = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> true_tau;

  int n_samples() const { return static_cast<int>(z.size()); }
};

/// u(t) = sum_k u_k l_k(t), evaluated in closed form; 0 for t < 0.
double synthesize_input(const InputDesign& design, double t);
/// du/dt at t (right derivative at 0); 0 for t < 0.
double synthesize_input_derivative(const InputDesign& design, double t);

/// u(0) = sqrt(2p) * sum_k u_k. Designs meant to be continuous have 0 here.
double input_value_at_zero(const InputDesign& design);

/// Last time the input magnitude exceeds rel_tol * max|u|, found on a grid
/// of step 1/(64 p) over [0, 200/p].
double effective_support(const InputDesign& design, double rel_tol = 1e-6);

/// Duration T_u of the input: the earliest time after which at most
/// energy_tol of the total energy remains. Same grid as effective_support.
double signal_duration(const InputDesign& design, double energy_tol = 1e-6);

/// y_n = u(n delta - tau), exactly 0 for n delta < tau.
Eigen::VectorXd sample_delayed(const InputDesign& design, double tau, int n_samples);

/// Seed for replicate `index` of a run seeded with `seed` (splitmix64 mix),
/// so replicates are reproducible independent of scheduling.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index);

/// z_n = y_n + e_n with e_n ~ N(0, lambda) i.i.d., deterministic in seed.
Dataset add_noise(const Eigen::VectorXd& y, double delta, double lambda, std::uint64_t seed);

/// Writes `<stem>.csv` (header `t,z`) and `<stem>.json` sidecar. Numbers are
/// printed with 17 significant digits so reading back is bit-exact.
void write_dataset(const Dataset& data, const std::filesystem::path& csv_path);
/// Reads the CSV and its `.json` sidecar (same stem).
Dataset read_dataset(const std::filesystem::path& csv_path);

}  // namespace lagdelay
