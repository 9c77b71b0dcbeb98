#pragma once

/** @file
 * Accuracy analysis of the two-step estimator (MSE of the Markov parameter
 * estimate, errors-in-variables bias prediction for the delay) and the
 * seeded Monte-Carlo benchmark harness.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lagdelay/estimators.hpp"
#include "lagdelay/signal.hpp"

namespace lagdelay {

struct MarkovAccuracy {
  Eigen::VectorXd bias;        ///< E[H_hat] - H, from the noise-free projection
  Eigen::MatrixXd covariance;  ///< lambda T^{-1}(U) (Phi^T Phi)^{-1} T^{-T}(U)
  double mse = 0.0;            ///< ||bias||^2 + trace(covariance)

  double bias_energy() const { return bias.squaredNorm(); }
  double variance_trace() const { return covariance.trace(); }
};

/// MSE of H_hat for an input design, conditioned on the delay tau_check.
/// The bias term comes from a noise-free simulation projected onto Phi; the
/// variance term is closed form.
MarkovAccuracy markov_mse(const InputDesign& design, int k_model, double lambda,
                          double tau_check,
                          double cond_threshold = kDefaultCondThreshold);

/// Same objective as markov_mse, but with every p-dependent quantity
/// factored out so that many inputs can be scored at one p. For a spectrum u
/// of order I the noise-free projection is G u with G = Phi^+ Psi, Psi the
/// basis sampled at t_n - tau_check.
class MarkovMseEvaluator {
public:
  MarkovMseEvaluator(double p, double delta, int n_samples, int k_model, int input_order,
                     double tau_check, double cond_threshold = kDefaultCondThreshold);

  bool ill_conditioned() const { return ill_conditioned_; }
  double cond() const { return cond_; }

  struct Terms {
    double bias_energy = 0.0;
    double variance_trace = 0.0;  ///< already multiplied by lambda
    double mse() const { return bias_energy + variance_trace; }
  };
  Terms evaluate(const Eigen::VectorXd& u, double lambda) const;

private:
  double p_;
  int k_model_;
  Eigen::MatrixXd projection_;  // G
  Eigen::MatrixXd r_inv_;
  Eigen::VectorXd markov_;      // H(2 p tau_check)
  double cond_;
  bool ill_conditioned_;
};

struct BiasPrediction {
  double predicted_bias = 0.0;  ///< [s]
  double std_error = 0.0;       ///< Monte-Carlo standard error of the prediction
  int mc_samples = 0;
  double eps1_mean = 0.0;
  double eps2_mean = 0.0;
  std::uint64_t seed = 0;
};

/// Errors-in-variables bias of tau_hat. H_hat errors are drawn from the
/// Gaussian model N(bias, covariance) of markov_mse; each draw gives E_B,
/// E_A = Omega E_B - (M-1) e_{M-1} h~_{M-1} and the ratio
/// (eps1 - 2 p tau eps2) / (2p (B^T B + eps2)), averaged over mc_samples.
BiasPrediction predict_bias_tau(const InputDesign& design, double lambda, double tau_check,
                                const LaguerreOptions& opts, int mc_samples, std::uint64_t seed);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 entries
  std::vector<int> counts;
};

struct MethodStats {
  Method method = Method::proposed;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;        ///< unbiased sample variance
  double mse_raw = 0.0;         ///< mean of (tau_hat - tau)^2
  double mse_normalized = 0.0;  ///< sqrt(N) * mse_raw
  int successes = 0;
  int failures = 0;
  std::string first_error;
  Histogram histogram;
};

struct BenchmarkConfig {
  InputDesign design;
  double tau = 0.0;
  double noise_var = 0.0;
  LaguerreOptions laguerre;
  MlOptions ml;
  FreqInterpOptions freq;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  int replicates = 2;
  std::uint64_t seed = 0;
  int workers = 1;
  int histogram_bins = 50;
};

struct McStats {
  std::vector<MethodStats> methods;
  int replicates = 0;
  std::uint64_t seed = 0;
  int n_samples = 0;
  std::optional<CrlbReport> crlb;  ///< absent when noise_var == 0

  const MethodStats& get(Method m) const;
};

/// Runs every requested estimator on `replicates` independent noisy data
/// sets. Replicate r uses the noise stream replicate_seed(seed, r); results
/// are reduced in replicate order, so the output does not depend on the
/// number of workers.
McStats run_monte_carlo(const BenchmarkConfig& config);

}  // namespace lagdelay
