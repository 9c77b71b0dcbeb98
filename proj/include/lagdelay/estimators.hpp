#pragma once

/** @file
 * Delay estimators: the two-step Laguerre-domain estimator, time-domain
 * maximum likelihood, a spline-integrated Laguerre baseline and a
 * cross-correlation/phase-slope baseline, plus the Cramer-Rao bound.
 */

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lagdelay/laguerre.hpp"
#include "lagdelay/signal.hpp"

namespace lagdelay {

enum class Method { proposed, ml, lag_spline, freq_interp };

std::string_view to_string(Method method);
/// Accepts the tags used in reports: proposed, ml, lag_spline, freq_interp.
Method parse_method(std::string_view tag);
inline constexpr Method kAllMethods[] = {Method::ml, Method::proposed, Method::lag_spline,
                                         Method::freq_interp};

struct DelayEstimate {
  Method method = Method::proposed;
  double tau_hat = 0.0;
  // Diagnostics; which ones are present depends on the method.
  std::optional<Eigen::VectorXd> y_hat;
  std::optional<Eigen::VectorXd> h_hat;
  std::optional<double> residual_norm;
  int iterations = 0;
  bool converged = true;
  std::string note;
};

struct CrlbReport {
  double bound = 0.0;      ///< variance [s^2]
  int window_first = 0;    ///< first sample index with t_n >= tau
  int window_last = 0;     ///< last sample index within tau + T_u
};

struct LaguerreOptions {
  int k_model = 12;        ///< highest basis index K in the output model
  int m_markov = 0;        ///< Markov parameters used in A, B; 0 means K + 1
  double cond_threshold = kDefaultCondThreshold;

  int markov_count() const { return m_markov > 0 ? m_markov : k_model + 1; }
};

struct MlOptions {
  double tau_max = 0.0;        ///< 0 means T - T_u
  double grid_fraction = 0.25; ///< grid step as a fraction of delta
  double tolerance = 1e-10;    ///< golden-section bracket width [s]
  int max_iterations = 200;
};

struct FreqInterpOptions {
  double band_fraction = 0.1;  ///< keep bins with |R_m| >= fraction * max |R_m|
};

// --- two-step Laguerre estimator ---------------------------------------

/// Y_hat = argmin ||Z - Phi Y||_2 via the QR of Phi. Throws IllConditioned
/// when phi is flagged.
Eigen::VectorXd estimate_spectrum_ls(const Dataset& data, const SampledBasis& phi);

/// H_hat = T(U)^{-1} Y_hat by forward substitution.
Eigen::VectorXd estimate_markov(const Eigen::VectorXd& y_hat, const Spectrum& input);

/// tau_hat from an estimated Markov sequence using its first `count` entries.
double delay_from_markov(const Eigen::VectorXd& h_hat, int count, double p);

DelayEstimate estimate_delay_proposed(const Dataset& data, const InputDesign& design,
                                      const LaguerreOptions& opts);
/// Same, reusing a prebuilt Phi (must match the dataset grid and design p).
DelayEstimate estimate_delay_proposed(const Dataset& data, const InputDesign& design,
                                      const SampledBasis& phi, const LaguerreOptions& opts);

// --- maximum likelihood ------------------------------------------------

/// delta * sum_n (z_n - u(t_n - tau))^2.
double ml_negloglik(const Dataset& data, const InputDesign& design, double tau);
/// d/dtau of ml_negloglik.
double ml_gradient(const Dataset& data, const InputDesign& design, double tau);

/// Grid scan over [0, tau_max] followed by golden-section refinement.
DelayEstimate estimate_delay_ml(const Dataset& data, const InputDesign& design,
                                const MlOptions& opts = {});

/// tau_max = T - T_u with T_u from signal_duration, floored at one sampling
/// interval.
double default_tau_max(const InputDesign& design);

// --- Cramer-Rao bound --------------------------------------------------

/// lambda / sum_n (d/dtau u(n delta - tau))^2 over the design's sample grid.
CrlbReport crlb(const InputDesign& design, double tau, double lambda);

// --- baselines ---------------------------------------------------------

/// Cubic-spline interpolation of z, projections onto l_j by per-interval
/// Gauss-Legendre quadrature over [0, (N-1) delta], then the Markov and
/// closed-form steps of the two-step estimator.
DelayEstimate estimate_delay_lag_spline(const Dataset& data, const InputDesign& design,
                                        const LaguerreOptions& opts);

/// Integer lag from the cross-correlation peak, subsample part from the
/// |R|^2-weighted phase slope of the lag-compensated cross-spectrum.
DelayEstimate estimate_delay_freq_interp(const Dataset& data, const InputDesign& design,
                                         const FreqInterpOptions& opts = {});

}  // namespace lagdelay
