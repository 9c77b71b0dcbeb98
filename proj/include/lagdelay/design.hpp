#pragma once

/** @file
 * Offline experiment design: choose p and the input spectrum minimizing the
 * MSE of the Markov parameter estimate at a rough delay guess.
 *
 * Coefficients are stored in the inverse-Laplace basis convention of
 * laguerre.hpp, where l_k(0) = +sqrt(2p) for every k. The sign pattern of
 * the design family is usually written for the alternating convention
 * (odd-index functions negated); in that convention it reads u_0 > 0,
 * u_k >= 0 for odd k, u_k = -u_{k-1} for even k >= 2. Translated here it
 * becomes u_k <= 0 for odd k and u_k = u_{k-1} for even k >= 2.
 */

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lagdelay/laguerre.hpp"
#include "lagdelay/signal.hpp"

namespace lagdelay {

/// Flips the sign of odd-index coefficients; maps between the alternating
/// and inverse-Laplace basis conventions (it is its own inverse).
Eigen::VectorXd flip_odd_signs(const Eigen::VectorXd& u);

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int points = 1;
};

struct DesignProblem {
  double delta = 0.0;
  double horizon = 0.0;             ///< T; derived from n_samples when that is set
  std::optional<int> n_samples;
  int i_order = 3;                  ///< I, odd
  double energy_bound = 0.0;        ///< eta
  double tau_guess = 0.0;           ///< rough delay the MSE is conditioned on
  double noise_var = 0.0;           ///< lambda
  int k_model = 12;
  GridSpec p_grid{1.0, 200.0, 40};  ///< log-spaced
  int u_points = 25;                ///< per free coefficient, over [0, sqrt(eta)]
  bool refine = true;
  bool enforce_continuity = true;   ///< add u(0) = 0 as a linear constraint
  double cond_threshold = kDefaultCondThreshold;

  double resolved_horizon() const;
  void validate() const;
};

struct ConstraintReport {
  std::vector<std::string> violations;  ///< sign pattern, u_0 and energy
  double continuity_residual = 0.0;     ///< |u(0)| / sqrt(2p) = |sum_k u_k|
  bool continuity_ok = true;

  bool pattern_ok() const { return violations.empty(); }
  bool ok() const { return pattern_ok() && continuity_ok; }
};

/// Checks the design family constraints on coefficients given in the
/// inverse-Laplace convention. Continuity is reported separately.
ConstraintReport validate_constraints(const Eigen::VectorXd& u, double energy_bound,
                                      double tol = 1e-10);

struct DesignResult {
  InputDesign design;
  double objective = 0.0;        ///< MSE of H_hat at the returned point
  double bias_energy = 0.0;
  double variance_trace = 0.0;
  int evaluations = 0;
  int skipped_p = 0;             ///< p values dropped as ill-conditioned
  double grid_objective = 0.0;   ///< best objective before refinement
  ConstraintReport constraints;
};

/// Number of free nonnegative coefficients for an odd order I.
int free_coefficient_count(int i_order, bool enforce_continuity);

/// Maps free coefficients to a spectrum of order I (before energy scaling).
/// With continuity the free values a_j >= 0 give u_{2j-1} = u_{2j} = -a_j,
/// u_I = -a_last and u_0 = -sum_{k>0} u_k. Without it u_0 is free as well
/// and comes first.
Eigen::VectorXd spectrum_from_free(const Eigen::VectorXd& free, int i_order,
                                   bool enforce_continuity);

/// Exhaustive grid over p and the free coefficients, then optional
/// coordinate descent. Ties resolve to the first grid point. Throws
/// Infeasible when no point satisfies the constraints.
DesignResult optimize_design(const DesignProblem& problem);

}  // namespace lagdelay
