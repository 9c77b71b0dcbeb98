#pragma once

/** @file
 * Continuous Laguerre basis: associated Laguerre polynomials (alpha = -1),
 * closed-form basis functions, the state-space realization whose impulse
 * response is the basis, and its impulse-invariant sampling.
 */

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lagdelay {

/// Above this order assoc_laguerre_poly switches from the explicit sum to
/// the three-term recurrence.
inline constexpr int kDirectSumMaxOrder = 12;

/// Default upper bound on cond(Phi) before a sampled basis is flagged.
inline constexpr double kDefaultCondThreshold = 1e8;

struct BasisConfig {
  double p = 1.0;     ///< Laguerre parameter [1/s]
  int num_funcs = 1;  ///< K + 1

  /// l_k(t) is the inverse Laplace transform of
  /// sqrt(2p)/(s+p) * ((s-p)/(s+p))^k, hence l_k(0) = +sqrt(2p) for all k.
  static constexpr std::string_view sign_convention = "inverse-laplace";

  int order() const { return num_funcs - 1; }
  void validate() const;
};

/// L_m(xi; -1) by the explicit finite sum. Exact binomials, double
/// arithmetic; loses digits to cancellation for large m * xi.
double assoc_laguerre_direct(int m, double xi);

/// One step of the three-term recurrence:
/// L_{m+1} = ((2m - xi) L_m - (m - 1) L_{m-1}) / (m + 1), valid for m >= 1.
double assoc_laguerre_recurrence(double prev, double curr, int m, double xi);

/// L_m(xi; -1). Direct sum up to kDirectSumMaxOrder, recurrence above.
double assoc_laguerre_poly(int m, double xi);

/// L_0(xi; -1) ... L_{count-1}(xi; -1) by the recurrence.
std::vector<double> assoc_laguerre_sequence(int count, double xi);

/// Closed form l_j(t) = sqrt(2p) exp(-pt) Lag_j(2pt), Lag_j the ordinary
/// Laguerre polynomial. Returns 0 for t < 0.
double eval_basis_time(const BasisConfig& cfg, int j, double t);

/// Fills out[j] = l_j(t) for j < out.size(); zeros for t < 0.
void eval_basis_all(double p, double t, std::span<double> out);

/// Fills out[j] = d/dt l_j(t) for t > 0 (right derivative at 0); zeros
/// for t < 0. Uses d/dt l = A_c l.
void eval_basis_derivative_all(double p, double t, std::span<double> out);

struct ContinuousRealization {
  Eigen::MatrixXd a;  ///< lower triangular, -p on the diagonal, -2p below
  Eigen::VectorXd b;  ///< all entries sqrt(2p)
  double p = 0.0;
  int order = 0;      ///< K
};

ContinuousRealization build_continuous_ss(const BasisConfig& cfg);

struct DiscreteRealization {
  Eigen::MatrixXd a;  ///< exp(A_c * delta)
  Eigen::VectorXd b;  ///< A_d * B_c
};

DiscreteRealization discretize_impulse_invariant(const ContinuousRealization& real,
                                                 double delta);

/// N x (K+1) matrix of basis functions at t_n = n * delta, together with a
/// Householder QR of it. Immutable after construction.
class SampledBasis {
public:
  SampledBasis(BasisConfig cfg, double delta, Eigen::MatrixXd matrix,
               double cond_threshold);

  const BasisConfig& config() const { return cfg_; }
  double delta() const { return delta_; }
  int n_samples() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  double cond() const { return cond_; }
  double cond_threshold() const { return cond_threshold_; }
  bool ill_conditioned() const { return !(cond_ <= cond_threshold_); }

  /// argmin_Y ||z - Phi Y||_2 via the stored QR.
  Eigen::VectorXd solve_least_squares(const Eigen::VectorXd& z) const;
  /// R^{-1} of the thin QR, so (Phi^T Phi)^{-1} = R^{-1} R^{-T}.
  const Eigen::MatrixXd& r_inverse() const { return r_inv_; }

private:
  BasisConfig cfg_;
  double delta_;
  Eigen::MatrixXd matrix_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd r_inv_;
  double cond_;
  double cond_threshold_;
};

/// Rows are the sampled state vectors A_d^n B_c of the impulse-invariant
/// realization. Logs a warning when cond(Phi) exceeds the threshold (unless
/// quiet); the flag is carried on the result and enforced by the
/// least-squares step.
SampledBasis build_phi(const BasisConfig& cfg, double delta, int n_samples,
                       double cond_threshold = kDefaultCondThreshold, bool quiet = false);

}  // namespace lagdelay
