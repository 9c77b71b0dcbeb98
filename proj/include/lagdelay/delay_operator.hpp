#pragma once

/** @file
 * Laguerre-domain model of a pure delay. With kappa = 2 p tau the delay acts
 * on spectra as a causal convolution with the Markov parameters
 * h_m(kappa) = exp(-kappa/2) L_m(kappa; -1), and the three-term recurrence
 * of L_m turns any prefix of h into a linear system A = kappa B.
 */

#include <Eigen/Dense>

namespace lagdelay {

/// Finite continuous Laguerre spectrum tied to the parameter p it refers to.
struct Spectrum {
  Eigen::VectorXd coeffs;
  double p = 1.0;

  int size() const { return static_cast<int>(coeffs.size()); }
  /// Squared L2 norm of the signal (Parseval).
  double energy() const { return coeffs.squaredNorm(); }
};

struct MarkovSequence {
  double kappa = 0.0;
  Eigen::VectorXd values;  ///< h_0 ... h_{M-1}

  int size() const { return static_cast<int>(values.size()); }
};

struct DelayLinearSystem {
  Eigen::MatrixXd omega;  ///< (M-1) x (M-1)
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

/// Smallest |u_0| accepted when inverting T(U).
inline constexpr double kSingularInputTolerance = 1e-12;
/// Smallest B^T B accepted by closed_form_delay.
inline constexpr double kDegenerateBTolerance = 1e-20;

MarkovSequence markov_params(double kappa, int count);

/// y_j = sum_{k<=j} h_{j-k}(kappa) u_k for j < out_len; input coefficients
/// past input.size() are zero.
Spectrum delay_spectrum(const Spectrum& input, double kappa, int out_len);

/// Lower-triangular Toeplitz T(U), (T)_{jk} = u_{j-k}. Throws SingularInput
/// when |u_0| is below kSingularInputTolerance.
Eigen::MatrixXd build_toeplitz(const Spectrum& input, int size);

/// Solves T(U) h = rhs by forward substitution.
Eigen::VectorXd solve_toeplitz(const Spectrum& input, const Eigen::VectorXd& rhs);

/// Row m encodes kappa h_m = -(m-1) h_{m-1} + 2m h_m - (m+1) h_{m+1} with the
/// h_{M-1} term of the last row left out (it belongs to A).
Eigen::MatrixXd build_omega(int count);

/// B = h_{0..M-2}, A = Omega B - (M-1) h_{M-1} e_{M-1}.
DelayLinearSystem assemble_ab(const Eigen::VectorXd& h);
inline DelayLinearSystem assemble_ab(const MarkovSequence& h) { return assemble_ab(h.values); }

/// (1/2p) B^T A / B^T B. Throws DegenerateB when B^T B is ~0.
double closed_form_delay(const DelayLinearSystem& sys, double p);

}  // namespace lagdelay
