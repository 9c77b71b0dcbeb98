#include "lagdelay/delay_operator.hpp"

#include <algorithm>

#include <cmath>
#include <sstream>

#include "lagdelay/error.hpp"
#include "lagdelay/laguerre.hpp"

namespace lagdelay {

MarkovSequence markov_params(double kappa, int count) {
  require(kappa >= 0.0 && std::isfinite(kappa), "kappa must be non-negative");
  require(count >= 1, "need at least one Markov parameter");
  const auto poly = assoc_laguerre_sequence(count, kappa);
  const double scale = std::exp(-0.5 * kappa);
  MarkovSequence seq;
  seq.kappa = kappa;
  seq.values.resize(count);
  for (int m = 0; m < count; ++m) seq.values(m) = scale * poly[m];
  return seq;
}

Spectrum delay_spectrum(const Spectrum& input, double kappa, int out_len) {
  require(input.size() > 0, "input spectrum is empty");
  require(out_len >= 1, "output length must be positive");
  const auto h = markov_params(kappa, out_len).values;
  Spectrum out{Eigen::VectorXd::Zero(out_len), input.p};
  for (int j = 0; j < out_len; ++j) {
    const int last = std::min(j, input.size() - 1);
    double acc = 0.0;
    for (int k = 0; k <= last; ++k) acc += h(j - k) * input.coeffs(k);
    out.coeffs(j) = acc;
  }
  return out;
}

namespace {

void check_u0(const Spectrum& input) {
  require(input.size() > 0, "input spectrum is empty");
  if (!(std::abs(input.coeffs(0)) >= kSingularInputTolerance)) {
    std::ostringstream msg;
    msg << "T(U) is singular: |u_0| = " << std::abs(input.coeffs(0))
        << " is below " << kSingularInputTolerance;
    throw Error(ErrorCode::singular_input, msg.str());
  }
}

}  // namespace

Eigen::MatrixXd build_toeplitz(const Spectrum& input, int size) {
  require(size >= 1, "Toeplitz size must be positive");
  check_u0(input);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(size, size);
  for (int j = 0; j < size; ++j)
    for (int k = std::max(0, j - input.size() + 1); k <= j; ++k) t(j, k) = input.coeffs(j - k);
  return t;
}

Eigen::VectorXd solve_toeplitz(const Spectrum& input, const Eigen::VectorXd& rhs) {
  check_u0(input);
  const int n = static_cast<int>(rhs.size());
  const double u0 = input.coeffs(0);
  Eigen::VectorXd h(n);
  for (int j = 0; j < n; ++j) {
    double acc = rhs(j);
    const int reach = std::min(j, input.size() - 1);
    for (int k = 1; k <= reach; ++k) acc -= input.coeffs(k) * h(j - k);
    h(j) = acc / u0;
  }
  return h;
}

Eigen::MatrixXd build_omega(int count) {
  require(count >= 3, "the delay system needs at least three Markov parameters");
  const int n = count - 1;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(n, n);
  for (int m = 0; m < n; ++m) {
    if (m >= 1) omega(m, m - 1) = -(m - 1.0);
    omega(m, m) = 2.0 * m;
    if (m + 1 < n) omega(m, m + 1) = -(m + 1.0);
  }
  return omega;
}

DelayLinearSystem assemble_ab(const Eigen::VectorXd& h) {
  const int count = static_cast<int>(h.size());
  require(count >= 3, "the delay system needs at least three Markov parameters");
  DelayLinearSystem sys;
  sys.omega = build_omega(count);
  sys.b = h.head(count - 1);
  sys.a = sys.omega * sys.b;
  sys.a(count - 2) -= (count - 1.0) * h(count - 1);
  return sys;
}

double closed_form_delay(const DelayLinearSystem& sys, double p) {
  require(p > 0.0, "Laguerre parameter p must be positive");
  const double btb = sys.b.squaredNorm();
  if (!(btb >= kDegenerateBTolerance))
    throw Error(ErrorCode::degenerate_b, "B^T B vanishes; the Markov parameters carry no delay information");
  return sys.b.dot(sys.a) / btb / (2.0 * p);
}

}  // namespace lagdelay
