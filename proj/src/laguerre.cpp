#include "lagdelay/laguerre.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "lagdelay/error.hpp"

namespace lagdelay {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::ill_conditioned: return "IllConditioned";
    case ErrorCode::singular_input: return "SingularInput";
    case ErrorCode::degenerate_b: return "DegenerateB";
    case ErrorCode::zero_information: return "ZeroInformation";
    case ErrorCode::flat_correlation: return "FlatCorrelation";
    case ErrorCode::no_improvement: return "NoImprovement";
    case ErrorCode::infeasible: return "Infeasible";
    case ErrorCode::io: return "Io";
  }
  return "Unknown";
}

void BasisConfig::validate() const {
  require(p > 0.0 && std::isfinite(p), "Laguerre parameter p must be positive");
  require(num_funcs >= 1, "num_funcs must be at least 1");
}

double assoc_laguerre_direct(int m, double xi) {
  require(m >= 0, "polynomial index must be non-negative");
  if (m == 0) return 1.0;
  // For alpha = -1 the n = 0 term vanishes and binom(m-1, m-n) = binom(m-1, n-1).
  double sum = 0.0;
  double binom = 1.0;      // binom(m-1, n-1)
  double power = 1.0;      // (-xi)^n / n!
  for (int n = 1; n <= m; ++n) {
    power *= -xi / n;
    if (n > 1) binom = binom * (m - n + 1) / (n - 1);
    sum += binom * power;
  }
  return sum;
}

double assoc_laguerre_recurrence(double prev, double curr, int m, double xi) {
  return ((2.0 * m - xi) * curr - (m - 1.0) * prev) / (m + 1.0);
}

std::vector<double> assoc_laguerre_sequence(int count, double xi) {
  std::vector<double> out(static_cast<std::size_t>(std::max(count, 0)));
  if (count > 0) out[0] = 1.0;
  if (count > 1) out[1] = -xi;
  for (int m = 1; m + 1 < count; ++m)
    out[m + 1] = assoc_laguerre_recurrence(out[m - 1], out[m], m, xi);
  return out;
}

double assoc_laguerre_poly(int m, double xi) {
  require(m >= 0, "polynomial index must be non-negative");
  if (m <= kDirectSumMaxOrder) return assoc_laguerre_direct(m, xi);
  return assoc_laguerre_sequence(m + 1, xi).back();
}

void eval_basis_all(double p, double t, std::span<double> out) {
  if (out.empty()) return;
  if (t < 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double x = 2.0 * p * t;
  const double envelope = std::sqrt(2.0 * p) * std::exp(-p * t);
  double prev = 1.0;
  double curr = 1.0 - x;
  out[0] = envelope;
  if (out.size() > 1) out[1] = envelope * curr;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    const double kk = static_cast<double>(k);
    const double next = ((2.0 * kk + 1.0 - x) * curr - kk * prev) / (kk + 1.0);
    prev = curr;
    curr = next;
    out[k + 1] = envelope * curr;
  }
}

void eval_basis_derivative_all(double p, double t, std::span<double> out) {
  eval_basis_all(p, t, out);
  if (t < 0.0) return;
  double running = 0.0;  // sum_{i<j} l_i(t)
  for (double& v : out) {
    const double value = v;
    v = -p * value - 2.0 * p * running;
    running += value;
  }
}

double eval_basis_time(const BasisConfig& cfg, int j, double t) {
  cfg.validate();
  require(j >= 0 && j < cfg.num_funcs, "basis index out of range");
  std::vector<double> values(static_cast<std::size_t>(j) + 1);
  eval_basis_all(cfg.p, t, values);
  return values.back();
}

ContinuousRealization build_continuous_ss(const BasisConfig& cfg) {
  cfg.validate();
  const int n = cfg.num_funcs;
  ContinuousRealization real;
  real.p = cfg.p;
  real.order = cfg.order();
  real.a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    real.a(i, i) = -cfg.p;
    for (int j = 0; j < i; ++j) real.a(i, j) = -2.0 * cfg.p;
  }
  real.b = Eigen::VectorXd::Constant(n, std::sqrt(2.0 * cfg.p));
  return real;
}

DiscreteRealization discretize_impulse_invariant(const ContinuousRealization& real,
                                                 double delta) {
  require(delta >= 0.0 && std::isfinite(delta), "sampling time must be non-negative");
  DiscreteRealization disc;
  // Pade(13) scaling-and-squaring.
  disc.a = (real.a * delta).exp();
  disc.b = disc.a * real.b;
  return disc;
}

SampledBasis::SampledBasis(BasisConfig cfg, double delta, Eigen::MatrixXd matrix,
                           double cond_threshold)
    : cfg_(cfg),
      delta_(delta),
      matrix_(std::move(matrix)),
      qr_(matrix_),
      cond_threshold_(cond_threshold) {
  const int cols = static_cast<int>(matrix_.cols());
  const Eigen::MatrixXd r =
      qr_.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  cond_ = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  r_inv_ = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(cols, cols));
}

Eigen::VectorXd SampledBasis::solve_least_squares(const Eigen::VectorXd& z) const {
  require(z.size() == matrix_.rows(), "measurement length does not match the sampled basis");
  return qr_.solve(z);
}

SampledBasis build_phi(const BasisConfig& cfg, double delta, int n_samples,
                       double cond_threshold, bool quiet) {
  cfg.validate();
  require(delta > 0.0 && std::isfinite(delta), "sampling time must be positive");
  require(n_samples >= cfg.num_funcs, "need at least K+1 samples");

  const auto real = build_continuous_ss(cfg);
  const auto disc = discretize_impulse_invariant(real, delta);

  Eigen::MatrixXd phi(n_samples, cfg.num_funcs);
  Eigen::VectorXd state = real.b;
  for (int n = 0; n < n_samples; ++n) {
    phi.row(n) = state.transpose();
    state = disc.a.triangularView<Eigen::Lower>() * state;
  }

  SampledBasis basis(cfg, delta, std::move(phi), cond_threshold);
  if (basis.ill_conditioned() && !quiet) {
    spdlog::warn("sampled Laguerre basis is ill-conditioned: cond(Phi) = {:.3e} > {:.1e} "
                 "(p = {}, K = {}, delta = {}, N = {})",
                 basis.cond(), cond_threshold, cfg.p, cfg.order(), delta, n_samples);
  }
  return basis;
}

}  // namespace lagdelay
