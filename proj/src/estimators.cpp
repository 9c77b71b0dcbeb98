#include "lagdelay/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/FFT>

#include "lagdelay/delay_operator.hpp"
#include "lagdelay/error.hpp"

namespace lagdelay {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::proposed: return "proposed";
    case Method::ml: return "ml";
    case Method::lag_spline: return "lag_spline";
    case Method::freq_interp: return "freq_interp";
  }
  return "unknown";
}

Method parse_method(std::string_view tag) {
  for (Method m : kAllMethods)
    if (to_string(m) == tag) return m;
  throw Error(ErrorCode::invalid_argument, "unknown estimator '" + std::string(tag) + "'");
}

namespace {

void check_compatible(const Dataset& data, const InputDesign& design) {
  require(data.n_samples() >= 1, "dataset is empty");
  require(data.delta > 0.0, "dataset delta must be positive");
  if (std::abs(data.delta - design.delta) > 1e-12 * design.delta)
    throw Error(ErrorCode::invalid_argument,
                "dataset sampling time does not match the design grid");
}

void check_laguerre_options(const InputDesign& design, const LaguerreOptions& opts) {
  require(opts.k_model >= design.input_order(),
          "k_model must be at least the input spectrum order I");
  const int m = opts.markov_count();
  require(m >= 3 && m <= opts.k_model + 1, "m_markov must lie in [3, K+1]");
}

}  // namespace

// --- two-step Laguerre estimator ---------------------------------------

Eigen::VectorXd estimate_spectrum_ls(const Dataset& data, const SampledBasis& phi) {
  if (phi.ill_conditioned())
    throw Error(ErrorCode::ill_conditioned,
                "cond(Phi) = " + std::to_string(phi.cond()) +
                    " exceeds the threshold; revise delta, N or p");
  require(data.n_samples() == phi.n_samples(), "dataset length does not match Phi");
  return phi.solve_least_squares(data.z);
}

Eigen::VectorXd estimate_markov(const Eigen::VectorXd& y_hat, const Spectrum& input) {
  return solve_toeplitz(input, y_hat);
}

double delay_from_markov(const Eigen::VectorXd& h_hat, int count, double p) {
  require(count >= 3 && count <= h_hat.size(), "Markov count out of range");
  return closed_form_delay(assemble_ab(Eigen::VectorXd(h_hat.head(count))), p);
}

DelayEstimate estimate_delay_proposed(const Dataset& data, const InputDesign& design,
                                      const SampledBasis& phi, const LaguerreOptions& opts) {
  check_compatible(data, design);
  check_laguerre_options(design, opts);
  require(phi.config().num_funcs == opts.k_model + 1, "Phi has the wrong number of basis functions");
  require(std::abs(phi.config().p - design.p) <= 1e-12 * design.p, "Phi was built for another p");

  DelayEstimate est;
  est.method = Method::proposed;
  Eigen::VectorXd y_hat = estimate_spectrum_ls(data, phi);
  Eigen::VectorXd h_hat = estimate_markov(y_hat, design.spectrum());
  est.tau_hat = delay_from_markov(h_hat, opts.markov_count(), design.p);
  est.residual_norm = (data.z - phi.matrix() * y_hat).norm();
  est.y_hat = std::move(y_hat);
  est.h_hat = std::move(h_hat);
  return est;
}

DelayEstimate estimate_delay_proposed(const Dataset& data, const InputDesign& design,
                                      const LaguerreOptions& opts) {
  check_compatible(data, design);
  check_laguerre_options(design, opts);
  const auto phi = build_phi({design.p, opts.k_model + 1}, data.delta, data.n_samples(),
                             opts.cond_threshold);
  return estimate_delay_proposed(data, design, phi, opts);
}

// --- maximum likelihood ------------------------------------------------

namespace {

/// Squared-error objective with the model evaluated only where the shifted
/// input is non-negligible (|u| > 1e-13 max|u|).
class MlObjective {
public:
  MlObjective(const Dataset& data, const InputDesign& design)
      : data_(data), design_(design), basis_(static_cast<std::size_t>(design.u.size())) {
    // Energy of z before index n and from index n on, so the samples outside
    // the model window add in without cancellation.
    const int n_total = data.n_samples();
    head_.assign(static_cast<std::size_t>(n_total) + 1, 0.0);
    tail_.assign(static_cast<std::size_t>(n_total) + 1, 0.0);
    for (int n = 0; n < n_total; ++n)
      head_[static_cast<std::size_t>(n) + 1] = head_[static_cast<std::size_t>(n)] + data.z(n) * data.z(n);
    for (int n = n_total; n-- > 0;)
      tail_[static_cast<std::size_t>(n)] = tail_[static_cast<std::size_t>(n) + 1] + data.z(n) * data.z(n);
    support_ = effective_support(design, 1e-13);
  }

  double value(double tau) {
    double inside = 0.0;
    int first = -1;
    int last = -1;
    for_each_active(tau, [&](int n, double s) {
      const double r = data_.z(n) - eval(s);
      inside += r * r;
      if (first < 0) first = n;
      last = n;
    });
    if (first < 0) return data_.delta * tail_[0];
    return data_.delta * (head_[static_cast<std::size_t>(first)] + inside +
                          tail_[static_cast<std::size_t>(last) + 1]);
  }

  double gradient(double tau) {
    double acc = 0.0;
    for_each_active(tau, [&](int n, double s) {
      const double mu = eval(s);
      eval_basis_derivative_all(design_.p, s, basis_);
      double du = 0.0;
      for (std::size_t k = 0; k < basis_.size(); ++k) du += design_.u(static_cast<Eigen::Index>(k)) * basis_[k];
      acc += (data_.z(n) - mu) * du;
    });
    return 2.0 * data_.delta * acc;
  }

private:
  template <class F>
  void for_each_active(double tau, F&& f) {
    const int n_total = data_.n_samples();
    const double d = data_.delta;
    int first = static_cast<int>(std::ceil(tau / d));
    while (first > 0 && (first - 1) * d - tau >= 0.0) --first;
    while (first < n_total && first * d - tau < 0.0) ++first;
    for (int n = first; n < n_total; ++n) {
      const double s = n * d - tau;
      if (s > support_) break;
      f(n, s);
    }
  }

  double eval(double s) {
    eval_basis_all(design_.p, s, basis_);
    double acc = 0.0;
    for (std::size_t k = 0; k < basis_.size(); ++k) acc += design_.u(static_cast<Eigen::Index>(k)) * basis_[k];
    return acc;
  }

  const Dataset& data_;
  const InputDesign& design_;
  std::vector<double> basis_;
  std::vector<double> head_;
  std::vector<double> tail_;
  double support_ = 0.0;
};

}  // namespace

double ml_negloglik(const Dataset& data, const InputDesign& design, double tau) {
  check_compatible(data, design);
  require(tau >= 0.0, "delay must be non-negative");
  return MlObjective(data, design).value(tau);
}

double ml_gradient(const Dataset& data, const InputDesign& design, double tau) {
  check_compatible(data, design);
  require(tau >= 0.0, "delay must be non-negative");
  return MlObjective(data, design).gradient(tau);
}

double default_tau_max(const InputDesign& design) {
  const double t_obs = (design.n_samples() - 1) * design.delta;
  return std::max(t_obs - signal_duration(design), design.delta);
}

DelayEstimate estimate_delay_ml(const Dataset& data, const InputDesign& design,
                                const MlOptions& opts) {
  check_compatible(data, design);
  const double tau_max = opts.tau_max > 0.0 ? opts.tau_max : default_tau_max(design);
  require(tau_max > 0.0, "tau_max must be positive");
  require(opts.grid_fraction > 0.0, "grid fraction must be positive");

  MlObjective objective(data, design);
  const double step = opts.grid_fraction * data.delta;
  const int count = static_cast<int>(std::floor(tau_max / step + 1e-9));
  double best_tau = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= count; ++i) {
    const double tau = std::min(i * step, tau_max);
    const double v = objective.value(tau);
    if (v < best_val) {
      best_val = v;
      best_tau = tau;
    }
  }

  // Golden-section search on the grid cell pair around the best point.
  constexpr double inv_phi = 0.6180339887498949;
  double lo = std::max(0.0, best_tau - step);
  double hi = std::min(tau_max, best_tau + step);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective.value(x1);
  double f2 = objective.value(x2);
  int it = 0;
  while (hi - lo > opts.tolerance && it < opts.max_iterations) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective.value(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective.value(x2);
    }
    ++it;
  }
  const double refined = f1 <= f2 ? x1 : x2;
  const double refined_val = std::min(f1, f2);

  DelayEstimate est;
  est.method = Method::ml;
  est.iterations = it;
  if (refined_val <= best_val || std::abs(refined - best_tau) <= opts.tolerance) {
    // A grid point sitting on the minimum can beat the last bracket points
    // by rounding; keep whichever value is lower.
    est.tau_hat = refined_val <= best_val ? refined : best_tau;
    est.converged = hi - lo <= opts.tolerance;
    est.residual_norm = std::sqrt(std::max(std::min(refined_val, best_val), 0.0) / data.delta);
  } else {
    est.tau_hat = best_tau;
    est.converged = false;
    est.note = "NoImprovement: refinement did not improve on the grid point";
    est.residual_norm = std::sqrt(std::max(best_val, 0.0) / data.delta);
  }
  if (!est.converged && est.note.empty()) est.note = "iteration limit reached";
  return est;
}

// --- Cramer-Rao bound --------------------------------------------------

CrlbReport crlb(const InputDesign& design, double tau, double lambda) {
  require(lambda > 0.0, "CRLB needs a positive noise variance");
  require(tau >= 0.0, "delay must be non-negative");
  const int n_total = design.n_samples();
  const double d = design.delta;
  std::vector<double> basis(static_cast<std::size_t>(design.u.size()));

  CrlbReport report;
  int first = static_cast<int>(std::ceil(tau / d));
  while (first > 0 && (first - 1) * d - tau >= 0.0) --first;
  while (first < n_total && first * d - tau < 0.0) ++first;
  report.window_first = first;
  report.window_last =
      std::min(n_total - 1, static_cast<int>(std::ceil((tau + effective_support(design)) / d)));

  double info = 0.0;
  for (int n = first; n < n_total; ++n) {
    eval_basis_derivative_all(design.p, n * d - tau, basis);
    double du = 0.0;
    for (std::size_t k = 0; k < basis.size(); ++k) du += design.u(static_cast<Eigen::Index>(k)) * basis[k];
    info += du * du;
  }
  if (!(info > 0.0))
    throw Error(ErrorCode::zero_information, "the input carries no delay information on this grid");
  report.bound = lambda / info;
  return report;
}

// --- spline-integrated Laguerre baseline --------------------------------

DelayEstimate estimate_delay_lag_spline(const Dataset& data, const InputDesign& design,
                                        const LaguerreOptions& opts) {
  check_compatible(data, design);
  check_laguerre_options(design, opts);
  const int n_total = data.n_samples();
  require(n_total >= 4, "spline baseline needs at least 4 samples");
  const double d = data.delta;

  using boost::math::interpolators::cardinal_cubic_b_spline;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double left_slope = n_total < 5 ? (data.z(1) - data.z(0)) / d : nan;
  const double right_slope = n_total < 5 ? (data.z(n_total - 1) - data.z(n_total - 2)) / d : nan;
  const cardinal_cubic_b_spline<double> spline(data.z.data(), static_cast<std::size_t>(n_total), 0.0, d,
                                               left_slope, right_slope);

  // Full 10-point Gauss-Legendre rule on [-1, 1] from boost's half rule.
  using rule = boost::math::quadrature::gauss<double, 10>;
  std::vector<double> nodes;
  std::vector<double> weights;
  for (std::size_t i = 0; i < rule::abscissa().size(); ++i) {
    const double x = rule::abscissa()[i];
    const double w = rule::weights()[i];
    nodes.push_back(x);
    weights.push_back(w);
    if (x != 0.0) {
      nodes.push_back(-x);
      weights.push_back(w);
    }
  }

  const int num_funcs = opts.k_model + 1;
  Eigen::VectorXd y_hat = Eigen::VectorXd::Zero(num_funcs);
  std::vector<double> basis(static_cast<std::size_t>(num_funcs));
  for (int n = 0; n + 1 < n_total; ++n) {
    const double mid = (n + 0.5) * d;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double t = mid + 0.5 * d * nodes[q];
      const double w = 0.5 * d * weights[q] * spline(t);
      eval_basis_all(design.p, t, basis);
      for (int j = 0; j < num_funcs; ++j) y_hat(j) += w * basis[static_cast<std::size_t>(j)];
    }
  }

  DelayEstimate est;
  est.method = Method::lag_spline;
  Eigen::VectorXd h_hat = estimate_markov(y_hat, design.spectrum());
  est.tau_hat = delay_from_markov(h_hat, opts.markov_count(), design.p);
  est.y_hat = std::move(y_hat);
  est.h_hat = std::move(h_hat);
  return est;
}

// --- cross-correlation + phase-slope baseline ---------------------------

DelayEstimate estimate_delay_freq_interp(const Dataset& data, const InputDesign& design,
                                         const FreqInterpOptions& opts) {
  check_compatible(data, design);
  const int n_total = data.n_samples();
  require(n_total >= 2, "frequency interpolation needs at least 2 samples");
  const double d = data.delta;

  std::vector<double> ref(static_cast<std::size_t>(n_total));
  for (int n = 0; n < n_total; ++n) ref[static_cast<std::size_t>(n)] = synthesize_input(design, n * d);

  // r(k) = sum_n z_{n+k} u(t_n); z is zero outside the record.
  int k_star = 0;
  double r_best = -std::numeric_limits<double>::infinity();
  double r_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_total; ++k) {
    double r = 0.0;
    for (int n = 0; n + k < n_total; ++n) r += data.z(n + k) * ref[static_cast<std::size_t>(n)];
    if (r > r_best) {
      r_best = r;
      k_star = k;
    }
    r_min = std::min(r_min, r);
  }
  if (!(r_best > r_min))
    throw Error(ErrorCode::flat_correlation, "cross-correlation is flat; no usable delay information");

  Eigen::FFT<double> fft;
  std::vector<double> z(data.z.data(), data.z.data() + n_total);
  std::vector<std::complex<double>> z_spec;
  std::vector<std::complex<double>> u_spec;
  fft.fwd(z_spec, z);
  fft.fwd(u_spec, ref);

  const int half = n_total / 2;
  const double omega0 = 2.0 * std::numbers::pi / (n_total * d);
  std::vector<std::complex<double>> cross(static_cast<std::size_t>(half + 1));
  double peak = 0.0;
  for (int m = 1; m <= half; ++m) {
    const double omega = m * omega0;
    const auto shift = std::polar(1.0, omega * k_star * d);
    cross[static_cast<std::size_t>(m)] = z_spec[static_cast<std::size_t>(m)] *
                                         std::conj(u_spec[static_cast<std::size_t>(m)]) * shift;
    peak = std::max(peak, std::abs(cross[static_cast<std::size_t>(m)]));
  }

  double num = 0.0;
  double den = 0.0;
  int used = 0;
  for (int m = 1; m <= half; ++m) {
    const auto r = cross[static_cast<std::size_t>(m)];
    const double mag = std::abs(r);
    if (mag < opts.band_fraction * peak || mag == 0.0) continue;
    const double w = mag * mag;
    num += w * (-std::arg(r) / (m * omega0));
    den += w;
    ++used;
  }

  DelayEstimate est;
  est.method = Method::freq_interp;
  est.tau_hat = k_star * d + (den > 0.0 ? num / den : 0.0);
  est.iterations = used;
  est.note = "integer lag " + std::to_string(k_star) + ", " + std::to_string(used) + " bins";
  return est;
}

}  // namespace lagdelay
