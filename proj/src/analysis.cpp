#include "lagdelay/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "lagdelay/delay_operator.hpp"
#include "lagdelay/error.hpp"

namespace lagdelay {

namespace {

/// T^{-1}(U) applied column-wise.
Eigen::MatrixXd toeplitz_solve_columns(const Spectrum& input, const Eigen::MatrixXd& rhs) {
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c)
    out.col(c) = solve_toeplitz(input, rhs.col(c));
  return out;
}

struct MarkovErrorModel {
  Eigen::VectorXd bias;
  Eigen::MatrixXd factor;  // covariance = lambda * factor * factor^T
};

MarkovErrorModel markov_error_model(const InputDesign& design, int k_model, double tau_check,
                                    double cond_threshold) {
  require(k_model >= design.input_order(), "k_model must be at least the input order I");
  require(tau_check >= 0.0, "tau_check must be non-negative");
  const int n = design.n_samples();
  const auto phi = build_phi({design.p, k_model + 1}, design.delta, n, cond_threshold);

  Dataset clean;
  clean.z = sample_delayed(design, tau_check, n);
  clean.delta = design.delta;
  const Eigen::VectorXd y_hat = estimate_spectrum_ls(clean, phi);
  const Eigen::VectorXd h_hat = estimate_markov(y_hat, design.spectrum());
  const auto h = markov_params(2.0 * design.p * tau_check, k_model + 1);

  return {h_hat - h.values, toeplitz_solve_columns(design.spectrum(), phi.r_inverse())};
}

}  // namespace

MarkovAccuracy markov_mse(const InputDesign& design, int k_model, double lambda,
                          double tau_check, double cond_threshold) {
  require(lambda >= 0.0, "noise variance must be non-negative");
  const auto model = markov_error_model(design, k_model, tau_check, cond_threshold);
  MarkovAccuracy acc;
  acc.bias = model.bias;
  acc.covariance = lambda * model.factor * model.factor.transpose();
  acc.mse = acc.bias.squaredNorm() + acc.covariance.trace();
  return acc;
}

MarkovMseEvaluator::MarkovMseEvaluator(double p, double delta, int n_samples, int k_model,
                                       int input_order, double tau_check, double cond_threshold)
    : p_(p), k_model_(k_model) {
  require(k_model >= input_order, "k_model must be at least the input order I");
  const auto phi = build_phi({p, k_model + 1}, delta, n_samples, cond_threshold, true);
  cond_ = phi.cond();
  ill_conditioned_ = phi.ill_conditioned();

  Eigen::MatrixXd shifted(n_samples, input_order + 1);
  std::vector<double> basis(static_cast<std::size_t>(input_order + 1));
  for (int i = 0; i < n_samples; ++i) {
    eval_basis_all(p, i * delta - tau_check, basis);
    for (int k = 0; k <= input_order; ++k) shifted(i, k) = basis[static_cast<std::size_t>(k)];
  }
  projection_ = Eigen::MatrixXd(k_model + 1, input_order + 1);
  for (int k = 0; k <= input_order; ++k)
    projection_.col(k) = phi.solve_least_squares(shifted.col(k));
  r_inv_ = phi.r_inverse();
  markov_ = markov_params(2.0 * p * tau_check, k_model + 1).values;
}

MarkovMseEvaluator::Terms MarkovMseEvaluator::evaluate(const Eigen::VectorXd& u,
                                                       double lambda) const {
  const Spectrum input{u, p_};
  Terms terms;
  const Eigen::VectorXd bias = solve_toeplitz(input, projection_ * u) - markov_;
  terms.bias_energy = bias.squaredNorm();
  terms.variance_trace = lambda * toeplitz_solve_columns(input, r_inv_).squaredNorm();
  return terms;
}

BiasPrediction predict_bias_tau(const InputDesign& design, double lambda, double tau_check,
                                const LaguerreOptions& opts, int mc_samples, std::uint64_t seed) {
  require(mc_samples >= 1000, "bias prediction needs at least 1000 Monte-Carlo samples");
  require(lambda >= 0.0, "noise variance must be non-negative");
  const int count = opts.markov_count();
  require(count >= 3 && count <= opts.k_model + 1, "m_markov must lie in [3, K+1]");

  const auto model = markov_error_model(design, opts.k_model, tau_check, opts.cond_threshold);
  const double kappa = 2.0 * design.p * tau_check;
  const auto truth = assemble_ab(markov_params(kappa, count));
  const double btb = truth.b.squaredNorm();
  if (!(btb >= kDegenerateBTolerance))
    throw Error(ErrorCode::degenerate_b, "B^T B vanishes at tau_check");

  const Eigen::MatrixXd factor = std::sqrt(lambda) * model.factor.topRows(count);
  const Eigen::VectorXd mean = model.bias.head(count);
  const Eigen::MatrixXd& omega = truth.omega;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd xi(factor.cols());
  double sum = 0.0;
  double sum_sq = 0.0;
  double eps1_sum = 0.0;
  double eps2_sum = 0.0;
  for (int s = 0; s < mc_samples; ++s) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = gauss(rng);
    const Eigen::VectorXd err = mean + factor * xi;
    const Eigen::VectorXd e_b = err.head(count - 1);
    Eigen::VectorXd e_a = omega * e_b;
    e_a(count - 2) -= (count - 1.0) * err(count - 1);
    // (B + E_B)^T (A + E_A) = B^T A + eps1, (B + E_B)^T (B + E_B) = B^T B + eps2
    const double eps1 = e_b.dot(truth.a) + e_a.dot(truth.b) + e_b.dot(e_a);
    const double eps2 = 2.0 * e_b.dot(truth.b) + e_b.squaredNorm();
    const double term = (eps1 - kappa * eps2) / (2.0 * design.p * (btb + eps2));
    sum += term;
    sum_sq += term * term;
    eps1_sum += eps1;
    eps2_sum += eps2;
  }
  BiasPrediction pred;
  pred.mc_samples = mc_samples;
  pred.seed = seed;
  pred.predicted_bias = sum / mc_samples;
  const double var = std::max(0.0, (sum_sq - sum * sum / mc_samples) / (mc_samples - 1));
  pred.std_error = std::sqrt(var / mc_samples);
  pred.eps1_mean = eps1_sum / mc_samples;
  pred.eps2_mean = eps2_sum / mc_samples;
  return pred;
}

const MethodStats& McStats::get(Method m) const {
  for (const auto& s : methods)
    if (s.method == m) return s;
  throw Error(ErrorCode::invalid_argument, "method not part of this benchmark");
}

namespace {

struct ReplicateResult {
  double tau_hat = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

Histogram make_histogram(const std::vector<double>& values, int bins) {
  Histogram h;
  if (values.empty() || bins < 1) return h;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (!(hi > lo)) {
    const double pad = std::max(std::abs(lo) * 1e-9, 1e-15);
    lo -= pad;
    hi += pad;
  }
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int idx = static_cast<int>((v - lo) / (hi - lo) * bins);
    idx = std::clamp(idx, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

}  // namespace

McStats run_monte_carlo(const BenchmarkConfig& config) {
  require(config.replicates >= 2, "need at least 2 replicates");
  require(!config.methods.empty(), "no estimators selected");
  require(config.noise_var >= 0.0, "noise variance must be non-negative");
  require(config.tau >= 0.0, "delay must be non-negative");
  const auto& design = config.design;
  const int n = design.n_samples();
  const Eigen::VectorXd clean = sample_delayed(design, config.tau, n);

  const bool need_phi = std::find(config.methods.begin(), config.methods.end(), Method::proposed) !=
                        config.methods.end();
  std::optional<SampledBasis> phi;
  if (need_phi)
    phi.emplace(build_phi({design.p, config.laguerre.k_model + 1}, design.delta, n,
                          config.laguerre.cond_threshold));
  MlOptions ml_opts = config.ml;
  if (ml_opts.tau_max <= 0.0) ml_opts.tau_max = default_tau_max(design);

  const std::size_t n_methods = config.methods.size();
  const auto replicates = static_cast<std::size_t>(config.replicates);
  std::vector<ReplicateResult> results(replicates * n_methods);

  auto run_one = [&](std::size_t r) {
    Dataset data = add_noise(clean, design.delta, config.noise_var, replicate_seed(config.seed, r));
    data.true_tau = config.tau;
    for (std::size_t m = 0; m < n_methods; ++m) {
      auto& slot = results[r * n_methods + m];
      try {
        switch (config.methods[m]) {
          case Method::proposed:
            slot.tau_hat = estimate_delay_proposed(data, design, *phi, config.laguerre).tau_hat;
            break;
          case Method::ml:
            slot.tau_hat = estimate_delay_ml(data, design, ml_opts).tau_hat;
            break;
          case Method::lag_spline:
            slot.tau_hat = estimate_delay_lag_spline(data, design, config.laguerre).tau_hat;
            break;
          case Method::freq_interp:
            slot.tau_hat = estimate_delay_freq_interp(data, design, config.freq).tau_hat;
            break;
        }
        if (!std::isfinite(slot.tau_hat)) slot.error = "non-finite estimate";
      } catch (const std::exception& e) {
        slot.tau_hat = std::numeric_limits<double>::quiet_NaN();
        slot.error = e.what();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(config.workers, config.replicates));
  if (workers == 1) {
    for (std::size_t r = 0; r < replicates; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < replicates; r = next++) run_one(r);
      });
  }

  McStats stats;
  stats.replicates = config.replicates;
  stats.seed = config.seed;
  stats.n_samples = n;
  if (config.noise_var > 0.0) {
    try {
      stats.crlb = crlb(design, config.tau, config.noise_var);
    } catch (const Error&) {
      stats.crlb.reset();
    }
  }

  for (std::size_t m = 0; m < n_methods; ++m) {
    MethodStats s;
    s.method = config.methods[m];
    std::vector<double> ok;
    ok.reserve(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
      const auto& slot = results[r * n_methods + m];
      if (slot.error.empty()) {
        ok.push_back(slot.tau_hat);
      } else {
        ++s.failures;
        if (s.first_error.empty()) s.first_error = slot.error;
      }
    }
    s.successes = static_cast<int>(ok.size());
    if (!ok.empty()) {
      double sum = 0.0;
      for (double v : ok) sum += v;
      s.mean = sum / static_cast<double>(ok.size());
      s.bias = s.mean - config.tau;
      double sq_dev = 0.0;
      double sq_err = 0.0;
      for (double v : ok) {
        sq_dev += (v - s.mean) * (v - s.mean);
        sq_err += (v - config.tau) * (v - config.tau);
      }
      s.variance = ok.size() > 1 ? sq_dev / static_cast<double>(ok.size() - 1) : 0.0;
      s.mse_raw = sq_err / static_cast<double>(ok.size());
      s.mse_normalized = std::sqrt(static_cast<double>(n)) * s.mse_raw;
      s.histogram = make_histogram(ok, config.histogram_bins);
    }
    stats.methods.push_back(std::move(s));
  }
  return stats;
}

}  // namespace lagdelay
