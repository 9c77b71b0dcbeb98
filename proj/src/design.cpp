#include "lagdelay/design.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <spdlog/spdlog.h>

#include "lagdelay/analysis.hpp"
#include "lagdelay/error.hpp"

namespace lagdelay {

Eigen::VectorXd flip_odd_signs(const Eigen::VectorXd& u) {
  Eigen::VectorXd out = u;
  for (Eigen::Index k = 1; k < out.size(); k += 2) out(k) = -out(k);
  return out;
}

double DesignProblem::resolved_horizon() const {
  if (n_samples) return (*n_samples - 1) * delta;
  return horizon;
}

void DesignProblem::validate() const {
  require(delta > 0.0 && std::isfinite(delta), "design problem: delta must be positive");
  if (n_samples) require(*n_samples >= 2, "design problem: n_samples must be at least 2");
  require(resolved_horizon() >= delta, "design problem: horizon must cover one sampling interval");
  require(i_order >= 1 && i_order % 2 == 1, "design problem: input order I must be odd");
  require(tau_guess >= 0.0, "design problem: tau_guess must be non-negative");
  require(noise_var >= 0.0, "design problem: noise_var must be non-negative");
  require(k_model >= i_order, "design problem: k_model must be at least I");
  require(p_grid.lo > 0.0 && p_grid.hi >= p_grid.lo && p_grid.points >= 1,
          "design problem: p_grid needs 0 < lo <= hi and at least one point");
  require(u_points >= 2, "design problem: u_points must be at least 2");
}

ConstraintReport validate_constraints(const Eigen::VectorXd& u, double energy_bound, double tol) {
  ConstraintReport report;
  if (u.size() == 0) {
    report.violations.push_back("spectrum is empty");
    report.continuity_ok = false;
    return report;
  }
  if (u.size() % 2 != 0) report.violations.push_back("order I must be odd");
  if (!(u(0) > 0.0)) report.violations.push_back("u_0 must be positive");
  const double scale = std::max(1.0, u.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 1; k < u.size(); ++k) {
    if (k % 2 == 1 && u(k) > tol * scale)
      report.violations.push_back("u_" + std::to_string(k) + " must be <= 0 (odd k)");
    if (k % 2 == 0 && std::abs(u(k) - u(k - 1)) > tol * scale)
      report.violations.push_back("u_" + std::to_string(k) + " must equal u_" +
                                  std::to_string(k - 1) + " (even k)");
  }
  if (u.squaredNorm() > energy_bound * (1.0 + 1e-12) + tol * tol)
    report.violations.push_back("energy sum u_k^2 exceeds eta");
  report.continuity_residual = std::abs(u.sum());
  report.continuity_ok = report.continuity_residual <= tol * std::max(1.0, u.norm());
  return report;
}

int free_coefficient_count(int i_order, bool enforce_continuity) {
  require(i_order >= 1 && i_order % 2 == 1, "input order I must be odd");
  const int tail = (i_order - 1) / 2 + 1;  // pairs plus the final odd coefficient
  return enforce_continuity ? tail : tail + 1;
}

Eigen::VectorXd spectrum_from_free(const Eigen::VectorXd& free, int i_order,
                                   bool enforce_continuity) {
  require(free.size() == free_coefficient_count(i_order, enforce_continuity),
          "wrong number of free coefficients");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(i_order + 1);
  const Eigen::Index offset = enforce_continuity ? 0 : 1;
  const int pairs = (i_order - 1) / 2;
  for (int j = 1; j <= pairs; ++j) {
    u(2 * j - 1) = -free(offset + j - 1);
    u(2 * j) = -free(offset + j - 1);
  }
  u(i_order) = -free(offset + pairs);
  u(0) = enforce_continuity ? -u.tail(i_order).sum() : free(0);
  return u;
}

namespace {

struct Candidate {
  double objective;
  MarkovMseEvaluator::Terms terms;
  Eigen::VectorXd u;
};

class DesignObjective {
public:
  explicit DesignObjective(const DesignProblem& problem)
      : problem_(problem),
        n_samples_(problem.n_samples ? *problem.n_samples
                                     : static_cast<int>(std::floor(problem.horizon / problem.delta +
                                                                   1e-9)) + 1) {}

  /// Evaluator for p, or nullptr when Phi is ill-conditioned at p.
  const MarkovMseEvaluator* at(double p) {
    if (!cached_ || cached_p_ != p) {
      cached_.emplace(p, problem_.delta, n_samples_, problem_.k_model, problem_.i_order,
                      problem_.tau_guess, problem_.cond_threshold);
      cached_p_ = p;
    }
    return cached_->ill_conditioned() ? nullptr : &*cached_;
  }

  std::optional<Candidate> score(const MarkovMseEvaluator& eval, const Eigen::VectorXd& free) {
    Eigen::VectorXd u = spectrum_from_free(free, problem_.i_order, problem_.enforce_continuity);
    if (!(u(0) > 0.0)) return std::nullopt;
    const double energy = u.squaredNorm();
    if (energy > problem_.energy_bound) u *= std::sqrt(problem_.energy_bound / energy);
    ++evaluations;
    try {
      const auto terms = eval.evaluate(u, problem_.noise_var);
      if (!std::isfinite(terms.mse())) return std::nullopt;
      return Candidate{terms.mse(), terms, std::move(u)};
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  int evaluations = 0;

private:
  const DesignProblem& problem_;
  int n_samples_;
  std::optional<MarkovMseEvaluator> cached_;
  double cached_p_ = 0.0;
};

std::vector<double> log_grid(const GridSpec& g) {
  std::vector<double> out;
  if (g.points == 1 || g.hi == g.lo) {
    out.push_back(g.lo);
    return out;
  }
  const double a = std::log(g.lo);
  const double b = std::log(g.hi);
  for (int i = 0; i < g.points; ++i) out.push_back(std::exp(a + (b - a) * i / (g.points - 1)));
  return out;
}

}  // namespace

DesignResult optimize_design(const DesignProblem& problem) {
  if (!(problem.energy_bound > 0.0))
    throw Error(ErrorCode::infeasible, "energy bound eta must be positive");
  problem.validate();

  const int n_free = free_coefficient_count(problem.i_order, problem.enforce_continuity);
  const double u_max = std::sqrt(problem.energy_bound);
  const double u_step = u_max / (problem.u_points - 1);
  double total = 1.0;
  for (int i = 0; i < n_free; ++i) total *= problem.u_points;
  require(total <= 4e6, "coefficient grid too large; reduce u_points");

  DesignObjective objective(problem);
  const auto p_values = log_grid(problem.p_grid);

  std::optional<Candidate> best;
  double best_p = 0.0;
  Eigen::VectorXd best_free;
  int skipped = 0;
  Eigen::VectorXd free(n_free);
  std::vector<int> idx(static_cast<std::size_t>(n_free));
  for (double p : p_values) {
    const auto* eval = objective.at(p);
    if (!eval) {
      ++skipped;
      spdlog::debug("design: skipping p = {} (ill-conditioned)", p);
      continue;
    }
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      for (int i = 0; i < n_free; ++i) free(i) = idx[static_cast<std::size_t>(i)] * u_step;
      auto cand = objective.score(*eval, free);
      if (cand && (!best || cand->objective < best->objective)) {
        best = std::move(cand);
        best_p = p;
        best_free = free;
      }
      int pos = n_free - 1;
      while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == problem.u_points)
        idx[static_cast<std::size_t>(pos--)] = 0;
      if (pos < 0) break;
    }
  }
  if (!best) throw Error(ErrorCode::infeasible, "no grid point satisfies the design constraints");

  DesignResult result;
  result.grid_objective = best->objective;
  result.skipped_p = skipped;

  if (problem.refine) {
    // Coordinate descent on (log p, free coefficients).
    const double lp_lo = std::log(problem.p_grid.lo);
    const double lp_hi = std::log(problem.p_grid.hi);
    double log_p = std::log(best_p);
    std::vector<double> steps(static_cast<std::size_t>(n_free) + 1, u_step);
    steps[0] = p_values.size() > 1 ? (lp_hi - lp_lo) / (static_cast<double>(p_values.size()) - 1)
                                   : 0.1;
    int halvings = 0;
    for (int round = 0; round < 200 && halvings < 12; ++round) {
      const double start = best->objective;
      for (int c = 0; c <= n_free; ++c) {
        for (double dir : {-1.0, 1.0}) {
          double trial_lp = log_p;
          Eigen::VectorXd trial_free = best_free;
          if (c == 0) {
            trial_lp = std::clamp(log_p + dir * steps[0], lp_lo, lp_hi);
            if (trial_lp == log_p) continue;
          } else {
            trial_free(c - 1) = std::max(0.0, best_free(c - 1) + dir * steps[static_cast<std::size_t>(c)]);
            if (trial_free(c - 1) == best_free(c - 1)) continue;
          }
          const auto* eval = objective.at(std::exp(trial_lp));
          if (!eval) continue;
          auto cand = objective.score(*eval, trial_free);
          if (cand && cand->objective < best->objective) {
            best = std::move(cand);
            log_p = trial_lp;
            best_free = trial_free;
            break;
          }
        }
      }
      if (best->objective >= start) {
        for (auto& s : steps) s *= 0.5;
        ++halvings;
        continue;
      }
      if ((start - best->objective) <= 1e-4 * start) break;
    }
    best_p = std::exp(log_p);
  }

  InputDesign& d = result.design;
  d.p = best_p;
  d.u = best->u;
  d.energy_bound = problem.energy_bound;
  d.horizon = problem.resolved_horizon();
  d.delta = problem.delta;
  d.tau_guess = problem.tau_guess;
  result.objective = best->objective;
  result.bias_energy = best->terms.bias_energy;
  result.variance_trace = best->terms.variance_trace;
  result.evaluations = objective.evaluations;
  result.constraints = validate_constraints(d.u, problem.energy_bound);
  if (!result.constraints.pattern_ok() ||
      (problem.enforce_continuity && !result.constraints.continuity_ok))
    throw Error(ErrorCode::infeasible, "optimized design violates the constraints");
  return result;
}

}  // namespace lagdelay
