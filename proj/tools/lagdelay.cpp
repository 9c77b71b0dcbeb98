// lagdelay: command-line front end for input design, simulation, delay
// estimation, Monte-Carlo benchmarking and bias prediction.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <spdlog/spdlog.h>

#include "lagdelay/analysis.hpp"
#include "lagdelay/design.hpp"
#include "lagdelay/error.hpp"
#include "lagdelay/estimators.hpp"
#include "lagdelay/laguerre.hpp"
#include "lagdelay/serialization.hpp"
#include "lagdelay/signal.hpp"

namespace fs = std::filesystem;
using namespace lagdelay;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitEstimatorFailure = 3;

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string methods;
  std::optional<int> replicates;
};

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> out;
  if (csv.empty() || csv == "all") return {std::begin(kAllMethods), std::end(kAllMethods)};
  std::stringstream ss(csv);
  std::string tag;
  while (std::getline(ss, tag, ','))
    if (!tag.empty()) out.push_back(parse_method(tag));
  require(!out.empty(), "no methods selected");
  return out;
}

Json methods_json(const std::vector<Method>& methods) {
  Json arr = Json::array();
  for (Method m : methods) arr.push_back(std::string(to_string(m)));
  return arr;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// --- design ---------------------------------------------------------------

int cmd_design(const Common& c) {
  require(!c.config.empty(), "design needs --config");
  const Json config = read_json_file(c.config);
  const DesignProblem problem = problem_from_json(config);
  const Json resolved = problem_to_json(problem);

  const DesignResult result = optimize_design(problem);
  Json doc = design_to_json(result.design);
  doc["objective"] = result.objective;
  doc["bias_energy"] = result.bias_energy;
  doc["variance_trace"] = result.variance_trace;
  doc["evaluations"] = result.evaluations;
  doc["constraints"] = constraints_to_json(result.constraints);
  doc["u_at_zero"] = input_value_at_zero(result.design);
  doc["config"] = resolved;
  doc["config_hash"] = config_hash(resolved);
  const fs::path path = out_dir(c) / "design.json";
  write_json_file(doc, path);

  std::cout << "design: p = " << fmt(result.design.p) << ", u = [";
  for (Eigen::Index k = 0; k < result.design.u.size(); ++k)
    std::cout << (k ? ", " : "") << fmt(result.design.u(k));
  std::cout << "]\n"
            << "objective MSE(H_hat) = " << fmt(result.objective)
            << " (bias " << fmt(result.bias_energy) << ", variance " << fmt(result.variance_trace)
            << ")\n"
            << "constraints: " << (result.constraints.pattern_ok() ? "pattern ok" : "pattern VIOLATED")
            << ", continuity residual " << fmt(result.constraints.continuity_residual) << '\n';
  for (const auto& v : result.constraints.violations) std::cout << "  violation: " << v << '\n';
  std::cout << "wrote " << path.string() << '\n';
  return kExitOk;
}

// --- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string design;
  double tau = 0.0;
  double lambda = 0.0;
  std::string name = "dataset";
};

int cmd_simulate(const Common& c, const SimulateArgs& a) {
  require(!a.design.empty(), "simulate needs --design");
  const InputDesign design = design_from_json(read_json_file(a.design));
  const std::uint64_t seed = c.seed.value_or(0);
  Json resolved;
  resolved["design"] = design_to_json(design);
  resolved["tau"] = a.tau;
  resolved["lambda"] = a.lambda;
  resolved["seed"] = seed;

  const double u0 = input_value_at_zero(design);
  if (std::abs(u0) > 1e-10) spdlog::warn("input is discontinuous at t = 0: u(0) = {}", u0);

  const int n = design.n_samples();
  Dataset data = add_noise(sample_delayed(design, a.tau, n), design.delta, a.lambda, seed);
  data.true_tau = a.tau;
  const fs::path csv = out_dir(c) / (a.name + ".csv");
  write_dataset(data, csv);

  fs::path sidecar = csv;
  sidecar.replace_extension(".json");
  Json meta = read_json_file(sidecar);
  meta["config_hash"] = config_hash(resolved);
  write_json_file(meta, sidecar);

  std::cout << "simulated " << n << " samples (delta " << fmt(design.delta) << ", tau "
            << fmt(a.tau) << ", lambda " << fmt(a.lambda) << ", seed " << seed << ")\n"
            << "wrote " << csv.string() << " and " << sidecar.string() << '\n';
  return kExitOk;
}

// --- estimate -------------------------------------------------------------

struct EstimateArgs {
  std::string dataset;
  std::string design;
  int k_model = LaguerreOptions{}.k_model;
  int m_markov = 0;
};

int cmd_estimate(const Common& c, const EstimateArgs& a) {
  require(!a.dataset.empty() && !a.design.empty(), "estimate needs --dataset and --design");
  const InputDesign design = design_from_json(read_json_file(a.design));
  const Dataset data = read_dataset(a.dataset);
  if (std::abs(data.delta - design.delta) > 1e-12 * design.delta)
    throw Error(ErrorCode::invalid_argument,
                "dataset sampling time " + fmt(data.delta) + " does not match design delta " +
                    fmt(design.delta));
  const auto methods = parse_methods(c.methods);
  LaguerreOptions lag;
  lag.k_model = a.k_model;
  lag.m_markov = a.m_markov;

  Json resolved;
  resolved["design"] = design_to_json(design);
  resolved["dataset"] = fs::path(a.dataset).filename().string();
  resolved["methods"] = methods_json(methods);
  resolved["k_model"] = lag.k_model;
  resolved["m_markov"] = lag.markov_count();

  Json estimates = Json::array();
  std::optional<double> first_tau;
  int successes = 0;
  for (Method m : methods) {
    try {
      DelayEstimate est;
      switch (m) {
        case Method::proposed: est = estimate_delay_proposed(data, design, lag); break;
        case Method::ml: est = estimate_delay_ml(data, design); break;
        case Method::lag_spline: est = estimate_delay_lag_spline(data, design, lag); break;
        case Method::freq_interp: est = estimate_delay_freq_interp(data, design); break;
      }
      estimates.push_back(estimate_to_json(est));
      if (!first_tau) first_tau = est.tau_hat;
      ++successes;
      std::cout << to_string(m) << ": tau_hat = " << fmt(est.tau_hat);
      if (data.true_tau) std::cout << " (error " << fmt(est.tau_hat - *data.true_tau) << ")";
      std::cout << '\n';
    } catch (const Error& e) {
      estimates.push_back(Json{{"method", std::string(to_string(m))},
                               {"ok", false},
                               {"error", std::string(to_string(e.code()))},
                               {"message", e.what()}});
      std::cout << to_string(m) << ": failed (" << to_string(e.code()) << "): " << e.what() << '\n';
    }
  }

  Json doc;
  doc["estimates"] = std::move(estimates);
  doc["true_tau"] = data.true_tau ? Json(*data.true_tau) : Json(nullptr);
  Json bound = nullptr;
  const std::optional<double> crlb_tau = data.true_tau ? data.true_tau : first_tau;
  if (crlb_tau && data.noise_var > 0.0) {
    try {
      bound = crlb_to_json(crlb(design, *crlb_tau, data.noise_var));
      bound["tau"] = *crlb_tau;
      std::cout << "CRLB at tau = " << fmt(*crlb_tau) << ": " << fmt(bound["bound"].get<double>())
                << '\n';
    } catch (const Error& e) {
      spdlog::warn("CRLB unavailable: {}", e.what());
    }
  }
  doc["crlb"] = std::move(bound);
  doc["config"] = resolved;
  doc["config_hash"] = config_hash(resolved);
  const fs::path path = out_dir(c) / "estimate.json";
  write_json_file(doc, path);
  std::cout << "wrote " << path.string() << '\n';
  return successes > 0 ? kExitOk : kExitEstimatorFailure;
}

// --- benchmark ------------------------------------------------------------

InputDesign resolve_design(const Json& config, const fs::path& base) {
  if (config.contains("design")) return design_from_json(config.at("design"));
  if (config.contains("design_file")) {
    fs::path file = config.at("design_file").get<std::string>();
    if (file.is_relative()) file = base / file;
    return design_from_json(read_json_file(file));
  }
  if (config.contains("design_problem"))
    return optimize_design(problem_from_json(config.at("design_problem"))).design;
  throw Error(ErrorCode::invalid_argument,
              "benchmark config needs one of 'design', 'design_file' or 'design_problem'");
}

int cmd_benchmark(const Common& c) {
  require(!c.config.empty(), "benchmark needs --config");
  const Json config = read_json_file(c.config);
  require(config.is_object(), "benchmark config must be a JSON object");

  BenchmarkConfig bc;
  bc.design = resolve_design(config, fs::path(c.config).parent_path());
  bc.tau = config.at("tau").get<double>();
  bc.noise_var = config.at("noise_var").get<double>();
  bc.laguerre = laguerre_options_from_json(config);
  bc.ml = ml_options_from_json(config);
  bc.freq = freq_options_from_json(config);
  bc.methods = parse_methods(!c.methods.empty()                ? c.methods
                             : config.contains("methods")      ? [&] {
                                 std::string s;
                                 for (const auto& m : config.at("methods"))
                                   s += (s.empty() ? "" : ",") + m.get<std::string>();
                                 return s;
                               }()
                                                               : std::string("all"));
  bc.replicates = c.replicates.value_or(config.value("replicates", 0));
  if (c.seed)
    bc.seed = *c.seed;
  else if (config.contains("seed"))
    bc.seed = config.at("seed").get<std::uint64_t>();
  else
    throw Error(ErrorCode::invalid_argument, "benchmark needs a seed (config 'seed' or --seed)");
  bc.workers = c.workers;
  bc.histogram_bins = config.value("histogram_bins", bc.histogram_bins);
  require(bc.replicates >= 2, "benchmark needs at least 2 replicates");

  Json resolved;
  resolved["design"] = design_to_json(bc.design);
  resolved["tau"] = bc.tau;
  resolved["noise_var"] = bc.noise_var;
  resolved["k_model"] = bc.laguerre.k_model;
  resolved["m_markov"] = bc.laguerre.markov_count();
  resolved["ml"] = {{"tau_max", bc.ml.tau_max > 0.0 ? bc.ml.tau_max : default_tau_max(bc.design)},
                    {"grid_fraction", bc.ml.grid_fraction},
                    {"tolerance", bc.ml.tolerance}};
  resolved["freq"] = {{"band_fraction", bc.freq.band_fraction}};
  resolved["methods"] = methods_json(bc.methods);
  resolved["replicates"] = bc.replicates;
  resolved["histogram_bins"] = bc.histogram_bins;
  resolved["seed"] = bc.seed;

  const auto start = std::chrono::steady_clock::now();
  const McStats stats = run_monte_carlo(bc);
  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json doc;
  doc["config"] = resolved;
  doc["config_hash"] = config_hash(resolved);
  const Json stats_doc = mc_stats_to_json(stats);
  for (const auto& [key, value] : stats_doc.items()) doc[key] = value;
  const fs::path dir = out_dir(c);
  write_json_file(doc, dir / "benchmark.json");
  write_json_file(Json{{"runtime_s", runtime}, {"workers", bc.workers}}, dir / "timing.json");

  std::ofstream csv(dir / "histogram.csv");
  if (!csv) throw Error(ErrorCode::io, "cannot write histogram.csv");
  csv << "method,bin_left,bin_right,count\n";
  csv.precision(17);
  for (const auto& s : stats.methods)
    for (std::size_t b = 0; b < s.histogram.counts.size(); ++b)
      csv << to_string(s.method) << ',' << s.histogram.edges[b] << ',' << s.histogram.edges[b + 1]
          << ',' << s.histogram.counts[b] << '\n';

  int status = kExitOk;
  std::cout << "method        bias          var           mse_raw       failures\n";
  for (const auto& s : stats.methods) {
    std::printf("%-13s %-13.5g %-13.5g %-13.5g %d/%d\n", std::string(to_string(s.method)).c_str(),
                s.bias, s.variance, s.mse_raw, s.failures, bc.replicates);
    if (2 * s.failures > bc.replicates) status = kExitEstimatorFailure;
  }
  if (stats.crlb) std::cout << "CRLB " << fmt(stats.crlb->bound) << '\n';
  std::cout << "runtime_s " << fmt(runtime) << "\nwrote " << (dir / "benchmark.json").string()
            << '\n';
  return status;
}

// --- bias-predict ---------------------------------------------------------

struct BiasArgs {
  std::string design;
  double tau_check = 0.0;
  double lambda = 0.0;
  int mc_samples = 100000;
  int k_model = LaguerreOptions{}.k_model;
  int m_markov = 0;
  std::vector<double> sweep_delta;
};

int cmd_bias_predict(const Common& c, const BiasArgs& a) {
  require(!a.design.empty(), "bias-predict needs --design");
  const InputDesign design = design_from_json(read_json_file(a.design));
  LaguerreOptions lag;
  lag.k_model = a.k_model;
  lag.m_markov = a.m_markov;
  const std::uint64_t seed = c.seed.value_or(0);

  Json resolved;
  resolved["design"] = design_to_json(design);
  resolved["tau_check"] = a.tau_check;
  resolved["lambda"] = a.lambda;
  resolved["k_model"] = lag.k_model;
  resolved["m_markov"] = lag.markov_count();
  resolved["mc_samples"] = a.mc_samples;
  resolved["seed"] = seed;

  const BiasPrediction pred = predict_bias_tau(design, a.lambda, a.tau_check, lag, a.mc_samples, seed);
  Json doc = bias_prediction_to_json(pred);
  doc["config"] = resolved;
  doc["config_hash"] = config_hash(resolved);
  const fs::path path = out_dir(c) / "bias_prediction.json";
  write_json_file(doc, path);
  std::cout << "predicted bias of tau_hat: " << fmt(pred.predicted_bias) << " +- "
            << fmt(pred.std_error) << " (" << pred.mc_samples << " samples)\nwrote "
            << path.string() << '\n';

  if (!a.sweep_delta.empty()) {
    // Same design and seed at each sampling time; plot-ready CSV.
    const fs::path sweep_path = out_dir(c) / "bias_sweep.csv";
    std::ofstream csv(sweep_path);
    if (!csv) throw Error(ErrorCode::io, "cannot write " + sweep_path.string());
    csv.precision(17);
    csv << "delta,predicted_bias,std_error\n";
    for (double delta : a.sweep_delta) {
      InputDesign d = design;
      d.delta = delta;
      const BiasPrediction s = predict_bias_tau(d, a.lambda, a.tau_check, lag, a.mc_samples, seed);
      csv << delta << ',' << s.predicted_bias << ',' << s.std_error << '\n';
      std::cout << "  delta " << fmt(delta) << ": " << fmt(s.predicted_bias) << '\n';
    }
    std::cout << "wrote " << sweep_path.string() << '\n';
  }
  return kExitOk;
}

// --- basis-check ----------------------------------------------------------

struct BasisArgs {
  double p = 20.0;
  int k_model = 6;
  double delta = 1e-4;
  int n_samples = 20001;
};

int cmd_basis_check(const BasisArgs& a) {
  const BasisConfig cfg{a.p, a.k_model + 1};
  cfg.validate();
  bool all_ok = true;
  auto report = [&](const std::string& name, double value, double tol) {
    const bool ok = value <= tol;
    all_ok = all_ok && ok;
    std::printf("%-4s %-36s %.3e (tol %.0e)\n", ok ? "ok" : "FAIL", name.c_str(), value, tol);
  };

  // The direct sum cancels badly in double precision for large m, so it is
  // evaluated with 50 significant digits here.
  using Big = boost::multiprecision::cpp_bin_float_50;
  double poly_err = 0.0;
  for (int m = 0; m <= 30; ++m)
    for (double xi = 0.0; xi <= 50.0; xi += 0.5) {
      Big direct = m == 0 ? Big(1) : Big(0);
      Big power = 1;
      Big fact = 1;
      for (int n = 1; n <= m; ++n) {
        power *= -Big(xi);
        fact *= n;
        direct += boost::math::binomial_coefficient<double>(m - 1, n - 1) * power / fact;
      }
      const double ref = direct.convert_to<double>();
      const double value = assoc_laguerre_poly(m, xi);
      poly_err = std::max(poly_err, std::abs(value - ref) / std::max(1.0, std::abs(ref)));
    }
  report("recurrence vs direct sum (m<=30)", poly_err, 1e-8);

  const SampledBasis phi = build_phi(cfg, a.delta, a.n_samples);
  double fidelity = 0.0;
  for (int j = 0; j <= a.k_model; ++j) {
    const double scale = phi.matrix().col(j).cwiseAbs().maxCoeff();
    for (int n = 0; n < a.n_samples; ++n)
      fidelity = std::max(fidelity, std::abs(phi.matrix()(n, j) - eval_basis_time(cfg, j, n * a.delta)) / scale);
  }
  report("sampled basis vs closed form", fidelity, 1e-9);

  const Eigen::MatrixXd gram = a.delta * phi.matrix().transpose() * phi.matrix();
  const double gram_err =
      (gram - Eigen::MatrixXd::Identity(cfg.num_funcs, cfg.num_funcs)).cwiseAbs().maxCoeff();
  report("Gram matrix delta*Phi^T*Phi vs I", gram_err, 1e-2);

  const double h0 = std::sqrt(2.0 * a.p);
  report("l_k(0) = sqrt(2p)", std::abs(eval_basis_time(cfg, a.k_model, 0.0) - h0) / h0, 1e-12);

  std::printf("cond(Phi) = %.6g (threshold %.0e)%s\n", phi.cond(), phi.cond_threshold(),
              phi.ill_conditioned() ? "  ILL-CONDITIONED" : "");
  return all_ok ? kExitOk : kExitFailure;
}

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("LAGDELAY_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Laguerre-domain time-delay estimation toolkit"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON configuration file");
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "RNG seed");
    sub->add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--methods", common.methods, "comma-separated: ml,proposed,lag_spline,freq_interp");
    sub->add_option("--replicates", common.replicates, "Monte-Carlo replicates");
  };

  auto* design = app.add_subcommand("design", "optimize p and the input spectrum");
  add_common(design);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "synthesize a delayed, noisy dataset");
  add_common(simulate);
  simulate->add_option("--design", sim.design, "design JSON")->required();
  simulate->add_option("--tau", sim.tau, "true delay [s]")->required();
  simulate->add_option("--lambda", sim.lambda, "noise variance")->capture_default_str();
  simulate->add_option("--name", sim.name, "dataset file stem")->capture_default_str();

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "estimate the delay from a dataset");
  add_common(estimate);
  estimate->add_option("--dataset", est.dataset, "dataset CSV")->required();
  estimate->add_option("--design", est.design, "design JSON")->required();
  estimate->add_option("--k-model", est.k_model, "highest output basis index K")->capture_default_str();
  estimate->add_option("--m-markov", est.m_markov, "Markov parameters used (0 = K+1)");

  auto* benchmark = app.add_subcommand("benchmark", "Monte-Carlo comparison of the estimators");
  add_common(benchmark);

  BiasArgs bias;
  auto* bias_predict = app.add_subcommand("bias-predict", "predict the bias of the two-step estimator");
  add_common(bias_predict);
  bias_predict->add_option("--design", bias.design, "design JSON")->required();
  bias_predict->add_option("--tau-check", bias.tau_check, "delay the prediction is conditioned on")->required();
  bias_predict->add_option("--lambda", bias.lambda, "noise variance")->required();
  bias_predict->add_option("--mc-samples", bias.mc_samples, "Monte-Carlo samples")->capture_default_str();
  bias_predict->add_option("--k-model", bias.k_model, "highest output basis index K")->capture_default_str();
  bias_predict->add_option("--m-markov", bias.m_markov, "Markov parameters used (0 = K+1)");
  bias_predict->add_option("--sweep-delta", bias.sweep_delta, "also predict at these sampling times")
      ->delimiter(',');

  BasisArgs basis;
  auto* basis_check = app.add_subcommand("basis-check", "run the basis invariant checks");
  basis_check->add_option("--p", basis.p, "Laguerre parameter")->capture_default_str();
  basis_check->add_option("--k-model", basis.k_model, "highest basis index K")->capture_default_str();
  basis_check->add_option("--delta", basis.delta, "sampling time")->capture_default_str();
  basis_check->add_option("--n", basis.n_samples, "number of samples")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*design) return cmd_design(common);
    if (*simulate) return cmd_simulate(common, sim);
    if (*estimate) return cmd_estimate(common, est);
    if (*benchmark) return cmd_benchmark(common);
    if (*bias_predict) return cmd_bias_predict(common, bias);
    if (*basis_check) return cmd_basis_check(basis);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    const bool design_infeasible = *design && e.code() == ErrorCode::infeasible;
    const bool degenerate = *bias_predict && e.code() == ErrorCode::degenerate_b;
    return design_infeasible || degenerate ? kExitInfeasible : kExitFailure;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error (config): " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
