#include "lagdelay/serialization.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lagdelay/error.hpp"

namespace lagdelay {

namespace {

template <class T>
T field(const Json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::invalid_argument, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const Json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  return field<T>(doc, key);
}

Json vector_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorCode::io, path.string() + ":" + std::to_string(line) + ":" +
                                   std::to_string(column) + ": " + e.what());
  }
}

void write_json_file(const Json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

std::string config_hash(const Json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json design_to_json(const InputDesign& design) {
  Json doc;
  doc["p"] = design.p;
  doc["u"] = vector_json(design.u);
  doc["eta"] = design.energy_bound;
  doc["delta"] = design.delta;
  doc["horizon"] = design.horizon;
  doc["tau_guess"] = design.tau_guess;
  return doc;
}

InputDesign design_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::invalid_argument, "design must be a JSON object");
  InputDesign d;
  d.p = field<double>(doc, "p");
  const auto u = field<std::vector<double>>(doc, "u");
  d.u = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  d.energy_bound = field<double>(doc, "eta");
  d.delta = field<double>(doc, "delta");
  d.horizon = field<double>(doc, "horizon");
  d.tau_guess = field_or<double>(doc, "tau_guess", 0.0);
  d.validate();
  return d;
}

Json problem_to_json(const DesignProblem& problem) {
  Json doc;
  doc["delta"] = problem.delta;
  if (problem.n_samples)
    doc["n_samples"] = *problem.n_samples;
  else
    doc["horizon"] = problem.horizon;
  doc["i_order"] = problem.i_order;
  doc["eta"] = problem.energy_bound;
  doc["tau_guess"] = problem.tau_guess;
  doc["noise_var"] = problem.noise_var;
  doc["k_model"] = problem.k_model;
  doc["p_grid"] = {{"lo", problem.p_grid.lo}, {"hi", problem.p_grid.hi},
                   {"points", problem.p_grid.points}};
  doc["u_points"] = problem.u_points;
  doc["refine"] = problem.refine;
  doc["enforce_continuity"] = problem.enforce_continuity;
  doc["cond_threshold"] = problem.cond_threshold;
  return doc;
}

DesignProblem problem_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::invalid_argument, "design problem must be a JSON object");
  DesignProblem pr;
  pr.delta = field<double>(doc, "delta");
  if (doc.contains("n_samples")) pr.n_samples = field<int>(doc, "n_samples");
  if (!pr.n_samples) pr.horizon = field<double>(doc, "horizon");
  pr.i_order = field_or<int>(doc, "i_order", pr.i_order);
  pr.energy_bound = field<double>(doc, "eta");
  pr.tau_guess = field_or<double>(doc, "tau_guess", pr.delta);
  pr.noise_var = field<double>(doc, "noise_var");
  pr.k_model = field_or<int>(doc, "k_model", pr.k_model);
  if (doc.contains("p_grid")) {
    const auto& g = doc.at("p_grid");
    pr.p_grid.lo = field_or<double>(g, "lo", pr.p_grid.lo);
    pr.p_grid.hi = field_or<double>(g, "hi", pr.p_grid.hi);
    pr.p_grid.points = field_or<int>(g, "points", pr.p_grid.points);
  }
  pr.u_points = field_or<int>(doc, "u_points", pr.u_points);
  pr.refine = field_or<bool>(doc, "refine", pr.refine);
  pr.enforce_continuity = field_or<bool>(doc, "enforce_continuity", pr.enforce_continuity);
  pr.cond_threshold = field_or<double>(doc, "cond_threshold", pr.cond_threshold);
  return pr;
}

Json constraints_to_json(const ConstraintReport& report) {
  Json doc;
  doc["pattern_ok"] = report.pattern_ok();
  doc["violations"] = report.violations;
  doc["continuity_ok"] = report.continuity_ok;
  doc["continuity_residual"] = report.continuity_residual;
  return doc;
}

Json estimate_to_json(const DelayEstimate& estimate) {
  Json doc;
  doc["method"] = std::string(to_string(estimate.method));
  doc["ok"] = true;
  doc["tau_hat"] = estimate.tau_hat;
  doc["converged"] = estimate.converged;
  if (estimate.iterations > 0) doc["iterations"] = estimate.iterations;
  if (estimate.residual_norm) doc["residual_norm"] = *estimate.residual_norm;
  if (estimate.y_hat) doc["y_hat"] = vector_json(*estimate.y_hat);
  if (estimate.h_hat) doc["h_hat"] = vector_json(*estimate.h_hat);
  if (!estimate.note.empty()) doc["note"] = estimate.note;
  return doc;
}

Json crlb_to_json(const CrlbReport& report) {
  return Json{{"bound", report.bound},
              {"window_first", report.window_first},
              {"window_last", report.window_last}};
}

Json bias_prediction_to_json(const BiasPrediction& prediction) {
  Json doc;
  doc["predicted_bias"] = prediction.predicted_bias;
  doc["std_error"] = prediction.std_error;
  doc["mc_samples"] = prediction.mc_samples;
  doc["eps1_mean"] = prediction.eps1_mean;
  doc["eps2_mean"] = prediction.eps2_mean;
  doc["seed"] = prediction.seed;
  return doc;
}

Json mc_stats_to_json(const McStats& stats) {
  Json per_method = Json::object();
  Json histogram = Json::object();
  for (const auto& s : stats.methods) {
    const std::string key(to_string(s.method));
    Json m;
    m["bias"] = s.bias;
    m["var"] = s.variance;
    m["mse_raw"] = s.mse_raw;
    m["mse_normalized"] = s.mse_normalized;
    m["mean"] = s.mean;
    m["successes"] = s.successes;
    m["failures"] = s.failures;
    if (!s.first_error.empty()) m["first_error"] = s.first_error;
    per_method[key] = std::move(m);
    histogram[key] = Json{{"edges", s.histogram.edges}, {"counts", s.histogram.counts}};
  }
  Json doc;
  doc["per_method"] = std::move(per_method);
  doc["histogram"] = std::move(histogram);
  doc["crlb"] = stats.crlb ? crlb_to_json(*stats.crlb) : Json(nullptr);
  doc["replicates"] = stats.replicates;
  doc["n_samples"] = stats.n_samples;
  doc["seed"] = stats.seed;
  return doc;
}

LaguerreOptions laguerre_options_from_json(const Json& doc) {
  LaguerreOptions o;
  o.k_model = field_or<int>(doc, "k_model", o.k_model);
  o.m_markov = field_or<int>(doc, "m_markov", o.m_markov);
  o.cond_threshold = field_or<double>(doc, "cond_threshold", o.cond_threshold);
  return o;
}

MlOptions ml_options_from_json(const Json& doc) {
  MlOptions o;
  if (!doc.contains("ml")) return o;
  const auto& ml = doc.at("ml");
  o.tau_max = field_or<double>(ml, "tau_max", o.tau_max);
  o.grid_fraction = field_or<double>(ml, "grid_fraction", o.grid_fraction);
  o.tolerance = field_or<double>(ml, "tolerance", o.tolerance);
  o.max_iterations = field_or<int>(ml, "max_iterations", o.max_iterations);
  return o;
}

FreqInterpOptions freq_options_from_json(const Json& doc) {
  FreqInterpOptions o;
  if (!doc.contains("freq")) return o;
  o.band_fraction = field_or<double>(doc.at("freq"), "band_fraction", o.band_fraction);
  return o;
}

}  // namespace lagdelay
