#include "lagdelay/signal.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lagdelay/error.hpp"

namespace lagdelay {

int InputDesign::n_samples() const {
  require(delta > 0.0 && horizon >= 0.0, "design needs positive delta and non-negative horizon");
  return static_cast<int>(std::floor(horizon / delta + 1e-9)) + 1;
}

void InputDesign::validate() const {
  require(p > 0.0 && std::isfinite(p), "design: p must be positive");
  require(u.size() >= 1, "design: input spectrum is empty");
  require(u(0) > 0.0, "design: u_0 must be positive");
  require(delta > 0.0, "design: delta must be positive");
  require(horizon >= delta, "design: horizon must cover at least one sampling interval");
  require(u.squaredNorm() <= energy_bound * (1.0 + 1e-12) + 1e-300,
          "design: input energy exceeds the bound eta");
}

double synthesize_input(const InputDesign& design, double t) {
  if (t < 0.0) return 0.0;
  std::vector<double> basis(static_cast<std::size_t>(design.u.size()));
  eval_basis_all(design.p, t, basis);
  double acc = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) acc += design.u(static_cast<Eigen::Index>(k)) * basis[k];
  return acc;
}

double synthesize_input_derivative(const InputDesign& design, double t) {
  if (t < 0.0) return 0.0;
  std::vector<double> basis(static_cast<std::size_t>(design.u.size()));
  eval_basis_derivative_all(design.p, t, basis);
  double acc = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) acc += design.u(static_cast<Eigen::Index>(k)) * basis[k];
  return acc;
}

double input_value_at_zero(const InputDesign& design) {
  return std::sqrt(2.0 * design.p) * design.u.sum();
}

double effective_support(const InputDesign& design, double rel_tol) {
  const double step = 1.0 / (64.0 * design.p);
  const int count = 64 * 200;
  std::vector<double> mag(count + 1);
  double peak = 0.0;
  for (int i = 0; i <= count; ++i) {
    mag[i] = std::abs(synthesize_input(design, i * step));
    peak = std::max(peak, mag[i]);
  }
  for (int i = count; i >= 0; --i)
    if (mag[i] > rel_tol * peak) return std::min((i + 1) * step, count * step);
  return 0.0;
}

double signal_duration(const InputDesign& design, double energy_tol) {
  const double step = 1.0 / (64.0 * design.p);
  const int count = 64 * 200;
  std::vector<double> sq(count + 1);
  for (int i = 0; i <= count; ++i) {
    const double v = synthesize_input(design, i * step);
    sq[i] = v * v;
  }
  // Trapezoidal tail energy, accumulated from the end of the grid.
  double total = 0.0;
  for (int i = 0; i < count; ++i) total += 0.5 * step * (sq[i] + sq[i + 1]);
  double tail = 0.0;
  for (int i = count; i > 0; --i) {
    tail += 0.5 * step * (sq[i - 1] + sq[i]);
    if (tail > energy_tol * total) return i * step;
  }
  return 0.0;
}

Eigen::VectorXd sample_delayed(const InputDesign& design, double tau, int n_samples) {
  require(tau >= 0.0 && std::isfinite(tau), "delay must be non-negative");
  require(n_samples >= 1, "need at least one sample");
  Eigen::VectorXd y(n_samples);
  std::vector<double> basis(static_cast<std::size_t>(design.u.size()));
  for (int n = 0; n < n_samples; ++n) {
    const double s = n * design.delta - tau;
    if (s < 0.0) {
      y(n) = 0.0;
      continue;
    }
    eval_basis_all(design.p, s, basis);
    double acc = 0.0;
    for (std::size_t k = 0; k < basis.size(); ++k) acc += design.u(static_cast<Eigen::Index>(k)) * basis[k];
    y(n) = acc;
  }
  return y;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(seed ^ mix(index + 0x632be59bd9b4e019ULL));
}

Dataset add_noise(const Eigen::VectorXd& y, double delta, double lambda, std::uint64_t seed) {
  require(lambda >= 0.0 && std::isfinite(lambda), "noise variance must be non-negative");
  Dataset data;
  data.z = y;
  data.delta = delta;
  data.noise_var = lambda;
  data.seed = seed;
  if (lambda > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(lambda));
    for (Eigen::Index n = 0; n < data.z.size(); ++n) data.z(n) += gauss(rng);
  }
  return data;
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto path = csv_path;
  path.replace_extension(".json");
  return path;
}

std::string format17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorCode::io, "dataset CSV line " + std::to_string(line) + ": bad number '" +
                                   std::string(text) + "'");
  return v;
}

}  // namespace

void write_dataset(const Dataset& data, const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::io, "cannot write " + csv_path.string());
  csv << "t,z\n";
  for (int n = 0; n < data.n_samples(); ++n)
    csv << format17(n * data.delta) << ',' << format17(data.z(n)) << '\n';
  if (!csv) throw Error(ErrorCode::io, "write failed for " + csv_path.string());

  nlohmann::ordered_json meta;
  meta["delta"] = data.delta;
  meta["n_samples"] = data.n_samples();
  meta["noise_var"] = data.noise_var;
  meta["seed"] = data.seed;
  if (data.true_tau) meta["true_tau"] = *data.true_tau;
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw Error(ErrorCode::io, "cannot write " + sidecar_path(csv_path).string());
  side << meta.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
  std::ifstream side(sidecar_path(csv_path));
  if (!side) throw Error(ErrorCode::io, "missing dataset sidecar " + sidecar_path(csv_path).string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, "dataset sidecar: " + std::string(e.what()));
  }

  Dataset data;
  try {
    data.delta = meta.at("delta").get<double>();
    data.noise_var = meta.at("noise_var").get<double>();
    data.seed = meta.at("seed").get<std::uint64_t>();
    if (meta.contains("true_tau") && !meta["true_tau"].is_null())
      data.true_tau = meta["true_tau"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, "dataset sidecar: " + std::string(e.what()));
  }
  const int expected = meta.value("n_samples", -1);

  std::ifstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::io, "cannot read " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  if (line != "t,z") throw Error(ErrorCode::io, "dataset CSV must start with header 't,z'");
  std::vector<double> z;
  int lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorCode::io, "dataset CSV line " + std::to_string(lineno) + ": expected 't,z'");
    const double t = parse_double(std::string_view(line).substr(0, comma), lineno);
    const double expected_t = static_cast<double>(z.size()) * data.delta;
    if (std::abs(t - expected_t) > 1e-9 * std::max(1.0, std::abs(expected_t)))
      throw Error(ErrorCode::io, "dataset CSV line " + std::to_string(lineno) +
                                     ": time stamp off the delta grid");
    z.push_back(parse_double(std::string_view(line).substr(comma + 1), lineno));
  }
  if (expected >= 0 && expected != static_cast<int>(z.size()))
    throw Error(ErrorCode::io, "dataset sidecar says " + std::to_string(expected) +
                                   " samples, CSV has " + std::to_string(z.size()));
  data.z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return data;
}

}  // namespace lagdelay
