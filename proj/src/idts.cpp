#include "adakd/idts.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adakd {

TempSignMode sign_mode_from_string(const std::string& name) {
  if (name == "inverse") return TempSignMode::Inverse;
  if (name == "flipped") return TempSignMode::Flipped;
  throw std::invalid_argument("unknown temperature sign mode: " + name);
}

std::string sign_mode_to_string(TempSignMode mode) {
  return mode == TempSignMode::Inverse ? "inverse" : "flipped";
}

TempStrategyKind temp_strategy_from_string(const std::string& name) {
  if (name == "adaptive") return TempStrategyKind::Adaptive;
  if (name == "fixed") return TempStrategyKind::Fixed;
  throw std::invalid_argument("unknown temperature strategy: " + name);
}

std::string temp_strategy_to_string(TempStrategyKind kind) {
  return kind == TempStrategyKind::Adaptive ? "adaptive" : "fixed";
}

std::vector<double> normalize_scores(const std::vector<double>& scores,
                                     double floor) {
  if (scores.empty()) {
    throw std::invalid_argument("normalize_scores: need at least one score");
  }
  std::vector<double> floored(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0) || !std::isfinite(scores[i])) {
      throw std::invalid_argument("normalize_scores: scores must be finite and >= 0");
    }
    floored[i] = std::max(scores[i], floor);
  }
  std::vector<double> sorted = floored;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  double median = (n % 2 == 1) ? sorted[n / 2]
                               : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<double> s_hat(n, 0.0);
  if (median <= floor) return s_hat;  // student ~ teacher everywhere
  for (size_t i = 0; i < n; ++i) {
    s_hat[i] = std::tanh(std::log(floored[i] / median));
  }
  return s_hat;
}

TemperatureAssignment assign_temperatures(const std::vector<double>& s_hat,
                                          const IdtsConfig& config) {
  if (!(config.tau_base > 0.0)) {
    throw std::invalid_argument("assign_temperatures: tau_base must be positive");
  }
  if (config.c < 0.0) {
    throw std::invalid_argument("assign_temperatures: c must be >= 0");
  }
  TemperatureAssignment out;
  out.s_hat = s_hat;
  out.taus.resize(s_hat.size());
  if (config.strategy == TempStrategyKind::Fixed) {
    if (!(config.fixed_tau > 0.0)) {
      throw std::invalid_argument("assign_temperatures: fixed_tau must be positive");
    }
    std::fill(out.taus.begin(), out.taus.end(), config.fixed_tau);
    return out;
  }
  const double sign = config.sign_mode == TempSignMode::Inverse ? -1.0 : 1.0;
  const double lo = config.tau_base * std::exp(-config.c);
  const double hi = config.tau_base * std::exp(config.c);
  for (size_t i = 0; i < s_hat.size(); ++i) {
    if (s_hat[i] < -1.0 || s_hat[i] > 1.0) {
      throw std::invalid_argument("assign_temperatures: normalized state outside [-1, 1]");
    }
    double tau = config.c == 0.0
                     ? config.tau_base
                     : config.tau_base * std::exp(sign * config.c * s_hat[i]);
    out.taus[i] = std::clamp(tau, lo, hi);
  }
  return out;
}

}  // namespace adakd
