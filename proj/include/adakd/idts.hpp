#pragma once

#include <string>
#include <vector>

namespace adakd {

enum class TempSignMode { Inverse, Flipped };
enum class TempStrategyKind { Adaptive, Fixed };

TempSignMode sign_mode_from_string(const std::string& name);
std::string sign_mode_to_string(TempSignMode mode);
TempStrategyKind temp_strategy_from_string(const std::string& name);
std::string temp_strategy_to_string(TempStrategyKind kind);

struct IdtsConfig {
  double tau_base = 1.0;
  double c = 0.5;  // modulation intensity
  TempSignMode sign_mode = TempSignMode::Inverse;
  TempStrategyKind strategy = TempStrategyKind::Adaptive;
  double fixed_tau = 1.0;      // Fixed strategy value
  double score_floor = 1e-8;   // guard for zero difficulty scores
};

/// Per-token temperatures, aligned with the tokens whose normalized states
/// produced them. Plain doubles: constants to backprop by construction.
struct TemperatureAssignment {
  std::vector<double> taus;
  std::vector<double> s_hat;
};

/// Map raw difficulty scores to bounded states: s_hat_i =
/// tanh(log(s_i / median)). Scores are floored at `floor` first; if the
/// median itself is <= floor (student matches teacher everywhere) every
/// state is 0. Even-length medians average the two central values.
std::vector<double> normalize_scores(const std::vector<double>& scores,
                                     double floor = 1e-8);

/// tau_i = tau_base * exp(-c * s_hat_i) (Inverse) or exp(+c * s_hat_i)
/// (Flipped); Fixed strategy pins every tau to fixed_tau. Results are
/// clamped into [tau_base * e^-c, tau_base * e^c].
TemperatureAssignment assign_temperatures(const std::vector<double>& s_hat,
                                          const IdtsConfig& config);

}  // namespace adakd
