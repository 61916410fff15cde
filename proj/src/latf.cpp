#include "adakd/latf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace adakd {

void seed_ema(FocusState& state, double initial_loss) {
  if (!std::isfinite(initial_loss)) {
    throw std::runtime_error("seed_ema: non-finite initial loss");
  }
  state.ema_loss = initial_loss;
  state.ema_seeded = true;
}

double update_ema(FocusState& state, const LatfConfig& config, double loss_t) {
  if (!std::isfinite(loss_t)) {
    throw std::runtime_error("update_ema: non-finite loss at step " +
                             std::to_string(state.step) + " (diverged)");
  }
  if (!state.ema_seeded) {
    throw std::runtime_error("update_ema: EMA not seeded with the initial loss");
  }
  state.ema_loss = config.beta * state.ema_loss + (1.0 - config.beta) * loss_t;
  return state.ema_loss;
}

char update_ratio(FocusState& state, const LatfConfig& config) {
  ++state.step;
  if (state.step <= config.warmup_steps) {
    state.r = 1.0;
    return 'W';
  }
  if (!state.ema_seeded) {
    throw std::runtime_error("update_ratio: EMA not seeded with the initial loss");
  }
  const double ema = state.ema_loss;  // EMA as of the previous step
  const double ref = state.ref_set
                         ? state.ref_loss
                         : std::numeric_limits<double>::infinity();
  char branch = '=';
  double candidate = state.r;
  if (ema < ref * (1.0 - config.eps)) {
    branch = '-';
    candidate = state.r * (1.0 - config.delta);
  } else if (ema > ref * (1.0 + config.eps)) {
    branch = '+';
    candidate = std::min(1.0, state.r * (1.0 + config.delta));
  }
  candidate = std::clamp(candidate, config.r_min, 1.0);
  if (candidate != state.r) {
    state.r = candidate;
    state.ref_loss = ema;
    state.ref_set = true;
  }
  return branch;
}

std::vector<uint8_t> select_tokens(const DifficultyScores& scores, double r) {
  if (!(r > 0.0) || r > 1.0) {
    throw std::invalid_argument("select_tokens: ratio must be in (0, 1], got " +
                                std::to_string(r));
  }
  if (scores.scores.size() != scores.mask.size()) {
    throw std::invalid_argument("select_tokens: scores and mask misaligned");
  }
  std::vector<int> valid_pos;
  for (size_t i = 0; i < scores.mask.size(); ++i) {
    if (scores.mask[i]) valid_pos.push_back(static_cast<int>(i));
  }
  if (valid_pos.empty()) {
    throw std::invalid_argument("select_tokens: no valid tokens to select from");
  }
  const int l_valid = static_cast<int>(valid_pos.size());
  int k = static_cast<int>(std::ceil(static_cast<double>(l_valid) * r));
  k = std::max(1, std::min(k, l_valid));
  std::sort(valid_pos.begin(), valid_pos.end(), [&](int a, int b) {
    if (scores.scores[a] != scores.scores[b])
      return scores.scores[a] > scores.scores[b];
    return a < b;
  });
  std::vector<uint8_t> selected(scores.mask.size(), 0);
  for (int i = 0; i < k; ++i) selected[valid_pos[i]] = 1;
  return selected;
}

RatioScheduleKind schedule_from_string(const std::string& name) {
  if (name == "latf") return RatioScheduleKind::Latf;
  if (name == "fixed") return RatioScheduleKind::Fixed;
  if (name == "linear") return RatioScheduleKind::Linear;
  if (name == "cosine") return RatioScheduleKind::Cosine;
  throw std::invalid_argument("unknown ratio schedule: " + name);
}

std::string schedule_to_string(RatioScheduleKind kind) {
  switch (kind) {
    case RatioScheduleKind::Latf: return "latf";
    case RatioScheduleKind::Fixed: return "fixed";
    case RatioScheduleKind::Linear: return "linear";
    case RatioScheduleKind::Cosine: return "cosine";
  }
  return "latf";
}

double scheduled_ratio(const RatioSchedule& schedule, long step, long total_steps) {
  switch (schedule.kind) {
    case RatioScheduleKind::Latf:
      throw std::invalid_argument("scheduled_ratio: latf is feedback-driven");
    case RatioScheduleKind::Fixed:
      return schedule.fixed_r;
    case RatioScheduleKind::Linear:
    case RatioScheduleKind::Cosine: {
      const double frac =
          total_steps > 1
              ? static_cast<double>(step - 1) / static_cast<double>(total_steps - 1)
              : 1.0;
      if (schedule.kind == RatioScheduleKind::Linear) {
        return 1.0 + (schedule.end_r - 1.0) * frac;
      }
      return schedule.end_r +
             (1.0 - schedule.end_r) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    }
  }
  return 1.0;
}

}  // namespace adakd
