#pragma once

#include <string>
#include <vector>

#include "adakd/difficulty.hpp"

namespace adakd {

struct LatfConfig {
  double beta = 0.97;    // EMA decay
  double eps = 0.05;     // tolerance band around the reference loss
  double delta = 0.05;   // multiplicative ratio step
  long warmup_steps = 0; // steps with the ratio pinned at 1.0
  double r_min = 0.05;   // ratio floor
};

/// Feedback-controller state for token focusing. The reference loss is unset
/// (treated as +infinity) until the first post-warm-up adjustment.
struct FocusState {
  double r = 1.0;
  double ema_loss = 0.0;
  bool ema_seeded = false;  // the pre-training loss must seed the EMA
  double ref_loss = 0.0;
  bool ref_set = false;
  long step = 0;  // completed ratio updates
};

/// Initialize the EMA with the untrained student's loss (the value the
/// controller tracks before step 1).
void seed_ema(FocusState& state, double initial_loss);

/// EMA update: ema <- beta * ema + (1 - beta) * loss_t. Runs once per step,
/// after the parameter update. Non-finite losses abort (divergence signal).
double update_ema(FocusState& state, const LatfConfig& config, double loss_t);

/// One controller decision, consuming the EMA as left by the previous step.
/// Advances the step counter. Returns the branch taken: 'W' warm-up,
/// '-' shrink, '+' grow, '=' hold. The reference loss resets to the compared
/// EMA whenever the ratio actually changes.
char update_ratio(FocusState& state, const LatfConfig& config);

/// Mask of the k = max(1, ceil(valid_count * r)) highest-scoring valid
/// tokens. Ties at the cutoff resolve toward the lower position index.
std::vector<uint8_t> select_tokens(const DifficultyScores& scores, double r);

// Scheduled (non-feedback) ratio baselines behind the same knob.
enum class RatioScheduleKind { Latf, Fixed, Linear, Cosine };

RatioScheduleKind schedule_from_string(const std::string& name);
std::string schedule_to_string(RatioScheduleKind kind);

struct RatioSchedule {
  RatioScheduleKind kind = RatioScheduleKind::Latf;
  double fixed_r = 1.0;  // Fixed schedule value
  double end_r = 0.75;   // Linear/Cosine end point (start is 1.0)
};

/// Ratio for 1-based step of total_steps under a non-feedback schedule.
double scheduled_ratio(const RatioSchedule& schedule, long step, long total_steps);

}  // namespace adakd
