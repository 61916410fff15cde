#pragma once

#include <Eigen/Dense>

namespace adakd {

using Vec = Eigen::VectorXd;

/// Probability distribution over a vocabulary, tagged with the temperature
/// that produced it. Values are non-negative and sum to 1 (within 1e-9).
struct ProbVector {
  Vec values;
  double temperature_used = 1.0;
};

/// Numerically stable softmax of logits/tau (max-subtracted).
/// Throws std::invalid_argument if tau <= 0 or any logit is non-finite.
ProbVector softmax_with_temperature(const Vec& logits, double tau);

/// Shannon entropy in nats; terms with p_i == 0 contribute 0.
double entropy(const Vec& p);

/// d/dtau of entropy(softmax(z/tau)) == Var_{p(tau)}(z) / tau^3. Always >= 0.
double entropy_temp_derivative(const Vec& logits, double tau);

/// Clamp probabilities to >= floor, then renormalize. Guards log(0) in the
/// divergences below.
Vec smooth_probs(const Vec& p, double floor = 1e-12);

/// Sum_i p_i * ln(p_i / q_i) on smoothed inputs, times tau^2 when
/// apply_tau_sq. Forward KL is (teacher, student); reverse KL swaps the
/// arguments. Throws on size mismatch.
double kl_divergence(const Vec& p, const Vec& q, double tau = 1.0,
                     bool apply_tau_sq = false);

/// Jensen-Shannon divergence on smoothed inputs; symmetric, bounded by ln 2.
double js_divergence(const Vec& p, const Vec& q);

/// -ln q[target_id], with q[target_id] clamped to >= 1e-12.
double cross_entropy_to_target(const Vec& q, int target_id);

/// (1/sqrt(2)) * sqrt(Sum_i (sqrt(p_i) - sqrt(q_i))^2); symmetric, in [0,1].
double hellinger_distance(const Vec& p, const Vec& q);

}  // namespace adakd
