#include "adakd/dist_math.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adakd {

namespace {

void check_same_size(const Vec& p, const Vec& q, const char* what) {
  if (p.size() != q.size()) {
    throw std::invalid_argument(std::string(what) + ": vocabulary mismatch (" +
                                std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()) + ")");
  }
}

}  // namespace

ProbVector softmax_with_temperature(const Vec& logits, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("softmax_with_temperature: tau must be > 0, got " +
                                std::to_string(tau));
  }
  if (logits.size() == 0) {
    throw std::invalid_argument("softmax_with_temperature: empty logits");
  }
  if (!logits.allFinite()) {
    throw std::invalid_argument("softmax_with_temperature: non-finite logits");
  }
  Vec scaled = logits / tau;
  double m = scaled.maxCoeff();
  Vec e = (scaled.array() - m).exp();
  double z = e.sum();
  ProbVector out;
  out.values = e / z;
  out.temperature_used = tau;
  return out;
}

double entropy(const Vec& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double v = p[i];
    if (v > 0.0) h -= v * std::log(v);
  }
  return h < 0.0 ? 0.0 : h;
}

double entropy_temp_derivative(const Vec& logits, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("entropy_temp_derivative: tau must be > 0, got " +
                                std::to_string(tau));
  }
  Vec p = softmax_with_temperature(logits, tau).values;
  double mean = p.dot(logits);
  double var = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double d = logits[i] - mean;
    var += p[i] * d * d;
  }
  double out = var / (tau * tau * tau);
  return out < 0.0 ? 0.0 : out;
}

Vec smooth_probs(const Vec& p, double floor) {
  Vec c = p.cwiseMax(floor);
  return c / c.sum();
}

double kl_divergence(const Vec& p, const Vec& q, double tau, bool apply_tau_sq) {
  check_same_size(p, q, "kl_divergence");
  Vec ps = smooth_probs(p);
  Vec qs = smooth_probs(q);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    kl += ps[i] * std::log(ps[i] / qs[i]);
  }
  if (apply_tau_sq) kl *= tau * tau;
  return kl;
}

double js_divergence(const Vec& p, const Vec& q) {
  check_same_size(p, q, "js_divergence");
  Vec ps = smooth_probs(p);
  Vec qs = smooth_probs(q);
  Vec m = 0.5 * (ps + qs);
  double a = 0.0;
  double b = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    a += ps[i] * std::log(ps[i] / m[i]);
    b += qs[i] * std::log(qs[i] / m[i]);
  }
  return 0.5 * (a + b);
}

double cross_entropy_to_target(const Vec& q, int target_id) {
  if (target_id < 0 || target_id >= q.size()) {
    throw std::invalid_argument("cross_entropy_to_target: target_id " +
                                std::to_string(target_id) + " out of range [0, " +
                                std::to_string(q.size()) + ")");
  }
  double v = q[target_id];
  if (v < 1e-12) v = 1e-12;
  return -std::log(v);
}

double hellinger_distance(const Vec& p, const Vec& q) {
  check_same_size(p, q, "hellinger_distance");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    sum += d * d;
  }
  double h = std::sqrt(sum / 2.0);
  if (h < 0.0) return 0.0;
  if (h > 1.0) return 1.0;
  return h;
}

}  // namespace adakd
