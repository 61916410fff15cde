#include "adakd/distill_loss.hpp"

#include <cmath>
#include <stdexcept>

#include "adakd/dist_math.hpp"

namespace adakd {

DivergenceKind divergence_from_string(const std::string& name) {
  if (name == "forward_kl") return DivergenceKind::ForwardKL;
  if (name == "reverse_kl") return DivergenceKind::ReverseKL;
  if (name == "js") return DivergenceKind::JS;
  throw std::invalid_argument("unknown divergence: " + name);
}

std::string divergence_to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::ForwardKL: return "forward_kl";
    case DivergenceKind::ReverseKL: return "reverse_kl";
    case DivergenceKind::JS: return "js";
  }
  return "reverse_kl";
}

Tensor selective_distill_sum(const LogitBatch& teacher_logits,
                             const LogitBatch& student_logits,
                             const std::vector<uint8_t>& selected_mask,
                             const TemperatureAssignment& temps,
                             const DistillObjective& objective,
                             int* selected_count_out) {
  const Mat& tz = teacher_logits.logits.value();
  const Mat& sz = student_logits.logits.value();
  if (tz.rows() != sz.rows() || tz.cols() != sz.cols()) {
    throw std::invalid_argument("selective_distill_sum: misaligned logit batches");
  }
  if (selected_mask.size() != static_cast<size_t>(sz.rows()) ||
      teacher_logits.valid.size() != static_cast<size_t>(tz.rows()) ||
      student_logits.valid.size() != static_cast<size_t>(sz.rows())) {
    throw std::invalid_argument("selective_distill_sum: mask misaligned with logits");
  }
  std::vector<int> rows;
  for (size_t i = 0; i < selected_mask.size(); ++i) {
    if (!selected_mask[i]) continue;
    if (!teacher_logits.valid[i] || !student_logits.valid[i]) {
      throw std::invalid_argument(
          "selective_distill_sum: selected position " + std::to_string(i) +
          " is not valid in both batches");
    }
    rows.push_back(static_cast<int>(i));
  }
  if (rows.empty()) {
    throw std::invalid_argument("selective_distill_sum: empty selection");
  }
  const int k = static_cast<int>(rows.size());
  if (temps.taus.size() != static_cast<size_t>(k)) {
    throw std::invalid_argument(
        "selective_distill_sum: temperatures misaligned with selection (" +
        std::to_string(temps.taus.size()) + " vs " + std::to_string(k) + ")");
  }
  if (selected_count_out) *selected_count_out = k;

  const Eigen::Index vocab = tz.cols();
  Eigen::ArrayXd taus(k);
  Eigen::ArrayXd weights(k);
  Mat p_const(k, vocab);
  Mat logp_const(k, vocab);
  Eigen::ArrayXd p_logp(k);  // per-row sum of p*log(p), used by FKL/JS
  for (int i = 0; i < k; ++i) {
    const double tau = temps.taus[i];
    if (!(tau > 0.0)) {
      throw std::invalid_argument("selective_distill_sum: non-positive temperature");
    }
    taus[i] = tau;
    weights[i] = objective.apply_tau_sq ? tau * tau : 1.0;
    Vec p = smooth_probs(
        softmax_with_temperature(tz.row(rows[i]).transpose(), tau).values);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < vocab; ++j) {
      const double lp = std::log(p[j]);
      p_const(i, j) = p[j];
      logp_const(i, j) = lp;
      acc += p[j] * lp;
    }
    p_logp[i] = acc;
  }

  Tensor s_sel = row_gather(student_logits.logits, rows);
  Tensor log_q = row_log_softmax(s_sel, taus);
  Tensor p_t = Tensor::constant(p_const);

  switch (objective.divergence) {
    case DivergenceKind::ForwardKL: {
      // sum_i w_i * (sum_j p log p - sum_j p log q)
      const double const_term = (weights * p_logp).sum();
      Tensor cross = sum_all(scale_rows(cmul(p_t, log_q), weights));
      return sub(Tensor::scalar(const_term), cross);
    }
    case DivergenceKind::ReverseKL: {
      Tensor q = exp_elem(log_q);
      Tensor diff = sub(log_q, Tensor::constant(logp_const));
      return sum_all(scale_rows(cmul(q, diff), weights));
    }
    case DivergenceKind::JS: {
      // 0.5 * sum_i w_i * [ sum_j p log p - sum_j p log m + sum_j q (log q - log m) ]
      Tensor q = exp_elem(log_q);
      Tensor m = scale(add(q, p_t), 0.5);
      Tensor log_m = log_elem(m);
      Tensor a = sum_all(scale_rows(cmul(p_t, log_m), weights));
      Tensor b = sum_all(scale_rows(cmul(q, sub(log_q, log_m)), weights));
      const double const_term = (weights * p_logp).sum();
      Tensor inner = add(sub(Tensor::scalar(const_term), a), b);
      return scale(inner, 0.5);
    }
  }
  throw std::logic_error("selective_distill_sum: unhandled divergence");
}

Tensor selective_distill_loss(const LogitBatch& teacher_logits,
                              const LogitBatch& student_logits,
                              const std::vector<uint8_t>& selected_mask,
                              const TemperatureAssignment& temps,
                              const DistillObjective& objective) {
  int k = 0;
  Tensor total = selective_distill_sum(teacher_logits, student_logits,
                                       selected_mask, temps, objective, &k);
  return scale(total, 1.0 / static_cast<double>(k));
}

Tensor sft_sum(const LogitBatch& student_logits,
               const std::vector<int>& target_ids, int* valid_count_out) {
  const Mat& sz = student_logits.logits.value();
  if (target_ids.size() != static_cast<size_t>(sz.rows()) ||
      student_logits.valid.size() != static_cast<size_t>(sz.rows())) {
    throw std::invalid_argument("sft_sum: targets misaligned with logits (" +
                                std::to_string(target_ids.size()) + " vs " +
                                std::to_string(sz.rows()) + " rows)");
  }
  std::vector<int> rows;
  std::vector<int> picked;
  for (size_t i = 0; i < target_ids.size(); ++i) {
    if (!student_logits.valid[i]) continue;
    const int id = target_ids[i];
    if (id < 0 || id >= sz.cols()) {
      throw std::invalid_argument("sft_sum: target id " + std::to_string(id) +
                                  " out of range at position " + std::to_string(i));
    }
    rows.push_back(static_cast<int>(i));
    picked.push_back(id);
  }
  if (rows.empty()) throw std::invalid_argument("sft_sum: no valid positions");
  if (valid_count_out) *valid_count_out = static_cast<int>(rows.size());

  Tensor s_sel = row_gather(student_logits.logits, rows);
  Eigen::ArrayXd taus = Eigen::ArrayXd::Ones(rows.size());
  Tensor log_q = row_log_softmax(s_sel, taus);
  Tensor ll = sum_all(gather_entries(log_q, picked));
  return scale(ll, -1.0);
}

Tensor sft_loss(const LogitBatch& student_logits,
                const std::vector<int>& target_ids) {
  int k = 0;
  Tensor total = sft_sum(student_logits, target_ids, &k);
  return scale(total, 1.0 / static_cast<double>(k));
}

}  // namespace adakd
