#include "adakd/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace adakd {

IndicatorKind indicator_from_string(const std::string& name) {
  if (name == "hellinger") return IndicatorKind::Hellinger;
  if (name == "forward_kl") return IndicatorKind::ForwardKL;
  if (name == "reverse_kl") return IndicatorKind::ReverseKL;
  if (name == "cross_entropy") return IndicatorKind::CrossEntropy;
  if (name == "js") return IndicatorKind::JS;
  if (name == "topk_rank") return IndicatorKind::TopKRank;
  throw std::invalid_argument("unknown difficulty indicator: " + name);
}

std::string indicator_to_string(IndicatorKind kind) {
  switch (kind) {
    case IndicatorKind::Hellinger: return "hellinger";
    case IndicatorKind::ForwardKL: return "forward_kl";
    case IndicatorKind::ReverseKL: return "reverse_kl";
    case IndicatorKind::CrossEntropy: return "cross_entropy";
    case IndicatorKind::JS: return "js";
    case IndicatorKind::TopKRank: return "topk_rank";
  }
  return "hellinger";
}

double topk_rank_agreement(const Vec& teacher_probs, const Vec& student_probs,
                           int k) {
  if (teacher_probs.size() != student_probs.size()) {
    throw std::invalid_argument("topk_rank_agreement: vocabulary mismatch");
  }
  if (k <= 0) throw std::invalid_argument("topk_rank_agreement: k must be positive");
  const int v = static_cast<int>(teacher_probs.size());
  if (k > v) throw std::invalid_argument("topk_rank_agreement: k exceeds vocabulary");
  std::vector<int> ids(v);
  std::iota(ids.begin(), ids.end(), 0);
  // Teacher's top-k ids; ties broken toward the lower id.
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](int a, int b) {
    if (teacher_probs[a] != teacher_probs[b])
      return teacher_probs[a] > teacher_probs[b];
    return a < b;
  });
  double tp = 0.0;
  double sp = 0.0;
  for (int i = 0; i < k; ++i) {
    tp += teacher_probs[ids[i]];
    sp += student_probs[ids[i]];
  }
  Vec tr(k), sr(k);
  for (int i = 0; i < k; ++i) {
    tr[i] = tp > 0.0 ? teacher_probs[ids[i]] / tp : 1.0 / k;
    sr[i] = sp > 0.0 ? student_probs[ids[i]] / sp : 1.0 / k;
  }
  return kl_divergence(tr, sr);
}

DifficultyScores score_tokens(const LogitBatch& teacher_logits,
                              const LogitBatch& student_logits,
                              IndicatorKind kind,
                              const std::vector<int>* target_ids, int topk) {
  const Mat& tz = teacher_logits.logits.value();
  const Mat& sz = student_logits.logits.value();
  if (tz.rows() != sz.rows() || tz.cols() != sz.cols()) {
    throw std::invalid_argument("score_tokens: misaligned logit batches (" +
                                shape_str(tz) + " vs " + shape_str(sz) + ")");
  }
  if (teacher_logits.valid.size() != static_cast<size_t>(tz.rows()) ||
      student_logits.valid.size() != static_cast<size_t>(sz.rows())) {
    throw std::invalid_argument("score_tokens: validity masks misaligned with logits");
  }
  if (kind == IndicatorKind::CrossEntropy && target_ids == nullptr) {
    throw std::invalid_argument("score_tokens: CrossEntropy indicator requires target ids");
  }
  if (target_ids && target_ids->size() != static_cast<size_t>(tz.rows())) {
    throw std::invalid_argument("score_tokens: target ids misaligned with logits");
  }

  const Eigen::Index t_len = tz.rows();
  DifficultyScores out;
  out.kind = kind;
  out.scores.assign(t_len, 0.0);
  out.mask.assign(t_len, 0);
  for (Eigen::Index i = 0; i < t_len; ++i) {
    if (!teacher_logits.valid[i] || !student_logits.valid[i]) continue;
    out.mask[i] = 1;
    Vec p = softmax_with_temperature(tz.row(i).transpose(), 1.0).values;
    Vec q = softmax_with_temperature(sz.row(i).transpose(), 1.0).values;
    double s = 0.0;
    switch (kind) {
      case IndicatorKind::Hellinger: s = hellinger_distance(p, q); break;
      case IndicatorKind::ForwardKL: s = kl_divergence(p, q); break;
      case IndicatorKind::ReverseKL: s = kl_divergence(q, p); break;
      case IndicatorKind::CrossEntropy:
        s = cross_entropy_to_target(q, (*target_ids)[i]);
        break;
      case IndicatorKind::JS: s = js_divergence(p, q); break;
      case IndicatorKind::TopKRank: s = topk_rank_agreement(p, q, topk); break;
    }
    if (!std::isfinite(s) || s < 0.0) {
      throw std::runtime_error("score_tokens: invalid score at position " +
                               std::to_string(i));
    }
    out.scores[i] = s;
  }
  return out;
}

}  // namespace adakd
