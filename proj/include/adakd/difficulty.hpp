#pragma once

#include <string>
#include <vector>

#include "adakd/dist_math.hpp"
#include "adakd/model.hpp"

namespace adakd {

enum class IndicatorKind { Hellinger, ForwardKL, ReverseKL, CrossEntropy, JS, TopKRank };

IndicatorKind indicator_from_string(const std::string& name);
std::string indicator_to_string(IndicatorKind kind);

/// Per-token difficulty values. Scores are defined only where mask is true;
/// masked-out entries hold 0 and must not be read downstream.
struct DifficultyScores {
  std::vector<double> scores;  // size T
  std::vector<uint8_t> mask;   // size T
  IndicatorKind kind = IndicatorKind::Hellinger;

  int valid_count() const {
    int n = 0;
    for (uint8_t m : mask) n += m ? 1 : 0;
    return n;
  }
};

/// Score every masked-in token by comparing teacher and student distributions
/// at temperature 1. Detached: reads logit values only, never the graph.
/// target_ids (one per position, aligned with rows) are required for the
/// CrossEntropy indicator and ignored otherwise. topk applies to TopKRank.
DifficultyScores score_tokens(const LogitBatch& teacher_logits,
                              const LogitBatch& student_logits,
                              IndicatorKind kind,
                              const std::vector<int>* target_ids = nullptr,
                              int topk = 5);

/// Student disagreement on the teacher's k most probable ids: both
/// distributions are renormalized over that id set, then forward KL
/// (teacher-first) is taken on the renormalized pair.
double topk_rank_agreement(const Vec& teacher_probs, const Vec& student_probs,
                           int k);

}  // namespace adakd
