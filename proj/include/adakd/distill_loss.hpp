#pragma once

#include <string>
#include <vector>

#include "adakd/idts.hpp"
#include "adakd/model.hpp"

namespace adakd {

enum class DivergenceKind { ForwardKL, ReverseKL, JS };

DivergenceKind divergence_from_string(const std::string& name);
std::string divergence_to_string(DivergenceKind kind);

struct DistillObjective {
  DivergenceKind divergence = DivergenceKind::ReverseKL;
  bool apply_tau_sq = true;
  double sft_mix_weight = 0.0;  // lambda in (1-lambda)*distill + lambda*sft
};

/// Sum over selected tokens of D(student^(tau_i) || teacher^(tau_i)) — or the
/// forward/JS variants — with each token softmaxed at its own temperature and
/// weighted by tau_i^2 when the objective applies the factor. Teacher logits
/// are consumed as detached values. Gradient reaches student logits only at
/// selected rows; everything else gets exact zeros. selected_count_out
/// receives the number of selected tokens.
Tensor selective_distill_sum(const LogitBatch& teacher_logits,
                             const LogitBatch& student_logits,
                             const std::vector<uint8_t>& selected_mask,
                             const TemperatureAssignment& temps,
                             const DistillObjective& objective,
                             int* selected_count_out = nullptr);

/// Mean over the selected tokens: selective_distill_sum / k.
Tensor selective_distill_loss(const LogitBatch& teacher_logits,
                              const LogitBatch& student_logits,
                              const std::vector<uint8_t>& selected_mask,
                              const TemperatureAssignment& temps,
                              const DistillObjective& objective);

/// Sum of token-level negative log-likelihoods over the batch's valid rows.
/// target_ids[i] is the id the row-i distribution should predict; entries at
/// invalid rows are ignored. valid_count_out receives the row count.
Tensor sft_sum(const LogitBatch& student_logits,
               const std::vector<int>& target_ids,
               int* valid_count_out = nullptr);

/// Mean token-level negative log-likelihood over valid rows.
Tensor sft_loss(const LogitBatch& student_logits,
                const std::vector<int>& target_ids);

}  // namespace adakd
