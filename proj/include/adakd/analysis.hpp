#pragma once

#include <string>
#include <vector>

#include "adakd/dataset.hpp"
#include "adakd/difficulty.hpp"
#include "adakd/distill_loss.hpp"
#include "adakd/eval.hpp"
#include "adakd/idts.hpp"
#include "adakd/model.hpp"
#include "adakd/tokenizer.hpp"

namespace adakd {

/// One difficulty group's worth of diagnostics. The gradient fields are
/// filled by gradient_alignment_report, the entropy fields by
/// entropy_histogram_report; the other half stays at its defaults.
struct GroupEntry {
  std::string label;  // "hard" | "mid" | "easy"
  int token_count = 0;

  double norm_share = 0.0;    // group gradient norm / sum of group norms
  double cos_to_batch = 0.0;  // cosine to the whole-batch gradient
  double cos_to_sft = 0.0;    // cosine to the NLL gradient on the same batch

  double entropy_before_mean = 0.0;  // token entropy at temperature 1
  double entropy_after_mean = 0.0;   // token entropy at the assigned tau
  std::vector<long> hist_before;     // bucket counts, aligned with edges
  std::vector<long> hist_after;
};

struct GroupDiagnostics {
  std::vector<std::string> token_labels;  // group label per scored token
  std::vector<GroupEntry> groups;         // present groups only, hardest first
  double lower_cut = 0.0;                 // score boundaries behind the labels
  double upper_cut = 0.0;
  std::vector<double> bucket_edges;  // entropy histogram edges, [0, ln V]

  const GroupEntry* find(const std::string& label) const;
};

/// Dot product / Euclidean norm / cosine over parameter-gradient stacks
/// flattened end to end. cosine_flat returns 0 when either side is all
/// zeros, and clamps to [-1, 1] against floating-point spill.
double dot_flat(const std::vector<Mat>& a, const std::vector<Mat>& b);
double norm_flat(const std::vector<Mat>& a);
double cosine_flat(const std::vector<Mat>& a, const std::vector<Mat>& b);

struct AlignmentOptions {
  DistillObjective objective;  // divergence for the per-group losses
  double tau = 1.0;            // shared temperature for those losses
  IndicatorKind indicator = IndicatorKind::Hellinger;
  int indicator_topk = 5;
};

/// Splits the batch's loss-carrying tokens into difficulty terciles (easy:
/// score <= lower cut, hard: score > upper cut, mid between; ties collapse
/// groups rather than erroring) and backpropagates each group's share of the
/// batch-mean divergence separately. Reports every nonempty group's gradient
/// norm share plus its cosine to the whole-batch gradient and to the
/// next-token NLL gradient on the same batch. scores_override replaces the
/// computed difficulty scores (must align with the pooled token rows).
/// The student's gradients are used as scratch and cleared afterwards.
GroupDiagnostics gradient_alignment_report(
    TinyTransformerLM& student, const TinyTransformerLM& teacher,
    const std::vector<PromptResponsePair>& batch,
    const ByteTokenizer& tokenizer, const AlignmentOptions& options,
    const std::vector<double>* scores_override = nullptr);

/// Token entropies of the student rows at temperature 1 (before) and at each
/// token's assigned temperature (after), split into hard/easy halves at the
/// median teacher-student Hellinger distance. Histograms share fixed bucket
/// edges spanning [0, ln V].
GroupDiagnostics entropy_histogram_report(const Mat& teacher_logits,
                                          const Mat& student_logits,
                                          const TemperatureAssignment& temps,
                                          int buckets = 12);

/// Hellinger distance per aligned row between the two logit sets, both
/// softmaxed at temperature 1. The same scoring the reports group by.
std::vector<double> hellinger_row_scores(const Mat& teacher_logits,
                                         const Mat& student_logits);

/// Loss-carrying logit rows for a batch of pairs under both models, pooled
/// in batch order; detached values for diagnostics. Pairs that do not fit
/// the shorter of the two context windows are skipped; an all-skipped batch
/// is an error.
struct PooledBatchRows {
  Mat teacher_rows;
  Mat student_rows;
  std::vector<int> targets;  // aligned with rows
};
PooledBatchRows pooled_batch_rows(const TinyTransformerLM& teacher,
                                  const TinyTransformerLM& student,
                                  const std::vector<PromptResponsePair>& batch,
                                  const ByteTokenizer& tokenizer);

/// Ordinary least-squares fit of y = slope * x + intercept. Requires at
/// least two points and nonzero x variance.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Squared gradient magnitude of the single-token temperature-scaled
/// divergence with respect to the student logits: backpropagates
/// D(student^(tau) || teacher^(tau)) — or the forward/JS variant — through a
/// leaf logit row and returns ||d loss / d logits||^2. The probe behind the
/// difficulty-vs-temperature gradient magnitude diagnostic: across synthetic
/// token pairs, log of this quantity tracks log(s^2 / tau^4).
double logit_grad_sq(const Vec& teacher_logits, const Vec& student_logits,
                     double tau, const DistillObjective& objective);

/// Structured-text + plot-ready CSV emission, one file pair per report kind.
void write_alignment_report(const GroupDiagnostics& report,
                            const std::string& text_path,
                            const std::string& csv_path);
void write_entropy_report(const GroupDiagnostics& report,
                          const std::string& text_path,
                          const std::string& csv_path);
void write_eval_report(const EvalReport& report, const std::string& text_path,
                       const std::string& csv_path);

}  // namespace adakd
