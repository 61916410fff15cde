#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adakd/dataset.hpp"
#include "adakd/model.hpp"
#include "adakd/rng.hpp"
#include "adakd/run_config.hpp"
#include "adakd/tokenizer.hpp"

namespace adakd {

/// Deterministic batching: every epoch is a fresh seeded permutation of the
/// example indices, consumed batch_size at a time; a tail smaller than one
/// batch is dropped. Fully determined by (example_count, batch_size, rng).
class BatchSampler {
 public:
  BatchSampler(size_t example_count, int batch_size, Rng rng);

  const std::vector<size_t>& next();
  int batch_size() const { return batch_size_; }

 private:
  void reshuffle();

  std::vector<size_t> order_;
  std::vector<size_t> batch_;
  size_t cursor_ = 0;
  int batch_size_ = 0;
  Rng rng_;
};

struct TeacherResult {
  TinyTransformerLM model;
  long steps_run = 0;
  double final_loss = 0.0;  // token-mean NLL at the last executed step
  bool plateau_stopped = false;
};

/// Next-token NLL training of the teacher on the framed training pairs. Stops
/// at the step budget, or earlier once the loss has not improved by more than
/// plateau_tolerance for plateau_patience consecutive steps (patience 0
/// disables early stopping). A zero budget returns the freshly initialized
/// model. Non-finite loss aborts, naming the step. A non-empty metrics_path
/// receives one step,loss row per step.
TeacherResult train_teacher(const RunConfig& config, const Dataset& data,
                            const ByteTokenizer& tokenizer,
                            const std::string& metrics_path = "");

struct DistillResult {
  TinyTransformerLM student;
  long steps_run = 0;
  double initial_ema = 0.0;    // controller seed value from the pre-pass
  long resolved_warmup = 0;    // steps with the ratio pinned at 1.0
  int skipped_over_context = 0;  // training pairs longer than the window
  double best_val_f = -1.0;    // best periodic validation mean (-1: none run)
  long best_step = -1;
  double final_val_f = -1.0;   // validation mean at the last step
  std::string metrics_path;
  std::string best_checkpoint;
  std::string mid_checkpoint;
  std::string final_checkpoint;
};

/// The full distillation loop. Per step, in order: sample a batch, compute
/// student logits, score token difficulty against the teacher, decide the
/// focus ratio (feedback controller after warm-up, or a fixed/scheduled
/// ratio), select the hardest tokens, assign per-token temperatures, take the
/// selective distillation loss, update parameters, then fold the step loss
/// into the controller's moving average. Appends one metrics row per step and
/// writes mid/best/final checkpoints under out_dir.
///
/// method "plain_rkd" runs the same loop shell with every token selected at
/// the base temperature and no controller.
DistillResult run_distillation(const RunConfig& config,
                               const TinyTransformerLM& teacher,
                               const Dataset& data,
                               const ByteTokenizer& tokenizer,
                               const std::string& out_dir);

/// Hash of the resolved configuration snapshot, stamped into checkpoints.
uint64_t config_fingerprint(const RunConfig& config);

}  // namespace adakd
