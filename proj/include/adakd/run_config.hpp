#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "adakd/dataset.hpp"
#include "adakd/difficulty.hpp"
#include "adakd/distill_loss.hpp"
#include "adakd/idts.hpp"
#include "adakd/latf.hpp"
#include "adakd/model.hpp"
#include "adakd/optimizer.hpp"

namespace adakd {

/// Any configuration problem: unreadable file, malformed document, unknown
/// key, wrong type, or failed cross-field validation. Messages name the
/// offending dotted key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" | "jsonl"
  std::string path;                  // record file when source == "jsonl"
  double val_fraction = 0.1;
  SyntheticConfig synthetic;  // val_fraction mirrored from above
};

/// Architecture knobs; vocabulary size comes from the tokenizer at build
/// time, so teacher and student always share it.
struct ArchConfig {
  int layer_count = 2;
  int head_count = 2;
  int model_width = 64;
  int context_length = 64;

  ModelSpec to_model_spec(int vocab_size) const {
    return ModelSpec{vocab_size, context_length, layer_count, head_count,
                     model_width};
  }
};

struct TeacherTrainConfig {
  long steps = 1200;            // SFT budget
  double learning_rate = 1e-3;
  long plateau_patience = 0;    // 0 disables early stop
  double plateau_tolerance = 1e-4;
};

struct EvalConfig {
  double temperature = 1.0;  // 0 decodes greedily
  double top_p = 1.0;
  int max_new_tokens = 40;
  std::vector<uint64_t> seeds = {10, 20, 30, 40, 50};
};

inline IdtsConfig default_run_idts() {
  IdtsConfig c;
  c.tau_base = 2.0;
  return c;
}

/// Complete description of one distillation run. Every field has a default;
/// the file/override layer accepts exactly these fields and nothing else.
struct RunConfig {
  DataConfig data;
  ArchConfig teacher{4, 4, 128, 64};
  ArchConfig student{2, 2, 64, 64};

  // distillation loop
  uint64_t seed = 10;
  long total_steps = 400;
  int batch_size = 6;
  int grad_accum = 1;            // optimizer steps consume this many batches
  double warmup_fraction = 0.05; // of total_steps
  long warmup_steps = -1;        // explicit count; -1 derives from fraction
  std::string method = "adakd";  // "adakd" | "plain_rkd"
  OptimizerConfig optimizer;
  long eval_every = 0;   // steps between validation scores; 0 = final only
  int eval_examples = 24;  // validation subset size for periodic scoring

  TeacherTrainConfig teacher_train;

  // method components
  LatfConfig latf;  // warmup_steps member resolved by the trainer
  RatioSchedule ratio_schedule;
  IdtsConfig idts = default_run_idts();
  bool median_over_selected = true;
  DistillObjective objective;
  IndicatorKind indicator = IndicatorKind::Hellinger;
  int indicator_topk = 5;

  EvalConfig eval;

  long resolved_warmup_steps() const;
};

/// Parse a JSON document (defaults filled, unknown keys rejected), then apply
/// dotted-path overrides "section.key=value" in order (last wins), then
/// validate. String-typed keys take the override text verbatim; other types
/// are parsed as JSON and type-checked.
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides = {});

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

/// Serialize the fully-resolved configuration; re-parsing the result yields
/// the same configuration (snapshot round-trip).
std::string run_config_to_json(const RunConfig& config);

/// Range and cross-field checks; throws ConfigError naming the field.
void validate_run_config(const RunConfig& config);

}  // namespace adakd
