#include "adakd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "adakd/checkpoint.hpp"
#include "adakd/difficulty.hpp"
#include "adakd/distill_loss.hpp"
#include "adakd/eval.hpp"
#include "adakd/latf.hpp"
#include "adakd/metrics.hpp"
#include "adakd/optimizer.hpp"

namespace adakd {

namespace {

// Stream ids hanging off the run seed. Evaluation streams start at 100.
constexpr uint64_t kTeacherInitStream = 1;
constexpr uint64_t kTeacherBatchStream = 2;
constexpr uint64_t kStudentInitStream = 3;
constexpr uint64_t kDistillBatchStream = 4;

struct FramedExample {
  FramedSequence frame;
  std::vector<int> valid_rows;  // logits rows whose targets carry loss
  std::vector<int> targets;     // aligned with valid_rows
};

std::vector<FramedExample> frame_usable(
    const std::vector<PromptResponsePair>& pairs, const ByteTokenizer& tok,
    int max_len, int* skipped_out) {
  std::vector<FramedExample> out;
  int skipped = 0;
  for (const PromptResponsePair& pair : pairs) {
    FramedExample ex;
    ex.frame = training_frame(tok, pair);
    const int len = static_cast<int>(ex.frame.tokens.size());
    if (len > max_len) {
      ++skipped;
      continue;
    }
    for (int row = ex.frame.first_target - 1; row + 1 < len; ++row) {
      ex.valid_rows.push_back(row);
      ex.targets.push_back(ex.frame.tokens[static_cast<size_t>(row) + 1]);
    }
    out.push_back(std::move(ex));
  }
  if (skipped_out) *skipped_out = skipped;
  return out;
}

struct PoolResult {
  Tensor rows;               // loss-carrying logit rows, batch-concatenated
  std::vector<int> targets;  // aligned with rows
};

PoolResult pool_model_rows(const TinyTransformerLM& model,
                           const std::vector<FramedExample>& examples,
                           const std::vector<size_t>& batch, bool track) {
  std::vector<Tensor> parts;
  parts.reserve(batch.size());
  PoolResult out;
  for (size_t idx : batch) {
    const FramedExample& ex = examples[idx];
    LogitBatch full = model.forward(ex.frame.tokens, track);
    parts.push_back(row_gather(full.logits, ex.valid_rows));
    out.targets.insert(out.targets.end(), ex.targets.begin(),
                       ex.targets.end());
  }
  out.rows = concat_rows(parts);
  return out;
}

/// Per-example teacher logits for the loss-carrying rows, computed once and
/// reused across the whole run (the teacher never changes).
class TeacherCache {
 public:
  TeacherCache(const TinyTransformerLM& teacher,
               const std::vector<FramedExample>& examples)
      : teacher_(teacher), examples_(examples), rows_(examples.size()) {}

  Mat pooled(const std::vector<size_t>& batch) {
    Eigen::Index total = 0;
    for (size_t idx : batch) total += example_rows(idx).rows();
    Mat out(total, teacher_.spec().vocab_size);
    Eigen::Index at = 0;
    for (size_t idx : batch) {
      const Mat& rows = example_rows(idx);
      out.middleRows(at, rows.rows()) = rows;
      at += rows.rows();
    }
    return out;
  }

 private:
  const Mat& example_rows(size_t idx) {
    if (!rows_[idx]) {
      const FramedExample& ex = examples_[idx];
      const Mat full = teacher_.forward(ex.frame.tokens, false).logits.value();
      Mat kept(ex.valid_rows.size(), full.cols());
      for (size_t r = 0; r < ex.valid_rows.size(); ++r) {
        kept.row(static_cast<Eigen::Index>(r)) = full.row(ex.valid_rows[r]);
      }
      rows_[idx] = std::move(kept);
    }
    return *rows_[idx];
  }

  const TinyTransformerLM& teacher_;
  const std::vector<FramedExample>& examples_;
  std::vector<std::optional<Mat>> rows_;
};

struct StepOutcome {
  Tensor loss;
  int selected = 0;
  int valid = 0;
  double tau_min = 0.0;
  double tau_mean = 0.0;
  double tau_max = 0.0;
};

/// One batch's loss graph. `every_token_at_base` short-circuits difficulty
/// machinery: all tokens selected at the base temperature (the plain
/// distillation path, also used for the controller's untrained-loss probe).
StepOutcome build_step_loss(const RunConfig& cfg,
                            const TinyTransformerLM& student,
                            TeacherCache& cache,
                            const std::vector<FramedExample>& examples,
                            const std::vector<size_t>& batch, double ratio,
                            bool track, bool every_token_at_base) {
  PoolResult sp = pool_model_rows(student, examples, batch, track);
  const Mat teacher_rows = cache.pooled(batch);
  const int rows = static_cast<int>(teacher_rows.rows());
  const std::vector<uint8_t> all_valid(static_cast<size_t>(rows), 1);
  LogitBatch student_batch{sp.rows, all_valid};
  LogitBatch teacher_batch{Tensor::constant(teacher_rows), all_valid};

  StepOutcome out;
  out.valid = rows;
  std::vector<uint8_t> selected_mask;
  TemperatureAssignment temps;
  if (every_token_at_base) {
    selected_mask = all_valid;
    temps.taus.assign(static_cast<size_t>(rows), cfg.idts.tau_base);
    temps.s_hat.assign(static_cast<size_t>(rows), 0.0);
  } else {
    DifficultyScores scores =
        score_tokens(teacher_batch, student_batch, cfg.indicator, &sp.targets,
                     cfg.indicator_topk);
    selected_mask = select_tokens(scores, ratio);
    std::vector<double> s_hat;
    if (cfg.median_over_selected) {
      std::vector<double> picked;
      for (size_t i = 0; i < selected_mask.size(); ++i) {
        if (selected_mask[i]) picked.push_back(scores.scores[i]);
      }
      s_hat = normalize_scores(picked, cfg.idts.score_floor);
    } else {
      const std::vector<double> all_hat =
          normalize_scores(scores.scores, cfg.idts.score_floor);
      for (size_t i = 0; i < selected_mask.size(); ++i) {
        if (selected_mask[i]) s_hat.push_back(all_hat[i]);
      }
    }
    temps = assign_temperatures(s_hat, cfg.idts);
  }

  Tensor distill = selective_distill_loss(teacher_batch, student_batch,
                                          selected_mask, temps, cfg.objective);
  out.selected = static_cast<int>(
      std::count(selected_mask.begin(), selected_mask.end(), uint8_t{1}));
  out.tau_min = *std::min_element(temps.taus.begin(), temps.taus.end());
  out.tau_max = *std::max_element(temps.taus.begin(), temps.taus.end());
  out.tau_mean =
      std::accumulate(temps.taus.begin(), temps.taus.end(), 0.0) /
      static_cast<double>(temps.taus.size());

  const double lambda = cfg.objective.sft_mix_weight;
  if (lambda > 0.0) {
    Tensor sft = sft_loss(student_batch, sp.targets);
    out.loss = add(scale(distill, 1.0 - lambda), scale(sft, lambda));
  } else {
    out.loss = distill;
  }
  return out;
}

std::vector<size_t> sequential_batch(size_t begin, size_t end) {
  std::vector<size_t> batch(end - begin);
  std::iota(batch.begin(), batch.end(), begin);
  return batch;
}

}  // namespace

BatchSampler::BatchSampler(size_t example_count, int batch_size, Rng rng)
    : rng_(rng) {
  if (example_count == 0) {
    throw std::invalid_argument("BatchSampler: no examples");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("BatchSampler: batch size must be >= 1");
  }
  batch_size_ = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(batch_size), example_count));
  order_.resize(example_count);
  std::iota(order_.begin(), order_.end(), 0);
  reshuffle();
}

const std::vector<size_t>& BatchSampler::next() {
  if (cursor_ + static_cast<size_t>(batch_size_) > order_.size()) reshuffle();
  batch_.assign(order_.begin() + static_cast<long>(cursor_),
                order_.begin() + static_cast<long>(cursor_) + batch_size_);
  cursor_ += static_cast<size_t>(batch_size_);
  return batch_;
}

void BatchSampler::reshuffle() {
  for (size_t i = order_.size() - 1; i > 0; --i) {
    const size_t j = rng_.below(i + 1);
    std::swap(order_[i], order_[j]);
  }
  cursor_ = 0;
}

TeacherResult train_teacher(const RunConfig& config, const Dataset& data,
                            const ByteTokenizer& tokenizer,
                            const std::string& metrics_path) {
  int skipped = 0;
  const std::vector<FramedExample> examples = frame_usable(
      data.train, tokenizer, config.teacher.context_length, &skipped);
  if (examples.empty()) {
    throw std::runtime_error(
        "train_teacher: no training pairs fit the teacher context window");
  }
  Rng base(config.seed);
  Rng init_rng = base.fork(kTeacherInitStream);
  TeacherResult out{
      TinyTransformerLM(config.teacher.to_model_spec(tokenizer.vocab_size()),
                        init_rng),
      0, 0.0, false};
  if (config.teacher_train.steps == 0) return out;

  OptimizerConfig opt_config;  // Adam with library defaults
  opt_config.lr = config.teacher_train.learning_rate;
  Optimizer opt(opt_config);
  BatchSampler sampler(examples.size(), config.batch_size,
                       base.fork(kTeacherBatchStream));
  std::optional<MetricsWriter> metrics;
  if (!metrics_path.empty()) metrics.emplace(metrics_path,
      std::vector<std::string>{"step", "loss"});

  double best = std::numeric_limits<double>::infinity();
  long flat_steps = 0;
  for (long t = 1; t <= config.teacher_train.steps; ++t) {
    const std::vector<size_t>& batch = sampler.next();
    double value = 0.0;
    try {
      PoolResult pooled = pool_model_rows(out.model, examples, batch, true);
      LogitBatch lb{pooled.rows,
                    std::vector<uint8_t>(
                        static_cast<size_t>(pooled.rows.value().rows()), 1)};
      Tensor loss = sft_loss(lb, pooled.targets);
      value = loss.item();
      if (!std::isfinite(value)) {
        throw std::runtime_error("loss diverged (non-finite)");
      }
      loss.backward();
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train_teacher: step " + std::to_string(t) +
                               ": " + e.what());
    }
    opt.step(out.model);
    out.model.zero_grads();
    out.steps_run = t;
    out.final_loss = value;
    if (metrics) {
      metrics->append(
          {MetricsWriter::cell(t), MetricsWriter::cell(value)});
    }

    if (config.teacher_train.plateau_patience > 0) {
      if (value < best - config.teacher_train.plateau_tolerance) {
        best = value;
        flat_steps = 0;
      } else if (++flat_steps >= config.teacher_train.plateau_patience) {
        out.plateau_stopped = true;
        break;
      }
    }
  }
  return out;
}

uint64_t config_fingerprint(const RunConfig& config) {
  return fnv1a_hash(run_config_to_json(config));
}

DistillResult run_distillation(const RunConfig& config,
                               const TinyTransformerLM& teacher,
                               const Dataset& data,
                               const ByteTokenizer& tokenizer,
                               const std::string& out_dir) {
  if (out_dir.empty()) {
    throw std::invalid_argument("run_distillation: output directory required");
  }
  std::filesystem::create_directories(out_dir);
  const int max_len = std::min(teacher.spec().context_length,
                               config.student.context_length);
  int skipped = 0;
  const std::vector<FramedExample> examples =
      frame_usable(data.train, tokenizer, max_len, &skipped);
  if (examples.empty()) {
    throw std::runtime_error(
        "run_distillation: no training pairs fit the context window");
  }
  if (teacher.spec().vocab_size != tokenizer.vocab_size()) {
    throw std::runtime_error(
        "run_distillation: teacher vocabulary does not match the tokenizer");
  }

  TeacherCache cache(teacher, examples);
  Rng base(config.seed);
  Rng init_rng = base.fork(kStudentInitStream);
  DistillResult result;
  result.student = TinyTransformerLM(
      config.student.to_model_spec(tokenizer.vocab_size()), init_rng);
  result.skipped_over_context = skipped;
  result.resolved_warmup = config.resolved_warmup_steps();

  Optimizer opt(config.optimizer);
  BatchSampler sampler(examples.size(), config.batch_size,
                       base.fork(kDistillBatchStream));

  const bool plain = config.method == "plain_rkd";
  const bool adaptive =
      !plain && config.ratio_schedule.kind == RatioScheduleKind::Latf;
  LatfConfig latf = config.latf;
  latf.warmup_steps = result.resolved_warmup;
  FocusState focus;

  // The controller tracks loss movement relative to the untrained student:
  // probe the starting loss (every token, base temperature) over a fixed
  // prefix of the data, without touching the batch stream.
  if (adaptive) {
    const size_t bs = static_cast<size_t>(sampler.batch_size());
    const size_t batch_count =
        std::min<size_t>(32, (examples.size() + bs - 1) / bs);
    double total = 0.0;
    for (size_t b = 0; b < batch_count; ++b) {
      const size_t begin = b * bs;
      const size_t end = std::min(begin + bs, examples.size());
      StepOutcome probe =
          build_step_loss(config, result.student, cache, examples,
                          sequential_batch(begin, end), 1.0, false, true);
      total += probe.loss.item();
    }
    result.initial_ema = total / static_cast<double>(batch_count);
    seed_ema(focus, result.initial_ema);
  }

  const uint64_t fingerprint = config_fingerprint(config);
  auto checkpoint_path = [&](const char* tag) {
    return out_dir + "/student_" + tag + ".bin";
  };
  auto save_student = [&](const char* tag) {
    const std::string path = checkpoint_path(tag);
    save_checkpoint(path, result.student, CheckpointMeta{fingerprint, tag});
    return path;
  };

  std::vector<PromptResponsePair> eval_subset;
  for (size_t i = 0; i < data.validation.size() &&
                     i < static_cast<size_t>(config.eval_examples);
       ++i) {
    eval_subset.push_back(data.validation[i]);
  }
  EvalConfig quick_eval = config.eval;
  quick_eval.seeds = {config.eval.seeds.front()};

  MetricsWriter metrics(
      out_dir + "/metrics.csv",
      {"step", "loss", "ema", "ratio", "ref", "branch", "selected", "valid",
       "tau_min", "tau_mean", "tau_max", "val_rouge"});
  result.metrics_path = metrics.path();

  const long mid_step = (config.total_steps + 1) / 2;
  for (long t = 1; t <= config.total_steps; ++t) {
    double ratio = 1.0;
    char branch = '.';
    if (adaptive) {
      branch = update_ratio(focus, latf);
      ratio = focus.r;
    } else if (!plain) {
      ratio = scheduled_ratio(config.ratio_schedule, t, config.total_steps);
      branch = 'S';
    }

    double loss_value = 0.0;
    int selected = 0;
    int valid = 0;
    double tau_min = std::numeric_limits<double>::infinity();
    double tau_max = -std::numeric_limits<double>::infinity();
    double tau_mean_weighted = 0.0;
    for (int micro = 0; micro < config.grad_accum; ++micro) {
      const std::vector<size_t>& batch = sampler.next();
      StepOutcome outcome;
      double value = 0.0;
      try {
        outcome = build_step_loss(config, result.student, cache, examples,
                                  batch, ratio, true, plain);
        Tensor loss = config.grad_accum > 1
                          ? scale(outcome.loss, 1.0 / config.grad_accum)
                          : outcome.loss;
        value = loss.item();
        if (!std::isfinite(value)) {
          throw std::runtime_error("loss diverged (non-finite)");
        }
        loss.backward();
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("run_distillation: step " +
                                 std::to_string(t) + ": " + e.what());
      }
      loss_value += value;
      selected += outcome.selected;
      valid += outcome.valid;
      tau_min = std::min(tau_min, outcome.tau_min);
      tau_max = std::max(tau_max, outcome.tau_max);
      tau_mean_weighted += outcome.tau_mean * outcome.selected;
    }
    opt.step(result.student);
    result.student.zero_grads();

    double ema;
    if (!focus.ema_seeded) {
      seed_ema(focus, loss_value);  // non-controller modes track from step 1
      ema = loss_value;
    } else {
      ema = update_ema(focus, latf, loss_value);
    }

    std::string val_cell;
    if (config.eval_every > 0 && t % config.eval_every == 0 &&
        !eval_subset.empty()) {
      EvalReport report =
          evaluate_model(result.student, eval_subset, tokenizer, quick_eval);
      val_cell = MetricsWriter::cell(report.mean);
      if (report.mean > result.best_val_f) {
        result.best_val_f = report.mean;
        result.best_step = t;
        result.best_checkpoint = save_student("best");
      }
    }

    metrics.append({MetricsWriter::cell(t), MetricsWriter::cell(loss_value),
                    MetricsWriter::cell(ema), MetricsWriter::cell(ratio),
                    MetricsWriter::cell(
                        focus.ref_set
                            ? focus.ref_loss
                            : std::numeric_limits<double>::infinity()),
                    std::string(1, branch), MetricsWriter::cell(long{selected}),
                    MetricsWriter::cell(long{valid}),
                    MetricsWriter::cell(tau_min),
                    MetricsWriter::cell(tau_mean_weighted / selected),
                    MetricsWriter::cell(tau_max), val_cell});

    if (t == mid_step) result.mid_checkpoint = save_student("mid");
    result.steps_run = t;
  }

  result.final_checkpoint = save_student("final");
  if (!eval_subset.empty()) {
    EvalReport report =
        evaluate_model(result.student, eval_subset, tokenizer, quick_eval);
    result.final_val_f = report.mean;
    if (report.mean > result.best_val_f) {
      result.best_val_f = report.mean;
      result.best_step = result.steps_run;
      result.best_checkpoint = save_student("best");
    }
  }
  if (result.best_checkpoint.empty()) {
    result.best_val_f = result.final_val_f;
    result.best_step = result.steps_run;
    result.best_checkpoint = save_student("best");
  }
  return result;
}

}  // namespace adakd
