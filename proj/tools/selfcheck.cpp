#include "selfcheck.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "adakd/analysis.hpp"
#include "adakd/checkpoint.hpp"
#include "adakd/difficulty.hpp"
#include "adakd/dist_math.hpp"
#include "adakd/distill_loss.hpp"
#include "adakd/eval.hpp"
#include "adakd/idts.hpp"
#include "adakd/latf.hpp"
#include "adakd/model.hpp"
#include "adakd/rng.hpp"
#include "adakd/run_config.hpp"
#include "adakd/tokenizer.hpp"

namespace adakd {

namespace {

std::string fail(const char* what, double got, double want) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s: got %.12g, wanted %.12g", what, got,
                want);
  return buf;
}

Mat random_mat(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = rng.normal();
  }
  return out;
}

std::string check_tokenizer() {
  ByteTokenizer tok;
  const std::string text = "what color is bolt ? 7 + 3";
  if (tok.decode(tok.encode(text)) != text) return "round trip changed text";
  if (tok.vocab_size() != 99) return "unexpected vocabulary size";
  return "";
}

std::string check_softmax_entropy() {
  const Vec logits = random_mat(1, 12, 21).row(0).transpose();
  double prev = -1.0;
  for (double tau : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const ProbVector p = softmax_with_temperature(logits, tau);
    const double sum = p.values.sum();
    if (std::abs(sum - 1.0) > 1e-9) return fail("softmax sum", sum, 1.0);
    const double h = entropy(p.values);
    if (h <= prev) return "entropy not increasing in temperature";
    if (entropy_temp_derivative(logits, tau) < 0.0) {
      return "negative entropy temperature derivative";
    }
    prev = h;
  }
  return "";
}

std::string check_hellinger() {
  const Vec a = softmax_with_temperature(
                    random_mat(1, 10, 31).row(0).transpose(), 1.0)
                    .values;
  const Vec b = softmax_with_temperature(
                    random_mat(1, 10, 32).row(0).transpose(), 1.0)
                    .values;
  if (hellinger_distance(a, a) > 1e-12) return "nonzero self distance";
  const double d_ab = hellinger_distance(a, b);
  const double d_ba = hellinger_distance(b, a);
  if (std::abs(d_ab - d_ba) > 1e-12) return "asymmetric distance";
  if (d_ab <= 0.0 || d_ab > 1.0) return fail("range", d_ab, 0.5);
  return "";
}

std::string check_autodiff_fd() {
  ByteTokenizer tok;
  Rng init(7);
  TinyTransformerLM model(ModelSpec{tok.vocab_size(), 8, 1, 1, 8}, init);
  const std::vector<int> tokens = {0, 5, 9, 3, 7};
  std::vector<int> targets(tokens.size(), 0);
  std::vector<uint8_t> valid(tokens.size(), 1);
  valid.back() = 0;  // the last row has no next token
  for (size_t i = 0; i + 1 < tokens.size(); ++i) targets[i] = tokens[i + 1];

  auto loss_value = [&]() {
    LogitBatch lb = model.forward(tokens, false);
    lb.valid = valid;
    return sft_loss(lb, targets).item();
  };
  {
    LogitBatch lb = model.forward(tokens, true);
    lb.valid = valid;
    Tensor loss = sft_loss(lb, targets);
    model.zero_grads();
    loss.backward();
  }

  struct Probe {
    const char* name;
    int r, c;
  };
  for (const Probe& probe :
       {Probe{"tok_emb", 5, 1}, Probe{"head.w", 2, 4}, Probe{"lnf.g", 0, 3}}) {
    Tensor param = model.param(probe.name);
    const double analytic = param.grad()(probe.r, probe.c);
    const double keep = param.value()(probe.r, probe.c);
    const double h = 1e-5;
    param.value_mut()(probe.r, probe.c) = keep + h;
    const double up = loss_value();
    param.value_mut()(probe.r, probe.c) = keep - h;
    const double down = loss_value();
    param.value_mut()(probe.r, probe.c) = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    if (err > 1e-4) return fail(probe.name, analytic, numeric);
  }
  model.zero_grads();
  return "";
}

std::string check_difficulty() {
  const Mat logits = random_mat(6, 10, 41);
  const std::vector<uint8_t> valid(6, 1);
  LogitBatch same_a{Tensor::constant(logits), valid};
  LogitBatch same_b{Tensor::constant(logits), valid};
  DifficultyScores zero =
      score_tokens(same_a, same_b, IndicatorKind::Hellinger);
  for (double s : zero.scores) {
    if (std::abs(s) > 1e-12) return fail("identical logits", s, 0.0);
  }
  LogitBatch other{Tensor::constant(random_mat(6, 10, 42)), valid};
  DifficultyScores positive =
      score_tokens(same_a, other, IndicatorKind::Hellinger);
  for (double s : positive.scores) {
    if (s <= 0.0) return fail("distinct logits", s, 0.3);
  }
  return "";
}

std::string check_controller() {
  LatfConfig cfg;
  cfg.warmup_steps = 2;
  FocusState state;
  seed_ema(state, 4.0);
  for (int i = 0; i < 2; ++i) {
    if (update_ratio(state, cfg) != 'W' || state.r != 1.0) {
      return "warm-up did not pin the ratio";
    }
  }
  // EMA far below the (infinite) reference: focus tightens one step
  if (update_ratio(state, cfg) != '-') return "no tightening after warm-up";
  if (std::abs(state.r - 0.95) > 1e-15) return fail("ratio", state.r, 0.95);
  // force the EMA far above the new reference: focus relaxes
  state.ema_loss = state.ref_loss * 2.0;
  if (update_ratio(state, cfg) != '+') return "no relaxing on loss rise";
  if (state.r <= 0.95) return "ratio did not grow";
  if (state.r > 1.0 || state.r < cfg.r_min) return "ratio out of range";
  return "";
}

std::string check_temperatures() {
  std::vector<double> scores = {0.05, 0.2, 0.4, 0.6, 0.9};
  const std::vector<double> s_hat = normalize_scores(scores);
  IdtsConfig flat;
  flat.tau_base = 2.0;
  flat.c = 0.0;
  for (double tau : assign_temperatures(s_hat, flat).taus) {
    if (tau != 2.0) return fail("zero strength", tau, 2.0);
  }
  IdtsConfig idts;
  idts.tau_base = 2.0;
  idts.c = 0.5;
  const TemperatureAssignment temps = assign_temperatures(s_hat, idts);
  for (size_t i = 0; i + 1 < temps.taus.size(); ++i) {
    if (temps.taus[i] < temps.taus[i + 1]) {
      return "temperature not anti-monotone in difficulty";
    }
  }
  for (double tau : temps.taus) {
    if (tau < 2.0 * std::exp(-0.5) - 1e-12 ||
        tau > 2.0 * std::exp(0.5) + 1e-12) {
      return fail("temperature range", tau, 2.0);
    }
  }
  return "";
}

std::string check_selective_gradient() {
  const Mat student_values = random_mat(3, 8, 51);
  Tensor student_logits = Tensor::leaf(student_values);
  const std::vector<uint8_t> valid(3, 1);
  LogitBatch student{student_logits, valid};
  LogitBatch teacher{Tensor::constant(random_mat(3, 8, 52)), valid};
  const std::vector<uint8_t> mask = {1, 0, 1};
  TemperatureAssignment temps;
  temps.taus = {1.0, 1.0};
  temps.s_hat = {0.0, 0.0};
  DistillObjective objective;
  Tensor loss =
      selective_distill_loss(teacher, student, mask, temps, objective);
  loss.backward();
  const Mat& grad = student_logits.grad();
  if (grad.row(1).cwiseAbs().maxCoeff() != 0.0) {
    return "unselected row leaked gradient";
  }
  if (grad.row(0).cwiseAbs().maxCoeff() == 0.0 ||
      grad.row(2).cwiseAbs().maxCoeff() == 0.0) {
    return "selected row got no gradient";
  }
  return "";
}

std::string check_generation_determinism() {
  Rng init(61);
  TinyTransformerLM model(ModelSpec{20, 16, 1, 1, 8}, init);
  EvalConfig decode;
  decode.max_new_tokens = 8;
  Rng a(9), b(9);
  const GenerationResult ra = generate(model, {0, 3, 5}, decode, a);
  const GenerationResult rb = generate(model, {0, 3, 5}, decode, b);
  if (ra.token_ids != rb.token_ids) return "same seed diverged";
  return "";
}

std::string check_rouge() {
  const RougeScore s = rouge_l({"a", "b", "c", "d"}, {"a", "c", "e"});
  if (std::abs(s.f - 4.0 / 7.0) > 1e-12) return fail("f", s.f, 4.0 / 7.0);
  if (rouge_l({"x"}, {"x"}).f != 1.0) return "identical not 1";
  return "";
}

std::string check_config_snapshot() {
  const std::string defaults = run_config_to_json(RunConfig{});
  const RunConfig reparsed = parse_run_config(defaults, {});
  if (run_config_to_json(reparsed) != defaults) {
    return "snapshot did not round trip";
  }
  const RunConfig overridden =
      parse_run_config(defaults, {"idts.strength=0.75"});
  if (overridden.idts.c != 0.75) return "override not applied";
  return "";
}

std::string check_checkpoint_roundtrip() {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "adakd_selfcheck.bin";
  Rng init(71);
  TinyTransformerLM model(ModelSpec{20, 8, 1, 1, 8}, init);
  save_checkpoint(path.string(), model, CheckpointMeta{123, "selfcheck"});
  LoadedCheckpoint loaded = load_checkpoint(path.string());
  fs::remove(path);
  if (loaded.meta.config_hash != 123) return "meta hash changed";
  auto& pa = model.parameters();
  auto& pb = loaded.model.parameters();
  if (pa.size() != pb.size()) return "parameter count changed";
  for (size_t i = 0; i < pa.size(); ++i) {
    if (!(pa[i].second.value().array() == pb[i].second.value().array())
             .all()) {
      return "parameter values changed";
    }
  }
  return "";
}

}  // namespace

int run_selfcheck(std::ostream& out) {
  struct Entry {
    const char* name;
    std::function<std::string()> fn;
  };
  const std::vector<Entry> checks = {
      {"tokenizer round trip", check_tokenizer},
      {"softmax and entropy", check_softmax_entropy},
      {"hellinger distance", check_hellinger},
      {"autodiff vs finite differences", check_autodiff_fd},
      {"difficulty scoring", check_difficulty},
      {"focus controller", check_controller},
      {"temperature assignment", check_temperatures},
      {"selective loss gradient", check_selective_gradient},
      {"generation determinism", check_generation_determinism},
      {"rouge-l", check_rouge},
      {"config snapshot", check_config_snapshot},
      {"checkpoint round trip", check_checkpoint_roundtrip},
  };
  int failures = 0;
  for (const Entry& entry : checks) {
    std::string detail;
    try {
      detail = entry.fn();
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    if (detail.empty()) {
      out << "ok   " << entry.name << "\n";
    } else {
      out << "FAIL " << entry.name << ": " << detail << "\n";
      ++failures;
    }
  }
  if (failures == 0) {
    out << "selfcheck: " << checks.size() << " checks passed\n";
    return 0;
  }
  out << "selfcheck: " << failures << " of " << checks.size()
      << " checks failed\n";
  return 4;
}

}  // namespace adakd
