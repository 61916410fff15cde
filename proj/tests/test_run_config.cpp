#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "adakd/run_config.hpp"

using namespace adakd;

TEST_CASE("config: empty document yields full defaults") {
  RunConfig c = parse_run_config("{}");
  CHECK(c.data.source == "synthetic");
  CHECK(c.data.val_fraction == 0.1);
  CHECK(c.data.synthetic.entities == 40);
  CHECK(c.teacher.layer_count == 4);
  CHECK(c.teacher.model_width == 128);
  CHECK(c.student.layer_count == 2);
  CHECK(c.student.model_width == 64);
  CHECK(c.seed == 10);
  CHECK(c.total_steps == 400);
  CHECK(c.batch_size == 6);
  CHECK(c.grad_accum == 1);
  CHECK(c.warmup_fraction == 0.05);
  CHECK(c.warmup_steps == -1);
  CHECK(c.method == "adakd");
  CHECK(c.optimizer.kind == OptimizerKind::Adam);
  CHECK(c.optimizer.lr == 1e-3);
  CHECK(c.ratio_schedule.kind == RatioScheduleKind::Latf);
  CHECK(c.latf.beta == 0.97);
  CHECK(c.latf.eps == 0.05);
  CHECK(c.latf.delta == 0.05);
  CHECK(c.idts.tau_base == 2.0);
  CHECK(c.idts.c == 0.5);
  CHECK(c.idts.sign_mode == TempSignMode::Inverse);
  CHECK(c.median_over_selected);
  CHECK(c.objective.divergence == DivergenceKind::ReverseKL);
  CHECK(c.objective.apply_tau_sq);
  CHECK(c.objective.sft_mix_weight == 0.0);
  CHECK(c.indicator == IndicatorKind::Hellinger);
  CHECK(c.indicator_topk == 5);
  CHECK(c.eval.seeds == std::vector<uint64_t>{10, 20, 30, 40, 50});
}

TEST_CASE("config: values flow from the document into the struct") {
  RunConfig c = parse_run_config(R"({
    "data": {"source": "jsonl", "path": "corpus.jsonl", "val_fraction": 0.2},
    "train": {"seed": 77, "total_steps": 100, "optimizer": "sgd",
              "learning_rate": 0.01, "method": "plain_rkd"},
    "latf": {"schedule": "cosine", "end_ratio": 0.5},
    "idts": {"sign": "flipped", "strength": 0.25, "median_over_selected": false},
    "objective": {"divergence": "js", "apply_tau_sq": false},
    "difficulty": {"indicator": "forward_kl", "topk": 3},
    "eval": {"seeds": [1, 2, 3]}
  })");
  CHECK(c.data.source == "jsonl");
  CHECK(c.data.path == "corpus.jsonl");
  CHECK(c.data.synthetic.val_fraction == 0.2);  // mirrored
  CHECK(c.seed == 77);
  CHECK(c.total_steps == 100);
  CHECK(c.optimizer.kind == OptimizerKind::Sgd);
  CHECK(c.optimizer.lr == 0.01);
  CHECK(c.method == "plain_rkd");
  CHECK(c.ratio_schedule.kind == RatioScheduleKind::Cosine);
  CHECK(c.ratio_schedule.end_r == 0.5);
  CHECK(c.idts.sign_mode == TempSignMode::Flipped);
  CHECK(c.idts.c == 0.25);
  CHECK(!c.median_over_selected);
  CHECK(c.objective.divergence == DivergenceKind::JS);
  CHECK(!c.objective.apply_tau_sq);
  CHECK(c.indicator == IndicatorKind::ForwardKL);
  CHECK(c.indicator_topk == 3);
  CHECK(c.eval.seeds == std::vector<uint64_t>{1, 2, 3});
}

TEST_CASE("config: unknown keys are rejected with their dotted path") {
  CHECK_THROWS_WITH_AS(parse_run_config("{\"idtsx\": {}}"),
                       "unknown config key \"idtsx\"", ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("{\"idts\": {\"cc\": 1}}"),
                       "unknown config key \"idts.cc\"", ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_run_config("{\"data\": {\"synthetic\": {\"seeds\": 1}}}"),
      "unknown config key \"data.synthetic.seeds\"", ConfigError);
}

TEST_CASE("config: wrong types are rejected with the expected type") {
  CHECK_THROWS_WITH_AS(
      parse_run_config("{\"train\": {\"batch_size\": \"six\"}}"),
      "config key \"train.batch_size\" expects an integer, got a string",
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_run_config("{\"train\": {\"batch_size\": 3.5}}"),
      "config key \"train.batch_size\" expects an integer, got a number",
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_run_config("{\"objective\": {\"apply_tau_sq\": 1}}"),
      "config key \"objective.apply_tau_sq\" expects a boolean, got an integer",
      ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"train\": 3}"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[1,2]"), ConfigError);
}

TEST_CASE("config: enum fields reject unknown names, naming the key") {
  try {
    parse_run_config("{\"objective\": {\"divergence\": \"tv\"}}");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("objective.divergence") !=
          std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config("{\"latf\": {\"schedule\": \"step\"}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"difficulty\": {\"indicator\": \"l2\"}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"idts\": {\"sign\": \"up\"}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"train\": {\"optimizer\": \"lbfgs\"}}"),
                  ConfigError);
}

TEST_CASE("config: dotted overrides") {
  SUBCASE("set and last-wins") {
    RunConfig c = parse_run_config(
        "{}", {"idts.strength=0.9", "idts.strength=0.0", "train.total_steps=50",
               "objective.apply_tau_sq=false", "eval.seeds=[7, 8]"});
    CHECK(c.idts.c == 0.0);
    CHECK(c.total_steps == 50);
    CHECK(!c.objective.apply_tau_sq);
    CHECK(c.eval.seeds == std::vector<uint64_t>{7, 8});
  }
  SUBCASE("string fields take the text verbatim") {
    RunConfig c = parse_run_config(
        "{}", {"data.source=jsonl", "data.path=/tmp/x.jsonl"});
    CHECK(c.data.source == "jsonl");
    CHECK(c.data.path == "/tmp/x.jsonl");
  }
  SUBCASE("overrides beat the file") {
    RunConfig c = parse_run_config("{\"train\": {\"batch_size\": 4}}",
                                   {"train.batch_size=9"});
    CHECK(c.batch_size == 9);
  }
  SUBCASE("bad overrides") {
    CHECK_THROWS_WITH_AS(parse_run_config("{}", {"idts.cc=1"}),
                         "unknown config key \"idts.cc\"", ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config("{}", {"idts=1"}),
                         "cannot assign to config section \"idts\"",
                         ConfigError);
    CHECK_THROWS_AS(parse_run_config("{}", {"no_equals"}), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{}", {"train.batch_size=abc"}),
                    ConfigError);
    CHECK_THROWS_AS(parse_run_config("{}", {"=5"}), ConfigError);
  }
}

TEST_CASE("config: validation catches out-of-range values") {
  CHECK_THROWS_WITH_AS(parse_run_config("{\"train\": {\"batch_size\": 0}}"),
                       "train.batch_size must be >= 1", ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"train\": {\"method\": \"magic\"}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"data\": {\"val_fraction\": 0.95}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"data\": {\"source\": \"jsonl\"}}"),
                  ConfigError);  // path required
  CHECK_THROWS_AS(
      parse_run_config("{\"student\": {\"model_width\": 65}}"),
      ConfigError);  // not divisible by head count
  CHECK_THROWS_AS(parse_run_config("{\"idts\": {\"tau_base\": 0.0}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"latf\": {\"beta\": 1.0}}"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_run_config("{\"objective\": {\"sft_mix_weight\": 1.5}}"),
      ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"eval\": {\"seeds\": []}}"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"train\": {\"seed\": -4}}"),
                  ConfigError);
}

TEST_CASE("config: warm-up resolution") {
  RunConfig c = parse_run_config("{}");
  CHECK(c.resolved_warmup_steps() == 20);  // 0.05 of 400
  c = parse_run_config("{\"train\": {\"total_steps\": 100}}");
  CHECK(c.resolved_warmup_steps() == 5);
  c = parse_run_config("{\"train\": {\"warmup_steps\": 7}}");
  CHECK(c.resolved_warmup_steps() == 7);  // explicit count wins
  c = parse_run_config("{\"train\": {\"warmup_fraction\": 0.0}}");
  CHECK(c.resolved_warmup_steps() == 0);
  // the loop must extend past the warm-up
  CHECK_THROWS_WITH_AS(
      parse_run_config(
          "{\"train\": {\"total_steps\": 10, \"warmup_steps\": 10}}"),
      "train.total_steps must exceed the resolved warm-up (10 steps)",
      ConfigError);
}

TEST_CASE("config: snapshot serialization round-trips") {
  RunConfig a = parse_run_config(R"({
    "train": {"total_steps": 123, "optimizer": "sgd", "learning_rate": 0.5},
    "idts": {"strength": 0.75, "sign": "flipped"},
    "latf": {"schedule": "fixed", "fixed_ratio": 0.6},
    "eval": {"seeds": [42]}
  })", {"difficulty.indicator=js"});
  std::string snapshot = run_config_to_json(a);
  RunConfig b = parse_run_config(snapshot);
  CHECK(run_config_to_json(b) == snapshot);
  CHECK(b.total_steps == 123);
  CHECK(b.optimizer.kind == OptimizerKind::Sgd);
  CHECK(b.idts.c == 0.75);
  CHECK(b.idts.sign_mode == TempSignMode::Flipped);
  CHECK(b.ratio_schedule.kind == RatioScheduleKind::Fixed);
  CHECK(b.ratio_schedule.fixed_r == 0.6);
  CHECK(b.indicator == IndicatorKind::JS);
  CHECK(b.eval.seeds == std::vector<uint64_t>{42});
}

TEST_CASE("config: file loading") {
  auto path = std::filesystem::temp_directory_path() / "adakd_cfg.json";
  {
    std::ofstream out(path);
    out << "{\"train\": {\"total_steps\": 55}}\n";
  }
  RunConfig c = load_run_config(path.string());
  CHECK(c.total_steps == 55);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("config: model spec construction shares the vocabulary") {
  RunConfig c = parse_run_config("{}");
  ModelSpec t = c.teacher.to_model_spec(99);
  ModelSpec s = c.student.to_model_spec(99);
  CHECK(t.vocab_size == s.vocab_size);
  CHECK(t.layer_count == 4);
  CHECK(t.model_width == 128);
  CHECK(s.layer_count == 2);
  CHECK(s.model_width == 64);
  CHECK(t.context_length == 64);
}
