#include "adakd/run_config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace adakd {

namespace {

using nlohmann::json;

json config_to_doc(const RunConfig& c) {
  json arch_t = {{"layer_count", c.teacher.layer_count},
                 {"head_count", c.teacher.head_count},
                 {"model_width", c.teacher.model_width},
                 {"context_length", c.teacher.context_length}};
  json arch_s = {{"layer_count", c.student.layer_count},
                 {"head_count", c.student.head_count},
                 {"model_width", c.student.model_width},
                 {"context_length", c.student.context_length}};
  return json{
      {"data",
       {{"source", c.data.source},
        {"path", c.data.path},
        {"val_fraction", c.data.val_fraction},
        {"synthetic",
         {{"entities", c.data.synthetic.entities},
          {"copy_pairs", c.data.synthetic.copy_pairs},
          {"add_pairs", c.data.synthetic.add_pairs},
          {"seed", c.data.synthetic.seed}}}}},
      {"teacher", arch_t},
      {"student", arch_s},
      {"train",
       {{"seed", c.seed},
        {"total_steps", c.total_steps},
        {"batch_size", c.batch_size},
        {"grad_accum", c.grad_accum},
        {"warmup_fraction", c.warmup_fraction},
        {"warmup_steps", c.warmup_steps},
        {"method", c.method},
        {"optimizer", c.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
        {"learning_rate", c.optimizer.lr},
        {"adam_beta1", c.optimizer.beta1},
        {"adam_beta2", c.optimizer.beta2},
        {"adam_eps", c.optimizer.eps},
        {"eval_every", c.eval_every},
        {"eval_examples", c.eval_examples}}},
      {"teacher_train",
       {{"steps", c.teacher_train.steps},
        {"learning_rate", c.teacher_train.learning_rate},
        {"plateau_patience", c.teacher_train.plateau_patience},
        {"plateau_tolerance", c.teacher_train.plateau_tolerance}}},
      {"latf",
       {{"schedule", schedule_to_string(c.ratio_schedule.kind)},
        {"beta", c.latf.beta},
        {"epsilon", c.latf.eps},
        {"delta", c.latf.delta},
        {"r_min", c.latf.r_min},
        {"fixed_ratio", c.ratio_schedule.fixed_r},
        {"end_ratio", c.ratio_schedule.end_r}}},
      {"idts",
       {{"strategy", temp_strategy_to_string(c.idts.strategy)},
        {"tau_base", c.idts.tau_base},
        {"strength", c.idts.c},
        {"sign", sign_mode_to_string(c.idts.sign_mode)},
        {"fixed_tau", c.idts.fixed_tau},
        {"score_floor", c.idts.score_floor},
        {"median_over_selected", c.median_over_selected}}},
      {"objective",
       {{"divergence", divergence_to_string(c.objective.divergence)},
        {"apply_tau_sq", c.objective.apply_tau_sq},
        {"sft_mix_weight", c.objective.sft_mix_weight}}},
      {"difficulty",
       {{"indicator", indicator_to_string(c.indicator)},
        {"topk", c.indicator_topk}}},
      {"eval",
       {{"temperature", c.eval.temperature},
        {"top_p", c.eval.top_p},
        {"max_new_tokens", c.eval.max_new_tokens},
        {"seeds", c.eval.seeds}}}};
}

const char* type_label(const json& v) {
  if (v.is_string()) return "a string";
  if (v.is_boolean()) return "a boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "an integer";
  if (v.is_number()) return "a number";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "a value";
}

bool type_compatible(const json& slot, const json& value) {
  if (slot.is_string()) return value.is_string();
  if (slot.is_boolean()) return value.is_boolean();
  if (slot.is_number_integer() || slot.is_number_unsigned()) {
    return value.is_number_integer() || value.is_number_unsigned();
  }
  if (slot.is_number_float()) return value.is_number();
  if (slot.is_array()) return value.is_array();
  return false;
}

void merge_into(json& base, const json& user, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    if (!base.contains(key)) {
      throw ConfigError("unknown config key \"" + prefix + key + "\"");
    }
    json& slot = base[key];
    if (slot.is_object()) {
      if (!value.is_object()) {
        throw ConfigError("config key \"" + prefix + key +
                          "\" must be an object");
      }
      merge_into(slot, value, prefix + key + ".");
    } else {
      if (!type_compatible(slot, value)) {
        throw ConfigError("config key \"" + prefix + key + "\" expects " +
                          type_label(slot) + ", got " + type_label(value));
      }
      slot = value;
    }
  }
}

void apply_override(json& doc, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override \"" + text + "\" is not of the form key=value");
  }
  const std::string path = text.substr(0, eq);
  const std::string value_text = text.substr(eq + 1);

  json* slot = &doc;
  size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty() || !slot->is_object() || !slot->contains(part)) {
      throw ConfigError("unknown config key \"" + path + "\"");
    }
    slot = &(*slot)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (slot->is_object()) {
    throw ConfigError("cannot assign to config section \"" + path + "\"");
  }
  if (slot->is_string()) {
    *slot = value_text;  // strings are taken verbatim, never JSON-parsed
    return;
  }
  json value = json::parse(value_text, nullptr, false);
  if (value.is_discarded() || !type_compatible(*slot, value)) {
    throw ConfigError("config key \"" + path + "\" expects " +
                      type_label(*slot) + ", got \"" + value_text + "\"");
  }
  *slot = value;
}

uint64_t read_u64(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  const long long raw = v.get<long long>();
  if (raw < 0) throw ConfigError("config key \"" + key + "\" must be >= 0");
  return static_cast<uint64_t>(raw);
}

template <typename Fn>
auto named(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key \"" + key + "\": " + e.what());
  }
}

RunConfig extract(const json& doc) {
  RunConfig c;
  const json& data = doc.at("data");
  c.data.source = data.at("source").get<std::string>();
  c.data.path = data.at("path").get<std::string>();
  c.data.val_fraction = data.at("val_fraction").get<double>();
  const json& syn = data.at("synthetic");
  c.data.synthetic.entities = syn.at("entities").get<int>();
  c.data.synthetic.copy_pairs = syn.at("copy_pairs").get<int>();
  c.data.synthetic.add_pairs = syn.at("add_pairs").get<int>();
  c.data.synthetic.seed = read_u64(syn.at("seed"), "data.synthetic.seed");
  c.data.synthetic.val_fraction = c.data.val_fraction;

  auto read_arch = [](const json& a) {
    return ArchConfig{a.at("layer_count").get<int>(),
                      a.at("head_count").get<int>(),
                      a.at("model_width").get<int>(),
                      a.at("context_length").get<int>()};
  };
  c.teacher = read_arch(doc.at("teacher"));
  c.student = read_arch(doc.at("student"));

  const json& train = doc.at("train");
  c.seed = read_u64(train.at("seed"), "train.seed");
  c.total_steps = train.at("total_steps").get<long>();
  c.batch_size = train.at("batch_size").get<int>();
  c.grad_accum = train.at("grad_accum").get<int>();
  c.warmup_fraction = train.at("warmup_fraction").get<double>();
  c.warmup_steps = train.at("warmup_steps").get<long>();
  c.method = train.at("method").get<std::string>();
  const std::string opt = train.at("optimizer").get<std::string>();
  if (opt == "adam") {
    c.optimizer.kind = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    c.optimizer.kind = OptimizerKind::Sgd;
  } else {
    throw ConfigError(
        "config key \"train.optimizer\" must be \"adam\" or \"sgd\"");
  }
  c.optimizer.lr = train.at("learning_rate").get<double>();
  c.optimizer.beta1 = train.at("adam_beta1").get<double>();
  c.optimizer.beta2 = train.at("adam_beta2").get<double>();
  c.optimizer.eps = train.at("adam_eps").get<double>();
  c.eval_every = train.at("eval_every").get<long>();
  c.eval_examples = train.at("eval_examples").get<int>();

  const json& tt = doc.at("teacher_train");
  c.teacher_train.steps = tt.at("steps").get<long>();
  c.teacher_train.learning_rate = tt.at("learning_rate").get<double>();
  c.teacher_train.plateau_patience = tt.at("plateau_patience").get<long>();
  c.teacher_train.plateau_tolerance = tt.at("plateau_tolerance").get<double>();

  const json& latf = doc.at("latf");
  c.ratio_schedule.kind = named("latf.schedule", [&] {
    return schedule_from_string(latf.at("schedule").get<std::string>());
  });
  c.latf.beta = latf.at("beta").get<double>();
  c.latf.eps = latf.at("epsilon").get<double>();
  c.latf.delta = latf.at("delta").get<double>();
  c.latf.r_min = latf.at("r_min").get<double>();
  c.ratio_schedule.fixed_r = latf.at("fixed_ratio").get<double>();
  c.ratio_schedule.end_r = latf.at("end_ratio").get<double>();

  const json& idts = doc.at("idts");
  c.idts.strategy = named("idts.strategy", [&] {
    return temp_strategy_from_string(idts.at("strategy").get<std::string>());
  });
  c.idts.tau_base = idts.at("tau_base").get<double>();
  c.idts.c = idts.at("strength").get<double>();
  c.idts.sign_mode = named("idts.sign", [&] {
    return sign_mode_from_string(idts.at("sign").get<std::string>());
  });
  c.idts.fixed_tau = idts.at("fixed_tau").get<double>();
  c.idts.score_floor = idts.at("score_floor").get<double>();
  c.median_over_selected = idts.at("median_over_selected").get<bool>();

  const json& obj = doc.at("objective");
  c.objective.divergence = named("objective.divergence", [&] {
    return divergence_from_string(obj.at("divergence").get<std::string>());
  });
  c.objective.apply_tau_sq = obj.at("apply_tau_sq").get<bool>();
  c.objective.sft_mix_weight = obj.at("sft_mix_weight").get<double>();

  const json& diff = doc.at("difficulty");
  c.indicator = named("difficulty.indicator", [&] {
    return indicator_from_string(diff.at("indicator").get<std::string>());
  });
  c.indicator_topk = diff.at("topk").get<int>();

  const json& ev = doc.at("eval");
  c.eval.temperature = ev.at("temperature").get<double>();
  c.eval.top_p = ev.at("top_p").get<double>();
  c.eval.max_new_tokens = ev.at("max_new_tokens").get<int>();
  c.eval.seeds.clear();
  for (const auto& s : ev.at("seeds")) {
    if (!s.is_number_integer() && !s.is_number_unsigned()) {
      throw ConfigError("config key \"eval.seeds\" must hold integers");
    }
    c.eval.seeds.push_back(read_u64(s, "eval.seeds"));
  }
  return c;
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

long RunConfig::resolved_warmup_steps() const {
  if (warmup_steps >= 0) return warmup_steps;
  return std::lround(warmup_fraction * static_cast<double>(total_steps));
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides) {
  json user = json::parse(json_text, nullptr, false);
  if (user.is_discarded()) {
    throw ConfigError("config is not valid JSON");
  }
  if (!user.is_object()) {
    throw ConfigError("config root must be an object");
  }
  json doc = config_to_doc(RunConfig{});
  merge_into(doc, user, "");
  for (const auto& ov : overrides) apply_override(doc, ov);
  RunConfig c = extract(doc);
  validate_run_config(c);
  return c;
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), overrides);
}

std::string run_config_to_json(const RunConfig& config) {
  return config_to_doc(config).dump(2) + "\n";
}

void validate_run_config(const RunConfig& c) {
  check(c.data.source == "synthetic" || c.data.source == "jsonl",
        "data.source must be \"synthetic\" or \"jsonl\"");
  check(c.data.source != "jsonl" || !c.data.path.empty(),
        "data.path is required when data.source is \"jsonl\"");
  check(c.data.val_fraction >= 0.0 && c.data.val_fraction <= 0.9,
        "data.val_fraction must be in [0, 0.9]");
  check(c.data.synthetic.entities >= 1, "data.synthetic.entities must be >= 1");
  check(c.data.synthetic.copy_pairs >= 0,
        "data.synthetic.copy_pairs must be >= 0");
  check(c.data.synthetic.add_pairs >= 0,
        "data.synthetic.add_pairs must be >= 0");

  auto check_arch = [](const ArchConfig& a, const std::string& who) {
    check(a.layer_count >= 1, who + ".layer_count must be >= 1");
    check(a.head_count >= 1, who + ".head_count must be >= 1");
    check(a.model_width >= 1, who + ".model_width must be >= 1");
    check(a.model_width % a.head_count == 0,
          who + ".model_width must be divisible by " + who + ".head_count");
    check(a.context_length >= 4, who + ".context_length must be >= 4");
  };
  check_arch(c.teacher, "teacher");
  check_arch(c.student, "student");

  check(c.total_steps >= 1, "train.total_steps must be >= 1");
  check(c.batch_size >= 1, "train.batch_size must be >= 1");
  check(c.grad_accum >= 1, "train.grad_accum must be >= 1");
  check(std::isfinite(c.optimizer.lr) && c.optimizer.lr > 0.0,
        "train.learning_rate must be > 0");
  check(c.warmup_fraction >= 0.0 && c.warmup_fraction < 1.0,
        "train.warmup_fraction must be in [0, 1)");
  check(c.warmup_steps >= -1, "train.warmup_steps must be >= -1");
  check(c.method == "adakd" || c.method == "plain_rkd",
        "train.method must be \"adakd\" or \"plain_rkd\"");
  check(c.optimizer.beta1 >= 0.0 && c.optimizer.beta1 < 1.0,
        "train.adam_beta1 must be in [0, 1)");
  check(c.optimizer.beta2 >= 0.0 && c.optimizer.beta2 < 1.0,
        "train.adam_beta2 must be in [0, 1)");
  check(c.optimizer.eps > 0.0, "train.adam_eps must be > 0");
  check(c.eval_every >= 0, "train.eval_every must be >= 0");
  check(c.eval_examples >= 1, "train.eval_examples must be >= 1");
  check(c.total_steps > c.resolved_warmup_steps(),
        "train.total_steps must exceed the resolved warm-up (" +
            std::to_string(c.resolved_warmup_steps()) + " steps)");

  check(c.teacher_train.steps >= 0, "teacher_train.steps must be >= 0");
  check(c.teacher_train.learning_rate > 0.0,
        "teacher_train.learning_rate must be > 0");
  check(c.teacher_train.plateau_patience >= 0,
        "teacher_train.plateau_patience must be >= 0");
  check(c.teacher_train.plateau_tolerance >= 0.0,
        "teacher_train.plateau_tolerance must be >= 0");

  check(c.latf.beta > 0.0 && c.latf.beta < 1.0, "latf.beta must be in (0, 1)");
  check(c.latf.eps >= 0.0, "latf.epsilon must be >= 0");
  check(c.latf.delta > 0.0 && c.latf.delta < 1.0,
        "latf.delta must be in (0, 1)");
  check(c.latf.r_min > 0.0 && c.latf.r_min <= 1.0,
        "latf.r_min must be in (0, 1]");
  check(c.ratio_schedule.fixed_r > 0.0 && c.ratio_schedule.fixed_r <= 1.0,
        "latf.fixed_ratio must be in (0, 1]");
  check(c.ratio_schedule.end_r > 0.0 && c.ratio_schedule.end_r <= 1.0,
        "latf.end_ratio must be in (0, 1]");

  check(c.idts.tau_base > 0.0, "idts.tau_base must be > 0");
  check(c.idts.c >= 0.0, "idts.strength must be >= 0");
  check(c.idts.fixed_tau > 0.0, "idts.fixed_tau must be > 0");
  check(c.idts.score_floor > 0.0, "idts.score_floor must be > 0");

  check(c.objective.sft_mix_weight >= 0.0 && c.objective.sft_mix_weight <= 1.0,
        "objective.sft_mix_weight must be in [0, 1]");
  check(c.indicator_topk >= 1, "difficulty.topk must be >= 1");

  check(c.eval.temperature >= 0.0, "eval.temperature must be >= 0");
  check(c.eval.top_p > 0.0 && c.eval.top_p <= 1.0,
        "eval.top_p must be in (0, 1]");
  check(c.eval.max_new_tokens >= 1, "eval.max_new_tokens must be >= 1");
  check(!c.eval.seeds.empty(), "eval.seeds must not be empty");
}

}  // namespace adakd
