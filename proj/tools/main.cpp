#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adakd/analysis.hpp"
#include "adakd/checkpoint.hpp"
#include "adakd/dataset.hpp"
#include "adakd/eval.hpp"
#include "adakd/idts.hpp"
#include "adakd/run_config.hpp"
#include "adakd/tokenizer.hpp"
#include "adakd/trainer.hpp"
#include "selfcheck.hpp"

namespace {

using adakd::RunConfig;
using json = nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::optional<long long> seed;
  bool force = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path,
                  "JSON run configuration file (defaults apply without it)")
      ->check(CLI::ExistingFile);
  sub->add_option("--set", args.sets,
                  "dotted-path override, e.g. --set idts.strength=0.0 "
                  "(repeatable, last wins)");
  sub->add_option("--out", args.out_dir, "run output directory");
  sub->add_option("--seed", args.seed, "shorthand for --set train.seed=N");
  sub->add_flag("--force", args.force,
                "allow writing into a completed run directory");
}

std::string iso_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string resolve_out_dir(const CommonArgs& args, const char* command) {
  if (!args.out_dir.empty()) return args.out_dir;
  const char* root = std::getenv("ADAKD_OUT_ROOT");
  return std::string(root && *root ? root : "runs") + "/" + command;
}

RunConfig resolve_config(const CommonArgs& args) {
  std::vector<std::string> sets = args.sets;
  if (args.seed) sets.push_back("train.seed=" + std::to_string(*args.seed));
  if (args.config_path.empty()) return adakd::parse_run_config("{}", sets);
  return adakd::load_run_config(args.config_path, sets);
}

adakd::Dataset load_data(const RunConfig& config,
                         const adakd::ByteTokenizer& tokenizer) {
  if (config.data.source == "synthetic") {
    return adakd::make_synthetic_corpus(tokenizer, config.data.synthetic);
  }
  return adakd::load_dataset(config.data.path, tokenizer,
                             config.data.val_fraction);
}

/// Opens a run directory: refuses a directory holding a completed run unless
/// forced, then records the resolved config snapshot and a manifest stub
/// before any work starts.
class RunDir {
 public:
  RunDir(const std::string& path, const char* command, const RunConfig& config,
         const std::vector<std::string>& argv, bool force)
      : path_(path) {
    namespace fs = std::filesystem;
    const std::string manifest_path = path_ + "/manifest.json";
    if (fs::exists(manifest_path) && !force) {
      bool completed = true;  // unreadable manifests count as unknown state
      try {
        std::ifstream in(manifest_path);
        completed = json::parse(in).value("completed", true);
      } catch (...) {
      }
      if (completed) {
        throw std::runtime_error(
            "output directory holds a completed run: " + path_ +
            " (pass --force to overwrite)");
      }
    }
    fs::create_directories(path_);
    std::ofstream snapshot(path_ + "/config.json", std::ios::trunc);
    snapshot << adakd::run_config_to_json(config);
    snapshot.close();

    manifest_["command"] = command;
    manifest_["argv"] = argv;
    manifest_["version"] = kVersion;
    manifest_["seed"] = config.seed;
    manifest_["started_utc"] = iso_utc_now();
    manifest_["completed"] = false;
    manifest_["outputs"] = json::array({"config.json"});
    flush();
  }

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

  void add_output(const std::string& name) { manifest_["outputs"].push_back(name); }

  void finish() {
    manifest_["finished_utc"] = iso_utc_now();
    manifest_["completed"] = true;
    flush();
  }

 private:
  void flush() {
    std::ofstream out(path_ + "/manifest.json", std::ios::trunc);
    out << manifest_.dump(2) << "\n";
  }

  std::string path_;
  json manifest_;
};

std::vector<std::string> collect_argv(int argc, char** argv) {
  return std::vector<std::string>(argv, argv + argc);
}

int cmd_train_teacher(const CommonArgs& args,
                      const std::vector<std::string>& argv) {
  const RunConfig config = resolve_config(args);
  adakd::ByteTokenizer tokenizer;
  const adakd::Dataset data = load_data(config, tokenizer);
  RunDir run(resolve_out_dir(args, "train-teacher"), "train-teacher", config,
             argv, args.force);

  adakd::TeacherResult result = adakd::train_teacher(
      config, data, tokenizer, run.file("metrics.csv"));
  adakd::save_checkpoint(
      run.file("teacher.bin"), result.model,
      adakd::CheckpointMeta{adakd::config_fingerprint(config), "teacher"});
  run.add_output("metrics.csv");
  run.add_output("teacher.bin");
  run.finish();

  std::cout << "train-teacher: steps=" << result.steps_run
            << " final_loss=" << result.final_loss
            << " plateau_stopped=" << (result.plateau_stopped ? 1 : 0)
            << " out=" << run.path() << "\n";
  return 0;
}

int cmd_distill(const CommonArgs& args, const std::string& teacher_path,
                const std::vector<std::string>& argv) {
  const RunConfig config = resolve_config(args);
  adakd::ByteTokenizer tokenizer;
  const adakd::Dataset data = load_data(config, tokenizer);
  adakd::LoadedCheckpoint teacher = adakd::load_checkpoint(teacher_path);
  RunDir run(resolve_out_dir(args, "distill"), "distill", config, argv,
             args.force);

  adakd::DistillResult result = adakd::run_distillation(
      config, teacher.model, data, tokenizer, run.path());
  run.add_output("metrics.csv");
  run.add_output("student_mid.bin");
  run.add_output("student_best.bin");
  run.add_output("student_final.bin");
  run.finish();

  std::cout << "distill: method=" << config.method
            << " steps=" << result.steps_run
            << " warmup=" << result.resolved_warmup
            << " skipped=" << result.skipped_over_context
            << " final_val_rouge=" << result.final_val_f
            << " best_val_rouge=" << result.best_val_f << "@"
            << result.best_step << " out=" << run.path() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::vector<std::string>& argv) {
  const RunConfig config = resolve_config(args);
  adakd::ByteTokenizer tokenizer;
  const adakd::Dataset data = load_data(config, tokenizer);
  adakd::LoadedCheckpoint student = adakd::load_checkpoint(checkpoint_path);
  RunDir run(resolve_out_dir(args, "eval"), "eval", config, argv, args.force);

  std::vector<adakd::PromptResponsePair> eval_set;
  for (size_t i = 0; i < data.validation.size() &&
                     i < static_cast<size_t>(config.eval_examples);
       ++i) {
    eval_set.push_back(data.validation[i]);
  }
  const adakd::EvalReport report =
      adakd::evaluate_model(student.model, eval_set, tokenizer, config.eval);
  adakd::write_eval_report(report, run.file("eval.txt"), run.file("eval.csv"));
  run.add_output("eval.txt");
  run.add_output("eval.csv");
  run.finish();

  std::cout << "eval: examples=" << report.per_example_f.size()
            << " seeds=" << report.per_seed_mean.size()
            << " mean_rouge=" << report.mean
            << " std=" << report.std_across_seeds
            << " truncated=" << report.truncated_count
            << " out=" << run.path() << "\n";
  return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& checkpoint_path,
                const std::string& teacher_path, const std::string& report,
                const std::vector<std::string>& argv) {
  const RunConfig config = resolve_config(args);
  adakd::ByteTokenizer tokenizer;
  const adakd::Dataset data = load_data(config, tokenizer);
  adakd::LoadedCheckpoint student = adakd::load_checkpoint(checkpoint_path);
  adakd::LoadedCheckpoint teacher = adakd::load_checkpoint(teacher_path);
  RunDir run(resolve_out_dir(args, "analyze"), "analyze", config, argv,
             args.force);

  // diagnostics run on a fixed training prefix so reruns see the same batch
  const size_t batch_len =
      std::min<size_t>(data.train.size(),
                       static_cast<size_t>(config.batch_size) * 4);
  const std::vector<adakd::PromptResponsePair> batch(
      data.train.begin(), data.train.begin() + static_cast<long>(batch_len));

  if (report == "alignment" || report == "both") {
    adakd::AlignmentOptions options;
    options.objective = config.objective;
    options.indicator = config.indicator;
    options.indicator_topk = config.indicator_topk;
    const adakd::GroupDiagnostics diag = adakd::gradient_alignment_report(
        student.model, teacher.model, batch, tokenizer, options);
    adakd::write_alignment_report(diag, run.file("alignment.txt"),
                                  run.file("alignment.csv"));
    run.add_output("alignment.txt");
    run.add_output("alignment.csv");
  }
  if (report == "entropy" || report == "both") {
    const adakd::PooledBatchRows rows = adakd::pooled_batch_rows(
        teacher.model, student.model, batch, tokenizer);
    const adakd::TemperatureAssignment temps = adakd::assign_temperatures(
        adakd::normalize_scores(
            adakd::hellinger_row_scores(rows.teacher_rows, rows.student_rows),
            config.idts.score_floor),
        config.idts);
    const adakd::GroupDiagnostics diag = adakd::entropy_histogram_report(
        rows.teacher_rows, rows.student_rows, temps);
    adakd::write_entropy_report(diag, run.file("entropy.txt"),
                                run.file("entropy.csv"));
    run.add_output("entropy.txt");
    run.add_output("entropy.csv");
  }
  run.finish();

  std::cout << "analyze: report=" << report << " tokens_batch=" << batch_len
            << " out=" << run.path() << "\n";
  return 0;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const adakd::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"token-adaptive knowledge distillation toolkit"};
  app.require_subcommand(1);
  const std::vector<std::string> argv_echo = collect_argv(argc, argv);

  CommonArgs teacher_args;
  CLI::App* train_teacher =
      app.add_subcommand("train-teacher", "train a teacher model");
  add_common(train_teacher, teacher_args);

  CommonArgs distill_args;
  std::string distill_teacher;
  CLI::App* distill =
      app.add_subcommand("distill", "distill a student from a teacher");
  add_common(distill, distill_args);
  distill->add_option("--teacher", distill_teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);

  CommonArgs eval_args;
  std::string eval_checkpoint;
  CLI::App* eval =
      app.add_subcommand("eval", "score a checkpoint on the validation split");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_checkpoint, "student checkpoint")
      ->required()
      ->check(CLI::ExistingFile);

  CommonArgs analyze_args;
  std::string analyze_checkpoint;
  std::string analyze_teacher;
  std::string analyze_report = "both";
  CLI::App* analyze = app.add_subcommand(
      "analyze", "gradient-alignment and entropy diagnostics");
  add_common(analyze, analyze_args);
  analyze->add_option("--checkpoint", analyze_checkpoint, "student checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--teacher", analyze_teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--report", analyze_report, "which report to emit")
      ->check(CLI::IsMember({"alignment", "entropy", "both"}));

  CLI::App* selfcheck = app.add_subcommand(
      "selfcheck", "fast invariant sweep over the numeric core");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits clean, bad usage exits 2
  }

  if (selfcheck->parsed()) return adakd::run_selfcheck(std::cout);
  if (train_teacher->parsed()) {
    return guarded([&] { return cmd_train_teacher(teacher_args, argv_echo); });
  }
  if (distill->parsed()) {
    return guarded(
        [&] { return cmd_distill(distill_args, distill_teacher, argv_echo); });
  }
  if (eval->parsed()) {
    return guarded(
        [&] { return cmd_eval(eval_args, eval_checkpoint, argv_echo); });
  }
  if (analyze->parsed()) {
    return guarded([&] {
      return cmd_analyze(analyze_args, analyze_checkpoint, analyze_teacher,
                         analyze_report, argv_echo);
    });
  }
  return 2;
}
