#include "adakd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "adakd/dist_math.hpp"
#include "adakd/metrics.hpp"

namespace adakd {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<Mat> grads_of(TinyTransformerLM& model, const Tensor& loss) {
  model.zero_grads();
  Tensor(loss).backward();
  std::vector<Mat> out;
  out.reserve(model.parameters().size());
  for (auto& [name, param] : model.parameters()) {
    out.push_back(param.has_grad()
                      ? param.grad()
                      : Mat::Zero(param.value().rows(), param.value().cols()));
  }
  return out;
}

std::ofstream open_text(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good()) {
    throw std::runtime_error("cannot write report file: " + path);
  }
  return out;
}

}  // namespace

const GroupEntry* GroupDiagnostics::find(const std::string& label) const {
  for (const GroupEntry& g : groups) {
    if (g.label == label) return &g;
  }
  return nullptr;
}

double dot_flat(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot_flat: stack sizes differ");
  }
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) {
      throw std::invalid_argument("dot_flat: shape mismatch");
    }
    total += (a[i].array() * b[i].array()).sum();
  }
  return total;
}

double norm_flat(const std::vector<Mat>& a) {
  double sq = 0.0;
  for (const Mat& m : a) sq += m.squaredNorm();
  return std::sqrt(sq);
}

double cosine_flat(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  const double na = norm_flat(a);
  const double nb = norm_flat(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot_flat(a, b) / (na * nb), -1.0, 1.0);
}

GroupDiagnostics gradient_alignment_report(
    TinyTransformerLM& student, const TinyTransformerLM& teacher,
    const std::vector<PromptResponsePair>& batch,
    const ByteTokenizer& tokenizer, const AlignmentOptions& options,
    const std::vector<double>* scores_override) {
  const int max_len = std::min(teacher.spec().context_length,
                               student.spec().context_length);

  std::vector<Tensor> student_parts;
  std::vector<Mat> teacher_parts;
  std::vector<int> targets;
  for (const PromptResponsePair& pair : batch) {
    const FramedSequence frame = training_frame(tokenizer, pair);
    const int len = static_cast<int>(frame.tokens.size());
    if (len > max_len) continue;
    std::vector<int> rows;
    for (int row = frame.first_target - 1; row + 1 < len; ++row) {
      rows.push_back(row);
      targets.push_back(frame.tokens[static_cast<size_t>(row) + 1]);
    }
    student_parts.push_back(
        row_gather(student.forward(frame.tokens, true).logits, rows));
    const Mat full = teacher.forward(frame.tokens, false).logits.value();
    Mat kept(static_cast<Eigen::Index>(rows.size()), full.cols());
    for (size_t r = 0; r < rows.size(); ++r) {
      kept.row(static_cast<Eigen::Index>(r)) = full.row(rows[r]);
    }
    teacher_parts.push_back(std::move(kept));
  }
  if (student_parts.empty()) {
    throw std::invalid_argument(
        "gradient_alignment_report: no pairs fit the context window");
  }

  Eigen::Index total_rows = 0;
  for (const Mat& m : teacher_parts) total_rows += m.rows();
  Mat teacher_rows(total_rows, teacher_parts.front().cols());
  Eigen::Index at = 0;
  for (const Mat& m : teacher_parts) {
    teacher_rows.middleRows(at, m.rows()) = m;
    at += m.rows();
  }

  const int n = static_cast<int>(total_rows);
  const std::vector<uint8_t> all_valid(static_cast<size_t>(n), 1);
  LogitBatch student_lb{concat_rows(student_parts), all_valid};
  LogitBatch teacher_lb{Tensor::constant(teacher_rows), all_valid};

  std::vector<double> scores;
  if (scores_override) {
    if (static_cast<int>(scores_override->size()) != n) {
      throw std::invalid_argument(
          "gradient_alignment_report: score override size mismatch");
    }
    scores = *scores_override;
  } else {
    scores = score_tokens(teacher_lb, student_lb, options.indicator, &targets,
                          options.indicator_topk)
                 .scores;
  }

  GroupDiagnostics report;
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  report.lower_cut = sorted[static_cast<size_t>((n + 2) / 3 - 1)];
  report.upper_cut = sorted[static_cast<size_t>((2 * n + 2) / 3 - 1)];
  report.token_labels.reserve(scores.size());
  for (double s : scores) {
    report.token_labels.push_back(s <= report.lower_cut  ? "easy"
                                  : s > report.upper_cut ? "hard"
                                                         : "mid");
  }

  const double inv_n = 1.0 / n;
  auto group_loss = [&](const std::vector<uint8_t>& mask, int count) {
    TemperatureAssignment temps;  // one shared temperature per kept token
    temps.taus.assign(static_cast<size_t>(count), options.tau);
    temps.s_hat.assign(static_cast<size_t>(count), 0.0);
    return scale(selective_distill_sum(teacher_lb, student_lb, mask, temps,
                                       options.objective),
                 inv_n);
  };

  const std::vector<Mat> batch_grad =
      grads_of(student, group_loss(all_valid, n));
  const std::vector<Mat> sft_grad =
      grads_of(student, scale(sft_sum(student_lb, targets), inv_n));

  std::vector<double> norms;
  for (const char* label : {"hard", "mid", "easy"}) {
    std::vector<uint8_t> mask(static_cast<size_t>(n), 0);
    int count = 0;
    for (size_t i = 0; i < report.token_labels.size(); ++i) {
      if (report.token_labels[i] == label) {
        mask[i] = 1;
        ++count;
      }
    }
    if (count == 0) continue;  // empty groups are absent, not an error
    const std::vector<Mat> grad = grads_of(student, group_loss(mask, count));
    GroupEntry entry;
    entry.label = label;
    entry.token_count = count;
    entry.cos_to_batch = cosine_flat(grad, batch_grad);
    entry.cos_to_sft = cosine_flat(grad, sft_grad);
    entry.norm_share = norm_flat(grad);  // rescaled to a share below
    norms.push_back(entry.norm_share);
    report.groups.push_back(std::move(entry));
  }
  const double norm_total =
      std::accumulate(norms.begin(), norms.end(), 0.0);
  for (GroupEntry& g : report.groups) {
    g.norm_share = norm_total > 0.0 ? g.norm_share / norm_total : 0.0;
  }
  student.zero_grads();
  return report;
}

GroupDiagnostics entropy_histogram_report(const Mat& teacher_logits,
                                          const Mat& student_logits,
                                          const TemperatureAssignment& temps,
                                          int buckets) {
  if (teacher_logits.rows() != student_logits.rows() ||
      teacher_logits.cols() != student_logits.cols()) {
    throw std::invalid_argument(
        "entropy_histogram_report: logit shapes differ");
  }
  if (teacher_logits.rows() == 0) {
    throw std::invalid_argument("entropy_histogram_report: empty batch");
  }
  if (temps.taus.size() != static_cast<size_t>(student_logits.rows())) {
    throw std::invalid_argument(
        "entropy_histogram_report: one temperature per token required");
  }
  if (buckets < 1) {
    throw std::invalid_argument("entropy_histogram_report: buckets >= 1");
  }

  const int n = static_cast<int>(student_logits.rows());
  const double ln_v = std::log(static_cast<double>(student_logits.cols()));

  const std::vector<double> scores =
      hellinger_row_scores(teacher_logits, student_logits);
  std::vector<double> before(static_cast<size_t>(n));
  std::vector<double> after(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec s_row = student_logits.row(i).transpose();
    before[static_cast<size_t>(i)] =
        entropy(softmax_with_temperature(s_row, 1.0).values);
    after[static_cast<size_t>(i)] = entropy(
        softmax_with_temperature(s_row, temps.taus[static_cast<size_t>(i)])
            .values);
  }

  GroupDiagnostics report;
  const double median = median_of(scores);
  report.lower_cut = median;
  report.upper_cut = median;
  for (double s : scores) {
    report.token_labels.push_back(s > median ? "hard" : "easy");
  }
  report.bucket_edges.resize(static_cast<size_t>(buckets) + 1);
  for (int b = 0; b <= buckets; ++b) {
    report.bucket_edges[static_cast<size_t>(b)] = ln_v * b / buckets;
  }
  auto bucket_of = [&](double h) {
    const int raw = static_cast<int>(std::floor(h / ln_v * buckets));
    return static_cast<size_t>(std::clamp(raw, 0, buckets - 1));
  };

  for (const char* label : {"hard", "easy"}) {
    GroupEntry entry;
    entry.label = label;
    entry.hist_before.assign(static_cast<size_t>(buckets), 0);
    entry.hist_after.assign(static_cast<size_t>(buckets), 0);
    double sum_before = 0.0;
    double sum_after = 0.0;
    for (int i = 0; i < n; ++i) {
      if (report.token_labels[static_cast<size_t>(i)] != label) continue;
      ++entry.token_count;
      sum_before += before[static_cast<size_t>(i)];
      sum_after += after[static_cast<size_t>(i)];
      ++entry.hist_before[bucket_of(before[static_cast<size_t>(i)])];
      ++entry.hist_after[bucket_of(after[static_cast<size_t>(i)])];
    }
    if (entry.token_count == 0) continue;
    entry.entropy_before_mean = sum_before / entry.token_count;
    entry.entropy_after_mean = sum_after / entry.token_count;
    report.groups.push_back(std::move(entry));
  }
  return report;
}

std::vector<double> hellinger_row_scores(const Mat& teacher_logits,
                                         const Mat& student_logits) {
  if (teacher_logits.rows() != student_logits.rows() ||
      teacher_logits.cols() != student_logits.cols()) {
    throw std::invalid_argument("hellinger_row_scores: logit shapes differ");
  }
  std::vector<double> scores(static_cast<size_t>(teacher_logits.rows()));
  for (Eigen::Index i = 0; i < teacher_logits.rows(); ++i) {
    const Vec p =
        softmax_with_temperature(teacher_logits.row(i).transpose(), 1.0)
            .values;
    const Vec q =
        softmax_with_temperature(student_logits.row(i).transpose(), 1.0)
            .values;
    scores[static_cast<size_t>(i)] = hellinger_distance(p, q);
  }
  return scores;
}

PooledBatchRows pooled_batch_rows(const TinyTransformerLM& teacher,
                                  const TinyTransformerLM& student,
                                  const std::vector<PromptResponsePair>& batch,
                                  const ByteTokenizer& tokenizer) {
  const int max_len = std::min(teacher.spec().context_length,
                               student.spec().context_length);
  std::vector<Mat> teacher_parts;
  std::vector<Mat> student_parts;
  PooledBatchRows out;
  for (const PromptResponsePair& pair : batch) {
    const FramedSequence frame = training_frame(tokenizer, pair);
    const int len = static_cast<int>(frame.tokens.size());
    if (len > max_len) continue;
    const Mat t_full = teacher.forward(frame.tokens, false).logits.value();
    const Mat s_full = student.forward(frame.tokens, false).logits.value();
    const int first = frame.first_target - 1;
    const int rows = len - 1 - first;
    teacher_parts.push_back(t_full.middleRows(first, rows));
    student_parts.push_back(s_full.middleRows(first, rows));
    for (int row = first; row + 1 < len; ++row) {
      out.targets.push_back(frame.tokens[static_cast<size_t>(row) + 1]);
    }
  }
  if (teacher_parts.empty()) {
    throw std::invalid_argument(
        "pooled_batch_rows: no pairs fit the context window");
  }
  const Eigen::Index total =
      static_cast<Eigen::Index>(out.targets.size());
  out.teacher_rows.resize(total, teacher_parts.front().cols());
  out.student_rows.resize(total, student_parts.front().cols());
  Eigen::Index at = 0;
  for (size_t i = 0; i < teacher_parts.size(); ++i) {
    out.teacher_rows.middleRows(at, teacher_parts[i].rows()) =
        teacher_parts[i];
    out.student_rows.middleRows(at, student_parts[i].rows()) =
        student_parts[i];
    at += teacher_parts[i].rows();
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("fit_line: size mismatch (" +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two points");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) {
    throw std::invalid_argument("fit_line: x values are all identical");
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = static_cast<int>(x.size());
  return fit;
}

double logit_grad_sq(const Vec& teacher_logits, const Vec& student_logits,
                     double tau, const DistillObjective& objective) {
  if (teacher_logits.size() != student_logits.size()) {
    throw std::invalid_argument("logit_grad_sq: logit size mismatch");
  }
  Mat t_row(1, teacher_logits.size());
  Mat s_row(1, student_logits.size());
  t_row.row(0) = teacher_logits.transpose();
  s_row.row(0) = student_logits.transpose();
  LogitBatch teacher_lb{Tensor::constant(t_row), {1}};
  LogitBatch student_lb{Tensor::leaf(s_row), {1}};
  TemperatureAssignment temps;
  temps.taus = {tau};
  temps.s_hat = {0.0};
  Tensor loss = selective_distill_sum(teacher_lb, student_lb, {1}, temps,
                                      objective);
  loss.backward();
  return student_lb.logits.grad().squaredNorm();
}

void write_alignment_report(const GroupDiagnostics& report,
                            const std::string& text_path,
                            const std::string& csv_path) {
  std::ofstream text = open_text(text_path);
  text << "gradient alignment by difficulty group\n";
  text << "tokens: " << report.token_labels.size() << "\n";
  text << "boundaries: easy <= " << fmt(report.lower_cut) << ", hard > "
       << fmt(report.upper_cut) << "\n";
  for (const GroupEntry& g : report.groups) {
    text << "group " << g.label << ": tokens=" << g.token_count
         << " norm_share=" << fmt(g.norm_share)
         << " cos_to_batch=" << fmt(g.cos_to_batch)
         << " cos_to_sft=" << fmt(g.cos_to_sft) << "\n";
  }
  text.close();

  MetricsWriter csv(csv_path, {"group", "token_count", "norm_share",
                               "cos_to_batch", "cos_to_sft"});
  for (const GroupEntry& g : report.groups) {
    csv.append({g.label, MetricsWriter::cell(long{g.token_count}),
                MetricsWriter::cell(g.norm_share),
                MetricsWriter::cell(g.cos_to_batch),
                MetricsWriter::cell(g.cos_to_sft)});
  }
}

void write_entropy_report(const GroupDiagnostics& report,
                          const std::string& text_path,
                          const std::string& csv_path) {
  std::ofstream text = open_text(text_path);
  text << "student entropy before/after temperature assignment\n";
  text << "tokens: " << report.token_labels.size() << "\n";
  text << "median difficulty: " << fmt(report.lower_cut) << "\n";
  for (const GroupEntry& g : report.groups) {
    text << "group " << g.label << ": tokens=" << g.token_count
         << " mean_before=" << fmt(g.entropy_before_mean)
         << " mean_after=" << fmt(g.entropy_after_mean) << "\n";
  }
  const GroupEntry* hard = report.find("hard");
  const GroupEntry* easy = report.find("easy");
  if (hard && easy) {
    text << "gap before (hard - easy): "
         << fmt(hard->entropy_before_mean - easy->entropy_before_mean) << "\n";
    text << "gap after  (hard - easy): "
         << fmt(hard->entropy_after_mean - easy->entropy_after_mean) << "\n";
  }
  text.close();

  MetricsWriter csv(csv_path, {"group", "bucket_low", "bucket_high",
                               "count_before", "count_after"});
  for (const GroupEntry& g : report.groups) {
    for (size_t b = 0; b + 1 < report.bucket_edges.size(); ++b) {
      csv.append({g.label, MetricsWriter::cell(report.bucket_edges[b]),
                  MetricsWriter::cell(report.bucket_edges[b + 1]),
                  MetricsWriter::cell(g.hist_before[b]),
                  MetricsWriter::cell(g.hist_after[b])});
    }
  }
}

void write_eval_report(const EvalReport& report, const std::string& text_path,
                       const std::string& csv_path) {
  std::ofstream text = open_text(text_path);
  text << "generation quality (LCS F-measure on whitespace tokens)\n";
  text << "examples: " << report.per_example_f.size() << "\n";
  text << "seeds: " << report.per_seed_mean.size() << "\n";
  text << "decode: temperature=" << fmt(report.temperature)
       << " top_p=" << fmt(report.top_p) << "\n";
  text << "mean: " << fmt(report.mean) << "\n";
  text << "std_across_seeds: " << fmt(report.std_across_seeds) << "\n";
  text << "per_seed_mean:";
  for (double m : report.per_seed_mean) text << " " << fmt(m);
  text << "\n";
  text << "truncated_generations: " << report.truncated_count << "\n";
  // slot for side-by-side judged comparisons; fill when a judge is wired in
  text << "judge win/tie/loss: not populated\n";
  text.close();

  MetricsWriter csv(csv_path, {"example", "f"});
  for (size_t i = 0; i < report.per_example_f.size(); ++i) {
    csv.append({MetricsWriter::cell(static_cast<long>(i)),
                MetricsWriter::cell(report.per_example_f[i])});
  }
}

}  // namespace adakd
