#include "adakd/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace adakd {

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
  if (reference.empty()) {
    throw std::invalid_argument("rouge_l: empty reference");
  }
  const size_t m = candidate.size();
  const size_t n = reference.size();
  // LCS length with a rolling row
  std::vector<size_t> prev(n + 1, 0), curr(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      if (candidate[i - 1] == reference[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    std::swap(prev, curr);
  }
  const double lcs = static_cast<double>(prev[n]);
  RougeScore score;
  if (lcs == 0.0) return score;  // covers empty candidates too
  score.precision = lcs / static_cast<double>(m);
  score.recall = lcs / static_cast<double>(n);
  score.f = 2.0 * score.precision * score.recall /
            (score.precision + score.recall);
  return score;
}

GenerationResult generate(const TinyTransformerLM& model,
                          const std::vector<int>& prompt_ids,
                          const EvalConfig& decode, Rng& rng) {
  if (prompt_ids.empty()) {
    throw std::invalid_argument("generate: empty prompt");
  }
  if (decode.temperature < 0.0) {
    throw std::invalid_argument("generate: negative temperature");
  }
  const int context = model.spec().context_length;
  const int vocab = model.spec().vocab_size;
  const int eos = 1;

  GenerationResult result;
  if (static_cast<int>(prompt_ids.size()) >= context) {
    result.truncated = true;  // no room to condition and extend
    return result;
  }
  std::vector<int> seq = prompt_ids;
  for (int produced = 0; produced < decode.max_new_tokens; ++produced) {
    const Mat logits = model.forward(seq, false).logits.value();
    const Eigen::RowVectorXd z = logits.row(logits.rows() - 1);

    int picked;
    if (decode.temperature == 0.0) {
      Eigen::Index arg = 0;
      z.maxCoeff(&arg);  // Eigen returns the first (lowest-id) maximum
      picked = static_cast<int>(arg);
    } else {
      Eigen::ArrayXd p =
          ((z.array() - z.maxCoeff()) / decode.temperature).exp();
      p /= p.sum();
      std::vector<int> order(vocab);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (p[a] != p[b]) return p[a] > p[b];
        return a < b;
      });
      size_t nucleus = 0;
      double mass = 0.0;
      while (nucleus < order.size()) {
        mass += p[order[nucleus]];
        ++nucleus;
        if (mass >= decode.top_p) break;
      }
      const double u = rng.uniform() * mass;
      double cum = 0.0;
      picked = order[nucleus - 1];
      for (size_t k = 0; k < nucleus; ++k) {
        cum += p[order[k]];
        if (u < cum) {
          picked = order[k];
          break;
        }
      }
    }

    if (picked == eos) return result;
    result.token_ids.push_back(picked);
    seq.push_back(picked);
    if (static_cast<int>(seq.size()) >= context) {
      result.truncated = true;
      return result;
    }
  }
  result.truncated = true;  // budget exhausted before EOS
  return result;
}

EvalReport evaluate_with_generator(
    const std::vector<PromptResponsePair>& eval_set,
    const std::vector<uint64_t>& seeds,
    const ResponseGenerator& generate_text) {
  if (eval_set.empty()) {
    throw std::invalid_argument("evaluate: empty eval set");
  }
  if (seeds.empty()) {
    throw std::invalid_argument("evaluate: no seeds");
  }
  EvalReport report;
  report.per_example_f.assign(eval_set.size(), 0.0);
  report.per_seed_mean.assign(seeds.size(), 0.0);

  for (size_t s = 0; s < seeds.size(); ++s) {
    for (size_t e = 0; e < eval_set.size(); ++e) {
      const std::string text = generate_text(eval_set[e], e, seeds[s]);
      const RougeScore score = rouge_l(whitespace_tokens(text),
                                       whitespace_tokens(eval_set[e].response_text));
      report.per_example_f[e] += score.f;
      report.per_seed_mean[s] += score.f;
    }
    report.per_seed_mean[s] /= static_cast<double>(eval_set.size());
  }
  for (double& f : report.per_example_f) {
    f /= static_cast<double>(seeds.size());
  }
  report.mean =
      std::accumulate(report.per_example_f.begin(), report.per_example_f.end(),
                      0.0) /
      static_cast<double>(report.per_example_f.size());
  const double seed_center =
      std::accumulate(report.per_seed_mean.begin(), report.per_seed_mean.end(),
                      0.0) /
      static_cast<double>(report.per_seed_mean.size());
  double var = 0.0;
  for (double m : report.per_seed_mean) {
    var += (m - seed_center) * (m - seed_center);
  }
  report.std_across_seeds =
      std::sqrt(var / static_cast<double>(report.per_seed_mean.size()));
  return report;
}

EvalReport evaluate_model(const TinyTransformerLM& model,
                          const std::vector<PromptResponsePair>& eval_set,
                          const ByteTokenizer& tokenizer,
                          const EvalConfig& decode) {
  int truncated = 0;
  auto gen = [&](const PromptResponsePair& example, size_t example_index,
                 uint64_t seed) {
    // independent stream per (seed, example); ids >= 100 never collide with
    // the trainer's streams
    Rng rng = Rng(seed).fork(100 + example_index);
    GenerationResult out =
        generate(model, prompt_frame(tokenizer, example), decode, rng);
    if (out.truncated) ++truncated;
    return tokenizer.decode(out.token_ids);
  };
  EvalReport report = evaluate_with_generator(eval_set, decode.seeds, gen);
  report.temperature = decode.temperature;
  report.top_p = decode.top_p;
  report.truncated_count = truncated;
  return report;
}

}  // namespace adakd
