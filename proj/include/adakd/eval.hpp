#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adakd/dataset.hpp"
#include "adakd/model.hpp"
#include "adakd/rng.hpp"
#include "adakd/run_config.hpp"
#include "adakd/tokenizer.hpp"

namespace adakd {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

std::vector<std::string> whitespace_tokens(const std::string& text);

/// Longest-common-subsequence F-measure: P = LCS/|candidate|,
/// R = LCS/|reference|, F = 2PR/(P+R), all 0 when the LCS is empty.
/// The reference must be non-empty.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

struct GenerationResult {
  std::vector<int> token_ids;  // continuation; stop token excluded
  bool truncated = false;      // ran into max_new_tokens or the context edge
};

/// Ancestral sampling: per-step softmax at the configured temperature over
/// the top-p nucleus (probability-sorted, ties broken toward lower ids).
/// temperature 0 decodes greedily. Stops at EOS; running out of room sets
/// `truncated` instead of failing.
GenerationResult generate(const TinyTransformerLM& model,
                          const std::vector<int>& prompt_ids,
                          const EvalConfig& decode, Rng& rng);

struct EvalReport {
  std::vector<double> per_example_f;  // averaged over seeds, one per example
  std::vector<double> per_seed_mean;  // one per seed, averaged over examples
  double mean = 0.0;                  // average of per_example_f
  double std_across_seeds = 0.0;      // population std of per_seed_mean
  double temperature = 0.0;
  double top_p = 0.0;
  int truncated_count = 0;
};

/// One generated response per (example, seed), scored on whitespace tokens
/// of the detokenized texts. Examples use independent random streams, so the
/// report does not depend on evaluation order.
EvalReport evaluate_model(const TinyTransformerLM& model,
                          const std::vector<PromptResponsePair>& eval_set,
                          const ByteTokenizer& tokenizer,
                          const EvalConfig& decode);

/// Same aggregation driven by an arbitrary text generator (used to test the
/// scoring pipeline itself against known outputs).
using ResponseGenerator = std::function<std::string(
    const PromptResponsePair& example, size_t example_index, uint64_t seed)>;

EvalReport evaluate_with_generator(
    const std::vector<PromptResponsePair>& eval_set,
    const std::vector<uint64_t>& seeds, const ResponseGenerator& generate_text);

}  // namespace adakd
