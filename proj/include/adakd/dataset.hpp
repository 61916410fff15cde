#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adakd/tokenizer.hpp"

namespace adakd {

struct PromptResponsePair {
  std::string prompt_text;
  std::string response_text;
  std::vector<int> prompt_ids;    // tokenized, no specials
  std::vector<int> response_ids;  // tokenized, no specials; never empty
};

struct Dataset {
  std::vector<PromptResponsePair> train;
  std::vector<PromptResponsePair> validation;
  int dropped_empty = 0;  // records discarded for empty responses
};

uint64_t fnv1a_hash(const std::string& s);

/// Load line-delimited JSON records with "prompt" and "response" string
/// fields. Malformed records raise errors naming the 1-based line number;
/// empty responses are dropped (counted); an empty result is an error.
/// Validation split is deterministic by prompt hash.
Dataset load_dataset(const std::string& path, const ByteTokenizer& tokenizer,
                     double val_fraction = 0.1);

struct SyntheticConfig {
  int entities = 40;
  int copy_pairs = 60;
  int add_pairs = 60;
  uint64_t seed = 1234;
  double val_fraction = 0.1;
};

/// Templated question-answer corpus over a fixed entity/attribute world:
/// attribute lookups phrased several ways, short copy tasks, and mod-10
/// addition. Every (entity, attribute) fact keeps at least one phrasing in
/// the training split, so validation only tests paraphrase generalization.
Dataset make_synthetic_corpus(const ByteTokenizer& tokenizer,
                              const SyntheticConfig& config);

/// Write pairs as the line-delimited JSON format load_dataset reads.
void write_jsonl(const std::string& path,
                 const std::vector<PromptResponsePair>& pairs);

/// One training sequence: BOS, prompt, newline, response, EOS. Rows whose
/// target is a response token (or the closing EOS) carry loss; everything
/// before is conditioning only.
struct FramedSequence {
  std::vector<int> tokens;
  int first_target = 0;  // index into tokens of the first loss target
};

FramedSequence training_frame(const ByteTokenizer& tokenizer,
                              const PromptResponsePair& pair);

/// The conditioning prefix of training_frame: BOS, prompt, newline. Feeding
/// this to a model asks it to produce the response.
std::vector<int> prompt_frame(const ByteTokenizer& tokenizer,
                              const PromptResponsePair& pair);

}  // namespace adakd
