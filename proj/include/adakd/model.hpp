#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adakd/rng.hpp"
#include "adakd/tensor.hpp"

namespace adakd {

struct ModelSpec {
  int vocab_size = 0;
  int context_length = 0;
  int layer_count = 0;
  int head_count = 0;
  int model_width = 0;
};

/// Per-position logits over the vocabulary for one token sequence. Row i
/// scores the token following prefix [0..i]. `valid` marks rows whose targets
/// participate in losses; forward passes mark every row valid, callers narrow
/// it to response positions.
struct LogitBatch {
  Tensor logits;               // [T, vocab]
  std::vector<uint8_t> valid;  // size T
};

/// Decoder-only transformer: pre-norm blocks, learned positional embeddings,
/// GELU MLP, untied output head.
class TinyTransformerLM {
 public:
  TinyTransformerLM() = default;
  TinyTransformerLM(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const {
    return params_;
  }
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  int64_t parameter_count() const;

  void zero_grads();

  /// Replace every parameter with an untracked leaf: forward passes stop
  /// building graph nodes and gradients can never reach this model.
  void freeze();
  bool frozen() const { return frozen_; }

  /// Run the model over a token sequence. With track=false the pass treats
  /// parameters as constants even on a trainable model (cheap inference).
  LogitBatch forward(const std::vector<int>& token_ids, bool track = true) const;

 private:
  ModelSpec spec_;
  std::vector<std::pair<std::string, Tensor>> params_;
  bool frozen_ = false;
};

LogitBatch forward_lm(const TinyTransformerLM& model,
                      const std::vector<int>& token_ids);

}  // namespace adakd
