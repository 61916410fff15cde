#pragma once

#include <string>
#include <unordered_map>

#include "adakd/model.hpp"

namespace adakd {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First-order optimizer over a model's parameters. Adam by default with a
/// plain-gradient (SGD) mode. Moment buffers are keyed by parameter name and
/// allocated on first step. step() consumes existing grads and leaves them
/// untouched — callers zero them.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : config_(config) {}

  const OptimizerConfig& config() const { return config_; }
  long step_count() const { return step_; }

  /// Apply one update using the gradients currently stored on the model.
  /// Throws if any trainable parameter is missing its gradient.
  void step(TinyTransformerLM& model);

 private:
  OptimizerConfig config_;
  long step_ = 0;
  std::unordered_map<std::string, Mat> m_;
  std::unordered_map<std::string, Mat> v_;
};

}  // namespace adakd
