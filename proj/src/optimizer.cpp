#include "adakd/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace adakd {

void Optimizer::step(TinyTransformerLM& model) {
  for (auto& [name, p] : model.parameters()) {
    if (!p.requires_grad()) continue;
    if (!p.has_grad()) {
      throw std::runtime_error("optimizer_step: missing gradient for parameter " +
                               name);
    }
  }
  ++step_;
  for (auto& [name, p] : model.parameters()) {
    if (!p.requires_grad()) continue;
    const Mat& g = p.grad();
    Mat& value = p.value_mut();
    if (config_.kind == OptimizerKind::Sgd) {
      value -= config_.lr * g;
      continue;
    }
    Mat& m = m_[name];
    Mat& v = v_[name];
    if (m.size() == 0) {
      m = Mat::Zero(g.rows(), g.cols());
      v = Mat::Zero(g.rows(), g.cols());
    }
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    Mat mhat = m / bc1;
    Mat vhat = v / bc2;
    value.array() -= config_.lr * mhat.array() / (vhat.array().sqrt() + config_.eps);
  }
}

}  // namespace adakd
