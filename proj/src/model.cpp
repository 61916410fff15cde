#include "adakd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace adakd {

namespace {

std::string lname(int layer, const char* suffix) {
  return "l" + std::to_string(layer) + "." + suffix;
}

Mat normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std_dev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std_dev * rng.normal();
  return m;
}

}  // namespace

TinyTransformerLM::TinyTransformerLM(const ModelSpec& spec, Rng& rng)
    : spec_(spec) {
  if (spec.vocab_size <= 0 || spec.context_length <= 0 || spec.layer_count <= 0 ||
      spec.head_count <= 0 || spec.model_width <= 0) {
    throw std::invalid_argument("TinyTransformerLM: all spec fields must be positive");
  }
  if (spec.model_width % spec.head_count != 0) {
    throw std::invalid_argument(
        "TinyTransformerLM: model_width " + std::to_string(spec.model_width) +
        " not divisible by head_count " + std::to_string(spec.head_count));
  }
  const int w = spec.model_width;
  const double std_dev = 0.02;
  auto add_param = [&](const std::string& name, Mat value) {
    params_.emplace_back(name, Tensor::leaf(std::move(value), true));
  };
  add_param("tok_emb", normal_init(rng, spec.vocab_size, w, std_dev));
  add_param("pos_emb", normal_init(rng, spec.context_length, w, std_dev));
  for (int l = 0; l < spec.layer_count; ++l) {
    add_param(lname(l, "ln1.g"), Mat::Ones(1, w));
    add_param(lname(l, "ln1.b"), Mat::Zero(1, w));
    add_param(lname(l, "attn.wq"), normal_init(rng, w, w, std_dev));
    add_param(lname(l, "attn.bq"), Mat::Zero(1, w));
    add_param(lname(l, "attn.wk"), normal_init(rng, w, w, std_dev));
    add_param(lname(l, "attn.bk"), Mat::Zero(1, w));
    add_param(lname(l, "attn.wv"), normal_init(rng, w, w, std_dev));
    add_param(lname(l, "attn.bv"), Mat::Zero(1, w));
    add_param(lname(l, "attn.wo"), normal_init(rng, w, w, std_dev));
    add_param(lname(l, "attn.bo"), Mat::Zero(1, w));
    add_param(lname(l, "ln2.g"), Mat::Ones(1, w));
    add_param(lname(l, "ln2.b"), Mat::Zero(1, w));
    add_param(lname(l, "mlp.w1"), normal_init(rng, w, 4 * w, std_dev));
    add_param(lname(l, "mlp.b1"), Mat::Zero(1, 4 * w));
    add_param(lname(l, "mlp.w2"), normal_init(rng, 4 * w, w, std_dev));
    add_param(lname(l, "mlp.b2"), Mat::Zero(1, w));
  }
  add_param("lnf.g", Mat::Ones(1, w));
  add_param("lnf.b", Mat::Zero(1, w));
  add_param("head.w", normal_init(rng, w, spec.vocab_size, std_dev));
}

Tensor& TinyTransformerLM::param(const std::string& name) {
  for (auto& [n, t] : params_)
    if (n == name) return t;
  throw std::invalid_argument("TinyTransformerLM: unknown parameter " + name);
}

const Tensor& TinyTransformerLM::param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw std::invalid_argument("TinyTransformerLM: unknown parameter " + name);
}

int64_t TinyTransformerLM::parameter_count() const {
  int64_t total = 0;
  for (const auto& [n, t] : params_) total += t.size();
  return total;
}

void TinyTransformerLM::zero_grads() {
  for (auto& [n, t] : params_) t.zero_grad();
}

void TinyTransformerLM::freeze() {
  for (auto& [n, t] : params_) t = Tensor::leaf(t.value(), false);
  frozen_ = true;
}

LogitBatch TinyTransformerLM::forward(const std::vector<int>& token_ids,
                                      bool track) const {
  if (token_ids.empty())
    throw std::invalid_argument("forward: empty token sequence");
  if (static_cast<int>(token_ids.size()) > spec_.context_length) {
    throw std::invalid_argument(
        "forward: sequence length " + std::to_string(token_ids.size()) +
        " exceeds context_length " + std::to_string(spec_.context_length));
  }
  for (size_t i = 0; i < token_ids.size(); ++i) {
    if (token_ids[i] < 0 || token_ids[i] >= spec_.vocab_size) {
      throw std::invalid_argument("forward: token id " +
                                  std::to_string(token_ids[i]) +
                                  " out of range at position " + std::to_string(i));
    }
  }
  auto P = [&](const std::string& name) -> Tensor {
    const Tensor& p = param(name);
    if (!track && p.requires_grad()) return Tensor::constant(p.value());
    return p;
  };

  const Eigen::Index t_len = static_cast<Eigen::Index>(token_ids.size());
  const int heads = spec_.head_count;
  const Eigen::Index dh = spec_.model_width / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor x = add(row_gather(P("tok_emb"), token_ids), top_rows(P("pos_emb"), t_len));
  for (int l = 0; l < spec_.layer_count; ++l) {
    Tensor h = layer_norm(x, P(lname(l, "ln1.g")), P(lname(l, "ln1.b")));
    Tensor q = add_rowvec(matmul(h, P(lname(l, "attn.wq"))), P(lname(l, "attn.bq")));
    Tensor k = add_rowvec(matmul(h, P(lname(l, "attn.wk"))), P(lname(l, "attn.bk")));
    Tensor v = add_rowvec(matmul(h, P(lname(l, "attn.wv"))), P(lname(l, "attn.bv")));
    std::vector<Tensor> head_outs;
    head_outs.reserve(heads);
    for (int hi = 0; hi < heads; ++hi) {
      Tensor qh = slice_cols(q, hi * dh, dh);
      Tensor kh = slice_cols(k, hi * dh, dh);
      Tensor vh = slice_cols(v, hi * dh, dh);
      Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt_dh);
      Tensor attn = causal_softmax(scores);
      head_outs.push_back(matmul(attn, vh));
    }
    Tensor merged = concat_cols(head_outs);
    Tensor attn_out =
        add_rowvec(matmul(merged, P(lname(l, "attn.wo"))), P(lname(l, "attn.bo")));
    x = add(x, attn_out);
    Tensor h2 = layer_norm(x, P(lname(l, "ln2.g")), P(lname(l, "ln2.b")));
    Tensor mid = gelu(add_rowvec(matmul(h2, P(lname(l, "mlp.w1"))),
                                 P(lname(l, "mlp.b1"))));
    Tensor mlp_out =
        add_rowvec(matmul(mid, P(lname(l, "mlp.w2"))), P(lname(l, "mlp.b2")));
    x = add(x, mlp_out);
  }
  Tensor fin = layer_norm(x, P("lnf.g"), P("lnf.b"));
  Tensor logits = matmul(fin, P("head.w"));
  require_finite(logits.value(), "forward logits");
  LogitBatch out;
  out.logits = logits;
  out.valid.assign(token_ids.size(), 1);
  return out;
}

LogitBatch forward_lm(const TinyTransformerLM& model,
                      const std::vector<int>& token_ids) {
  return model.forward(token_ids);
}

}  // namespace adakd
