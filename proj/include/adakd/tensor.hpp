#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace adakd {

// Row-major dense storage; 64-bit floats throughout.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

struct Node {
  Mat value;
  Mat grad;  // lazily allocated; persists across backward calls for leaves
  bool requires_grad = false;
  bool leaf = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Routes this node's gradient into its parents. Receives the node's own
  // value and accumulated gradient.
  std::function<void(const Mat&, const Mat&)> backprop;
};

}  // namespace detail

/// Reverse-mode autodiff tensor. Handles share the underlying node, so
/// copies alias the same value and gradient buffers.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Mat value, bool requires_grad = true);
  static Tensor constant(Mat value);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const;
  Mat& value_mut();  // in-place parameter updates; does not touch the graph
  bool requires_grad() const;
  bool has_grad() const;
  const Mat& grad() const;
  void zero_grad();

  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }
  double item() const;

  /// Reverse pass from a scalar. Leaf gradients accumulate across calls;
  /// interior gradients are recomputed per call.
  void backward() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(Mat value, const std::vector<Tensor>& inputs,
                        std::function<void(const Mat&, const Mat&)> backprop);
};

// ---- graph construction ----------------------------------------------------

Tensor make_op(Mat value, const std::vector<Tensor>& inputs,
               std::function<void(const Mat&, const Mat&)> backprop);

void accumulate_into(const std::shared_ptr<detail::Node>& p, const Mat& g);

// ---- elementwise / shape ops ----------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor cmul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // broadcast 1xC over rows
Tensor exp_elem(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor gelu(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);     // A * B
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // A * B^T

Tensor row_gather(const Tensor& a, const std::vector<int>& rows);
Tensor top_rows(const Tensor& a, Eigen::Index n);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index n);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_entries(const Tensor& a, const std::vector<int>& col_ids);  // Nx1

Tensor scale_rows(const Tensor& a, const Eigen::ArrayXd& w);
Tensor sum_all(const Tensor& a);

// ---- fused row-wise ops ----------------------------------------------------

/// Row-wise layer norm with learned gain/bias (1xC each).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Softmax over each row restricted to columns <= row index; masked entries
/// are exactly zero. Input must be square (attention scores).
Tensor causal_softmax(const Tensor& scores);

/// log softmax of z.row(i) / taus[i] per row; taus must be positive.
Tensor row_log_softmax(const Tensor& z, const Eigen::ArrayXd& taus);

// ---- utilities --------------------------------------------------------------

bool all_finite(const Mat& m);
void require_finite(const Mat& m, const std::string& what);
std::string shape_str(const Mat& m);

}  // namespace adakd
