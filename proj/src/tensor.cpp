#include "adakd/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace adakd {

using detail::Node;

Tensor Tensor::leaf(Mat value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->leaf = true;
  return Tensor(std::move(n));
}

Tensor Tensor::constant(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->leaf = true;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

const Mat& Tensor::value() const {
  if (!node_) throw std::logic_error("Tensor: undefined handle");
  return node_->value;
}

Mat& Tensor::value_mut() {
  if (!node_) throw std::logic_error("Tensor: undefined handle");
  return node_->value;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() != 0; }

const Mat& Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("Tensor: gradient not populated");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && node_->grad.size() != 0) node_->grad.setZero();
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar, shape " + shape_str(value()));
  return value()(0, 0);
}

void accumulate_into(const std::shared_ptr<Node>& p, const Mat& g) {
  if (!p->requires_grad) return;
  if (p->grad.size() == 0) p->grad = Mat::Zero(p->value.rows(), p->value.cols());
  p->grad += g;
}

void Tensor::backward() const {
  if (!node_) throw std::logic_error("Tensor: undefined handle");
  if (node_->value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(node_->value));

  // Iterative post-order topological sort over grad-requiring nodes.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (node_->requires_grad) {
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass; leaf gradients persist and accumulate.
  for (Node* n : topo) {
    if (!n->leaf && n->grad.size() != 0) n->grad.setZero();
  }
  if (node_->requires_grad) {
    if (node_->grad.size() == 0) node_->grad = Mat::Zero(1, 1);
    node_->grad(0, 0) += 1.0;
  }
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.size() != 0) n->backprop(n->value, n->grad);
  }
}

Tensor make_op(Mat value, const std::vector<Tensor>& inputs,
               std::function<void(const Mat&, const Mat&)> backprop) {
  bool rg = false;
  for (const auto& t : inputs) rg = rg || t.requires_grad();
  if (!rg) return Tensor::constant(std::move(value));
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  for (const auto& t : inputs)
    if (t.requires_grad()) n->parents.push_back(t.node());
  n->backprop = std::move(backprop);
  return Tensor(std::move(n));
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.value()) +
                                " vs " + shape_str(b.value()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.value() + b.value(), {a, b}, [an, bn](const Mat&, const Mat& g) {
    accumulate_into(an, g);
    accumulate_into(bn, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.value() - b.value(), {a, b}, [an, bn](const Mat&, const Mat& g) {
    accumulate_into(an, g);
    accumulate_into(bn, -g);
  });
}

Tensor cmul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "cmul");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [an, bn](const Mat&, const Mat& g) {
    accumulate_into(an, g.cwiseProduct(bn->value));
    accumulate_into(bn, g.cwiseProduct(an->value));
  });
}

Tensor scale(const Tensor& a, double c) {
  auto an = a.node();
  return make_op(a.value() * c, {a}, [an, c](const Mat&, const Mat& g) {
    accumulate_into(an, g * c);
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: expected 1x" + std::to_string(a.cols()) +
                                ", got " + shape_str(row.value()));
  auto an = a.node();
  auto rn = row.node();
  Mat v = a.value();
  v.rowwise() += row.value().row(0);
  return make_op(std::move(v), {a, row}, [an, rn](const Mat&, const Mat& g) {
    accumulate_into(an, g);
    accumulate_into(rn, g.colwise().sum());
  });
}

Tensor exp_elem(const Tensor& a) {
  auto an = a.node();
  return make_op(a.value().array().exp().matrix(), {a}, [an](const Mat& v, const Mat& g) {
    accumulate_into(an, g.cwiseProduct(v));
  });
}

Tensor log_elem(const Tensor& a) {
  if ((a.value().array() <= 0.0).any())
    throw std::invalid_argument("log_elem: non-positive entry");
  auto an = a.node();
  return make_op(a.value().array().log().matrix(), {a}, [an](const Mat&, const Mat& g) {
    accumulate_into(an, g.cwiseQuotient(an->value));
  });
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& a) {
  auto an = a.node();
  Mat v = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return make_op(std::move(v), {a}, [an](const Mat&, const Mat& g) {
    Mat d = an->value.unaryExpr([](double x) {
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    });
    accumulate_into(an, g.cwiseProduct(d));
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dims " + shape_str(a.value()) + " * " +
                                shape_str(b.value()));
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.value() * b.value(), {a, b}, [an, bn](const Mat&, const Mat& g) {
    if (an->requires_grad) accumulate_into(an, g * bn->value.transpose());
    if (bn->requires_grad) accumulate_into(bn, an->value.transpose() * g);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: inner dims " + shape_str(a.value()) + " * " +
                                shape_str(b.value()) + "^T");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.value() * b.value().transpose(), {a, b}, [an, bn](const Mat&, const Mat& g) {
    if (an->requires_grad) accumulate_into(an, g * bn->value);
    if (bn->requires_grad) accumulate_into(bn, g.transpose() * an->value);
  });
}

Tensor row_gather(const Tensor& a, const std::vector<int>& rows) {
  Mat v(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows())
      throw std::out_of_range("row_gather: row " + std::to_string(rows[i]) + " out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, rows](const Mat&, const Mat& g) {
    if (!an->requires_grad) return;
    if (an->grad.size() == 0) an->grad = Mat::Zero(an->value.rows(), an->value.cols());
    for (size_t i = 0; i < rows.size(); ++i)
      an->grad.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Tensor top_rows(const Tensor& a, Eigen::Index n) {
  if (n < 0 || n > a.rows()) throw std::out_of_range("top_rows: bad count");
  auto an = a.node();
  return make_op(a.value().topRows(n), {a}, [an, n](const Mat&, const Mat& g) {
    if (!an->requires_grad) return;
    if (an->grad.size() == 0) an->grad = Mat::Zero(an->value.rows(), an->value.cols());
    an->grad.topRows(n) += g;
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols()) throw std::out_of_range("slice_cols: bad range");
  auto an = a.node();
  return make_op(a.value().middleCols(start, n), {a}, [an, start, n](const Mat&, const Mat& g) {
    if (!an->requires_grad) return;
    if (an->grad.size() == 0) an->grad = Mat::Zero(an->value.rows(), an->value.cols());
    an->grad.middleCols(start, n) += g;
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(v), parts, [nodes](const Mat&, const Mat& g) {
    Eigen::Index at = 0;
    for (const auto& n : nodes) {
      accumulate_into(n, g.middleCols(at, n->value.cols()));
      at += n->value.cols();
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(v), parts, [nodes](const Mat&, const Mat& g) {
    Eigen::Index at = 0;
    for (const auto& n : nodes) {
      accumulate_into(n, g.middleRows(at, n->value.rows()));
      at += n->value.rows();
    }
  });
}

Tensor gather_entries(const Tensor& a, const std::vector<int>& col_ids) {
  if (static_cast<Eigen::Index>(col_ids.size()) != a.rows())
    throw std::invalid_argument("gather_entries: need one column id per row");
  Mat v(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    int c = col_ids[static_cast<size_t>(i)];
    if (c < 0 || c >= a.cols())
      throw std::out_of_range("gather_entries: column " + std::to_string(c) + " out of range");
    v(i, 0) = a.value()(i, c);
  }
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, col_ids](const Mat&, const Mat& g) {
    if (!an->requires_grad) return;
    if (an->grad.size() == 0) an->grad = Mat::Zero(an->value.rows(), an->value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      an->grad(i, col_ids[static_cast<size_t>(i)]) += g(i, 0);
  });
}

Tensor scale_rows(const Tensor& a, const Eigen::ArrayXd& w) {
  if (w.size() != a.rows()) throw std::invalid_argument("scale_rows: weight count mismatch");
  Mat v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) *= w[i];
  auto an = a.node();
  Eigen::ArrayXd wc = w;
  return make_op(std::move(v), {a}, [an, wc](const Mat&, const Mat& g) {
    Mat gg = g;
    for (Eigen::Index i = 0; i < gg.rows(); ++i) gg.row(i) *= wc[i];
    accumulate_into(an, gg);
  });
}

Tensor sum_all(const Tensor& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  auto an = a.node();
  return make_op(std::move(v), {a}, [an](const Mat&, const Mat& g) {
    accumulate_into(an, Mat::Constant(an->value.rows(), an->value.cols(), g(0, 0)));
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Eigen::Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw std::invalid_argument("layer_norm: gain/bias must be 1x" + std::to_string(c));
  Mat xhat(x.rows(), c);
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.value().row(i);
    double mu = row.mean();
    double var = (row.array() - mu).square().mean();
    double rs = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mu).matrix() * rs;
    rstd[i] = rs;
  }
  Mat v = xhat;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    v.row(i) = v.row(i).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return make_op(std::move(v), {x, gamma, beta},
                 [xn, gn, bn, xhat, rstd](const Mat&, const Mat& g) {
                   const Eigen::Index c = xhat.cols();
                   if (xn->requires_grad) {
                     Mat dx(xhat.rows(), c);
                     for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
                       Eigen::RowVectorXd dxhat = g.row(i).cwiseProduct(gn->value.row(0));
                       double m1 = dxhat.mean();
                       double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
                       dx.row(i) = ((dxhat.array() - m1) - xhat.row(i).array() * m2).matrix() * rstd[i];
                     }
                     accumulate_into(xn, dx);
                   }
                   if (gn->requires_grad) accumulate_into(gn, g.cwiseProduct(xhat).colwise().sum());
                   if (bn->requires_grad) accumulate_into(bn, g.colwise().sum());
                 });
}

Tensor causal_softmax(const Tensor& scores) {
  if (scores.rows() != scores.cols())
    throw std::invalid_argument("causal_softmax: scores must be square, got " +
                                shape_str(scores.value()));
  const Eigen::Index n = scores.rows();
  Mat v = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = scores.value().row(i).head(i + 1);
    double mx = row.maxCoeff();
    Eigen::RowVectorXd e = (row.array() - mx).exp();
    v.row(i).head(i + 1) = e / e.sum();
  }
  auto sn = scores.node();
  return make_op(std::move(v), {scores}, [sn, n](const Mat& y, const Mat& g) {
    Mat dz = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd yi = y.row(i).head(i + 1);
      Eigen::RowVectorXd gi = g.row(i).head(i + 1);
      double dot = yi.cwiseProduct(gi).sum();
      dz.row(i).head(i + 1) = (yi.array() * (gi.array() - dot)).matrix();
    }
    accumulate_into(sn, dz);
  });
}

Tensor row_log_softmax(const Tensor& z, const Eigen::ArrayXd& taus) {
  if (taus.size() != z.rows())
    throw std::invalid_argument("row_log_softmax: need one temperature per row");
  if ((taus <= 0.0).any()) throw std::invalid_argument("row_log_softmax: temperatures must be positive");
  Mat v(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::RowVectorXd x = z.value().row(i) / taus[i];
    double mx = x.maxCoeff();
    x.array() -= mx;
    double lse = std::log(x.array().exp().sum());
    v.row(i) = x.array() - lse;
  }
  auto zn = z.node();
  Eigen::ArrayXd tc = taus;
  return make_op(std::move(v), {z}, [zn, tc](const Mat& y, const Mat& g) {
    Mat dz(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      Eigen::RowVectorXd soft = y.row(i).array().exp();
      double gsum = g.row(i).sum();
      dz.row(i) = (g.row(i) - soft * gsum) / tc[i];
    }
    accumulate_into(zn, dz);
  });
}

bool all_finite(const Mat& m) { return m.array().isFinite().all(); }

void require_finite(const Mat& m, const std::string& what) {
  if (!all_finite(m)) throw std::runtime_error(what + ": non-finite values");
}

std::string shape_str(const Mat& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

}  // namespace adakd
