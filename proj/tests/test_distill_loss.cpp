#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adakd/dist_math.hpp"
#include "adakd/distill_loss.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

Mat randm(Rng& rng, int rows, int cols, double s = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = s * rng.normal();
  return m;
}

LogitBatch const_batch(const Mat& logits) {
  LogitBatch b;
  b.logits = Tensor::constant(logits);
  b.valid.assign(logits.rows(), 1);
  return b;
}

LogitBatch leaf_batch(const Mat& logits) {
  LogitBatch b;
  b.logits = Tensor::leaf(logits);
  b.valid.assign(logits.rows(), 1);
  return b;
}

TemperatureAssignment unit_temps(int k) {
  TemperatureAssignment t;
  t.taus.assign(k, 1.0);
  t.s_hat.assign(k, 0.0);
  return t;
}

// Scalar-path loss oracle: mean over selected tokens of the divergence at
// that token's temperature, teacher smoothed, times tau^2 when applied.
double scalar_loss_oracle(const Mat& tz, const Mat& sz,
                          const std::vector<uint8_t>& mask,
                          const std::vector<double>& taus,
                          DivergenceKind kind, bool tau_sq) {
  double total = 0.0;
  int k = 0;
  int ti = 0;
  for (Eigen::Index i = 0; i < tz.rows(); ++i) {
    if (!mask[i]) continue;
    double tau = taus[ti++];
    Vec p = smooth_probs(softmax_with_temperature(tz.row(i).transpose(), tau).values);
    Vec q = softmax_with_temperature(sz.row(i).transpose(), tau).values;
    double d = 0.0;
    if (kind == DivergenceKind::ForwardKL) {
      for (Eigen::Index j = 0; j < p.size(); ++j)
        d += p[j] * (std::log(p[j]) - std::log(q[j]));
    } else if (kind == DivergenceKind::ReverseKL) {
      for (Eigen::Index j = 0; j < p.size(); ++j)
        if (q[j] > 0) d += q[j] * (std::log(q[j]) - std::log(p[j]));
    } else {
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        double m = 0.5 * (p[j] + q[j]);
        d += 0.5 * p[j] * (std::log(p[j]) - std::log(m));
        if (q[j] > 0) d += 0.5 * q[j] * (std::log(q[j]) - std::log(m));
      }
    }
    total += (tau_sq ? tau * tau : 1.0) * d;
    ++k;
  }
  return total / k;
}

}  // namespace

TEST_CASE("all-true mask at unit temperature equals the plain forward-KL graph") {
  Rng rng(1);
  Mat tz = randm(rng, 5, 9);
  Mat sz = randm(rng, 5, 9);
  LogitBatch teacher = const_batch(tz);
  LogitBatch student = leaf_batch(sz);
  std::vector<uint8_t> all(5, 1);
  DistillObjective obj;
  obj.divergence = DivergenceKind::ForwardKL;
  obj.apply_tau_sq = false;
  Tensor loss = selective_distill_loss(teacher, student, all, unit_temps(5), obj);

  // independent construction of the unselective baseline
  std::vector<int> rows = {0, 1, 2, 3, 4};
  Tensor log_q = row_log_softmax(row_gather(student.logits, rows),
                                 Eigen::ArrayXd::Ones(5));
  Mat p_const(5, 9);
  double const_term = 0.0;
  for (int i = 0; i < 5; ++i) {
    Vec p = smooth_probs(softmax_with_temperature(tz.row(i).transpose(), 1.0).values);
    for (int j = 0; j < 9; ++j) {
      p_const(i, j) = p[j];
      const_term += p[j] * std::log(p[j]);
    }
  }
  Tensor cross = sum_all(scale_rows(cmul(Tensor::constant(p_const), log_q),
                                    Eigen::ArrayXd::Ones(5)));
  Tensor baseline = scale(sub(Tensor::scalar(const_term), cross), 1.0 / 5.0);
  CHECK(loss.item() == baseline.item());  // bitwise identical composition
}

TEST_CASE("teacher equals student: loss and gradients vanish") {
  Rng rng(2);
  Mat z = randm(rng, 4, 6);
  LogitBatch teacher = const_batch(z);
  LogitBatch student = leaf_batch(z);
  std::vector<uint8_t> all(4, 1);
  for (DivergenceKind kind : {DivergenceKind::ForwardKL, DivergenceKind::ReverseKL,
                              DivergenceKind::JS}) {
    DistillObjective obj;
    obj.divergence = kind;
    student.logits.zero_grad();
    Tensor loss =
        selective_distill_loss(teacher, student, all, unit_temps(4), obj);
    CHECK(std::fabs(loss.item()) < 1e-12);
    loss.backward();
    CHECK(student.logits.grad().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("two-token toy with mixed temperatures matches the scalar oracle") {
  Mat tz(2, 5), sz(2, 5);
  tz << 2, 1, 0, -1, 0.5, -0.5, 0.3, 1.2, 0, 2;
  sz << 1, 1, 0, 0, 0.2, 0.1, -0.4, 0.9, 1, 1.5;
  LogitBatch teacher = const_batch(tz);
  LogitBatch student = leaf_batch(sz);
  std::vector<uint8_t> all(2, 1);
  TemperatureAssignment temps;
  temps.taus = {0.5, 2.0};
  temps.s_hat = {1.0, -1.0};
  for (DivergenceKind kind : {DivergenceKind::ReverseKL, DivergenceKind::ForwardKL,
                              DivergenceKind::JS}) {
    DistillObjective obj;
    obj.divergence = kind;
    obj.apply_tau_sq = true;
    Tensor loss = selective_distill_loss(teacher, student, all, temps, obj);
    double oracle =
        scalar_loss_oracle(tz, sz, all, temps.taus, kind, true);
    CHECK(std::fabs(loss.item() - oracle) < 1e-10);
  }
}

TEST_CASE("masked-out positions receive exactly zero gradient") {
  Rng rng(3);
  Mat tz = randm(rng, 6, 7);
  Mat sz = randm(rng, 6, 7);
  LogitBatch teacher = const_batch(tz);
  LogitBatch student = leaf_batch(sz);
  std::vector<uint8_t> mask = {1, 0, 1, 0, 0, 1};
  TemperatureAssignment temps;
  temps.taus = {0.7, 1.0, 1.4};
  temps.s_hat = {0.5, 0.0, -0.5};
  DistillObjective obj;
  Tensor loss = selective_distill_loss(teacher, student, mask, temps, obj);
  loss.backward();
  const Mat& g = student.logits.grad();
  for (int i = 0; i < 6; ++i) {
    if (mask[i]) {
      CHECK(g.row(i).cwiseAbs().maxCoeff() > 0.0);
    } else {
      CHECK(g.row(i).isZero(0.0));  // structurally exact zeros
    }
  }
}

TEST_CASE("selective loss gradients match finite differences for all divergences") {
  Rng rng(4);
  Mat tz = randm(rng, 5, 6);
  Mat sz = randm(rng, 5, 6);
  std::vector<uint8_t> mask = {1, 1, 0, 1, 0};
  TemperatureAssignment temps;
  temps.taus = {0.6, 1.0, 1.8};
  temps.s_hat = {0.8, 0.0, -0.8};
  for (DivergenceKind kind : {DivergenceKind::ForwardKL, DivergenceKind::ReverseKL,
                              DivergenceKind::JS}) {
    for (bool tau_sq : {false, true}) {
      LogitBatch teacher = const_batch(tz);
      LogitBatch student = leaf_batch(sz);
      DistillObjective obj;
      obj.divergence = kind;
      obj.apply_tau_sq = tau_sq;
      Tensor loss = selective_distill_loss(teacher, student, mask, temps, obj);
      loss.backward();
      Mat analytic = student.logits.grad();
      Mat& v = student.logits.value_mut();
      const double step = 1e-5;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 6; ++j) {
          double keep = v(i, j);
          v(i, j) = keep + step;
          double up =
              selective_distill_loss(teacher, student, mask, temps, obj).item();
          v(i, j) = keep - step;
          double dn =
              selective_distill_loss(teacher, student, mask, temps, obj).item();
          v(i, j) = keep;
          double fd = (up - dn) / (2 * step);
          double an = analytic(i, j);
          double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
          CHECK(std::fabs(an - fd) / denom < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("per-token gradient direction matches (q - p) / tau for unscaled KL") {
  Mat tz(1, 4), sz(1, 4);
  tz << 1.5, 0.2, -0.7, 0.9;
  sz << 0.3, 1.1, -0.2, 0.5;
  const double tau = 0.5;
  LogitBatch teacher = const_batch(tz);
  LogitBatch student = leaf_batch(sz);
  TemperatureAssignment temps;
  temps.taus = {tau};
  temps.s_hat = {0.0};
  DistillObjective obj;
  obj.divergence = DivergenceKind::ForwardKL;
  obj.apply_tau_sq = false;
  Tensor loss =
      selective_distill_loss(teacher, student, {1}, temps, obj);
  loss.backward();
  Vec p = smooth_probs(softmax_with_temperature(tz.row(0).transpose(), tau).values);
  Vec q = softmax_with_temperature(sz.row(0).transpose(), tau).values;
  for (int j = 0; j < 4; ++j) {
    double expect = (q[j] - p[j]) / tau;
    CHECK(student.logits.grad()(0, j) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("empty selection and misalignment are rejected") {
  Mat z = Mat::Zero(3, 4);
  LogitBatch teacher = const_batch(z);
  LogitBatch student = leaf_batch(z);
  DistillObjective obj;
  CHECK_THROWS(selective_distill_loss(teacher, student, {0, 0, 0},
                                      unit_temps(0), obj));
  CHECK_THROWS(selective_distill_loss(teacher, student, {1, 1, 1},
                                      unit_temps(2), obj));  // temps misaligned
  student.valid = {1, 0, 1};
  CHECK_THROWS(selective_distill_loss(teacher, student, {1, 1, 1},
                                      unit_temps(3), obj));  // selected not valid
}

TEST_CASE("sft loss: uniform logits, confident logits, scalar oracle") {
  Mat uniform = Mat::Zero(3, 4);
  LogitBatch b = leaf_batch(uniform);
  Tensor l = sft_loss(b, {0, 1, 2});
  CHECK(l.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Mat confident = Mat::Zero(1, 4);
  confident(0, 2) = 50.0;
  LogitBatch c = leaf_batch(confident);
  CHECK(sft_loss(c, {2}).item() < 1e-9);

  Rng rng(5);
  Mat z = randm(rng, 3, 6);
  LogitBatch s = leaf_batch(z);
  std::vector<int> targets = {4, 0, 3};
  double oracle = 0.0;
  for (int i = 0; i < 3; ++i) {
    Vec q = softmax_with_temperature(z.row(i).transpose(), 1.0).values;
    oracle -= std::log(q[targets[i]]);
  }
  oracle /= 3.0;
  CHECK(std::fabs(sft_loss(s, targets).item() - oracle) < 1e-10);

  CHECK_THROWS(sft_loss(s, {1, 2}));      // misaligned
  CHECK_THROWS(sft_loss(s, {1, 2, 99})); // target out of range
}

TEST_CASE("sft loss gradients match finite differences") {
  Rng rng(6);
  Mat z = randm(rng, 4, 5);
  LogitBatch s = leaf_batch(z);
  s.valid = {1, 0, 1, 1};
  std::vector<int> targets = {2, 0, 4, 1};
  Tensor loss = sft_loss(s, targets);
  loss.backward();
  Mat analytic = s.logits.grad();
  CHECK(analytic.row(1).isZero(0.0));  // invalid row untouched
  Mat& v = s.logits.value_mut();
  const double step = 1e-5;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      double keep = v(i, j);
      v(i, j) = keep + step;
      double up = sft_loss(s, targets).item();
      v(i, j) = keep - step;
      double dn = sft_loss(s, targets).item();
      v(i, j) = keep;
      double fd = (up - dn) / (2 * step);
      double an = analytic(i, j);
      double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
      CHECK(std::fabs(an - fd) / denom < 1e-4);
    }
  }
}
