#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adakd/difficulty.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

LogitBatch batch_from(const Mat& logits) {
  LogitBatch b;
  b.logits = Tensor::constant(logits);
  b.valid.assign(logits.rows(), 1);
  return b;
}

Vec random_prob(Rng& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

}  // namespace

TEST_CASE("identical logits give all-zero Hellinger scores") {
  Rng rng(1);
  Mat z(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) z(i, j) = rng.normal();
  DifficultyScores s =
      score_tokens(batch_from(z), batch_from(z), IndicatorKind::Hellinger);
  for (int i = 0; i < 4; ++i) {
    CHECK(s.mask[i] == 1);
    CHECK(s.scores[i] == 0.0);
  }
}

TEST_CASE("disjoint one-hot logits give Hellinger scores near 1") {
  Mat tz = Mat::Zero(2, 5);
  Mat sz = Mat::Zero(2, 5);
  tz(0, 1) = 50.0;
  sz(0, 3) = 50.0;
  tz(1, 0) = 50.0;
  sz(1, 4) = 50.0;
  DifficultyScores s =
      score_tokens(batch_from(tz), batch_from(sz), IndicatorKind::Hellinger);
  for (int i = 0; i < 2; ++i) {
    CHECK(s.scores[i] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.scores[i] <= 1.0);
  }
}

TEST_CASE("hand-set 3-token batch matches per-position scalar evaluation") {
  Mat tz(3, 4), sz(3, 4);
  tz << 2, 1, 0, -1, 0.5, 0.5, 0.5, 0.5, -2, 3, 1, 0;
  sz << 1, 1, 1, 1, 2, -1, 0, 1, -2, 3, 1, 0;
  DifficultyScores s =
      score_tokens(batch_from(tz), batch_from(sz), IndicatorKind::Hellinger);
  for (int i = 0; i < 3; ++i) {
    Vec p = softmax_with_temperature(tz.row(i).transpose(), 1.0).values;
    Vec q = softmax_with_temperature(sz.row(i).transpose(), 1.0).values;
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
      double d = std::sqrt(p[j]) - std::sqrt(q[j]);
      acc += d * d;
    }
    double oracle = (1.0 / std::sqrt(2.0)) * std::sqrt(acc);
    CHECK(std::fabs(s.scores[i] - oracle) < 1e-10);
  }
}

TEST_CASE("Hellinger scores are symmetric in teacher and student") {
  Rng rng(2);
  Mat a(5, 8), b(5, 8);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 8; ++j) {
      a(i, j) = 2 * rng.normal();
      b(i, j) = 2 * rng.normal();
    }
  DifficultyScores ab =
      score_tokens(batch_from(a), batch_from(b), IndicatorKind::Hellinger);
  DifficultyScores ba =
      score_tokens(batch_from(b), batch_from(a), IndicatorKind::Hellinger);
  for (int i = 0; i < 5; ++i) CHECK(ab.scores[i] == ba.scores[i]);
}

TEST_CASE("interpolating the student toward the teacher never raises the score") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec p = random_prob(rng, 7);
    Vec q = random_prob(rng, 7);
    double base = hellinger_distance(p, q);
    for (double lam : {0.25, 0.5, 1.0}) {
      Vec mixed = (1.0 - lam) * q + lam * p;
      CHECK(hellinger_distance(p, mixed) <= base + 1e-12);
    }
  }
}

TEST_CASE("indicator variants run and respect their definitions") {
  Mat tz(2, 4), sz(2, 4);
  tz << 3, 0, 0, 0, 0, 3, 0, 0;
  sz << 0, 3, 0, 0, 0, 3, 0, 0;
  std::vector<int> targets = {0, 1};
  for (IndicatorKind kind :
       {IndicatorKind::ForwardKL, IndicatorKind::ReverseKL, IndicatorKind::JS,
        IndicatorKind::TopKRank}) {
    DifficultyScores s = score_tokens(batch_from(tz), batch_from(sz), kind,
                                      nullptr, 2);
    CHECK(s.scores[0] > s.scores[1]);  // disagreeing token scores higher
    CHECK(s.scores[1] >= 0.0);
  }
  DifficultyScores ce = score_tokens(batch_from(tz), batch_from(sz),
                                     IndicatorKind::CrossEntropy, &targets);
  Vec q0 = softmax_with_temperature(sz.row(0).transpose(), 1.0).values;
  CHECK(ce.scores[0] == doctest::Approx(-std::log(q0[0])).epsilon(1e-12));
  CHECK_THROWS(score_tokens(batch_from(tz), batch_from(sz),
                            IndicatorKind::CrossEntropy));
}

TEST_CASE("masked-out positions are excluded and hold zero") {
  Mat z(3, 4);
  z.setConstant(1.0);
  LogitBatch t = batch_from(z);
  LogitBatch s = batch_from(z);
  t.valid = {1, 0, 1};
  s.valid = {1, 0, 1};
  DifficultyScores d = score_tokens(t, s, IndicatorKind::Hellinger);
  CHECK(d.mask[1] == 0);
  CHECK(d.scores[1] == 0.0);
  CHECK(d.valid_count() == 2);
}

TEST_CASE("misaligned batches are rejected") {
  Mat a = Mat::Zero(2, 4);
  Mat b = Mat::Zero(3, 4);
  CHECK_THROWS(score_tokens(batch_from(a), batch_from(b), IndicatorKind::Hellinger));
}

TEST_CASE("topk_rank_agreement: identity, frozen example, degenerate k") {
  Rng rng(4);
  Vec p = random_prob(rng, 6);
  CHECK(topk_rank_agreement(p, p, 3) == doctest::Approx(0.0).epsilon(1e-12));

  // teacher top-2 ids {0, 1} renormalize to [0.8, 0.2]; student to [0.5, 0.5]
  Vec teacher(4), student(4);
  teacher << 0.64, 0.16, 0.1, 0.1;
  student << 0.3, 0.3, 0.2, 0.2;
  double got = topk_rank_agreement(teacher, student, 2);
  double expect = 0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5);
  CHECK(got == doctest::Approx(expect).epsilon(1e-9));
  CHECK(got == doctest::Approx(0.1927).epsilon(1e-3));

  // k = V equals full KL on renormalized (already normalized) distributions
  Vec q = random_prob(rng, 6);
  CHECK(topk_rank_agreement(p, q, 6) ==
        doctest::Approx(kl_divergence(p, q)).epsilon(1e-12));

  CHECK_THROWS(topk_rank_agreement(p, q, 0));
  CHECK_THROWS(topk_rank_agreement(p, q, 7));
}
