#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "adakd/eval.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

using Words = std::vector<std::string>;

// Full-table LCS, kept deliberately independent of the library's
// rolling-row implementation.
RougeScore reference_rouge(const Words& cand, const Words& ref) {
  const size_t m = cand.size(), n = ref.size();
  std::vector<std::vector<size_t>> table(m + 1, std::vector<size_t>(n + 1, 0));
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      table[i][j] = cand[i - 1] == ref[j - 1]
                        ? table[i - 1][j - 1] + 1
                        : std::max(table[i - 1][j], table[i][j - 1]);
    }
  }
  const double lcs = static_cast<double>(table[m][n]);
  RougeScore s;
  if (lcs == 0.0) return s;
  s.precision = lcs / static_cast<double>(m);
  s.recall = lcs / static_cast<double>(n);
  s.f = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

Words random_words(Rng& rng, size_t max_len, bool allow_empty) {
  static const Words kVocab = {"a", "b", "c", "d", "e"};
  const size_t len = rng.below(max_len + 1);
  Words out;
  for (size_t i = 0; i < len; ++i) out.push_back(kVocab[rng.below(kVocab.size())]);
  if (!allow_empty && out.empty()) out.push_back(kVocab[rng.below(kVocab.size())]);
  return out;
}

/// All-zero weights except a final-layer-norm bias unit; the logit row is
/// then head.w's first row, which the test sets directly.
TinyTransformerLM scripted_model(int favored_id, double strength) {
  ModelSpec spec{20, 12, 1, 1, 8};
  Rng rng(0);
  TinyTransformerLM model(spec, rng);
  for (auto& [name, tensor] : model.parameters()) tensor.value_mut().setZero();
  model.param("lnf.b").value_mut()(0, 0) = 1.0;
  model.param("head.w").value_mut()(0, favored_id) = strength;
  return model;
}

}  // namespace

TEST_CASE("whitespace_tokens: splits on runs of any whitespace") {
  CHECK(whitespace_tokens("") == Words{});
  CHECK(whitespace_tokens("   \t \n ") == Words{});
  CHECK(whitespace_tokens("one") == Words{"one"});
  CHECK(whitespace_tokens("  a  bb\tc\nd ") == Words{"a", "bb", "c", "d"});
}

TEST_CASE("rouge_l: frozen examples") {
  CHECK(rouge_l({"x", "y", "z"}, {"x", "y", "z"}).f == 1.0);
  CHECK(rouge_l({"x", "y", "z"}, {"x", "y", "z"}).precision == 1.0);
  CHECK(rouge_l({"a", "b"}, {"c", "d"}).f == 0.0);
  CHECK(rouge_l({}, {"c"}).f == 0.0);  // empty candidate scores zero

  RougeScore s = rouge_l({"a", "b", "c", "d"}, {"a", "c", "e"});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.f == doctest::Approx(0.5714).epsilon(1e-3));
  CHECK(s.f == doctest::Approx(4.0 / 7.0).epsilon(1e-12));

  CHECK_THROWS_AS(rouge_l({"a"}, {}), std::invalid_argument);
}

TEST_CASE("rouge_l: matches a quadratic-DP oracle exactly on 1000 pairs") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    Words cand = random_words(rng, 8, true);
    Words ref = random_words(rng, 8, false);
    RougeScore got = rouge_l(cand, ref);
    RougeScore want = reference_rouge(cand, ref);
    CHECK(got.precision == want.precision);
    CHECK(got.recall == want.recall);
    CHECK(got.f == want.f);
    CHECK(got.f >= 0.0);
    CHECK(got.f <= 1.0);
  }
}

TEST_CASE("rouge_l: swapping the arguments swaps precision and recall") {
  // F = 2PR/(P+R) is bitwise symmetric: 2P and 2R are exact doublings, so
  // (2P)*R and (2R)*P round the same real product identically.
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Words a = random_words(rng, 6, false);
    Words b = random_words(rng, 6, false);
    RougeScore ab = rouge_l(a, b);
    RougeScore ba = rouge_l(b, a);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.f == ba.f);
  }
}

TEST_CASE("generate: stops immediately on a model that favors EOS") {
  TinyTransformerLM model = scripted_model(1 /*eos*/, 20.0);
  EvalConfig decode;  // temperature 1.0, top_p 1.0
  Rng rng(3);
  GenerationResult out = generate(model, {0, 5, 6}, decode, rng);
  CHECK(out.token_ids.empty());
  CHECK(!out.truncated);

  decode.temperature = 0.0;  // greedy picks the same token
  GenerationResult greedy = generate(model, {0, 5, 6}, decode, rng);
  CHECK(greedy.token_ids.empty());
  CHECK(!greedy.truncated);
}

TEST_CASE("generate: emits the favored token until the budget runs out") {
  TinyTransformerLM model = scripted_model(7, 2.0);
  EvalConfig decode;
  decode.top_p = 0.01;  // nucleus collapses to the single top token
  decode.max_new_tokens = 5;
  Rng rng(11);
  GenerationResult out = generate(model, {0, 4}, decode, rng);
  CHECK(out.token_ids == std::vector<int>(5, 7));
  CHECK(out.truncated);  // never saw EOS
}

TEST_CASE("generate: runs into the context edge and flags it") {
  TinyTransformerLM model = scripted_model(7, 2.0);
  EvalConfig decode;
  decode.top_p = 0.01;
  decode.max_new_tokens = 100;  // larger than the room the context leaves
  std::vector<int> prompt(10, 4);  // context is 12
  Rng rng(11);
  GenerationResult out = generate(model, prompt, decode, rng);
  CHECK(out.truncated);
  CHECK(out.token_ids.size() == 2);  // 10 prompt + 2 generated = context

  std::vector<int> full(12, 4);
  GenerationResult blocked = generate(model, full, decode, rng);
  CHECK(blocked.truncated);
  CHECK(blocked.token_ids.empty());
}

TEST_CASE("generate: deterministic for a fixed stream, varies across seeds") {
  ModelSpec spec{20, 16, 1, 1, 8};
  Rng init(99);
  TinyTransformerLM model(spec, init);  // random weights, diffuse softmax
  EvalConfig decode;
  decode.max_new_tokens = 8;

  Rng a1(42), a2(42), b(43);
  auto r1 = generate(model, {0, 3}, decode, a1);
  auto r2 = generate(model, {0, 3}, decode, a2);
  CHECK(r1.token_ids == r2.token_ids);
  CHECK(r1.truncated == r2.truncated);

  bool any_difference = false;
  for (int trial = 0; trial < 5 && !any_difference; ++trial) {
    auto rb = generate(model, {0, 3}, decode, b);
    any_difference = rb.token_ids != r1.token_ids;
  }
  CHECK(any_difference);

  CHECK_THROWS_AS(generate(model, {}, decode, a1), std::invalid_argument);
}

TEST_CASE("evaluate_with_generator: echo generator scores perfectly") {
  std::vector<PromptResponsePair> set(3);
  set[0].response_text = "fern is red .";
  set[1].response_text = "it is in rome .";
  set[2].response_text = "7 .";
  auto echo = [](const PromptResponsePair& ex, size_t, uint64_t) {
    return ex.response_text;
  };
  EvalReport report = evaluate_with_generator(set, {10, 20, 30}, echo);
  CHECK(report.mean == 1.0);
  CHECK(report.std_across_seeds == 0.0);
  CHECK(report.per_example_f == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(report.per_seed_mean == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("evaluate_with_generator: aggregation arithmetic") {
  std::vector<PromptResponsePair> set(2);
  set[0].response_text = "a b";
  set[1].response_text = "c d";
  // seed 1 echoes, seed 2 misses everything
  auto gen = [](const PromptResponsePair& ex, size_t, uint64_t seed) {
    return seed == 1 ? ex.response_text : std::string("zz");
  };
  EvalReport report = evaluate_with_generator(set, {1, 2}, gen);
  CHECK(report.per_seed_mean == std::vector<double>{1.0, 0.0});
  CHECK(report.per_example_f == std::vector<double>{0.5, 0.5});
  CHECK(report.mean == 0.5);
  CHECK(report.std_across_seeds == 0.5);  // population std of {1, 0}

  EvalReport single = evaluate_with_generator(set, {2}, gen);
  CHECK(single.mean == 0.0);
  CHECK(single.std_across_seeds == 0.0);  // one seed: zero by definition

  CHECK_THROWS_AS(evaluate_with_generator({}, {1}, gen),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate_with_generator(set, {}, gen),
                  std::invalid_argument);
}

TEST_CASE("evaluate_model: deterministic, bounded, and self-consistent") {
  ModelSpec spec{99, 32, 1, 1, 8};
  Rng init(5);
  TinyTransformerLM model(spec, init);
  ByteTokenizer tok;
  std::vector<PromptResponsePair> set;
  for (const char* text : {"fern is red .", "7 .", "it is in rome ."}) {
    PromptResponsePair p;
    p.prompt_text = "q ?";
    p.response_text = text;
    p.prompt_ids = tok.encode(p.prompt_text);
    p.response_ids = tok.encode(p.response_text);
    set.push_back(p);
  }
  EvalConfig decode;
  decode.max_new_tokens = 10;
  decode.seeds = {10, 20};

  EvalReport a = evaluate_model(model, set, tok, decode);
  EvalReport b = evaluate_model(model, set, tok, decode);
  CHECK(a.per_example_f == b.per_example_f);
  CHECK(a.per_seed_mean == b.per_seed_mean);
  CHECK(a.mean == b.mean);
  CHECK(a.truncated_count == b.truncated_count);
  CHECK(a.temperature == 1.0);
  CHECK(a.top_p == 1.0);

  REQUIRE(a.per_example_f.size() == 3);
  REQUIRE(a.per_seed_mean.size() == 2);
  double sum = 0.0;
  for (double f : a.per_example_f) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    sum += f;
  }
  CHECK(a.mean == sum / 3.0);  // mean recomputable from per-example scores
}
