#include "adakd/dataset.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "adakd/rng.hpp"

namespace adakd {

namespace {

using nlohmann::json;

PromptResponsePair make_pair_tokens(const ByteTokenizer& tok, std::string prompt,
                                    std::string response) {
  PromptResponsePair p;
  p.prompt_text = std::move(prompt);
  p.response_text = std::move(response);
  p.prompt_ids = tok.encode(p.prompt_text);
  p.response_ids = tok.encode(p.response_text);
  return p;
}

void split_by_hash(std::vector<PromptResponsePair> pairs, double val_fraction,
                   Dataset& out) {
  const uint64_t threshold =
      static_cast<uint64_t>(val_fraction * 10000.0 + 0.5);
  for (auto& p : pairs) {
    if (fnv1a_hash(p.prompt_text) % 10000 < threshold) {
      out.validation.push_back(std::move(p));
    } else {
      out.train.push_back(std::move(p));
    }
  }
}

}  // namespace

uint64_t fnv1a_hash(const std::string& s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Dataset load_dataset(const std::string& path, const ByteTokenizer& tokenizer,
                     double val_fraction) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  Dataset out;
  std::vector<PromptResponsePair> pairs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                               ": malformed record: " + e.what());
    }
    if (!rec.is_object()) {
      throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                               ": record is not an object");
    }
    for (const char* field : {"prompt", "response"}) {
      if (!rec.contains(field) || !rec[field].is_string()) {
        throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                                 ": missing string field \"" + field + "\"");
      }
    }
    std::string prompt = rec["prompt"].get<std::string>();
    std::string response = rec["response"].get<std::string>();
    if (response.empty()) {
      ++out.dropped_empty;
      continue;
    }
    try {
      pairs.push_back(make_pair_tokens(tokenizer, std::move(prompt),
                                       std::move(response)));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  if (pairs.empty()) {
    throw std::runtime_error("load_dataset: no usable records in " + path);
  }
  split_by_hash(std::move(pairs), val_fraction, out);
  if (out.train.empty()) {
    throw std::runtime_error("load_dataset: training split is empty");
  }
  return out;
}

Dataset make_synthetic_corpus(const ByteTokenizer& tokenizer,
                              const SyntheticConfig& config) {
  static const std::vector<std::string> kNames = {
      "bolt", "card", "dune", "echo", "fern", "gale", "hawk", "iris",
      "jade", "kelp", "lark", "mint", "nova", "opal", "pine", "quay",
      "rune", "sage", "teal", "vine", "wisp", "yarn", "zinc", "apex",
      "brig", "clef", "drum", "eddy", "flax", "grot", "husk", "islet",
      "jolt", "knot", "loom", "mesa", "newt", "onyx", "prow", "quill",
      "reef", "silt", "tarn", "urn",  "veld", "wick", "xyst", "yawl"};
  static const std::vector<std::string> kColors = {"red",  "blue", "green",
                                                   "gold", "pink", "gray"};
  static const std::vector<std::string> kCities = {"rome",  "oslo", "lima",
                                                   "cairo", "tokyo", "quito"};
  if (config.entities < 1 ||
      config.entities > static_cast<int>(kNames.size())) {
    throw std::invalid_argument("make_synthetic_corpus: entities must be in [1, " +
                                std::to_string(kNames.size()) + "]");
  }
  Rng rng(config.seed);
  Rng facts = rng.fork(1);
  Rng extras = rng.fork(2);

  struct Fact {
    std::string entity;
    std::string color;
    std::string number;
    std::string city;
  };
  std::vector<Fact> world;
  for (int e = 0; e < config.entities; ++e) {
    Fact f;
    f.entity = kNames[e];
    f.color = kColors[facts.below(kColors.size())];
    f.number = std::string(1, static_cast<char>('0' + facts.below(10)));
    f.city = kCities[facts.below(kCities.size())];
    world.push_back(f);
  }

  // Per (entity, attribute) fact: several phrasings. The value word is the
  // hard content; the frame words are easy.
  struct Phrasing {
    std::string prompt;
    std::string response;
  };
  auto phrasings = [](const std::string& e, const std::string& kind,
                      const std::string& value) {
    std::vector<Phrasing> out;
    if (kind == "color") {
      out.push_back({"color of " + e + " ?", e + " is " + value + " ."});
      out.push_back({"what color is " + e + " ?", "it is " + value + " ."});
      out.push_back({e + " color ?", "the color is " + value + " ."});
    } else if (kind == "number") {
      out.push_back({"number of " + e + " ?", e + " holds " + value + " ."});
      out.push_back({"what number is " + e + " ?", "it is " + value + " ."});
      out.push_back({e + " number ?", "the number is " + value + " ."});
    } else {
      out.push_back({"city of " + e + " ?", e + " is in " + value + " ."});
      out.push_back({"where is " + e + " ?", "it is in " + value + " ."});
      out.push_back({e + " city ?", "the city is " + value + " ."});
    }
    return out;
  };

  std::vector<PromptResponsePair> fact_pairs;
  std::vector<int> fact_key;  // parallel: which fact a pair belongs to
  int key = 0;
  for (const Fact& f : world) {
    const std::pair<std::string, std::string> attrs[] = {
        {"color", f.color}, {"number", f.number}, {"city", f.city}};
    for (const auto& [kind, value] : attrs) {
      for (const Phrasing& ph : phrasings(f.entity, kind, value)) {
        fact_pairs.push_back(make_pair_tokens(tokenizer, ph.prompt, ph.response));
        fact_key.push_back(key);
      }
      ++key;
    }
  }

  std::vector<PromptResponsePair> extra_pairs;
  for (int i = 0; i < config.copy_pairs; ++i) {
    const std::string& a = kNames[extras.below(kNames.size())];
    const std::string& b = kColors[extras.below(kColors.size())];
    extra_pairs.push_back(make_pair_tokens(tokenizer, "copy : " + a + " " + b,
                                           a + " " + b + " ."));
  }
  for (int i = 0; i < config.add_pairs; ++i) {
    int a = static_cast<int>(extras.below(10));
    int b = static_cast<int>(extras.below(10));
    int k = (a + b) % 10;
    extra_pairs.push_back(make_pair_tokens(
        tokenizer, "add " + std::to_string(a) + " " + std::to_string(b),
        std::to_string(k) + " ."));
  }

  Dataset out;
  const uint64_t threshold =
      static_cast<uint64_t>(config.val_fraction * 10000.0 + 0.5);
  // Hash-split fact phrasings, but keep every fact represented in train.
  std::map<int, int> train_count;
  std::vector<char> to_val(fact_pairs.size(), 0);
  for (size_t i = 0; i < fact_pairs.size(); ++i) {
    bool val = fnv1a_hash(fact_pairs[i].prompt_text) % 10000 < threshold;
    to_val[i] = val ? 1 : 0;
    if (!val) ++train_count[fact_key[i]];
  }
  for (size_t i = 0; i < fact_pairs.size(); ++i) {
    if (to_val[i] && train_count[fact_key[i]] == 0) {
      to_val[i] = 0;  // rescue: this fact would otherwise be unseen in training
      ++train_count[fact_key[i]];
    }
  }
  for (size_t i = 0; i < fact_pairs.size(); ++i) {
    (to_val[i] ? out.validation : out.train).push_back(std::move(fact_pairs[i]));
  }
  split_by_hash(std::move(extra_pairs), config.val_fraction, out);
  if (out.validation.empty()) {
    // tiny corpora may hash everything into train; keep eval possible
    out.validation.push_back(out.train.back());
    out.train.pop_back();
  }
  return out;
}

FramedSequence training_frame(const ByteTokenizer& tokenizer,
                              const PromptResponsePair& pair) {
  FramedSequence seq;
  seq.tokens = prompt_frame(tokenizer, pair);
  seq.first_target = static_cast<int>(seq.tokens.size());
  seq.tokens.insert(seq.tokens.end(), pair.response_ids.begin(),
                    pair.response_ids.end());
  seq.tokens.push_back(tokenizer.eos_id());
  return seq;
}

std::vector<int> prompt_frame(const ByteTokenizer& tokenizer,
                              const PromptResponsePair& pair) {
  std::vector<int> ids;
  ids.reserve(pair.prompt_ids.size() + 2);
  ids.push_back(tokenizer.bos_id());
  ids.insert(ids.end(), pair.prompt_ids.begin(), pair.prompt_ids.end());
  ids.push_back(tokenizer.encode("\n")[0]);
  return ids;
}

void write_jsonl(const std::string& path,
                 const std::vector<PromptResponsePair>& pairs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_jsonl: cannot open " + path);
  for (const auto& p : pairs) {
    json rec;
    rec["prompt"] = p.prompt_text;
    rec["response"] = p.response_text;
    out << rec.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write_jsonl: write failed for " + path);
}

}  // namespace adakd
