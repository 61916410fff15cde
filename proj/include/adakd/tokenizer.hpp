#pragma once

#include <array>
#include <string>
#include <vector>

namespace adakd {

/// Byte-level tokenizer over printable ASCII (0x20..0x7e) plus newline, with
/// reserved BOS/EOS/PAD ids. Round-trips any supported text exactly.
class ByteTokenizer {
 public:
  ByteTokenizer();

  int vocab_size() const { return vocab_size_; }
  int bos_id() const { return 0; }
  int eos_id() const { return 1; }
  int pad_id() const { return 2; }

  /// Text to ids (no BOS/EOS added). Throws on unsupported bytes, naming the
  /// byte and its offset.
  std::vector<int> encode(const std::string& text) const;

  /// Ids to text; BOS/EOS/PAD are dropped. Throws on out-of-range ids.
  std::string decode(const std::vector<int>& ids) const;

 private:
  static constexpr int first_char_id_ = 3;
  int vocab_size_ = 0;
  std::array<int, 256> byte_to_id_{};
  std::string id_to_byte_;
};

}  // namespace adakd
