#include "adakd/tokenizer.hpp"

#include <stdexcept>

namespace adakd {

ByteTokenizer::ByteTokenizer() {
  byte_to_id_.fill(-1);
  id_to_byte_.clear();
  auto add_byte = [&](unsigned char b) {
    byte_to_id_[b] = first_char_id_ + static_cast<int>(id_to_byte_.size());
    id_to_byte_.push_back(static_cast<char>(b));
  };
  add_byte('\n');
  for (unsigned char b = 0x20; b <= 0x7e; ++b) add_byte(b);
  vocab_size_ = first_char_id_ + static_cast<int>(id_to_byte_.size());
}

std::vector<int> ByteTokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    const int id = byte_to_id_[b];
    if (id < 0) {
      throw std::invalid_argument("encode: unsupported byte value " +
                                  std::to_string(static_cast<int>(b)) +
                                  " at offset " + std::to_string(i));
    }
    ids.push_back(id);
  }
  return ids;
}

std::string ByteTokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= vocab_size_) {
      throw std::invalid_argument("decode: id " + std::to_string(id) +
                                  " out of range");
    }
    if (id < first_char_id_) continue;  // BOS/EOS/PAD carry no text
    out.push_back(id_to_byte_[static_cast<size_t>(id - first_char_id_)]);
  }
  return out;
}

}  // namespace adakd
