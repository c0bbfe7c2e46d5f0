#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hotprompt::utf8 {

/// Byte length of the code point starting with `lead`. Invalid lead bytes count as 1.
inline std::size_t sequence_length(unsigned char lead) noexcept {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

/// Splits into code points; malformed tails are kept as single bytes so that
/// concatenating the result always reproduces the input.
inline std::vector<std::string_view> code_points(std::string_view text) {
  std::vector<std::string_view> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

inline std::size_t length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
    ++n;
  }
  return n;
}

/// Byte offset of the code point with index `cp_index` (clamped to the end).
inline std::size_t byte_offset(std::string_view text, std::size_t cp_index) {
  std::size_t i = 0;
  for (std::size_t n = 0; n < cp_index && i < text.size(); ++n) {
    std::size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
  }
  return i;
}

/// Code point index containing byte offset `byte` (byte is clamped).
inline std::size_t index_of_byte(std::string_view text, std::size_t byte) {
  return length(text.substr(0, std::min(byte, text.size())));
}

}  // namespace hotprompt::utf8
