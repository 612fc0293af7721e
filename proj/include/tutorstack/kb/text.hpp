#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tutorstack::kb {

/// Retrieval tokenization: ASCII letters lowercased, split on every byte that
/// is not an ASCII letter or digit. Bytes >= 0x80 count as word characters so
/// UTF-8 words stay whole. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

/// Whitespace-separated words, as used for chunk windows.
std::vector<std::string_view> split_words(std::string_view text);

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace tutorstack::kb
