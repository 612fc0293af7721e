#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tutorstack::kb {

struct Chunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::size_t word_start = 0;  // inclusive
    std::size_t word_end = 0;    // exclusive

    bool operator==(const Chunk&) const = default;
};

inline constexpr std::size_t kDefaultWindow = 200;
inline constexpr std::size_t kDefaultOverlap = 40;
inline constexpr std::size_t kMinTailWords = 20;

/// Sliding word windows at stride window - overlap. A short final window is
/// kept when it has at least kMinTailWords words or is the only chunk.
/// Chunk text is the window's words joined by single spaces.
/// Throws std::invalid_argument unless window > overlap.
std::vector<Chunk> chunk_text(std::string_view text, std::size_t window = kDefaultWindow,
                              std::size_t overlap = kDefaultOverlap);

}  // namespace tutorstack::kb
