#include "tutorstack/kb/chunker.hpp"

#include <algorithm>
#include <stdexcept>

#include "tutorstack/kb/text.hpp"

namespace tutorstack::kb {

std::vector<Chunk> chunk_text(std::string_view text, std::size_t window, std::size_t overlap) {
    if (window <= overlap) throw std::invalid_argument("chunk window must exceed the overlap");
    const auto words = split_words(text);
    const std::size_t stride = window - overlap;
    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start < words.size(); start += stride) {
        const std::size_t end = std::min(start + window, words.size());
        const bool full = end - start == window;
        if (!full && end - start < kMinTailWords && !chunks.empty()) break;
        Chunk c;
        c.chunk_index = chunks.size();
        c.word_start = start;
        c.word_end = end;
        for (std::size_t w = start; w < end; ++w) {
            if (w > start) c.text.push_back(' ');
            c.text.append(words[w]);
        }
        chunks.push_back(std::move(c));
        if (end == words.size()) break;
    }
    return chunks;
}

}  // namespace tutorstack::kb
