#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tutorstack::kb {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t chunk = 0;
    std::uint32_t tf = 0;
};

/// Inverted index over dense chunk refs 0..size()-1, added in order so every
/// postings list is sorted by ref.
class Bm25Index {
public:
    explicit Bm25Index(Bm25Params params = {}) : params_(params) {}

    /// Adds the next chunk; returns its ref.
    std::uint32_t add(const std::vector<std::string>& tokens);

    std::size_t size() const { return lengths_.size(); }
    double average_length() const;
    std::size_t length(std::uint32_t chunk) const { return lengths_.at(chunk); }
    std::size_t document_frequency(const std::string& term) const;
    const std::vector<Posting>& postings(const std::string& term) const;
    const Bm25Params& params() const { return params_; }
    std::uint64_t total_length() const { return total_length_; }

    double idf(const std::string& term) const;

    /// Score of one chunk. Repeated query terms count once; unknown terms add 0.
    double score(const std::vector<std::string>& query, std::uint32_t chunk) const;

    /// Scores of every chunk with a positive score, in ascending ref order.
    std::vector<std::pair<std::uint32_t, double>> score_all(const std::vector<std::string>& query) const;

private:
    double term_weight(double idf, std::uint32_t tf, std::size_t length) const;

    Bm25Params params_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> lengths_;
    std::uint64_t total_length_ = 0;
};

/// Distinct query terms in first-occurrence order.
std::vector<std::string> unique_terms(const std::vector<std::string>& terms);

}  // namespace tutorstack::kb
