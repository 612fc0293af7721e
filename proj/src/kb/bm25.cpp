#include "tutorstack/kb/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace tutorstack::kb {

std::uint32_t Bm25Index::add(const std::vector<std::string>& tokens) {
    const auto ref = static_cast<std::uint32_t>(lengths_.size());
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : tokens) ++counts[t];
    for (const auto& [term, tf] : counts) postings_[term].push_back({ref, tf});
    lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_length_ += tokens.size();
    return ref;
}

double Bm25Index::average_length() const {
    return lengths_.empty() ? 0.0
                            : static_cast<double>(total_length_) / static_cast<double>(lengths_.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
    const auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

const std::vector<Posting>& Bm25Index::postings(const std::string& term) const {
    static const std::vector<Posting> empty;
    const auto it = postings_.find(term);
    return it == postings_.end() ? empty : it->second;
}

double Bm25Index::idf(const std::string& term) const {
    const double n = static_cast<double>(document_frequency(term));
    const double N = static_cast<double>(size());
    return std::log(1.0 + (N - n + 0.5) / (n + 0.5));
}

double Bm25Index::term_weight(double idf, std::uint32_t tf, std::size_t length) const {
    const double avg = average_length();
    const double norm = avg > 0.0 ? static_cast<double>(length) / avg : 0.0;
    const double f = static_cast<double>(tf);
    return idf * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

double Bm25Index::score(const std::vector<std::string>& query, std::uint32_t chunk) const {
    const std::size_t len = lengths_.at(chunk);
    double total = 0.0;
    for (const auto& term : unique_terms(query)) {
        const auto& list = postings(term);
        const auto it = std::lower_bound(list.begin(), list.end(), chunk,
                                         [](const Posting& p, std::uint32_t c) { return p.chunk < c; });
        if (it == list.end() || it->chunk != chunk) continue;
        total += term_weight(idf(term), it->tf, len);
    }
    return total;
}

std::vector<std::pair<std::uint32_t, double>> Bm25Index::score_all(
    const std::vector<std::string>& query) const {
    std::vector<double> acc(size(), 0.0);
    std::vector<bool> touched(size(), false);
    for (const auto& term : unique_terms(query)) {
        const auto& list = postings(term);
        if (list.empty()) continue;
        const double w = idf(term);
        for (const auto& p : list) {
            acc[p.chunk] += term_weight(w, p.tf, lengths_[p.chunk]);
            touched[p.chunk] = true;
        }
    }
    std::vector<std::pair<std::uint32_t, double>> out;
    for (std::uint32_t c = 0; c < acc.size(); ++c) {
        if (touched[c] && acc[c] > 0.0) out.emplace_back(c, acc[c]);
    }
    return out;
}

std::vector<std::string> unique_terms(const std::vector<std::string>& terms) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& t : terms) {
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

}  // namespace tutorstack::kb
