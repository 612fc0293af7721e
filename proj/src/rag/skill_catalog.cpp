#include "tutorstack/rag/skill_catalog.hpp"

#include <stdexcept>

#include "tutorstack/util/csv.hpp"

namespace tutorstack::rag {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

std::string SkillEntry::query() const {
    std::string q = name;
    for (const auto& k : keywords) q += " " + k;
    return q;
}

SkillCatalog::SkillCatalog(std::vector<SkillEntry> entries) {
    for (auto& e : entries) {
        const auto id = e.skill_id;
        if (!entries_.emplace(id, std::move(e)).second) {
            throw std::invalid_argument("duplicate skill id in catalog: " + id);
        }
    }
}

SkillCatalog SkillCatalog::load(const std::filesystem::path& path) {
    const auto rows = csv::read_file(path.string());
    if (rows.empty() || rows.front() != std::vector<std::string>{"skill_id", "name", "keywords"}) {
        throw std::invalid_argument(path.string() + ": header must be skill_id,name,keywords");
    }
    std::vector<SkillEntry> entries;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 3 || trim(row[0]).empty()) {
            throw std::invalid_argument(path.string() + ": malformed row " + std::to_string(r + 1));
        }
        SkillEntry e{trim(row[0]), trim(row[1]), {}};
        std::size_t start = 0;
        const auto& kw = row[2];
        while (start <= kw.size()) {
            auto end = kw.find(';', start);
            if (end == std::string::npos) end = kw.size();
            if (auto k = trim(kw.substr(start, end - start)); !k.empty()) e.keywords.push_back(k);
            start = end + 1;
        }
        entries.push_back(std::move(e));
    }
    return SkillCatalog(std::move(entries));
}

const SkillEntry* SkillCatalog::find(const std::string& skill_id) const {
    const auto it = entries_.find(skill_id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string SkillCatalog::display_name(const std::string& skill_id) const {
    const auto e = find(skill_id);
    return e && !e->name.empty() ? e->name : skill_id;
}

}  // namespace tutorstack::rag
