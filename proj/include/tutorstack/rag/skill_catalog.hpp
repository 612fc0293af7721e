#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tutorstack::rag {

struct SkillEntry {
    std::string skill_id;
    std::string name;
    std::vector<std::string> keywords;

    /// Retrieval query for the skill: name followed by keywords.
    std::string query() const;
};

/// skill_id -> name and keywords, read from `skill_id,name,keywords` CSV with
/// `;`-separated keywords.
class SkillCatalog {
public:
    SkillCatalog() = default;
    explicit SkillCatalog(std::vector<SkillEntry> entries);

    /// Throws std::invalid_argument on a bad header, short rows or duplicate ids.
    static SkillCatalog load(const std::filesystem::path& path);

    const SkillEntry* find(const std::string& skill_id) const;
    /// Name for display, or the id itself when not catalogued.
    std::string display_name(const std::string& skill_id) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, SkillEntry> entries_;
};

}  // namespace tutorstack::rag
