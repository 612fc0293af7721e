#pragma once

#include <string>
#include <vector>

#include "tutorstack/kb/knowledge_base.hpp"
#include "tutorstack/rag/learner_state.hpp"

namespace tutorstack::rag {

/// Prompt budget, counted in whitespace-separated words.
inline constexpr std::size_t kDefaultBudget = 1500;

extern const char* const kSystemInstruction;

struct ContextBlock {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string title;
    std::string text;

    /// `[chunk <doc_id>#<index>]`
    std::string tag() const;
    std::string render() const;
};

struct PromptBundle {
    std::string system;
    std::string summary;
    std::vector<ContextBlock> blocks;  // retrieval rank order
    std::string question;
    std::size_t budget = kDefaultBudget;

    /// Everything after the system instruction: the user message.
    std::string render_user() const;
    /// System instruction followed by the user message.
    std::string render() const;
};

std::size_t word_count(const std::string& text);

/// Fixed template: system, learner summary, context blocks, question. Blocks
/// are dropped lowest-rank first until the rendering fits the budget; the
/// system, summary and question are never truncated. Throws
/// std::invalid_argument for a blank question.
PromptBundle assemble_prompt(const LearnerStateSummary& summary, const std::vector<kb::SearchHit>& hits,
                             const std::string& question, std::size_t budget = kDefaultBudget);

}  // namespace tutorstack::rag
