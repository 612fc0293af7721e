#include "tutorstack/rag/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <tuple>

#include "tutorstack/kb/text.hpp"

namespace tutorstack::rag {

std::string Citation::tag() const {
    return "[chunk " + doc_id + "#" + std::to_string(chunk_index) + "]";
}

nlohmann::json AskResult::to_json() const {
    nlohmann::json cites = nlohmann::json::array();
    for (const auto& c : citations) {
        cites.push_back({{"doc_id", c.doc_id},
                         {"chunk_index", c.chunk_index},
                         {"tag", c.tag()},
                         {"title", c.title},
                         {"source_url", c.source_url},
                         {"score", c.score}});
    }
    return {{"answer", answer}, {"citations", cites}, {"summary", summary.to_json()},
            {"degraded", degraded}, {"backend", backend}};
}

nlohmann::json RecommendationList::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : items) {
        list.push_back({{"rank", r.rank},
                        {"skill_id", r.skill_id},
                        {"skill_name", r.skill_name},
                        {"mastery", r.mastery},
                        {"doc_id", r.doc_id},
                        {"chunk_index", r.chunk_index},
                        {"title", r.title},
                        {"score", r.score},
                        {"rationale", r.rationale}});
    }
    return {{"recommendations", list}, {"all_skills_strong", all_skills_strong}};
}

Orchestrator::Orchestrator(const kb::KnowledgeBase& kb, const kt::FeatureStore& store,
                           SkillCatalog catalog, std::shared_ptr<LlmBackend> backend,
                           ModelProvider model, OrchestratorOptions options)
    : kb_(kb),
      store_(store),
      catalog_(std::move(catalog)),
      backend_(std::move(backend)),
      model_(std::move(model)),
      options_(options) {
    if (!backend_) throw std::invalid_argument("orchestrator needs a backend");
}

LearnerStateSummary Orchestrator::summarize_state(const std::string& student_id,
                                                  const std::optional<Candidate>& candidate) const {
    const auto model = model_ ? model_() : nullptr;
    return rag::summarize_state(student_id, store_.snapshot(student_id), store_.params(), catalog_,
                                model.get(), candidate, options_.weak_threshold);
}

AskResult Orchestrator::ask(const std::string& student_id, const std::string& question,
                            std::size_t top_k, const std::optional<Candidate>& candidate) const {
    AskResult result;
    result.summary = summarize_state(student_id, candidate);
    const auto hits = kb_.snapshot()->search(question, top_k);
    const auto bundle = assemble_prompt(result.summary, hits, question, options_.budget);
    result.backend = backend_->info().name;
    try {
        result.answer = backend_->complete(bundle);
        for (std::size_t i = 0; i < bundle.blocks.size(); ++i) {
            result.citations.push_back({hits[i].doc_id, hits[i].chunk_index, hits[i].title,
                                        hits[i].source_url, hits[i].score});
        }
    } catch (const LlmError& e) {
        if (hits.empty()) {
            throw LlmUnavailableError(std::string("language model unavailable (") + e.what() +
                                      ") and no course material matched the question");
        }
        const auto& top = hits.front();
        result.degraded = true;
        result.answer = std::string(kRetrievalOnlyNotice) + "\n\n" + top.title + "\n" + top.text;
        result.citations.push_back({top.doc_id, top.chunk_index, top.title, top.source_url, top.score});
    }
    return result;
}

RecommendationList rank_recommendations(const LearnerStateSummary& summary, const SkillCatalog& catalog,
                                        const kb::KbSnapshot& snapshot, std::size_t rec_k) {
    RecommendationList out;
    if (summary.weak_skills.empty()) {
        out.all_skills_strong = true;
        return out;
    }
    // Best (score, skill) per chunk ref.
    std::map<std::uint32_t, std::pair<double, const SkillState*>> best;
    for (const auto& skill : summary.weak_skills) {
        const auto entry = catalog.find(skill.skill_id);
        const auto query = entry ? entry->query() : skill.skill_id;
        for (const auto& [ref, bm25] : snapshot.index().score_all(kb::tokenize(query))) {
            const double score = (1.0 - skill.mastery) * bm25;
            auto [it, inserted] = best.try_emplace(ref, score, &skill);
            // Weak skills are visited in ascending mastery, so ties keep the weaker one.
            if (!inserted && score > it->second.first) it->second = {score, &skill};
        }
    }
    std::vector<std::tuple<double, std::uint32_t, const SkillState*>> ranked;
    for (const auto& [ref, v] : best) {
        if (v.first > 0.0) ranked.emplace_back(v.first, ref, v.second);
    }
    const auto& chunks = snapshot.chunks();
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        const auto& ca = chunks[std::get<1>(a)];
        const auto& cb = chunks[std::get<1>(b)];
        return std::tie(ca.doc_id, ca.chunk_index) < std::tie(cb.doc_id, cb.chunk_index);
    });
    for (std::size_t i = 0; i < ranked.size() && i < rec_k; ++i) {
        const auto& [score, ref, skill] = ranked[i];
        const auto& chunk = chunks[ref];
        const auto doc = snapshot.find_document(chunk.doc_id);
        Recommendation r;
        r.rank = i + 1;
        r.skill_id = skill->skill_id;
        r.skill_name = skill->name;
        r.mastery = skill->mastery;
        r.doc_id = chunk.doc_id;
        r.chunk_index = chunk.chunk_index;
        r.title = doc ? doc->title : chunk.doc_id;
        r.score = score;
        char mastery[16];
        std::snprintf(mastery, sizeof(mastery), "%.2f", skill->mastery);
        r.rationale = std::string("mastery ") + mastery + " on skill " + skill->name + "; revisit: " + r.title;
        out.items.push_back(std::move(r));
    }
    return out;
}

RecommendationList Orchestrator::recommend(const std::string& student_id, std::size_t rec_k) const {
    return rank_recommendations(summarize_state(student_id), catalog_, *kb_.snapshot(), rec_k);
}

}  // namespace tutorstack::rag
