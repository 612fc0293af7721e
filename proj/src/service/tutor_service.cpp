#include "tutorstack/service/tutor_service.hpp"


namespace tutorstack::service {

namespace {

using nlohmann::json;

[[noreturn]] void bad_request(const std::string& message) { throw ApiError(400, "bad_request", message); }

const json& require_object(const json& body) {
    if (!body.is_object()) bad_request("request body must be a JSON object");
    return body;
}

std::string required_string(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) {
        bad_request(std::string("field '") + key + "' must be a non-empty string");
    }
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) bad_request(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

void check_student_id(const std::string& id) {
    if (id.empty() || id.size() > 200) bad_request("student id must be 1 to 200 characters");
}

json interaction_json(const kt::Interaction& it) {
    return {{"student_id", it.student_id}, {"question_id", it.question_id}, {"skill_id", it.skill_id},
            {"correct", it.correct}, {"timestamp", it.timestamp}};
}

kt::Interaction interaction_from(const json& j) {
    return {j.at("student_id").get<std::string>(), j.at("question_id").get<std::string>(),
            j.at("skill_id").get<std::string>(), j.at("correct").get<bool>(),
            j.at("timestamp").get<std::int64_t>()};
}

bool has_checkpoint(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / model::kManifestFile) &&
           std::filesystem::exists(dir / model::kWeightsFile);
}

}  // namespace

TutorService::TutorService(ServiceConfig config)
    : config_(std::move(config)),
      kb_(config_.data_dir,
          config_.fetcher ? config_.fetcher : kb::KnowledgeBase::default_fetcher(),
          config_.clock),
      log_(config_.data_dir / kEventsFile) {
    if (!config_.backend) config_.backend = std::make_shared<rag::MockBackend>();
    loaded_ = load_components();
    if (loaded_.model) store_.set_centroids(loaded_.model->featurizer().centroids);
    replay();
}

TutorService::Loaded TutorService::load_components() const {
    Loaded l;
    if (has_checkpoint(config_.data_dir)) l.model = model::KtModel::load(config_.data_dir);
    rag::SkillCatalog catalog;
    if (std::filesystem::exists(config_.data_dir / kSkillsFile)) {
        catalog = rag::SkillCatalog::load(config_.data_dir / kSkillsFile);
    }
    // The orchestrator reads the model through this service so reloads take effect.
    const auto model = l.model;
    l.orchestrator = std::make_shared<const rag::Orchestrator>(
        kb_, store_, std::move(catalog), config_.backend, [model] { return model; }, config_.options);
    return l;
}

TutorService::Loaded TutorService::current() const {
    std::lock_guard lock(loaded_mutex_);
    return loaded_;
}

void TutorService::replay() {
    for (const auto& event : log_.read_all()) {
        const auto& p = event.payload;
        try {
            if (event.kind == "interaction") {
                apply_interaction(interaction_from(p));
            } else if (event.kind == "ask") {
                store_.ensure_student(p.at("student_id").get<std::string>());
            }
        } catch (const json::exception& e) {
            throw std::runtime_error("event " + std::to_string(event.seq) + " is malformed: " + e.what());
        }
    }
}

void TutorService::apply_interaction(const kt::Interaction& interaction) {
    store_.record(interaction);
    std::lock_guard lock(question_mutex_);
    question_skill_[interaction.question_id] = interaction.skill_id;
    latest_timestamp_[interaction.student_id] = interaction.timestamp;
}

json TutorService::ingest(const json& body) {
    require_object(body);
    const bool has_url = body.contains("url");
    const bool has_text = body.contains("text") || body.contains("title");
    if (has_url == has_text) bad_request("body must contain either 'url' or 'title' and 'text'");
    kb::IngestResult result;
    std::string source;
    try {
        if (has_url) {
            source = required_string(body, "url");
            kb::parse_url(source);  // reject malformed urls before any fetch
            result = kb_.ingest_url(source);
        } else {
            source = kb::kManualSource;
            result = kb_.ingest_manual(required_string(body, "title"), required_string(body, "text"));
        }
    } catch (const kb::FetchError& e) {
        if (e.kind() == kb::FetchErrorKind::bad_url || e.kind() == kb::FetchErrorKind::scheme_rejected) {
            throw ApiError(400, "invalid_url", e.what());
        }
        throw ApiError(502, "fetch_failed", std::string(kb::to_string(e.kind())) + ": " + e.what());
    } catch (const kb::EmptyDocumentError& e) {
        throw ApiError(422, "empty_document", e.what());
    }
    std::lock_guard lock(write_mutex_);
    log_.append("ingest",
                {{"doc_id", result.doc_id}, {"chunks", result.chunks}, {"source", source},
                 {"created", result.created}},
                config_.clock());
    return {{"doc_id", result.doc_id}, {"chunks", result.chunks}, {"created", result.created}};
}

json TutorService::record_interaction(const std::string& student_id, const json& body) {
    check_student_id(student_id);
    require_object(body);
    kt::Interaction it;
    it.student_id = student_id;
    it.question_id = required_string(body, "question_id");
    it.skill_id = required_string(body, "skill_id");
    const auto correct = body.find("correct");
    if (correct == body.end()) bad_request("field 'correct' is required");
    if (correct->is_boolean()) {
        it.correct = correct->get<bool>();
    } else if (correct->is_number_integer() && (*correct == 0 || *correct == 1)) {
        it.correct = *correct == 1;
    } else {
        bad_request("field 'correct' must be a boolean or 0/1");
    }
    const auto ts = body.find("timestamp");
    if (ts == body.end() || !ts->is_number_integer() || ts->get<std::int64_t>() < 0) {
        bad_request("field 'timestamp' must be a non-negative integer (ms since epoch)");
    }
    it.timestamp = ts->get<std::int64_t>();

    std::lock_guard lock(write_mutex_);
    {
        std::lock_guard q(question_mutex_);
        const auto latest = latest_timestamp_.find(student_id);
        if (latest != latest_timestamp_.end() && it.timestamp <= latest->second) {
            throw ApiError(422, "out_of_order",
                           "timestamp " + std::to_string(it.timestamp) +
                               " is not after the student's latest interaction at " +
                               std::to_string(latest->second));
        }
    }
    log_.append("interaction", interaction_json(it), config_.clock());
    apply_interaction(it);
    const auto snap = store_.snapshot(student_id);
    const auto& skill = snap->skills.at(it.skill_id);
    return {{"student_id", student_id},
            {"skill_id", it.skill_id},
            {"mastery", skill.mastery},
            {"observations", skill.observations},
            {"interactions", snap->interactions()}};
}

std::optional<rag::Candidate> TutorService::candidate_from(const json& body) const {
    const auto question = optional_string(body, "candidate_question_id");
    if (!question || question->empty()) return std::nullopt;
    auto skill = optional_string(body, "candidate_skill_id").value_or("");
    if (skill.empty()) {
        std::lock_guard lock(question_mutex_);
        if (const auto it = question_skill_.find(*question); it != question_skill_.end()) skill = it->second;
    }
    return rag::Candidate{*question, skill};
}

json TutorService::ask(const std::string& student_id, const json& body) {
    check_student_id(student_id);
    require_object(body);
    const auto q = body.find("question");
    if (q == body.end() || !q->is_string() || rag::word_count(q->get<std::string>()) == 0) {
        bad_request("field 'question' must be a non-empty string");
    }
    const auto question = q->get<std::string>();
    std::size_t top_k = 5;
    if (const auto k = body.find("top_k"); k != body.end()) {
        if (!k->is_number_integer() || *k < 1 || *k > 50) bad_request("top_k must be between 1 and 50");
        top_k = k->get<std::size_t>();
    }
    const auto candidate = candidate_from(body);
    {
        std::lock_guard lock(write_mutex_);
        json payload = {{"student_id", student_id}, {"question", question}, {"top_k", top_k}};
        if (candidate) payload["candidate_question_id"] = candidate->question_id;
        log_.append("ask", std::move(payload), config_.clock());
        store_.ensure_student(student_id);
    }
    try {
        return current().orchestrator->ask(student_id, question, top_k, candidate).to_json();
    } catch (const rag::LlmUnavailableError& e) {
        throw ApiError(503, "llm_unavailable", e.what());
    }
}

json TutorService::state(const std::string& student_id) const {
    check_student_id(student_id);
    if (!store_.has_student(student_id)) {
        throw ApiError(404, "unknown_student", "no student with id " + student_id);
    }
    return current().orchestrator->summarize_state(student_id).to_json();
}

json TutorService::recommendations(const std::string& student_id, std::size_t k) {
    check_student_id(student_id);
    if (!store_.has_student(student_id)) {
        throw ApiError(404, "unknown_student", "no student with id " + student_id);
    }
    {
        std::lock_guard lock(write_mutex_);
        log_.append("recommend", {{"student_id", student_id}, {"k", k}}, config_.clock());
    }
    return current().orchestrator->recommend(student_id, k).to_json();
}

json TutorService::health() const {
    const auto l = current();
    return {{"status", "ok"},
            {"kb_docs", kb_.document_count()},
            {"model_loaded", l.model != nullptr},
            {"students", store_.students().size()},
            {"events", log_.last_seq()},
            {"backend", l.orchestrator->backend().info().name}};
}

json TutorService::reload() {
    Loaded next;
    try {
        next = load_components();
    } catch (const std::exception& e) {
        throw ApiError(500, "reload_failed", e.what());
    }
    if (next.model) store_.set_centroids(next.model->featurizer().centroids);
    {
        std::lock_guard lock(loaded_mutex_);
        loaded_ = next;
    }
    return health();
}

}  // namespace tutorstack::service
