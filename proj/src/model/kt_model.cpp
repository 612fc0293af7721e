#include "tutorstack/model/kt_model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tutorstack::model {

namespace {

using nlohmann::json;

static_assert(sizeof(float) == 4);

json config_to_json(const ModelConfig& c) {
    return {{"embed_dim", c.embed_dim},
            {"num_layers", c.num_layers},
            {"num_heads", c.num_heads},
            {"ffn_dim", c.ffn_dim},
            {"max_seq_len", c.max_seq_len},
            {"conv_kernel", c.conv_kernel},
            {"leaky_slope", c.leaky_slope},
            {"dropout", c.dropout},
            {"mastery_buckets", c.mastery_buckets},
            {"difficulty_levels", c.difficulty_levels},
            {"k_clusters", c.k_clusters},
            {"question_vocab", c.question_vocab},
            {"skill_vocab", c.skill_vocab}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.dropout = j.at("dropout").get<double>();
    c.mastery_buckets = j.at("mastery_buckets").get<std::size_t>();
    c.difficulty_levels = j.at("difficulty_levels").get<std::size_t>();
    c.k_clusters = j.at("k_clusters").get<std::size_t>();
    c.question_vocab = j.at("question_vocab").get<std::size_t>();
    c.skill_vocab = j.at("skill_vocab").get<std::size_t>();
    return c;
}

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
    return v;
}

}  // namespace

KtModel::KtModel(ModelConfig config, Featurizer featurizer)
    : config_(config), layout_(config), params_(layout_), featurizer_(std::move(featurizer)) {
    if (config_.question_vocab != featurizer_.questions.table_size() ||
        config_.skill_vocab != featurizer_.skills.table_size()) {
        throw std::invalid_argument("model vocab sizes disagree with the featurizer");
    }
}

void KtModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json tensors = json::array();
    for (const auto& e : layout_.entries()) {
        tensors.push_back({{"name", e.name},
                           {"shape", {e.rows, e.cols}},
                           {"offset", e.offset * sizeof(float)}});
    }
    json difficulty = json::object();
    for (const auto& [q, entry] : featurizer_.difficulty.entries()) {
        difficulty[q] = {entry.attempts, entry.successes};
    }
    const auto& b = featurizer_.bkt;
    json manifest = {
        {"format_version", kCheckpointFormatVersion},
        {"config", config_to_json(config_)},
        {"tensors", tensors},
        {"blob_bytes", layout_.total_size() * sizeof(float)},
        {"featurizer",
         {{"questions", featurizer_.questions.tokens()},
          {"skills", featurizer_.skills.tokens()},
          {"bkt",
           {{"p_init", b.p_init}, {"p_transit", b.p_transit}, {"p_guess", b.p_guess},
            {"p_slip", b.p_slip}}},
          {"centroids", featurizer_.centroids},
          {"difficulty", difficulty}}},
        {"train_students", train_students_},
    };

    const auto manifest_path = dir / kManifestFile;
    const auto weights_path = dir / kWeightsFile;
    {
        std::ofstream out(weights_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + weights_path.string());
        for (const float value : params_.values()) {
            const auto word = to_little_endian(std::bit_cast<std::uint32_t>(value));
            out.write(reinterpret_cast<const char*>(&word), sizeof(word));
        }
        if (!out) throw std::runtime_error("short write to " + weights_path.string());
    }
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
}

std::unique_ptr<KtModel> KtModel::load(const std::filesystem::path& dir) {
    const auto manifest_path = dir / kManifestFile;
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + manifest_path.string());
    const json manifest = json::parse(in);
    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format version");
    }
    const auto config = config_from_json(manifest.at("config"));
    const auto& f = manifest.at("featurizer");
    Featurizer featurizer;
    featurizer.questions = Vocabulary(f.at("questions").get<std::vector<std::string>>());
    featurizer.skills = Vocabulary(f.at("skills").get<std::vector<std::string>>());
    const auto& b = f.at("bkt");
    featurizer.bkt = {b.at("p_init").get<double>(), b.at("p_transit").get<double>(),
                      b.at("p_guess").get<double>(), b.at("p_slip").get<double>()};
    featurizer.bkt.validate();
    featurizer.centroids = f.at("centroids").get<std::vector<kt::FeatureVector>>();
    for (const auto& [q, counts] : f.at("difficulty").items()) {
        featurizer.difficulty.set_counts(q, counts.at(0).get<std::int64_t>(),
                                         counts.at(1).get<std::int64_t>());
    }

    auto model = std::make_unique<KtModel>(config, std::move(featurizer));
    model->train_students_ = manifest.value("train_students", std::vector<std::string>{});

    // The manifest must describe exactly the layout this build expects.
    const auto& tensors = manifest.at("tensors");
    const auto& entries = model->layout_.entries();
    if (tensors.size() != entries.size()) throw std::runtime_error("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& t = tensors[i];
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        if (t.at("name").get<std::string>() != entries[i].name || shape.size() != 2 ||
            shape[0] != entries[i].rows || shape[1] != entries[i].cols ||
            t.at("offset").get<std::size_t>() != entries[i].offset * sizeof(float)) {
            throw std::runtime_error("checkpoint tensor " + entries[i].name + " does not match");
        }
    }
    const std::size_t expected_bytes = model->layout_.total_size() * sizeof(float);
    if (manifest.at("blob_bytes").get<std::size_t>() != expected_bytes) {
        throw std::runtime_error("checkpoint blob size disagrees with tensor shapes");
    }

    const auto weights_path = dir / kWeightsFile;
    std::ifstream blob(weights_path, std::ios::binary);
    if (!blob) throw std::runtime_error("cannot open " + weights_path.string());
    blob.seekg(0, std::ios::end);
    if (static_cast<std::size_t>(blob.tellg()) != expected_bytes) {
        throw std::runtime_error("weights file length disagrees with manifest");
    }
    blob.seekg(0);
    auto& values = model->params_.values();
    for (auto& value : values) {
        std::uint32_t word = 0;
        blob.read(reinterpret_cast<char*>(&word), sizeof(word));
        value = std::bit_cast<float>(to_little_endian(word));
    }
    if (!blob) throw std::runtime_error("short read from " + weights_path.string());
    return model;
}

double predict_probability(const std::vector<kt::Interaction>& history,
                           const std::string& next_question_id, const std::string& next_skill_id,
                           const KtModel& model) {
    const auto& f = model.featurizer();
    const auto seq = encode_sequence(f.annotate(history),
                                     f.query_step(history, next_question_id, next_skill_id),
                                     model.config());
    // Leading PAD never influences real positions, so only the real suffix is run.
    const auto trimmed = seq.tail(seq.first_real());
    const auto net = model.network();
    const auto out = net.forward(trimmed, Mode::kInfer);
    return static_cast<double>(out.probabilities.back());
}

NextStepPrediction predict_next(const std::vector<kt::Interaction>& history,
                                const std::string& next_question_id,
                                const std::string& next_skill_id, const KtModel& model) {
    NextStepPrediction prediction;
    prediction.p_correct = predict_probability(history, next_question_id, next_skill_id, model);
    prediction.appended_sequence = history;
    kt::Interaction next;
    next.student_id = history.empty() ? std::string() : history.back().student_id;
    next.question_id = next_question_id;
    next.skill_id = next_skill_id;
    next.correct = prediction.p_correct >= 0.5;
    next.timestamp = history.empty() ? 0 : history.back().timestamp + 1;
    prediction.appended_sequence.push_back(std::move(next));
    return prediction;
}

}  // namespace tutorstack::model
