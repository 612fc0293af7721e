#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tutorstack/kb/knowledge_base.hpp"
#include "tutorstack/kt/bkt.hpp"
#include "tutorstack/model/trainer.hpp"
#include "tutorstack/service/tutor_service.hpp"
#include "tutorstack/sim/evaluation.hpp"
#include "tutorstack/sim/metrics.hpp"
#include "tutorstack/sim/simulator.hpp"

namespace py = pybind11;
using namespace tutorstack;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
class Service {
public:
    explicit Service(const std::string& data_dir) : impl_([&] {
        service::ServiceConfig c;
        c.data_dir = data_dir;
        return c;
    }()) {}

    py::tuple call(const std::string& op, const std::string& student, const std::string& body, std::size_t k) {
        int status = 200;
        std::string out;
        {
            py::gil_scoped_release release;
            try {
                out = dispatch(op, student, body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body), k)
                          .dump();
            } catch (const service::ApiError& e) {
                status = e.status();
                out = e.body().dump();
            } catch (const nlohmann::json::exception& e) {
                status = 400;
                out = nlohmann::json{{"code", "malformed_json"}, {"message", e.what()}}.dump();
            }
        }
        return py::make_tuple(status, out);
    }

private:
    nlohmann::json dispatch(const std::string& op, const std::string& student, const nlohmann::json& body,
                            std::size_t k) {
        if (op == "ingest") return impl_.ingest(body);
        if (op == "interaction") return impl_.record_interaction(student, body);
        if (op == "ask") return impl_.ask(student, body);
        if (op == "state") return impl_.state(student);
        if (op == "recommendations") return impl_.recommendations(student, k);
        if (op == "health") return impl_.health();
        if (op == "reload") return impl_.reload();
        throw std::invalid_argument("unknown operation " + op);
    }

    service::TutorService impl_;
};

py::dict hit_dict(const kb::SearchHit& h) {
    py::dict d;
    d["doc_id"] = h.doc_id;
    d["chunk_index"] = h.chunk_index;
    d["score"] = h.score;
    d["title"] = h.title;
    d["source_url"] = h.source_url;
    d["text"] = h.text;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "TutorStack native core";

    py::class_<kt::BktParams>(m, "BktParams")
        .def(py::init([](double init, double transit, double guess, double slip) {
                 kt::BktParams p{init, transit, guess, slip};
                 p.validate();
                 return p;
             }),
             py::arg("p_init") = 0.3, py::arg("p_transit") = 0.2, py::arg("p_guess") = 0.2, py::arg("p_slip") = 0.1)
        .def_readonly("p_init", &kt::BktParams::p_init)
        .def_readonly("p_transit", &kt::BktParams::p_transit)
        .def_readonly("p_guess", &kt::BktParams::p_guess)
        .def_readonly("p_slip", &kt::BktParams::p_slip);

    m.def("bkt_update", &kt::bkt_update, py::arg("prior"), py::arg("correct"), py::arg("params") = kt::BktParams{});
    m.def(
        "mastery_sequence",
        [](const std::vector<bool>& responses, const kt::BktParams& params) {
            std::vector<kt::Interaction> log;
            for (std::size_t i = 0; i < responses.size(); ++i) {
                log.push_back({"s", "q", "k", responses[i], static_cast<std::int64_t>(i)});
            }
            return kt::mastery_sequence(log, params);
        },
        py::arg("responses"), py::arg("params") = kt::BktParams{});

    m.def("auc", &sim::auc, py::arg("scores"), py::arg("labels"));

    m.def(
        "simulate",
        [](const std::string& out, std::size_t students, std::size_t skills, std::size_t questions,
           std::size_t steps, std::uint64_t seed) {
            sim::SimConfig c;
            c.num_students = students;
            c.num_skills = skills;
            c.num_questions = questions;
            c.steps = steps;
            c.seed = seed;
            py::gil_scoped_release release;
            const auto s = sim::simulate(c);
            sim::write_simulation(s, out);
            return s.interactions.size();
        },
        py::arg("out"), py::arg("students") = 200, py::arg("skills") = 20, py::arg("questions") = 100,
        py::arg("steps") = 200, py::arg("seed") = 42, "Writes interactions.csv and ground_truth.csv; returns the row count.");

    m.def(
        "train_kt",
        [](const std::string& data, const std::string& out, std::uint64_t seed, std::size_t epochs, std::size_t dim,
           std::size_t layers, std::size_t heads) {
            model::ModelConfig mc;
            mc.embed_dim = dim;
            mc.num_layers = layers;
            mc.num_heads = heads;
            mc.ffn_dim = 4 * dim;
            model::TrainHyper hyper;
            hyper.seed = seed;
            hyper.epochs = epochs;
            py::gil_scoped_release release;
            auto result = model::train(kt::read_interactions_csv(data), mc, hyper);
            result.model->save(out);
            std::vector<double> val_auc;
            for (const auto& e : result.report.epochs) val_auc.push_back(e.val_auc);
            return std::make_pair(result.report.best_epoch, val_auc);
        },
        py::arg("data"), py::arg("out"), py::arg("seed") = 42, py::arg("epochs") = 30, py::arg("dim") = 64,
        py::arg("layers") = 2, py::arg("heads") = 4, "Trains and saves a checkpoint; returns (best_epoch, val_aucs).");

    m.def(
        "eval_kt",
        [](const std::string& checkpoint, const std::string& data, std::optional<std::string> truth) {
            py::gil_scoped_release release;
            const auto model = model::KtModel::load(checkpoint);
            std::vector<sim::GroundTruth> gt;
            if (truth) gt = sim::read_ground_truth(*truth);
            return sim::eval_kt(*model, kt::read_interactions_csv(data), truth ? &gt : nullptr).to_json();
        },
        py::arg("checkpoint"), py::arg("data"), py::arg("truth") = std::nullopt, "Returns the report as JSON text.");

    py::class_<kb::KnowledgeBase>(m, "KnowledgeBase")
        .def(py::init([](const std::filesystem::path& root) { return std::make_unique<kb::KnowledgeBase>(root); }),
             py::arg("root"))
        .def(
            "ingest_text",
            [](kb::KnowledgeBase& kb, const std::string& title, const std::string& text) {
                const auto r = kb.ingest_manual(title, text);
                return py::make_tuple(r.doc_id, r.chunks, r.created);
            },
            py::arg("title"), py::arg("text"))
        .def(
            "ingest_html",
            [](kb::KnowledgeBase& kb, const std::string& source_url, const std::string& html) {
                const auto r = kb.ingest_html(source_url, html);
                return py::make_tuple(r.doc_id, r.chunks, r.created);
            },
            py::arg("source_url"), py::arg("html"))
        .def(
            "search",
            [](const kb::KnowledgeBase& kb, const std::string& query, std::size_t top_k) {
                py::list out;
                for (const auto& h : kb.search(query, top_k)) out.append(hit_dict(h));
                return out;
            },
            py::arg("query"), py::arg("top_k") = 5)
        .def_property_readonly("document_count", &kb::KnowledgeBase::document_count);

    py::class_<Service>(m, "Service")
        .def(py::init<const std::string&>(), py::arg("data_dir"))
        .def("call", &Service::call, py::arg("op"), py::arg("student") = "", py::arg("body") = "", py::arg("k") = 3);

    py::register_exception<kb::EmptyDocumentError>(m, "EmptyDocumentError", PyExc_ValueError);
    py::register_exception<sim::UndefinedAucError>(m, "UndefinedAucError", PyExc_ValueError);
}
