#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "tutorstack/kt/interaction.hpp"
#include "tutorstack/model/trainer.hpp"
#include "tutorstack/sim/evaluation.hpp"
#include "tutorstack/sim/simulator.hpp"
#include "tutorstack/service/http_server.hpp"
#include "tutorstack/service/tutor_service.hpp"

namespace tutorstack::cli {
namespace {

std::atomic<bool> g_shutdown{false};

extern "C" void on_signal(int) { g_shutdown.store(true); }

std::shared_ptr<rag::LlmBackend> make_backend(const std::string& name) {
    if (name == "remote") return std::make_shared<rag::RemoteBackend>(rag::RemoteConfig::from_env());
    return std::make_shared<rag::MockBackend>();
}

service::ServiceConfig service_config(const std::string& data_dir, const std::string& backend) {
    service::ServiceConfig config;
    config.data_dir = data_dir;
    config.backend = make_backend(backend);
    return config;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int serve(const std::string& data_dir, const std::string& host, int port, const std::string& backend,
          std::ostream& out) {
    service::TutorService svc(service_config(data_dir, backend));
    service::HttpOptions options;
    options.token = service::token_from_env();
    service::HttpServer http(svc, options);
    const int bound = http.bind(host, port);
    g_shutdown.store(false);
    auto previous_int = std::signal(SIGINT, on_signal);
    auto previous_term = std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_shutdown.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        http.stop();
    });
    out << "listening on http://" << host << ":" << bound << "\n" << bound << std::endl;
    http.listen();
    g_shutdown.store(true);
    watcher.join();
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);
    out << "stopped" << std::endl;
    return kOk;
}

}  // namespace

void request_shutdown() { g_shutdown.store(true); }

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"TutorStack: knowledge tracing and retrieval-augmented tutoring", "tutorstack"};
    app.require_subcommand(1);

    std::string data_dir = "data";
    std::string backend = "mock";
    const auto backend_check = CLI::IsMember({"mock", "remote"});

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve_cmd->add_option("--port", port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--data-dir", data_dir, "Data directory");
    serve_cmd->add_option("--backend", backend, "LLM backend")->check(backend_check);

    auto* ingest_cmd = app.add_subcommand("ingest", "Add a page or a local text file to the knowledge base");
    std::string url, file, title;
    auto* url_opt = ingest_cmd->add_option("--url", url, "Page to fetch");
    auto* file_opt = ingest_cmd->add_option("--file", file, "Text file to ingest")->check(CLI::ExistingFile);
    auto* title_opt = ingest_cmd->add_option("--title", title, "Title for --file");
    ingest_cmd->add_option("--data-dir", data_dir, "Data directory");
    url_opt->excludes(file_opt)->excludes(title_opt);
    file_opt->needs(title_opt);
    title_opt->needs(file_opt);

    auto* train_cmd = app.add_subcommand("train-kt", "Train the knowledge-tracing model");
    std::string data_csv, out_dir;
    model::ModelConfig mc;
    model::TrainHyper hyper;
    train_cmd->add_option("--data", data_csv, "Interaction CSV")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", out_dir, "Checkpoint directory")->required();
    train_cmd->add_option("--seed", hyper.seed, "Random seed");
    train_cmd->add_option("--epochs", hyper.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--dim", mc.embed_dim, "Embedding width")->check(CLI::PositiveNumber);
    train_cmd->add_option("--layers", mc.num_layers, "Encoder layers")->check(CLI::PositiveNumber);
    train_cmd->add_option("--heads", mc.num_heads, "Attention heads")->check(CLI::PositiveNumber);

    auto* eval_cmd = app.add_subcommand("eval-kt", "Evaluate a checkpoint on held-out students");
    std::string checkpoint, truth_csv;
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
    eval_cmd->add_option("--data", data_csv, "Test interaction CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--truth", truth_csv, "ground_truth.csv for the ceiling AUC")->check(CLI::ExistingFile);

    auto* sim_cmd = app.add_subcommand("simulate", "Generate simulated students");
    sim::SimConfig sc;
    std::string sim_out = ".";
    sim_cmd->add_option("--out", sim_out, "Output directory");
    sim_cmd->add_option("--students", sc.num_students)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--skills", sc.num_skills)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--questions", sc.num_questions)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--steps", sc.steps)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sc.seed);

    auto* ask_cmd = app.add_subcommand("ask", "Ask the tutor a question");
    std::string student, question;
    int top_k = 5;
    ask_cmd->add_option("--student", student, "Student id")->required();
    ask_cmd->add_option("--question", question, "Question text")->required();
    ask_cmd->add_option("--top-k", top_k, "Retrieved chunks")->check(CLI::Range(1, 50));
    ask_cmd->add_option("--data-dir", data_dir, "Data directory");
    ask_cmd->add_option("--backend", backend, "LLM backend")->check(backend_check);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }
    if (ingest_cmd->parsed() && url.empty() && file.empty()) {
        err << "error: ingest needs --url or --file with --title\n";
        return kUsage;
    }

    try {
        if (serve_cmd->parsed()) return serve(data_dir, host, port, backend, out);
        if (ingest_cmd->parsed()) {
            service::TutorService svc(service_config(data_dir, "mock"));
            const auto body = url.empty() ? nlohmann::json{{"title", title}, {"text", read_file(file)}}
                                          : nlohmann::json{{"url", url}};
            out << svc.ingest(body).dump() << "\n";
            return kOk;
        }
        if (train_cmd->parsed()) {
            mc.ffn_dim = 4 * mc.embed_dim;
            const auto log = kt::read_interactions_csv(data_csv);
            auto result = model::train(log, mc, hyper, [&](const model::EpochStats& e) {
                out << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss
                    << " val_auc " << e.val_auc << std::endl;
            });
            result.model->save(out_dir);
            out << "best epoch " << result.report.best_epoch << "; checkpoint written to " << out_dir << "\n";
            return kOk;
        }
        if (eval_cmd->parsed()) {
            const auto model = model::KtModel::load(checkpoint);
            const auto test = kt::read_interactions_csv(data_csv);
            std::vector<sim::GroundTruth> truth;
            if (!truth_csv.empty()) truth = sim::read_ground_truth(truth_csv);
            out << sim::eval_kt(*model, test, truth_csv.empty() ? nullptr : &truth).to_json() << "\n";
            return kOk;
        }
        if (sim_cmd->parsed()) {
            sc.validate();
            const auto simulation = sim::simulate(sc);
            sim::write_simulation(simulation, sim_out);
            out << "wrote " << simulation.interactions.size() << " interactions for " << sc.num_students
                << " students to " << sim_out << "\n";
            return kOk;
        }
        if (ask_cmd->parsed()) {
            service::TutorService svc(service_config(data_dir, backend));
            out << svc.ask(student, {{"question", question}, {"top_k", top_k}}).dump(2) << "\n";
            return kOk;
        }
    } catch (const service::ApiError& e) {
        err << "error: " << e.code() << ": " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

}  // namespace tutorstack::cli
