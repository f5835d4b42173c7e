#include "swarm/gateway/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

using namespace swarm;
using namespace swarm::gateway;

namespace {

std::filesystem::path data_dir_of(const std::string& flag, const std::optional<GatewayConfig>& config) {
    if (!flag.empty()) return flag;
    if (config && config->data_dir) return *config->data_dir;
    throw std::invalid_argument("a data directory is required (--data-dir or data_dir in --config)");
}

int serve(const std::string& config_path, int port_override) {
    auto config = GatewayConfig::load(config_path);
    if (port_override >= 0) config.port = port_override;

    // Signals are taken synchronously by one thread so shutdown can drain turns.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    App app(config);
    GatewayServer server(app);
    int port = server.bind(config.host, config.port);
    if (port < 0) throw std::runtime_error("cannot bind " + config.host + ":" + std::to_string(config.port));
    std::cout << "listening on http://" << config.host << ":" << port << std::endl;

    std::jthread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        std::cout << "shutting down, draining " << server.turns_in_flight() << " turn(s)" << std::endl;
        server.stop();
    });
    bool ok = server.serve();
    server.drain();
    app.persist();
    if (!ok && waiter.joinable()) {
        pthread_kill(waiter.native_handle(), SIGTERM);
        return 1;
    }
    return 0;
}

int index_docs(const std::string& dir, const std::string& config_path, const std::string& data_dir_flag) {
    std::optional<GatewayConfig> config;
    if (!config_path.empty()) config = GatewayConfig::load(config_path);
    DataLayout layout{data_dir_of(data_dir_flag, config)};
    auto docs = rag::read_document_dir(dir);

    auto embedder = make_embedder(config ? config->embedder : EmbedderConfig{});
    std::filesystem::create_directories(layout.root);
    auto index = std::filesystem::exists(layout.index())
                     ? rag::VectorIndex::load(layout.index())
                     : rag::VectorIndex(embedder->dimension(), embedder->id());
    if (index.embedder_id() != embedder->id())
        throw std::invalid_argument("existing index was built with embedder '" + index.embedder_id() + "'");
    rag::RagAgent agent(*embedder, index);
    std::size_t chunks = 0;
    for (const auto& doc : docs) chunks += agent.ingest(doc);
    index.save(layout.index());
    std::cout << "indexed " << docs.size() << " documents into " << chunks << " chunks (" << index.size()
              << " total) at " << layout.index().string() << std::endl;
    return 0;
}

int seed(const std::string& fixture, const std::string& data_dir) {
    DataLayout layout{data_dir};
    FakeState state;
    state.pipelines.seed(read_json_file(fixture));
    state.save(layout);
    auto snap = state.pipelines.snapshot();
    std::cout << "seeded " << snap["pipelines"].size() << " pipelines, " << snap["experiments"].size()
              << " experiments, " << snap["runs"].size() << " runs into " << layout.root.string() << std::endl;
    return 0;
}

int tick(std::size_t n, const std::string& data_dir) {
    DataLayout layout{data_dir};
    FakeState state;
    if (!state.load(layout)) throw std::invalid_argument("no fake backend state in " + data_dir + "; run seed first");
    state.pipelines.tick(n);
    state.save(layout);
    auto snap = state.pipelines.snapshot();
    for (const auto& r : snap["runs"])
        std::cout << r["run_id"].get<std::string>() << ' ' << r["state"].get<std::string>() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"MLOps assistant gateway"};
    cli.require_subcommand(1);

    std::string config_path, dir, fixture, data_dir;
    int port = -1;
    std::size_t ticks = 1;

    auto* serve_cmd = cli.add_subcommand("serve", "Run the HTTP gateway");
    serve_cmd->add_option("--config", config_path, "Gateway config JSON")->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--port", port, "Override listen.port (0 picks a free port)");

    auto* index_cmd = cli.add_subcommand("index", "Chunk, embed and index a document directory");
    index_cmd->add_option("dir", dir, "Directory of .txt/.md documents")->required();
    index_cmd->add_option("--config", config_path, "Gateway config JSON (embedder and data_dir)");
    index_cmd->add_option("--data-dir", data_dir, "Data directory");

    auto* seed_cmd = cli.add_subcommand("seed", "Load a fixture into the fake backends");
    seed_cmd->add_option("--fixture", fixture, "Fixture JSON")->required()->check(CLI::ExistingFile);
    seed_cmd->add_option("--data-dir", data_dir, "Data directory")->required();

    auto* tick_cmd = cli.add_subcommand("tick", "Advance the fake run-state machine");
    tick_cmd->add_option("n", ticks, "Number of ticks")->required()->check(CLI::PositiveNumber);
    tick_cmd->add_option("--data-dir", data_dir, "Data directory")->required();

    CLI11_PARSE(cli, argc, argv);

    try {
        if (*serve_cmd) return serve(config_path, port);
        if (*index_cmd) return index_docs(dir, config_path, data_dir);
        if (*seed_cmd) return seed(fixture, data_dir);
        if (*tick_cmd) return tick(ticks, data_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 1;
}
