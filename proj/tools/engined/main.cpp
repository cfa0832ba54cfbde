#include <signal.h>

#include <CLI11.hpp>
#include <iostream>

#include "fieldstore/config.h"
#include "fieldstore/engine/local_engine.h"
#include "fieldstore/engine/socket.h"

int main(int argc, char** argv) {
    CLI::App app{"Serves a fieldstore engine directory over a unix socket"};
    std::filesystem::path dir;
    std::filesystem::path socket;
    bool memory = false;
    app.add_option("--dir", dir, "Engine data directory")->required();
    app.add_option("--socket", socket, "Socket path")->required();
    app.add_flag("--memory", memory, "Keep everything in memory");
    CLI11_PARSE(app, argc, argv);

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    try {
        auto engine = memory ? fieldstore::LocalEngine::in_memory() : fieldstore::LocalEngine::open(dir);
        fieldstore::EngineServer server(engine, socket);
        std::cout << "serving " << (memory ? std::string("memory") : dir.string()) << " on " << socket.string()
                  << std::endl;
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    } catch (const std::exception& e) {
        std::cerr << "fieldstore-engined: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
