// Tutoring service: REST + WebSocket front end over the turn pipeline.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "tutor/assets.hpp"
#include "tutor/error.hpp"
#include "tutor/gateway.hpp"
#include "tutor/http_server.hpp"
#include "tutor/server.hpp"

namespace fs = std::filesystem;
using namespace tutor;

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spoken English tutoring server"};
  std::optional<fs::path> config_path;
  std::string bind = "127.0.0.1";
  std::uint16_t port = 8080;
  std::optional<fs::path> data_dir;
  unsigned workers = 4;
  app.add_option("--config", config_path, "JSON config (endpoints, defaults, data_dir, bind, port)");
  app.add_option("--bind", bind, "bind address");
  app.add_option("--port", port, "TCP port (0 picks one)");
  app.add_option("--data-dir", data_dir, "session storage directory");
  app.add_option("--workers", workers, "request worker threads");
  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json cfg = nlohmann::json::object();
    if (config_path) cfg = nlohmann::json::parse(read_text_file(*config_path));

    GatewayConfig gateway = GatewayConfig::from_json(cfg);
    gateway.apply_env();

    ServiceOptions options;
    options.data_dir = data_dir.value_or(fs::path(cfg.value("data_dir", std::string("data"))));
    options.defaults = SessionConfig::from_overrides(cfg.value("defaults", nlohmann::json::object()));
    if (!app.count("--bind")) bind = cfg.value("bind", bind);
    if (!app.count("--port")) port = cfg.value("port", port);

    TutorService service(build_model_stack(gateway), options);
    HttpServer server(service, bind, port, 2, workers);
    server.start();
    std::cout << "listening on " << bind << ":" << server.port() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (g_stop == 0) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    server.stop();
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
