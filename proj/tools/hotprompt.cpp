// hotprompt: the background service, plus session export and the mock chat server.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>
#include <thread>

#include "hotprompt/error.hpp"
#include "hotprompt/mock_server.hpp"
#include "hotprompt/runtime.hpp"
#include "hotprompt/session_store.hpp"

using namespace hotprompt;

namespace {

int export_sessions(const std::string& store_path, const std::string& format) {
  try {
    SessionStore store(store_path);
    std::cout << (format == "json" ? store.serialize() + "\n" : store.export_text());
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return static_cast<int>(ExitStatus::RuntimeError);
  }
}

int mock_server(const std::string& scenario_path, const std::string& host, int port, const std::string& token) {
  try {
    MockChatServer server(Scenario::load(scenario_path), token);
    install_signal_handlers();
    int bound = server.start(host, port);
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    while (!shutdown_signalled()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == ErrorCode::ConfigInvalid ? static_cast<int>(ExitStatus::ConfigInvalid)
                                                : static_cast<int>(ExitStatus::RuntimeError);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"System-wide LLM shortcut service"};
  app.require_subcommand(0, 1);

  std::string config_path, backend, script, fixture, scenario, log_level = "info";
  bool realtime = false;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--backend", backend, "Override the configured backend")
      ->check(CLI::IsMember({"api", "relay", "mock"}));
  app.add_option("--headless", script, "Drive the service from a script instead of the hotkey")
      ->check(CLI::ExistingFile);
  app.add_option("--fixture", fixture, "Simulated document for headless runs")->check(CLI::ExistingFile);
  app.add_option("--scenario", scenario, "Mock backend scenario (JSON)")->check(CLI::ExistingFile);
  app.add_flag("--realtime", realtime, "Use the wall clock in headless mode");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  auto* exp = app.add_subcommand("export-sessions", "Print stored chat sessions");
  std::string store_path, format = "text";
  exp->add_option("--store", store_path, "Session store file")->required();
  exp->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

  auto* mock = app.add_subcommand("mock-server", "Serve scripted chat completions over HTTP");
  std::string host = "127.0.0.1", token;
  int port = 8089;
  mock->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  mock->add_option("--host", host, "Bind address");
  mock->add_option("--port", port, "Port (0 picks a free one)");
  mock->add_option("--token", token, "Require this bearer token");

  CLI11_PARSE(app, argc, argv);

  // stdout may carry bridge frames, so logs go to stderr.
  spdlog::set_default_logger(std::make_shared<spdlog::logger>(
      "hotprompt", std::make_shared<spdlog::sinks::stderr_color_sink_mt>()));
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (*exp) return export_sessions(store_path, format);
  if (*mock) return mock_server(scenario, host, port, token);

  ServiceConfig config;
  try {
    config = config_path.empty() ? ServiceConfig{} : ServiceConfig::load(config_path);
    if (!backend.empty()) config.backend = parse_backend_kind(backend);
    if (!fixture.empty()) config.fixture = fixture;
    if (!scenario.empty()) config.mock_scenario = scenario;
    config.validate();
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return static_cast<int>(ExitStatus::ConfigInvalid);
  }

  RunOptions options;
  if (!script.empty()) options.script = script;
  options.realtime = realtime;
  options.report = &std::cerr;
  install_signal_handlers();
  return static_cast<int>(run_service(config, options));
}
