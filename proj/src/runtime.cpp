#include "hotprompt/runtime.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

#include "hotprompt/error.hpp"
#include "hotprompt/headless.hpp"
#include "hotprompt/service.hpp"
#include "hotprompt/transport.hpp"

namespace hotprompt {
namespace {

std::atomic<bool> g_signalled{false};

extern "C" void on_signal(int) { g_signalled = true; }

constexpr auto kLoopWait = std::chrono::milliseconds(20);

/// Focus as reported by the extension's in-page shortcut listener; selection,
/// editability and insertion go through the extension.
class ExtensionFocusAdapter final : public FocusAdapter {
 public:
  explicit ExtensionFocusAdapter(WebAdapter& web) : web_(web) {}

  void report(FocusContext focus) {
    std::lock_guard lock(mutex_);
    focus.adapter_id = AdapterId::Web;
    focus_ = std::move(focus);
  }

  FocusContext capture_focus() override {
    std::lock_guard lock(mutex_);
    if (!focus_ || focus_->app_name.empty())
      throw Error(ErrorCode::CaptureFailed, "no focus reported by the extension");
    return *focus_;
  }
  SelectionCapture extract_selection(const FocusContext& f, bool want_context) override {
    return web_.extract_selection(f, want_context);
  }
  InsertionReport insert_response(const FocusContext& f, std::string_view text, InsertMode mode) override {
    return web_.insert_response(f, text, mode);
  }
  bool is_editable(const FocusContext& f) override { return web_.is_editable(f); }
  bool press_key(const FocusContext& f, const Key& key) override { return web_.press_key(f, key); }

 private:
  WebAdapter& web_;
  std::mutex mutex_;
  std::optional<FocusContext> focus_;
};

Scenario default_scenario() {
  return Scenario::parse(R"({"responses":[{"match":"","deltas":["This is ","a mock ","response."]}]})");
}

/// Routes service traffic to whichever peer is attached and feeds their
/// messages back into the loop.
class PeerHub {
 public:
  explicit PeerHub(Service& service, ExtensionFocusAdapter* focus) : service_(service), focus_(focus) {}

  void attach_handlers(BridgeEndpoint& ep) {
    ep.on(MessageType::Trigger, [this](const BridgeMessage& m) {
      if (focus_) {
        FocusContext f;
        f.app_name = m.body.value("app", "");
        f.window_title = m.body.value("title", "");
        f.process_id = m.body.value("pid", 0L);
        focus_->report(std::move(f));
      }
      service_.post(TriggerEvent{});
    });
    ep.on(MessageType::UserAction, [this, &ep](const BridgeMessage& m) {
      try {
        service_.post(parse_user_action(m.body));
      } catch (const Error& e) {
        ep.reply_error(m, "bad-action", e.what());
      }
    });
    ep.on(MessageType::Shutdown, [this](const BridgeMessage&) { service_.post(ShutdownEvent{}); });
  }

  void set_popup(std::unique_ptr<FdChannel> channel) {
    std::lock_guard lock(mutex_);
    if (popup_channel_) popup_channel_->stop();
    popup_channel_ = std::move(channel);
    popup_ = std::make_unique<BridgeEndpoint>("service-ui", popup_channel_->writer());
    attach_handlers(*popup_);
    popup_channel_->start(*popup_);
    popup_->hello({{"role", "service"}});
  }

  void set_extension(BridgeEndpoint* ext) { extension_ = ext; }

  void send(const BridgeMessage& msg) {
    std::lock_guard lock(mutex_);
    try {
      if (popup_ && !popup_->closed() && popup_->handshaken()) {
        popup_->send(msg);
        return;
      }
      if (extension_ && !extension_->closed() && extension_->handshaken()) {
        extension_->send(msg);
        return;
      }
    } catch (const Error& e) {
      spdlog::warn("ui message dropped: {}", e.what());
      return;
    }
    spdlog::debug("ui {} {}", msg.type, msg.body.dump());
  }

  void stop() {
    std::lock_guard lock(mutex_);
    if (popup_channel_) popup_channel_->stop();
  }

 private:
  Service& service_;
  ExtensionFocusAdapter* focus_;
  BridgeEndpoint* extension_ = nullptr;
  std::mutex mutex_;
  std::unique_ptr<FdChannel> popup_channel_;
  std::unique_ptr<BridgeEndpoint> popup_;
};

}  // namespace

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

bool shutdown_signalled() { return g_signalled; }
void reset_shutdown_signal() { g_signalled = false; }

ExitStatus run_service(const ServiceConfig& config, const RunOptions& options) {
  auto report = [&](const std::string& line) {
    if (options.report) *options.report << line << '\n';
  };
  try {
    config.validate();
  } catch (const Error& e) {
    report(e.what());
    return ExitStatus::ConfigInvalid;
  }

  const bool headless = options.script.has_value();
  std::vector<HotkeyRegistration> hotkeys;
  if (!headless) {
    try {
      for (const auto& h : config.hotkeys) hotkeys.emplace_back(h, config.lock_dir);
    } catch (const Error& e) {
      report(e.what());
      return ExitStatus::HotkeyUnavailable;
    }
  }

  try {
    SimulatedClock sim_clock;
    SystemClock sys_clock;
    const bool simulated_time = headless && !options.realtime && config.backend == BackendKind::Mock;
    const Clock& clock = simulated_time ? static_cast<const Clock&>(sim_clock) : sys_clock;

    SessionStore store(config.store_path);

    // The channel is declared last so its reader stops before the endpoint dies.
    std::unique_ptr<BridgeEndpoint> extension;
    std::unique_ptr<FdChannel> ext_channel;
    if (!headless || config.backend == BackendKind::Relay) {
      ext_channel = std::make_unique<FdChannel>(options.extension_in, options.extension_out);
      extension = std::make_unique<BridgeEndpoint>("service", ext_channel->writer());
    }

    std::unique_ptr<Backend> backend;
    switch (config.backend) {
      case BackendKind::Mock:
        backend = std::make_unique<MockBackend>(
            config.mock_scenario.empty() ? default_scenario() : Scenario::load(config.mock_scenario.string()), clock);
        break;
      case BackendKind::Api:
        backend = std::make_unique<ApiBackend>(config.api);
        break;
      case BackendKind::Relay:
        backend = std::make_unique<RelayBackend>(*extension, clock, config.quiescence, config.relay_home_url);
        break;
    }
    LlmGateway gateway(std::move(backend), clock, config.quiescence);

    SimulatedDocument document;
    std::unique_ptr<FocusAdapter> simulated;
    std::unique_ptr<WebAdapter> web;
    std::unique_ptr<ExtensionFocusAdapter> ext_focus;
    FocusAdapter* adapter = nullptr;
    if (headless) {
      if (!config.fixture.empty()) document = SimulatedDocument::load(config.fixture.string());
      simulated = std::make_unique<SimulatedAdapter>(document, config.capture_timeout);
      adapter = simulated.get();
    } else {
      web = std::make_unique<WebAdapter>(make_blocking_requester(*extension), config.capture_timeout);
      ext_focus = std::make_unique<ExtensionFocusAdapter>(*web);
      adapter = ext_focus.get();
    }

    Service service(config, *adapter, gateway, store, clock);
    PeerHub hub(service, ext_focus.get());
    hub.set_extension(extension.get());
    service.set_ui_sink([&hub](const BridgeMessage& m) { hub.send(m); });

    std::unique_ptr<UnixSocketServer> ui_server;
    if (!config.ui_socket.empty()) {
      ui_server = std::make_unique<UnixSocketServer>(
          config.ui_socket, [&hub](std::unique_ptr<FdChannel> ch) { hub.set_popup(std::move(ch)); });
      ui_server->start();
    }
    struct StopOnExit {
      std::function<void()> fn;
      ~StopOnExit() { fn(); }
    } stop_peers{[&] {
      if (ui_server) ui_server->stop();
      hub.stop();
      if (ext_channel) ext_channel->stop();
    }};

    std::atomic<bool> extension_gone{false};
    if (extension) {
      hub.attach_handlers(*extension);
      ext_channel->start(*extension, [&](const std::string& reason) {
        spdlog::info("extension channel closed: {}", reason);
        extension_gone = true;
      });
      extension->hello({{"role", "service"}});
    }

    ExitStatus status = ExitStatus::Ok;
    if (headless) {
      std::ifstream script(*options.script);
      if (!script) throw Error(ErrorCode::ConfigInvalid, "cannot read script " + options.script->string());
      auto advance = simulated_time ? simulated_advance(service, sim_clock) : realtime_advance(service);
      ScriptRunner runner(service, advance, &document);
      auto result = runner.run(script);
      for (const auto& line : result.log) {
        spdlog::info("{}", line);
        if (line.rfind("FAIL", 0) == 0) report(line);
      }
      report(std::string("state ") + std::string(to_string(service.kind())) + ", insertions " +
             std::to_string(service.insertions()) + ", failures " + std::to_string(result.failures));
      if (result.failures > 0) status = ExitStatus::ScriptFailed;
    } else {
      service.set_error_hook([](const Error& e) { spdlog::warn("{}", e.what()); });
      spdlog::info("service running; hotkey {}", config.hotkeys.front().describe());
      while (!service.shutdown_requested() && !shutdown_signalled() && !extension_gone) {
        service.wait_and_pump(kLoopWait);
        service.tick();
      }
      spdlog::info("service stopping");
    }

    stop_peers.fn();
    if (extension) extension->close("shutdown");
    return status;
  } catch (const Error& e) {
    report(e.what());
    return e.code() == ErrorCode::ConfigInvalid ? ExitStatus::ConfigInvalid : ExitStatus::RuntimeError;
  } catch (const std::exception& e) {
    report(e.what());
    return ExitStatus::RuntimeError;
  }
}

}  // namespace hotprompt
