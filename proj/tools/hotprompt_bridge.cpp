// hotprompt-bridge: frame codec and a scripted stand-in for the browser extension.

#include <unistd.h>

#include <CLI11.hpp>
#include <atomic>
#include <iostream>
#include <thread>

#include "hotprompt/bridge.hpp"
#include "hotprompt/error.hpp"
#include "hotprompt/gateway.hpp"
#include "hotprompt/transport.hpp"

using namespace hotprompt;

namespace {

std::string read_all_stdin() {
  std::string data;
  char buf[65536];
  ssize_t n;
  while ((n = ::read(0, buf, sizeof buf)) > 0) data.append(buf, static_cast<std::size_t>(n));
  return data;
}

int encode() {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    try {
      std::cout << frame_bytes(encode_payload(decode_payload(line)));
    } catch (const Error& e) {
      std::cerr << e.what() << '\n';
      return 1;
    }
  }
  std::cout.flush();
  return 0;
}

int decode() {
  FrameDecoder decoder;
  try {
    for (const auto& m : decoder.feed(read_all_stdin())) std::cout << encode_payload(m) << '\n';
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  if (decoder.buffered() != 0) {
    std::cerr << "truncated frame (" << decoder.buffered() << " bytes left)\n";
    return 1;
  }
  return 0;
}

/// Answers SubmitQuery with the scenario's deltas as growing ResponseChunk
/// texts followed by ResponseDone, the way the extension reports a provider page.
int fake_extension(const std::string& scenario_path, const std::string& chat_ref) {
  const Scenario scenario = scenario_path.empty()
                                ? Scenario::parse(R"({"responses":[{"match":"","deltas":["ok"]}]})")
                                : Scenario::load(scenario_path);
  FdChannel channel(0, 1);
  BridgeEndpoint ep("extension", channel.writer());
  std::atomic<bool> closed{false};

  ep.on(MessageType::OpenChat, [](const BridgeMessage& m) { std::cerr << "open-chat " << m.body.dump() << '\n'; });
  ep.on(MessageType::Cancel, [](const BridgeMessage& m) { std::cerr << "cancel " << m.body.dump() << '\n'; });
  ep.on(MessageType::ExtractSelection, [&ep](const BridgeMessage& m) {
    ep.reply(m, MessageType::SelectionResult, {{"text", ""}, {"editable", false}});
  });
  ep.on(MessageType::InsertText, [&ep](const BridgeMessage& m) {
    ep.reply(m, MessageType::InsertAck, {{"chars", m.body.value("text", "").size()}});
  });
  ep.on(MessageType::SubmitQuery, [&](const BridgeMessage& m) {
    const ScenarioRule* rule = scenario.find(m.body.value("prompt", ""));
    if (!rule) {
      ep.reply(m, MessageType::ResponseFailed, {{"kind", "BackendUnavailable"}, {"detail", "no scripted response"}});
      return;
    }
    std::string text;
    for (const auto& d : rule->deltas) {
      text += d;
      ep.reply(m, MessageType::ResponseChunk, {{"text", text}});
    }
    if (rule->fail) {
      ep.reply(m, MessageType::ResponseFailed, {{"kind", "BackendUnavailable"}, {"detail", "scripted failure"}});
      return;
    }
    std::string ref = m.body.value("chat_ref", "");
    if (ref.empty()) ref = chat_ref;
    ep.reply(m, MessageType::ResponseDone, {{"text", text}, {"chat_ref", ref}});
  });

  channel.start(ep, [&](const std::string&) { closed = true; });
  ep.hello({{"role", "extension"}});
  while (!closed) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  channel.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bridge frame tools"};
  app.require_subcommand(1);
  app.add_subcommand("encode", "JSON messages (one per line) on stdin to frames on stdout");
  app.add_subcommand("decode", "Frames on stdin to JSON lines on stdout");
  auto* fake = app.add_subcommand("fake-extension", "Scripted extension peer on stdin/stdout");
  std::string scenario, chat_ref = "chat-1";
  fake->add_option("--scenario", scenario, "Scenario JSON")->check(CLI::ExistingFile);
  fake->add_option("--chat-ref", chat_ref, "Chat id reported with ResponseDone");
  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("encode")) return encode();
  if (app.got_subcommand("decode")) return decode();
  try {
    return fake_extension(scenario, chat_ref);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
