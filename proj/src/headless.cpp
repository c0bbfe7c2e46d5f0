#include "hotprompt/headless.hpp"

#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace {

constexpr Millis kDefaultAwaitMs = 10000;
constexpr Millis kAwaitStep = 10;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string text_arg(const std::string& rest) {
  if (!rest.empty() && rest.front() == '"') {
    auto j = nlohmann::json::parse(rest, nullptr, false);
    if (j.is_discarded() || !j.is_string()) throw Error(ErrorCode::ConfigInvalid, "bad string literal: " + rest);
    return j.get<std::string>();
  }
  return rest;
}

long long int_arg(const std::string& word, const std::string& what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(word, &used);
    if (used == word.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigInvalid, what + " expects an integer, got '" + word + "'");
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace

ScriptRunner::ScriptRunner(Service& service, Advance advance, SimulatedDocument* document)
    : service_(service), advance_(std::move(advance)), document_(document) {
  service_.set_error_hook([this](const Error& e) { last_error_ = e.code(); });
}

ScriptRunner::Result ScriptRunner::run(std::istream& script) {
  Result result;
  std::string line;
  while (!result.shutdown && std::getline(script, line)) step(line, result);
  return result;
}

bool ScriptRunner::step(const std::string& raw, Result& result) {
  const std::string line = trim(raw);
  if (line.empty() || line.front() == '#') return true;
  const auto space = line.find(' ');
  const std::string cmd = line.substr(0, space);
  const std::string rest = space == std::string::npos ? "" : trim(line.substr(space + 1));

  auto fail = [&](const std::string& why) {
    ++result.failures;
    result.log.push_back("FAIL " + line + ": " + why);
    return false;
  };
  auto act = [&](const std::function<void()>& fn) {
    last_error_.reset();
    try {
      fn();
    } catch (const Error& e) {
      last_error_ = e.code();
      result.log.push_back(std::string("error ") + e.what());
    }
    service_.pump();
    return true;
  };

  try {
    if (cmd == "trigger") return act([&] { service_.handle_trigger(); });
    if (cmd == "quick") {
      auto sp = rest.find(' ');
      int slot = static_cast<int>(int_arg(rest.substr(0, sp), "quick"));
      std::string extra = sp == std::string::npos ? "" : text_arg(trim(rest.substr(sp + 1)));
      return act([&] { service_.dispatch(action::QuickAction{slot, extra}); });
    }
    if (cmd == "submit") return act([&] { service_.dispatch(action::SubmitQuery{text_arg(rest), false}); });
    if (cmd == "submit!") return act([&] { service_.dispatch(action::SubmitQuery{text_arg(rest), true}); });
    if (cmd == "retype") return act([&] { service_.dispatch(action::Retype{text_arg(rest)}); });
    if (cmd == "accept") return act([&] { service_.dispatch(action::AcceptInsert{false}); });
    if (cmd == "accept-append") return act([&] { service_.dispatch(action::AcceptInsert{true}); });
    if (cmd == "escape") return act([&] { service_.dispatch(action::Escape{}); });
    if (cmd == "cancel") return act([&] { service_.dispatch(action::Cancel{}); });
    if (cmd == "advance") {
      advance_(int_arg(rest, "advance"));
      return true;
    }
    if (cmd == "await") {
      std::istringstream in(rest);
      std::string name, ms;
      in >> name >> ms;
      auto target = parse_state_kind(name);
      if (!target) return fail("unknown state");
      const Millis limit = ms.empty() ? kDefaultAwaitMs : int_arg(ms, "await");
      service_.pump();
      for (Millis waited = 0; service_.kind() != *target && waited < limit; waited += kAwaitStep)
        advance_(kAwaitStep);
      if (service_.kind() != *target)
        return fail("still " + std::string(to_string(service_.kind())));
      return true;
    }
    if (cmd == "expect-state") {
      auto target = parse_state_kind(rest);
      if (!target) return fail("unknown state");
      if (service_.kind() != *target) return fail("state is " + std::string(to_string(service_.kind())));
      return true;
    }
    if (cmd == "expect-error") {
      auto code = parse_error_code(rest);
      if (!code) return fail("unknown error code");
      if (last_error_ != code)
        return fail(last_error_ ? "got " + std::string(to_string(*last_error_)) : "no error raised");
      return true;
    }
    if (cmd == "expect-body" || cmd == "expect-clipboard") {
      if (!document_) return fail("no simulated document attached");
      const std::string want = text_arg(rest);
      const std::string got = cmd == "expect-body" ? document_->body() : document_->clipboard;
      if (got != want) return fail("got " + quoted(got));
      return true;
    }
    if (cmd == "expect-insertions") {
      auto want = static_cast<std::size_t>(int_arg(rest, "expect-insertions"));
      if (service_.insertions() != want) return fail("got " + std::to_string(service_.insertions()));
      return true;
    }
    if (cmd == "shutdown") {
      service_.post(ShutdownEvent{});
      service_.pump();
      result.shutdown = true;
      return true;
    }
  } catch (const Error& e) {
    return fail(e.what());
  }
  return fail("unknown command");
}

ScriptRunner::Advance simulated_advance(Service& service, SimulatedClock& clock, Millis step) {
  return [&service, &clock, step](Millis total) {
    service.pump();
    for (Millis done = 0; done < total;) {
      const Millis d = std::min(step, total - done);
      clock.advance(d);
      done += d;
      service.tick();
    }
  };
}

ScriptRunner::Advance realtime_advance(Service& service) {
  return [&service](Millis total) {
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(total);
    do {
      service.tick();
      service.wait_and_pump(std::chrono::milliseconds(5));
    } while (std::chrono::steady_clock::now() < until);
    service.tick();
  };
}

}  // namespace hotprompt
