#include <doctest.h>

#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>
#include <random>

#include "hotprompt/bridge.hpp"
#include "hotprompt/error.hpp"
#include "hotprompt/gateway.hpp"
#include "hotprompt/mock_server.hpp"
#include "support/loopback.hpp"

using namespace hotprompt;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigInvalid;
}

/// Thread-safe event log keyed by request id.
struct Recorder {
  std::mutex mutex;
  std::condition_variable cv;
  std::map<std::string, std::vector<ResponseEvent>> events;
  std::vector<std::pair<std::string, Millis>> terminal_times;
  const Clock* clock = nullptr;

  EventSink sink() {
    return [this](const std::string& id, ResponseEvent e) {
      std::lock_guard lock(mutex);
      if (is_terminal(e) && clock) terminal_times.emplace_back(id, clock->now());
      events[id].push_back(std::move(e));
      cv.notify_all();
    };
  }

  std::vector<ResponseEvent> of(const std::string& id) {
    std::lock_guard lock(mutex);
    return events[id];
  }

  std::vector<ResponseEvent> wait_terminal(const std::string& id, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    std::unique_lock lock(mutex);
    cv.wait_for(lock, timeout, [&] { return !events[id].empty() && is_terminal(events[id].back()); });
    return events[id];
  }
};

/// (Chunk)* terminal, with each Chunk extending the previous one.
void check_grammar(const std::vector<ResponseEvent>& trace) {
  REQUIRE_FALSE(trace.empty());
  std::string prev;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const bool last = i + 1 == trace.size();
    CHECK(is_terminal(trace[i]) == last);
    if (const auto* c = std::get_if<Chunk>(&trace[i])) {
      CHECK(c->accumulated_text.starts_with(prev));
      CHECK(c->accumulated_text != prev);
      prev = c->accumulated_text;
    }
  }
}

ChatSession session(const std::string& title, std::string ref = {}) {
  ChatSession s;
  s.key = SessionKey("app", title);
  s.backend_session_ref = std::move(ref);
  return s;
}

void run_until(LlmGateway& gw, SimulatedClock& clock, Millis until, Millis step = 10) {
  while (clock.now() < until) {
    clock.advance(step);
    gw.tick(clock.now());
  }
}

}  // namespace

TEST_CASE("mock backend streams scripted chunks") {
  SimulatedClock clock;
  auto scenario = Scenario::parse(R"({"responses":[{"match":"","chunks":["The","The quick"],"interval_ms":50}]})");
  Recorder rec;
  LlmGateway gw(std::make_unique<MockBackend>(scenario, clock), clock);
  gw.set_sink(rec.sink());
  const auto id = gw.submit(session("a"), "hi");
  run_until(gw, clock, 500);
  CHECK(rec.of(id) == std::vector<ResponseEvent>{Chunk{"The"}, Chunk{"The quick"}, Done{"The quick"}});
  CHECK_FALSE(gw.in_flight(id));
}

TEST_CASE("scenario files") {
  auto s = Scenario::parse(
      R"({"responses":[{"match":"translate","deltas":["Hallo"],"fail":"AuthFailed","status":401,"drop_after":1,
          "malformed_after":2,"hang":true,"chat_ref":"c-1","interval_ms":5},{"deltas":["x"]}]})");
  REQUIRE(s.responses.size() == 2);
  CHECK(s.responses[0].fail == FailureKind::AuthFailed);
  CHECK(s.responses[0].status == 401);
  CHECK(s.responses[0].drop_after == 1u);
  CHECK(s.responses[0].malformed_after == 2u);
  CHECK(s.responses[0].hang);
  CHECK(s.responses[0].chat_ref == "c-1");
  CHECK(s.find("please translate this") == &s.responses[0]);
  CHECK(s.find("other") == &s.responses[1]);
  CHECK(code_of([] { Scenario::parse(R"({"responses":[{"chunks":["ab","x"]}]})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { Scenario::parse(R"({"responses":[{"fail":"Nope"}]})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { Scenario::parse("[]"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { Scenario::load("/nonexistent/scenario.json"); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("one request per session") {
  SimulatedClock clock;
  Recorder rec;
  LlmGateway gw(std::make_unique<MockBackend>(Scenario::parse(R"({"responses":[{"deltas":["x"]}]})"), clock), clock);
  gw.set_sink(rec.sink());
  const auto first = gw.submit(session("a"), "p");
  CHECK(code_of([&] { gw.submit(session("a"), "p"); }) == ErrorCode::Busy);
  const auto other = gw.submit(session("b"), "p");
  CHECK(first != other);
  CHECK(gw.in_flight_count() == 2);
  run_until(gw, clock, 100);
  CHECK(gw.in_flight_count() == 0);
  CHECK_NOTHROW(gw.submit(session("a"), "p"));
}

TEST_CASE("cancel") {
  SimulatedClock clock;
  auto scenario = Scenario::parse(R"({"responses":[{"deltas":["a","b","c","d"],"interval_ms":100}]})");
  Recorder rec;
  LlmGateway gw(std::make_unique<MockBackend>(scenario, clock), clock);
  gw.set_sink(rec.sink());

  SUBCASE("mid-stream") {
    const auto id = gw.submit(session("s"), "p");
    run_until(gw, clock, 250);
    gw.cancel(id);
    run_until(gw, clock, 1000);
    const auto trace = rec.of(id);
    REQUIRE(trace.size() == 3);
    CHECK(trace[0] == ResponseEvent{Chunk{"a"}});
    CHECK(trace[1] == ResponseEvent{Chunk{"ab"}});
    const auto& f = std::get<Failed>(trace[2]);
    CHECK(f.kind == FailureKind::Cancelled);
    CHECK(f.partial_text == "ab");
    check_grammar(trace);
    CHECK(code_of([&] { gw.cancel(id); }) == ErrorCode::UnknownRequest);
  }
  SUBCASE("after Done") {
    const auto id = gw.submit(session("s"), "p");
    run_until(gw, clock, 1000);
    CHECK(std::holds_alternative<Done>(rec.of(id).back()));
    CHECK(code_of([&] { gw.cancel(id); }) == ErrorCode::UnknownRequest);
  }
  CHECK(code_of([&] { gw.cancel("req-unknown"); }) == ErrorCode::UnknownRequest);
}

TEST_CASE("hard timeout and missing rules") {
  SimulatedClock clock;
  auto scenario = Scenario::parse(R"({"responses":[{"match":"hang","deltas":["partial"],"hang":true,"interval_ms":10}]})");
  Recorder rec;
  rec.clock = &clock;
  LlmGateway gw(std::make_unique<MockBackend>(scenario, clock), clock, QuiescenceRule{100, 2000});
  gw.set_sink(rec.sink());
  const auto hang = gw.submit(session("a"), "please hang");
  const auto none = gw.submit(session("b"), "unmatched");
  run_until(gw, clock, 3000);
  const auto trace = rec.of(hang);
  check_grammar(trace);
  const auto& f = std::get<Failed>(trace.back());
  CHECK(f.kind == FailureKind::HardTimeout);
  CHECK(f.partial_text == "partial");
  CHECK(std::get<Failed>(rec.of(none).back()).kind == FailureKind::BackendUnavailable);
  for (const auto& [id, t] : rec.terminal_times)
    if (id == hang) CHECK(t == 2000);
}

TEST_CASE("gateway normalizes chunk streams") {
  struct Scripted final : Backend {
    EventSink sink;
    std::string_view name() const override { return "scripted"; }
    void preload(const ChatSession&) override {}
    void start(const BackendRequest&, EventSink s) override { sink = std::move(s); }
    void stop(const std::string&) override {}
  };
  SimulatedClock clock;
  auto backend = std::make_unique<Scripted>();
  auto* raw = backend.get();
  Recorder rec;
  LlmGateway gw(std::move(backend), clock);
  gw.set_sink(rec.sink());
  const auto id = gw.submit(session("a"), "p");
  raw->sink(id, Chunk{"He"});
  raw->sink(id, Chunk{"He"});
  raw->sink(id, Chunk{"Hex"});
  raw->sink(id, Chunk{"Hello"});
  raw->sink(id, Chunk{"Hexagon"});
  raw->sink(id, Done{"Hexagon!"});
  raw->sink(id, Chunk{"late"});
  raw->sink(id, Done{"again"});
  CHECK(rec.of(id) == std::vector<ResponseEvent>{Chunk{"He"}, Chunk{"Hex"}, Chunk{"Hexagon"}, Done{"Hexagon!"}});
}

TEST_CASE("backend start failures") {
  struct Refusing final : Backend {
    std::string_view name() const override { return "refusing"; }
    void preload(const ChatSession&) override { throw Error(ErrorCode::BackendUnavailable, "down"); }
    void start(const BackendRequest&, EventSink) override { throw Error(ErrorCode::ChannelClosed, "down"); }
    void stop(const std::string&) override {}
  };
  SimulatedClock clock;
  LlmGateway gw(std::make_unique<Refusing>(), clock);
  CHECK_NOTHROW(gw.preload(session("a")));
  CHECK(code_of([&] { gw.submit(session("a"), "p"); }) == ErrorCode::BackendUnavailable);
  CHECK(gw.in_flight_count() == 0);
  CHECK(code_of([&] { LlmGateway(std::make_unique<Refusing>(), clock, QuiescenceRule{0, 10}); }) ==
        ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { QuiescenceRule{500, 500}.validate(); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("quiescence tracker") {
  SUBCASE("content at 0, 200, 450 with an 800 ms window") {
    QuiescenceTracker t({800, 120000}, 0);
    std::optional<ResponseEvent> done;
    Millis done_at = -1;
    const std::map<Millis, std::string> schedule{{0, "A"}, {200, "AB"}, {450, "ABC"}};
    for (Millis now = 0; now <= 3000 && !done; now += 10) {
      if (auto it = schedule.find(now); it != schedule.end()) CHECK(t.observe(it->second, now));
      if ((done = t.poll(now))) done_at = now;
    }
    CHECK(done_at == 1250);
    CHECK(*done == ResponseEvent{Done{"ABC"}});
    CHECK(t.finished());
    CHECK_FALSE(t.poll(5000));
  }
  SUBCASE("repeated content is not a change") {
    QuiescenceTracker t({100, 10000}, 0);
    CHECK(t.observe("x", 0));
    CHECK_FALSE(t.observe("x", 50));
    CHECK(t.poll(100) == ResponseEvent{Done{"x"}});
  }
  SUBCASE("nothing arrives") {
    QuiescenceTracker t({100, 1000}, 0);
    CHECK_FALSE(t.poll(500));
    auto e = t.poll(1000);
    REQUIRE(e);
    CHECK(std::get<Failed>(*e).kind == FailureKind::HardTimeout);
  }
  SUBCASE("empty first content still counts") {
    QuiescenceTracker t({100, 1000}, 0);
    CHECK(t.observe("", 10));
    CHECK(t.poll(110) == ResponseEvent{Done{""}});
  }
}

TEST_CASE("quiescence holds across random schedules") {
  std::mt19937 rng(31);
  const Millis tick = 10;
  for (int i = 0; i < 100; ++i) {
    const Millis window = 100 + static_cast<Millis>(rng() % 1500);
    QuiescenceTracker t({window, 60000}, 0);
    Millis at = static_cast<Millis>(rng() % 300);
    std::map<Millis, std::string> schedule;
    std::string text;
    for (int c = 1 + rng() % 10; c > 0; --c) {
      text += static_cast<char>('a' + rng() % 26);
      schedule[at] = text;
      at += 1 + static_cast<Millis>(rng() % (window - 1));
    }
    const Millis last = schedule.rbegin()->first;
    Millis done_at = -1;
    auto next = schedule.begin();
    for (Millis now = 0; now <= 60000 && done_at < 0; now += tick) {
      while (next != schedule.end() && next->first <= now) t.observe(next++->second, now);
      if (auto e = t.poll(now)) {
        REQUIRE(std::holds_alternative<Done>(*e));
        CHECK(std::get<Done>(*e).final_text == text);
        done_at = now;
      }
    }
    INFO("window=", window, " last=", last);
    CHECK(done_at >= last + window);
    CHECK(done_at <= last + window + 2 * tick);
  }
}

TEST_CASE("api_stream_decode") {
  auto frame = [](const std::string& piece) {
    return "data: " + nlohmann::json{{"choices", {{{"delta", {{"content", piece}}}}}}}.dump() + "\n\n";
  };
  const std::string wire = frame("Hel") + frame("lo") + "data: [DONE]\n\n";

  SUBCASE("deltas accumulate") {
    CHECK(api_stream_decode({wire}) == std::vector<ResponseEvent>{Chunk{"Hel"}, Chunk{"Hello"}, Done{"Hello"}});
  }
  SUBCASE("any split of the wire gives the same events") {
    const auto expected = api_stream_decode({wire});
    for (std::size_t i = 0; i <= wire.size(); ++i)
      REQUIRE(api_stream_decode({wire.substr(0, i), wire.substr(i)}) == expected);
  }
  SUBCASE("connection drop") {
    auto e = api_stream_decode({frame("Hel")});
    REQUIRE(e.size() == 2);
    CHECK(std::get<Failed>(e[1]).kind == FailureKind::ConnectionLost);
    CHECK(std::get<Failed>(e[1]).partial_text == "Hel");
  }
  SUBCASE("empty completion") {
    CHECK(api_stream_decode({"data: [DONE]\n\n"}) == std::vector<ResponseEvent>{Done{""}});
  }
  SUBCASE("malformed frame") {
    auto e = api_stream_decode({frame("Hel"), "data: {not json\n\n", frame("lo")});
    REQUIRE(e.size() == 2);
    CHECK(std::get<Failed>(e[1]).kind == FailureKind::ProtocolError);
    CHECK(std::get<Failed>(e[1]).partial_text == "Hel");
  }
  SUBCASE("comments, CRLF and role-only deltas") {
    const std::string w = ": keep-alive\r\n\r\ndata: {\"choices\":[{\"delta\":{\"role\":\"assistant\"}}]}\r\n\r\n" +
                          frame("ok") + "data: [DONE]";
    CHECK(api_stream_decode({w}) == std::vector<ResponseEvent>{Chunk{"ok"}, Done{"ok"}});
  }
  SUBCASE("error frames") {
    auto e = api_stream_decode({"data: {\"error\":{\"message\":\"overloaded\"}}\n\n"});
    REQUIRE(e.size() == 1);
    CHECK(std::get<Failed>(e[0]).kind == FailureKind::BackendUnavailable);
  }
  SUBCASE("nothing after the terminal event") {
    ApiStreamDecoder d;
    CHECK(d.feed("data: [DONE]\n\n" + frame("late")).size() == 1);
    CHECK(d.feed(frame("later")).empty());
    CHECK(d.finish().empty());
  }
}

TEST_CASE("api backend against the bundled mock server") {
  ::setenv("HP_GATEWAY_TEST_TOKEN", "secret", 1);
  auto scenario = Scenario::parse(R"({"responses":[
      {"match":"drop","deltas":["Hel","lo"],"drop_after":1,"interval_ms":1},
      {"match":"garbage","deltas":["Hel","lo"],"malformed_after":1,"interval_ms":1},
      {"match":"broken","status":500},
      {"match":"","deltas":["The ","quick ","fox"],"interval_ms":1}]})");
  MockChatServer server(scenario, "secret");
  server.start();
  ApiConfig config;
  config.base_url = server.base_url();
  config.key_env = "HP_GATEWAY_TEST_TOKEN";
  SystemClock clock;
  Recorder rec;
  LlmGateway gw(std::make_unique<ApiBackend>(config), clock);
  gw.set_sink(rec.sink());

  SUBCASE("streams accumulate") {
    auto s = session("a");
    s.exchanges.push_back({"earlier question", "earlier answer", 1});
    const auto trace = rec.wait_terminal(gw.submit(s, "hello"));
    check_grammar(trace);
    CHECK(trace == std::vector<ResponseEvent>{Chunk{"The "}, Chunk{"The quick "}, Chunk{"The quick fox"},
                                              Done{"The quick fox"}});
    const auto body = server.requests().back();
    CHECK(body["stream"] == true);
    REQUIRE(body["messages"].size() == 3);
    CHECK(body["messages"][0]["content"] == "earlier question");
    CHECK(body["messages"][1]["role"] == "assistant");
    CHECK(body["messages"][2]["content"] == "hello");
  }
  SUBCASE("missing credential") {
    ::unsetenv("HP_GATEWAY_TEST_TOKEN");
    const auto trace = rec.wait_terminal(gw.submit(session("a"), "hello"));
    REQUIRE(trace.size() == 1);
    CHECK(std::get<Failed>(trace[0]).kind == FailureKind::AuthFailed);
  }
  SUBCASE("connection drop") {
    const auto trace = rec.wait_terminal(gw.submit(session("a"), "drop it"));
    check_grammar(trace);
    const auto& f = std::get<Failed>(trace.back());
    CHECK(f.kind == FailureKind::ConnectionLost);
    CHECK(f.partial_text == "Hel");
  }
  SUBCASE("malformed frame") {
    const auto trace = rec.wait_terminal(gw.submit(session("a"), "garbage please"));
    check_grammar(trace);
    CHECK(std::get<Failed>(trace.back()).kind == FailureKind::ProtocolError);
  }
  SUBCASE("server error") {
    const auto trace = rec.wait_terminal(gw.submit(session("a"), "broken"));
    CHECK(std::get<Failed>(trace.back()).kind == FailureKind::BackendUnavailable);
  }
  server.stop();
}

TEST_CASE("api backend cancel and unreachable server") {
  auto scenario = Scenario::parse(R"({"responses":[{"match":"","deltas":["a","b","c"],"interval_ms":300}]})");
  MockChatServer server(scenario);
  server.start();
  ApiConfig config;
  config.base_url = server.base_url();
  SystemClock clock;
  Recorder rec;
  LlmGateway gw(std::make_unique<ApiBackend>(config), clock);
  gw.set_sink(rec.sink());
  const auto id = gw.submit(session("a"), "p");
  gw.cancel(id);
  std::this_thread::sleep_for(std::chrono::milliseconds(700));
  const auto trace = rec.of(id);
  REQUIRE(trace.size() == 1);
  CHECK(std::get<Failed>(trace[0]).kind == FailureKind::Cancelled);
  server.stop();

  const auto down = gw.submit(session("b"), "p");
  const auto t2 = rec.wait_terminal(down);
  CHECK(std::get<Failed>(t2.back()).kind == FailureKind::BackendUnavailable);
}

TEST_CASE("relay backend over the bridge") {
  testsupport::Loopback lb;  // a = service, b = extension
  SimulatedClock clock;
  auto relay = std::make_unique<RelayBackend>(lb.a, clock, QuiescenceRule{800, 10000}, "https://chat.test/");
  auto* raw = relay.get();
  std::vector<std::pair<std::string, std::string>> refs;
  raw->on_session_ref([&](const SessionKey& k, std::string ref) { refs.emplace_back(k.normalized(), ref); });
  Recorder rec;
  rec.clock = &clock;
  LlmGateway gw(std::move(relay), clock, QuiescenceRule{800, 10000});
  gw.set_sink(rec.sink());

  SUBCASE("not connected") {
    CHECK(code_of([&] { gw.submit(session("a"), "p"); }) == ErrorCode::BackendUnavailable);
    gw.preload(session("a"));
    CHECK(lb.to_b.empty());
  }

  lb.a.hello();
  lb.pump();

  SUBCASE("preload opens the stored chat or the home page") {
    gw.preload(session("a", "https://chat.test/c/42"));
    gw.preload(session("b"));
    const auto sent = lb.drain_to_b();
    REQUIRE(sent.size() == 2);
    CHECK(sent[0].type == "OpenChat");
    CHECK(sent[0].body["chat_ref"] == "https://chat.test/c/42");
    CHECK(sent[0].body["url"] == "https://chat.test/c/42");
    CHECK(sent[1].body["url"] == "https://chat.test/");
    CHECK(sent[1].body["chat_ref"] == "");
  }
  SUBCASE("chunks and Done flow back under the same id") {
    std::string seen_id;
    lb.b.on(MessageType::SubmitQuery, [&](const BridgeMessage& m) {
      seen_id = m.id;
      CHECK(m.body["prompt"] == "question");
      lb.b.reply(m, MessageType::ResponseChunk, {{"text", "Ans"}});
      lb.b.reply(m, MessageType::ResponseChunk, {{"text", "Answer"}});
      lb.b.reply(m, MessageType::ResponseDone, {{"text", "Answer."}, {"chat_ref", "https://chat.test/c/7"}});
    });
    const auto id = gw.submit(session("a"), "question");
    lb.pump();
    CHECK_FALSE(seen_id.empty());
    CHECK(rec.of(id) == std::vector<ResponseEvent>{Chunk{"Ans"}, Chunk{"Answer"}, Done{"Answer."}});
    REQUIRE(refs.size() == 1);
    CHECK(refs[0].second == "https://chat.test/c/7");
    CHECK(lb.a.pending_requests() == 0);
  }
  SUBCASE("silent extension settles by quiescence") {
    std::vector<BridgeMessage> submits;
    lb.b.on(MessageType::SubmitQuery, [&](const BridgeMessage& m) { submits.push_back(m); });
    std::vector<BridgeMessage> cancels;
    lb.b.on(MessageType::Cancel, [&](const BridgeMessage& m) { cancels.push_back(m); });
    const auto id = gw.submit(session("a"), "q");
    lb.pump();
    REQUIRE(submits.size() == 1);
    const std::map<Millis, std::string> schedule{{0, "A"}, {200, "AB"}, {450, "ABC"}};
    for (; clock.now() <= 3000; clock.advance(10)) {
      if (auto it = schedule.find(clock.now()); it != schedule.end())
        lb.b.reply(submits[0], MessageType::ResponseChunk, {{"text", it->second}});
      lb.pump();
      gw.tick(clock.now());
      lb.pump();
      const auto so_far = rec.of(id);
      if (!so_far.empty() && is_terminal(so_far.back())) break;
    }
    const auto trace = rec.of(id);
    check_grammar(trace);
    CHECK(trace.back() == ResponseEvent{Done{"ABC"}});
    REQUIRE(rec.terminal_times.size() == 1);
    CHECK(rec.terminal_times[0].second == 1250);
    CHECK(cancels.size() == 1);
  }
  SUBCASE("failures from the page") {
    lb.b.on(MessageType::SubmitQuery, [&](const BridgeMessage& m) {
      if (m.body["prompt"] == "lost")
        lb.b.reply(m, MessageType::RediscoveryFailed, {{"detail", "output element gone"}});
      else
        lb.b.reply(m, MessageType::ResponseFailed, {{"kind", "AuthFailed"}, {"detail", "login required"}});
    });
    const auto lost = gw.submit(session("a"), "lost");
    const auto auth = gw.submit(session("b"), "login");
    lb.pump();
    CHECK(std::get<Failed>(rec.of(lost).back()).kind == FailureKind::RediscoveryFailed);
    CHECK(std::get<Failed>(rec.of(auth).back()).kind == FailureKind::AuthFailed);
  }
  SUBCASE("cancel tells the extension") {
    std::vector<BridgeMessage> cancels;
    lb.b.on(MessageType::SubmitQuery, [](const BridgeMessage&) {});
    lb.b.on(MessageType::Cancel, [&](const BridgeMessage& m) { cancels.push_back(m); });
    const auto id = gw.submit(session("a"), "q");
    lb.pump();
    gw.cancel(id);
    lb.pump();
    REQUIRE(cancels.size() == 1);
    CHECK(std::get<Failed>(rec.of(id).back()).kind == FailureKind::Cancelled);
  }
  SUBCASE("closed channel fails in-flight requests") {
    lb.b.on(MessageType::SubmitQuery, [](const BridgeMessage&) {});
    const auto id = gw.submit(session("a"), "q");
    lb.pump();
    lb.a.close("extension exited");
    const auto trace = rec.of(id);
    REQUIRE(trace.size() == 1);
    CHECK(std::get<Failed>(trace[0]).kind == FailureKind::BackendUnavailable);
  }
}

TEST_CASE("mock and api backends preload without bridge traffic") {
  SimulatedClock clock;
  auto mock = std::make_unique<MockBackend>(Scenario{}, clock);
  auto* raw = mock.get();
  LlmGateway gw(std::move(mock), clock);
  gw.preload(session("a"));
  CHECK(raw->preload_count() == 1);
  ApiBackend api(ApiConfig{});
  CHECK_NOTHROW(api.preload(session("a")));
}
