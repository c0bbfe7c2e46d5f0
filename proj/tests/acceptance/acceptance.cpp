// Prints one PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hotprompt/bridge.hpp"
#include "hotprompt/diff.hpp"
#include "hotprompt/error.hpp"
#include "hotprompt/focus.hpp"
#include "hotprompt/gateway.hpp"
#include "hotprompt/headless.hpp"
#include "hotprompt/prompt.hpp"
#include "hotprompt/service.hpp"
#include "hotprompt/utf8.hpp"
#include "support/corpus.hpp"
#include "support/key_sink.hpp"
#include "support/lcs_oracle.hpp"
#include "support/message_gen.hpp"
#include "support/prompt_cases.hpp"
#include "support/service_rig.hpp"
#include "support/text_gen.hpp"

using namespace hotprompt;

namespace {

const std::string kData = HP_TEST_DATA;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Outcome of one criterion: empty `failure` means pass.
struct Outcome {
  std::string failure;
  std::string note;
};

Outcome fail(std::string why) { return {std::move(why), {}}; }
Outcome pass(std::string note = {}) { return {{}, std::move(note)}; }

// ---------------------------------------------------------------------------

Outcome end_to_end() {
  const auto start = Clock::now();
  SimulatedDocument doc = SimulatedDocument::load(kData + "/docs/01_word_essay.doc");
  const std::string clipboard = doc.clipboard;
  SimulatedAdapter adapter(doc);
  SimulatedClock clock;
  SessionStore store;
  LlmGateway gateway(std::make_unique<MockBackend>(Scenario::load(kData + "/scenarios/basic.json"), clock), clock);
  Service service(ServiceConfig{}, adapter, gateway, store, clock);
  ScriptRunner runner(service, simulated_advance(service, clock), &doc);
  std::ifstream script(kData + "/scripts/quick_fix.hps");
  const auto result = runner.run(script);
  const double elapsed = seconds_since(start);

  if (result.failures != 0) {
    std::string log;
    for (const auto& l : result.log) log += l + "; ";
    return fail("script failures: " + log);
  }
  const std::string expected = slurp(kData + "/expected/01_word_essay.after.doc");
  if (SimulatedDocument::parse(expected).serialize() != expected) return fail("expected fixture is not canonical");
  if (doc.serialize() != expected) return fail("document differs:\n" + doc.serialize());
  if (service.insertions() != 1 || adapter.insertions() != 1) return fail("insertion count is not 1");
  if (doc.clipboard != clipboard) return fail("clipboard not restored");
  if (elapsed >= 1.0) return fail("took " + std::to_string(elapsed) + " s");
  return pass(std::to_string(static_cast<int>(elapsed * 1000)) + " ms");
}

Outcome state_machine() {
  const auto result = testsupport::enumerate_transitions();
  if (!result.mismatches.empty()) return fail(result.mismatches.front());
  if (result.covered.size() != kStateKindCount * kInputKindCount) return fail("not every pair was exercised");
  return pass(std::to_string(result.pairs) + " (state, input) cases over " +
              std::to_string(result.covered.size()) + " pairs");
}

Outcome prompt_goldens() {
  const auto cases = testsupport::prompt_cases();
  if (cases.size() != 6) return fail("expected 6 combinations");
  const std::string anchor = "Your task is to answer the following query";
  for (const auto& c : cases) {
    const std::string golden = slurp(kData + "/prompts/" + c.golden);
    if (golden.rfind(anchor, 0) != 0) return fail(c.golden + " does not start with the instruction");
    if (build_prompt(c.request, c.actions) != golden) return fail(c.name + " differs from " + c.golden);
  }
  return pass();
}

bool spans_valid(const std::vector<DiffSpan>& spans, const std::string& a, const std::string& b) {
  if (reconstruct_original(spans) != a || reconstruct_revised(spans) != b) return false;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].text.empty()) return false;
    if (i > 0 && spans[i].kind == spans[i - 1].kind) return false;
  }
  return true;
}

Outcome diff_oracle() {
  const auto start = Clock::now();
  std::mt19937 rng(20240);
  int short_pairs = 0;
  while (short_pairs < 10000) {
    const auto a = testsupport::random_words(rng, 12);
    const auto b = rng() % 2 ? testsupport::random_words(rng, 12) : testsupport::mutate(rng, a, 2);
    const auto ta = testsupport::oracle_tokens(a);
    const auto tb = testsupport::oracle_tokens(b);
    if (ta.size() > 12 || tb.size() > 12) continue;
    const auto va = tokenize(a);
    const auto vb = tokenize(b);
    if (diff_tokens(va, vb).equal_count() != testsupport::brute_force_lcs(ta, tb))
      return fail("LCS mismatch for \"" + a + "\" vs \"" + b + "\"");
    if (!spans_valid(word_diff(a, b), a, b)) return fail("invalid spans for short pair");
    ++short_pairs;
  }
  for (int i = 0; i < 10000; ++i) {
    const auto a = testsupport::random_text(rng, rng() % 5000);
    const auto b = rng() % 3 ? testsupport::mutate(rng, a, 10) : testsupport::random_text(rng, rng() % 5000);
    if (!spans_valid(word_diff(a, b), a, b)) return fail("reconstruction failed on pair " + std::to_string(i));
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 60.0) return fail("took " + std::to_string(elapsed) + " s");
  return pass("2 x 10^4 pairs in " + std::to_string(static_cast<int>(elapsed)) + " s");
}

Outcome bridge_fuzz() {
  std::mt19937 rng(777);
  std::vector<BridgeMessage> sent;
  std::string stream;
  for (int i = 0; i < 10000; ++i) {
    sent.push_back(testsupport::random_message(rng));
    stream += frame_encode(sent.back());
  }
  FrameDecoder decoder;
  std::vector<BridgeMessage> got;
  for (const auto& piece : testsupport::random_chunks(rng, stream, 4096)) {
    auto out = decoder.feed(piece);
    got.insert(got.end(), out.begin(), out.end());
  }
  if (got != sent) return fail("round trip lost or changed messages");
  if (decoder.buffered() != 0) return fail("bytes left in the decoder");

  auto expect_protocol_error = [](const std::string& bytes) {
    FrameDecoder d;
    try {
      d.feed(bytes);
    } catch (const Error& e) {
      return e.code() == ErrorCode::ProtocolError && d.closed();
    }
    return false;
  };
  auto header = [](std::uint32_t n) {
    std::string h(4, '\0');
    for (int i = 0; i < 4; ++i) h[i] = static_cast<char>((n >> (8 * i)) & 0xFF);
    return h;
  };
  for (std::uint32_t size : {std::uint32_t(kMaxInboundFrame + 1), std::uint32_t(64u << 20), 0xFFFFFFFFu})
    if (!expect_protocol_error(header(size))) return fail("oversize header accepted");
  for (int i = 0; i < 1000; ++i) {
    std::string payload(1 + rng() % 300, '\0');
    for (auto& c : payload) c = static_cast<char>(rng());
    payload[0] = static_cast<char>(rng() % 2 ? '\0' : '[');
    if (!expect_protocol_error(header(static_cast<std::uint32_t>(payload.size())) + payload))
      return fail("garbage frame accepted");
  }
  return pass("10^4 messages, " + std::to_string(stream.size()) + " bytes");
}

Outcome quiescence() {
  std::mt19937 rng(4242);
  const Millis tick = 10;
  for (int i = 0; i < 100; ++i) {
    const Millis window = 100 + static_cast<Millis>(rng() % 1500);
    QuiescenceTracker tracker({window, 600000}, 0);
    std::map<Millis, std::string> schedule;
    std::string text;
    Millis at = static_cast<Millis>(rng() % 300);
    for (int c = 1 + static_cast<int>(rng() % 12); c > 0; --c) {
      text += static_cast<char>('a' + rng() % 26);
      schedule[at] = text;
      at += 1 + static_cast<Millis>(rng() % (window - 1));
    }
    const Millis last = schedule.rbegin()->first;
    auto next = schedule.begin();
    Millis done_at = -1;
    for (Millis now = 0; now <= 600000 && done_at < 0; now += tick) {
      for (; next != schedule.end() && next->first <= now; ++next) tracker.observe(next->second, next->first);
      if (auto e = tracker.poll(now)) {
        if (!std::holds_alternative<Done>(*e) || std::get<Done>(*e).final_text != text)
          return fail("schedule " + std::to_string(i) + " ended with " + describe(*e));
        done_at = now;
      }
    }
    if (done_at < last + window || done_at > last + window + tick)
      return fail("schedule " + std::to_string(i) + ": Done at " + std::to_string(done_at) + ", expected " +
                  std::to_string(last + window));
  }

  // Responses that never settle still end at the hard timeout.
  for (int i = 0; i < 100; ++i) {
    SimulatedClock clock;
    const Millis hard = 500 + static_cast<Millis>(rng() % 5000);
    auto scenario = Scenario::parse(R"({"responses":[{"deltas":["a","b","c"],"hang":true,"interval_ms":)" +
                                    std::to_string(1 + rng() % 200) + "}]}");
    LlmGateway gateway(std::make_unique<MockBackend>(scenario, clock), clock, QuiescenceRule{100, hard});
    std::optional<ResponseEvent> terminal;
    Millis terminal_at = -1;
    gateway.set_sink([&](const std::string&, ResponseEvent e) {
      if (is_terminal(e) && !terminal) {
        terminal = e;
        terminal_at = clock.now();
      }
    });
    ChatSession session;
    session.key = SessionKey("app", "title");
    gateway.submit(session, "hang on");
    for (Millis now = 0; now <= hard + 10 * tick && !terminal; now += tick) {
      clock.set(now);
      gateway.tick(now);
    }
    if (!terminal) return fail("no terminal event with hard timeout " + std::to_string(hard));
    const auto* f = std::get_if<Failed>(&*terminal);
    if (!f || f->kind != FailureKind::HardTimeout) return fail("terminal event is " + describe(*terminal));
    if (terminal_at < hard || terminal_at > hard + tick) return fail("hard timeout fired at " + std::to_string(terminal_at));
  }
  return pass("100 schedules, 100 hard timeouts");
}

Outcome fallback_path() {
  auto corpus = testsupport::load_doc_corpus(kData);
  corpus.emplace_back("large", testsupport::make_large_doc(std::size_t{1} << 20));
  if (corpus.size() < 21) return fail("corpus has only " + std::to_string(corpus.size()) + " documents");
  bool saw_empty = false, saw_large = false;
  for (auto& [name, doc] : corpus) {
    const auto before = testsupport::doc_texts(doc.root);
    const std::string body = doc.body();
    const std::string clipboard = doc.clipboard;
    saw_empty |= body.empty();
    saw_large |= body.size() >= (std::size_t{1} << 20);
    SimulatedAdapter adapter(doc);
    std::string copied;
    try {
      copied = adapter.fallback_copy_all().text;
    } catch (const Error& e) {
      return fail(name + ": " + e.what());
    }
    if (copied != body) return fail(name + ": copied text differs");
    if (testsupport::doc_texts(doc.root) != before) return fail(name + ": document changed");
    if (doc.clipboard != clipboard) return fail(name + ": clipboard not restored");
  }
  if (!saw_empty || !saw_large) return fail("corpus lacks an empty or a 1 MB body");
  return pass(std::to_string(corpus.size()) + " documents");
}

Outcome typed_streaming() {
  std::mt19937 rng(1010);
  const std::string text = testsupport::random_text(rng, 10 * 1024);
  for (int i = 0; i < 100; ++i) {
    std::vector<ResponseEvent> events;
    std::size_t pos = 0;
    while (pos < text.size()) {
      pos = std::min(text.size(), pos + 1 + rng() % 400);
      while (pos < text.size() && (static_cast<unsigned char>(text[pos]) & 0xC0) == 0x80) ++pos;
      events.push_back(Chunk{text.substr(0, pos)});
    }
    events.push_back(Done{text});
    testsupport::KeySink sink;
    stream_typed(sink, sink.capture_focus(), events);
    if (sink.transcript() != text) return fail("chunking " + std::to_string(i) + " typed different text");
    if (sink.keys.size() != utf8::length(text)) return fail("chunking " + std::to_string(i) + " key count differs");
  }
  return pass("100 chunkings of " + std::to_string(text.size()) + " bytes");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"end-to-end headless flow", end_to_end},
      {"exhaustive state machine", state_machine},
      {"prompt goldens", prompt_goldens},
      {"diff oracle", diff_oracle},
      {"bridge fuzz", bridge_fuzz},
      {"quiescence timing", quiescence},
      {"fallback copy path", fallback_path},
      {"typed streaming", typed_streaming},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    if (o.failure.empty()) {
      std::cout << "PASS " << name << (o.note.empty() ? "" : " (" + o.note + ")") << std::endl;
    } else {
      ++failures;
      std::cout << "FAIL " << name << ": " << o.failure << std::endl;
    }
  }
  return failures == 0 ? 0 : 1;
}
