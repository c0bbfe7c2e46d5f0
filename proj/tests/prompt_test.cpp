#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "hotprompt/error.hpp"
#include "hotprompt/prompt.hpp"
#include "hotprompt/utf8.hpp"
#include "support/prompt_cases.hpp"
#include "support/text_gen.hpp"

using namespace hotprompt;
using testsupport::kParagraph;
using testsupport::overleaf_request;
using testsupport::word_request;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::string(HP_TEST_DATA) + "/prompts/" + name, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing golden " << name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigInvalid;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("golden prompts for each section combination") {
  const auto cases = testsupport::prompt_cases();
  REQUIRE(cases.size() == 6);
  for (const auto& c : cases) {
    INFO(c.name);
    CHECK(build_prompt(c.request, c.actions) == golden(c.golden));
  }
}

TEST_CASE("empty queries are rejected") {
  auto r = overleaf_request();
  CHECK(code_of([&] { build_prompt(r); }) == ErrorCode::EmptyQuery);
  r.user_query = "  \n\t";
  CHECK(code_of([&] { build_prompt(r); }) == ErrorCode::EmptyQuery);
  r.quick_slot = 9;
  CHECK(code_of([&] { build_prompt(r, QuickActionSet::defaults()); }) == ErrorCode::UnknownSlot);
}

TEST_CASE("quick actions") {
  const auto actions = QuickActionSet::defaults("French");
  CHECK(actions.at(4).label == "explain");
  CHECK(actions.at(5).label == "translate");
  CHECK(expand_quick_action(4, actions) == "Explain the selected text.");
  CHECK(expand_quick_action(5, actions) == "Translate the selected text into French.");
  CHECK(code_of([&] { expand_quick_action(9, actions); }) == ErrorCode::UnknownSlot);
  CHECK(actions.actions().size() == 5);

  auto custom = actions;
  custom.set({3, "shorten", "Make it shorter."});
  CHECK(custom.actions().size() == 5);
  CHECK(expand_quick_action(3, custom) == "Make it shorter.");
  custom.set({7, "bullets", "As bullet points."});
  CHECK(custom.contains(7));
  CHECK(custom.actions().back().slot == 7);
}

TEST_CASE("section order and placement hold for random requests") {
  std::mt19937 rng(17);
  const auto actions = QuickActionSet::defaults();
  const std::vector<std::string> markers{"User query: ", "The user's query refers to this specific text:\n",
                                         "The user issued the query while working with ", std::string(kContextPreamble),
                                         "Context: "};
  for (int i = 0; i < 500; ++i) {
    PromptRequest r;
    r.user_query = "q" + std::to_string(i) + " " + testsupport::random_words(rng, 5);
    if (rng() % 2) r.selection = "SEL<" + testsupport::random_words(rng, 8) + ">";
    if (rng() % 3) r.app_name = "app" + std::to_string(rng() % 10);
    if (rng() % 2) r.window_title = "title " + std::to_string(rng() % 10);
    if (rng() % 2) r.context = "CTX<" + testsupport::random_words(rng, 30) + ">";
    if (rng() % 4 == 0) r.quick_slot = static_cast<int>(1 + rng() % 5);

    const std::string p = build_prompt(r, actions);
    CHECK(p == build_prompt(r, actions));
    CHECK(p.rfind(kPromptHeader, 0) == 0);

    std::size_t last = 0;
    for (const auto& m : markers) {
      auto pos = p.find(m);
      if (pos == std::string::npos) continue;
      CHECK(pos >= last);
      last = pos;
    }
    CHECK((p.find(markers[1]) != std::string::npos) == !r.selection.empty());
    CHECK((p.find(markers[3]) != std::string::npos) == (r.context && !r.context->empty()));
    if (!r.selection.empty()) CHECK(count_of(p, r.selection) == 1);
    if (r.context) {
      CHECK(count_of(p, *r.context) == 1);
      CHECK(p.find(*r.context) > p.find(kContextPreamble));
    }
  }
}

TEST_CASE("cap_context") {
  SUBCASE("short context is unchanged") {
    const std::string ctx(100, 'a');
    CHECK(cap_context(ctx, 4096) == ctx);
  }
  SUBCASE("window covers the selection") {
    std::string ctx;
    for (int i = 0; ctx.size() < 10000; ++i) ctx += static_cast<char>('a' + i % 26);
    ctx.resize(10000);
    const std::string sel = "<<SELECTED>>";
    ctx.replace(9000, sel.size(), sel);
    const std::string out = cap_context(ctx, 2000, 9000, sel.size());
    CHECK(out.find(sel) != std::string::npos);
    CHECK(out.rfind(std::string(kTruncationMarker) + " ", 0) == 0);
    const std::string body = out.substr(kTruncationMarker.size() + 1);
    CHECK(body.size() <= 2000 + kTruncationMarker.size() + 1);
    CHECK(ctx.find(body.substr(0, 1990)) != std::string::npos);
  }
  SUBCASE("unknown position keeps a prefix") {
    const std::string ctx(5000, 'x');
    const std::string out = cap_context(ctx, 1000);
    CHECK(out == std::string(1000, 'x') + " " + std::string(kTruncationMarker));
  }
  SUBCASE("limits count code points") {
    std::string ctx;
    for (int i = 0; i < 300; ++i) ctx += "é";
    const std::string out = cap_context(ctx, 100);
    CHECK(utf8::length(out) == 100 + 1 + utf8::length(kTruncationMarker));
  }
}

TEST_CASE("cap_context always keeps a known selection") {
  std::mt19937 rng(3);
  for (int i = 0; i < 1000; ++i) {
    std::string ctx = testsupport::random_text(rng, 200 + rng() % 3000);
    const std::string sel = "[[" + std::to_string(i) + "]]";
    std::size_t at = rng() % ctx.size();
    while (at > 0 && (static_cast<unsigned char>(ctx[at]) & 0xC0) == 0x80) --at;
    ctx.insert(at, sel);
    const std::size_t limit = sel.size() + rng() % 500;
    const std::string out = cap_context(ctx, limit, at, sel.size());
    CHECK(out.find(sel) != std::string::npos);
    CHECK(utf8::length(out) <= limit + 2 * (utf8::length(kTruncationMarker) + 1));
  }
}
