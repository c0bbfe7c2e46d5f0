#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hotprompt {

/// Fixed instruction block every prompt starts with.
inline constexpr std::string_view kPromptHeader =
    "Your task is to answer the following query from the user. Do not express approval or "
    "your own judgment of the query. Just respond with a clear answer. If prompted for code, "
    "just output the code, no explanation, just one response of code and nothing else.";

inline constexpr std::string_view kContextPreamble =
    "The user has provided additional context for their query. Do not directly quote this "
    "context, but use it to formulate a response.";

struct QuickAction {
  int slot = 0;
  std::string label;
  std::string query_template;
};

/// Numbered menu entries. Templates may reference {language}.
class QuickActionSet {
 public:
  QuickActionSet() = default;
  explicit QuickActionSet(std::vector<QuickAction> actions, std::string target_language = "English");

  /// 1 fix spelling & grammar, 2 summarize, 3 rewrite formally, 4 explain, 5 translate.
  static QuickActionSet defaults(std::string target_language = "English");

  /// Throws Error{UnknownSlot}.
  const QuickAction& at(int slot) const;
  bool contains(int slot) const;
  const std::vector<QuickAction>& actions() const { return actions_; }
  const std::string& target_language() const { return target_language_; }

  void set(QuickAction action);
  void set_target_language(std::string language) { target_language_ = std::move(language); }

 private:
  std::vector<QuickAction> actions_;
  std::string target_language_ = "English";
};

/// Query text for `slot` with {language} substituted. Throws Error{UnknownSlot}.
std::string expand_quick_action(int slot, const QuickActionSet& actions);

struct PromptRequest {
  std::string user_query;
  std::string selection;
  std::string app_name;
  std::string window_title;
  std::optional<std::string> context;
  std::optional<int> quick_slot;
};

/// Query after quick-slot expansion; extra user text follows the template.
/// Throws Error{EmptyQuery} or Error{UnknownSlot}.
std::string effective_query(const PromptRequest& request, const QuickActionSet& actions);

/// Deterministic prompt text. Empty selection/context sections are left out.
std::string build_prompt(const PromptRequest& request, const QuickActionSet& actions = {});

inline constexpr std::string_view kTruncationMarker = "[...]";

/// Bounds `context` to `limit` code points. With a known selection position the
/// window is centred on the selection, otherwise the prefix is kept. Truncated
/// ends are marked with kTruncationMarker (markers are not counted in `limit`).
std::string cap_context(std::string_view context, std::size_t limit,
                        std::optional<std::size_t> selection_offset = std::nullopt,
                        std::size_t selection_length = 0);

}  // namespace hotprompt
