#include "hotprompt/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "hotprompt/error.hpp"
#include "hotprompt/utf8.hpp"

namespace hotprompt {
namespace {

std::string replace_all(std::string text, std::string_view needle, std::string_view value) {
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + value.size()))
    text.replace(pos, needle.size(), value);
  return text;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

QuickActionSet::QuickActionSet(std::vector<QuickAction> actions, std::string target_language)
    : target_language_(std::move(target_language)) {
  for (auto& a : actions) set(std::move(a));
}

QuickActionSet QuickActionSet::defaults(std::string target_language) {
  return QuickActionSet(
      {
          {1, "fix spelling & grammar", "Fix the spelling and grammar mistakes in the selected text."},
          {2, "summarize", "Summarize the selected text."},
          {3, "rewrite formally", "Rewrite the selected text in a more formal style."},
          {4, "explain", "Explain the selected text."},
          {5, "translate", "Translate the selected text into {language}."},
      },
      std::move(target_language));
}

void QuickActionSet::set(QuickAction action) {
  auto it = std::find_if(actions_.begin(), actions_.end(),
                         [&](const QuickAction& a) { return a.slot == action.slot; });
  if (it != actions_.end()) {
    *it = std::move(action);
  } else {
    actions_.push_back(std::move(action));
    std::sort(actions_.begin(), actions_.end(),
              [](const QuickAction& l, const QuickAction& r) { return l.slot < r.slot; });
  }
}

bool QuickActionSet::contains(int slot) const {
  return std::any_of(actions_.begin(), actions_.end(), [&](const QuickAction& a) { return a.slot == slot; });
}

const QuickAction& QuickActionSet::at(int slot) const {
  auto it = std::find_if(actions_.begin(), actions_.end(), [&](const QuickAction& a) { return a.slot == slot; });
  if (it == actions_.end()) throw Error(ErrorCode::UnknownSlot, "no quick action in slot " + std::to_string(slot));
  return *it;
}

std::string expand_quick_action(int slot, const QuickActionSet& actions) {
  return replace_all(actions.at(slot).query_template, "{language}", actions.target_language());
}

std::string effective_query(const PromptRequest& request, const QuickActionSet& actions) {
  std::string query;
  if (request.quick_slot) {
    query = expand_quick_action(*request.quick_slot, actions);
    if (!blank(request.user_query)) query += " " + request.user_query;
  } else {
    query = request.user_query;
  }
  if (blank(query)) throw Error(ErrorCode::EmptyQuery, "query is empty");
  return query;
}

std::string build_prompt(const PromptRequest& request, const QuickActionSet& actions) {
  const std::string query = effective_query(request, actions);

  std::string out;
  out.reserve(kPromptHeader.size() + query.size() + request.selection.size() +
              (request.context ? request.context->size() : 0) + 512);
  out += kPromptHeader;
  out += "\n\nUser query: ";
  out += query;
  if (!request.selection.empty()) {
    out += "\n\nThe user's query refers to this specific text:\n";
    out += request.selection;
  }
  if (!request.app_name.empty()) {
    out += "\n\nThe user issued the query while working with ";
    out += request.app_name;
    if (!request.window_title.empty()) {
      out += " (window title: ";
      out += request.window_title;
      out += ")";
    }
  }
  if (request.context && !request.context->empty()) {
    out += "\n\n";
    out += kContextPreamble;
    out += "\n\nContext: ";
    out += *request.context;
  }
  out += "\n";
  return out;
}

std::string cap_context(std::string_view context, std::size_t limit,
                        std::optional<std::size_t> selection_offset, std::size_t selection_length) {
  const std::size_t total = utf8::length(context);
  if (limit == 0 || total <= limit) return std::string(context);

  std::size_t start = 0;  // in code points
  if (selection_offset) {
    const std::size_t sel_begin = utf8::index_of_byte(context, *selection_offset);
    const std::size_t sel_end = utf8::index_of_byte(context, *selection_offset + selection_length);
    const std::size_t sel_len = sel_end - sel_begin;
    if (sel_len >= limit) {
      start = sel_begin;
    } else {
      const std::size_t slack = limit - sel_len;
      start = sel_begin > slack / 2 ? sel_begin - slack / 2 : 0;
    }
    start = std::min(start, total - limit);
  }
  const std::size_t begin_byte = utf8::byte_offset(context, start);
  const std::size_t end_byte = utf8::byte_offset(context, start + limit);

  std::string out;
  out.reserve(end_byte - begin_byte + 2 * kTruncationMarker.size() + 2);
  if (start > 0) {
    out += kTruncationMarker;
    out += ' ';
  }
  out += context.substr(begin_byte, end_byte - begin_byte);
  if (start + limit < total) {
    out += ' ';
    out += kTruncationMarker;
  }
  return out;
}

}  // namespace hotprompt
