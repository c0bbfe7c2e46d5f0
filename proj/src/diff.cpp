#include "hotprompt/diff.hpp"

#include <algorithm>
#include <unordered_map>

#include "hotprompt/utf8.hpp"

namespace hotprompt {
namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

struct DeadlineExceeded {};

using Clock = std::chrono::steady_clock;

class MyersDiff {
 public:
  MyersDiff(std::span<const int> a, std::span<const int> b, Clock::time_point deadline)
      : a_(a), b_(b), deadline_(deadline) {}

  std::vector<SpanKind> run() {
    std::vector<SpanKind> ops;
    ops.reserve(a_.size() + b_.size());
    solve(0, a_.size(), 0, b_.size(), ops);
    return ops;
  }

 private:
  void solve(std::size_t a_lo, std::size_t a_hi, std::size_t b_lo, std::size_t b_hi,
             std::vector<SpanKind>& ops) {
    std::size_t prefix = 0;
    while (a_lo + prefix < a_hi && b_lo + prefix < b_hi && a_[a_lo + prefix] == b_[b_lo + prefix])
      ++prefix;
    ops.insert(ops.end(), prefix, SpanKind::Equal);
    a_lo += prefix;
    b_lo += prefix;

    std::size_t suffix = 0;
    while (a_hi - suffix > a_lo && b_hi - suffix > b_lo && a_[a_hi - suffix - 1] == b_[b_hi - suffix - 1])
      ++suffix;
    a_hi -= suffix;
    b_hi -= suffix;

    if (a_lo == a_hi) {
      ops.insert(ops.end(), b_hi - b_lo, SpanKind::Insert);
    } else if (b_lo == b_hi) {
      ops.insert(ops.end(), a_hi - a_lo, SpanKind::Delete);
    } else {
      auto [x, y] = middle_snake(a_lo, a_hi, b_lo, b_hi);
      if (x == 0 && y == 0) {
        ops.insert(ops.end(), a_hi - a_lo, SpanKind::Delete);
        ops.insert(ops.end(), b_hi - b_lo, SpanKind::Insert);
      } else {
        solve(a_lo, a_lo + x, b_lo, b_lo + y, ops);
        solve(a_lo + x, a_hi, b_lo + y, b_hi, ops);
      }
    }
    ops.insert(ops.end(), suffix, SpanKind::Equal);
  }

  // Returns the split point relative to (a_lo, b_lo); (0, 0) means no common token.
  std::pair<std::size_t, std::size_t> middle_snake(std::size_t a_lo, std::size_t a_hi,
                                                   std::size_t b_lo, std::size_t b_hi) {
    const long n = static_cast<long>(a_hi - a_lo);
    const long m = static_cast<long>(b_hi - b_lo);
    const long max_d = (n + m + 1) / 2;
    const long offset = max_d;
    const long width = 2 * max_d;
    std::vector<long> forward(static_cast<std::size_t>(width), -1);
    std::vector<long> reverse(static_cast<std::size_t>(width), -1);
    forward[static_cast<std::size_t>(offset + 1)] = 0;
    reverse[static_cast<std::size_t>(offset + 1)] = 0;
    const long delta = n - m;
    const bool odd = (delta % 2) != 0;
    long k1_start = 0, k1_end = 0, k2_start = 0, k2_end = 0;

    auto a_at = [&](long i) { return a_[a_lo + static_cast<std::size_t>(i)]; };
    auto b_at = [&](long i) { return b_[b_lo + static_cast<std::size_t>(i)]; };

    for (long d = 0; d < max_d; ++d) {
      if ((d & 0x3f) == 0 && Clock::now() > deadline_) throw DeadlineExceeded{};

      for (long k1 = -d + k1_start; k1 <= d - k1_end; k1 += 2) {
        const long k1_off = offset + k1;
        long x1;
        if (k1 == -d || (k1 != d && forward[k1_off - 1] < forward[k1_off + 1]))
          x1 = forward[k1_off + 1];
        else
          x1 = forward[k1_off - 1] + 1;
        long y1 = x1 - k1;
        while (x1 < n && y1 < m && a_at(x1) == b_at(y1)) {
          ++x1;
          ++y1;
        }
        forward[k1_off] = x1;
        if (x1 > n) {
          k1_end += 2;
        } else if (y1 > m) {
          k1_start += 2;
        } else if (odd) {
          const long k2_off = offset + delta - k1;
          if (k2_off >= 0 && k2_off < width && reverse[k2_off] != -1) {
            const long x2 = n - reverse[k2_off];
            if (x1 >= x2) return {static_cast<std::size_t>(x1), static_cast<std::size_t>(y1)};
          }
        }
      }

      for (long k2 = -d + k2_start; k2 <= d - k2_end; k2 += 2) {
        const long k2_off = offset + k2;
        long x2;
        if (k2 == -d || (k2 != d && reverse[k2_off - 1] < reverse[k2_off + 1]))
          x2 = reverse[k2_off + 1];
        else
          x2 = reverse[k2_off - 1] + 1;
        long y2 = x2 - k2;
        while (x2 < n && y2 < m && a_at(n - x2 - 1) == b_at(m - y2 - 1)) {
          ++x2;
          ++y2;
        }
        reverse[k2_off] = x2;
        if (x2 > n) {
          k2_end += 2;
        } else if (y2 > m) {
          k2_start += 2;
        } else if (!odd) {
          const long k1_off = offset + delta - k2;
          if (k1_off >= 0 && k1_off < width && forward[k1_off] != -1) {
            const long x1 = forward[k1_off];
            const long y1 = offset + x1 - k1_off;
            if (x1 >= n - x2) return {static_cast<std::size_t>(x1), static_cast<std::size_t>(y1)};
          }
        }
      }
    }
    return {0, 0};
  }

  std::span<const int> a_;
  std::span<const int> b_;
  Clock::time_point deadline_;
};

// Reorders every run of changes so its Deletes come first.
void canonicalize(std::vector<SpanKind>& ops) {
  std::size_t i = 0;
  while (i < ops.size()) {
    if (ops[i] == SpanKind::Equal) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t deletes = 0;
    while (j < ops.size() && ops[j] != SpanKind::Equal) {
      if (ops[j] == SpanKind::Delete) ++deletes;
      ++j;
    }
    std::fill(ops.begin() + static_cast<long>(i), ops.begin() + static_cast<long>(i + deletes),
              SpanKind::Delete);
    std::fill(ops.begin() + static_cast<long>(i + deletes), ops.begin() + static_cast<long>(j),
              SpanKind::Insert);
    i = j;
  }
}

void push_span(std::vector<DiffSpan>& spans, SpanKind kind, std::string_view text) {
  if (text.empty()) return;
  if (!spans.empty() && spans.back().kind == kind)
    spans.back().text.append(text);
  else
    spans.push_back({kind, std::string(text)});
}

std::size_t common_blank_suffix(std::string_view x, std::string_view y) {
  std::size_t n = 0;
  while (n < x.size() && n < y.size()) {
    char cx = x[x.size() - n - 1];
    char cy = y[y.size() - n - 1];
    if (cx != cy || !is_blank(cx)) break;
    ++n;
  }
  return n;
}

std::vector<DiffSpan> fold_trailing_blanks(std::vector<DiffSpan> spans) {
  std::vector<DiffSpan> out;
  out.reserve(spans.size());
  std::string carry;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!carry.empty() && spans[i].kind == SpanKind::Equal) {
      spans[i].text.insert(0, carry);
      carry.clear();
    }
    if (spans[i].kind == SpanKind::Delete && i + 1 < spans.size() &&
        spans[i + 1].kind == SpanKind::Insert) {
      std::size_t n = common_blank_suffix(spans[i].text, spans[i + 1].text);
      if (n > 0) {
        carry = spans[i].text.substr(spans[i].text.size() - n);
        spans[i].text.resize(spans[i].text.size() - n);
        spans[i + 1].text.resize(spans[i + 1].text.size() - n);
      }
    }
    push_span(out, spans[i].kind, spans[i].text);
  }
  push_span(out, SpanKind::Equal, carry);
  return out;
}

}  // namespace

std::vector<std::string_view> tokenize(std::string_view text, Granularity granularity) {
  if (granularity == Granularity::Character) return utf8::code_points(text);

  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    if (text[i] == '\n') {
      tokens.push_back(text.substr(i, 1));
      ++i;
      continue;
    }
    if (is_blank(text[i])) {
      // Blank run with no word before it on this line.
      while (i < text.size() && is_blank(text[i])) ++i;
    } else {
      while (i < text.size() && text[i] != '\n' && !is_blank(text[i])) ++i;
      while (i < text.size() && is_blank(text[i])) ++i;
    }
    tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

std::size_t EditScript::equal_count() const {
  return static_cast<std::size_t>(std::count(ops.begin(), ops.end(), SpanKind::Equal));
}

EditScript diff_tokens(std::span<const std::string_view> original,
                       std::span<const std::string_view> revised,
                       std::chrono::milliseconds deadline) {
  std::unordered_map<std::string_view, int> ids;
  auto intern = [&](std::span<const std::string_view> tokens) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (auto t : tokens) out.push_back(ids.try_emplace(t, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const std::vector<int> a = intern(original);
  const std::vector<int> b = intern(revised);

  EditScript script;
  try {
    script.ops = MyersDiff(a, b, Clock::now() + deadline).run();
  } catch (const DeadlineExceeded&) {
    script.ops.assign(a.size(), SpanKind::Delete);
    script.ops.insert(script.ops.end(), b.size(), SpanKind::Insert);
    script.bailed_out = true;
  }
  canonicalize(script.ops);
  return script;
}

std::vector<DiffSpan> word_diff(std::string_view original, std::string_view revised,
                                const DiffOptions& options) {
  const auto a = tokenize(original, options.granularity);
  const auto b = tokenize(revised, options.granularity);
  const EditScript script = diff_tokens(a, b, options.deadline);

  std::vector<DiffSpan> spans;
  std::size_t i = 0, j = 0;
  for (SpanKind op : script.ops) {
    switch (op) {
      case SpanKind::Equal:
        push_span(spans, op, a[i++]);
        ++j;
        break;
      case SpanKind::Delete:
        push_span(spans, op, a[i++]);
        break;
      case SpanKind::Insert:
        push_span(spans, op, b[j++]);
        break;
    }
  }
  if (options.granularity == Granularity::Word) return fold_trailing_blanks(std::move(spans));
  return spans;
}

std::string reconstruct_original(std::span<const DiffSpan> spans) {
  std::string out;
  for (const auto& s : spans)
    if (s.kind != SpanKind::Insert) out += s.text;
  return out;
}

std::string reconstruct_revised(std::span<const DiffSpan> spans) {
  std::string out;
  for (const auto& s : spans)
    if (s.kind != SpanKind::Delete) out += s.text;
  return out;
}

bool PreviewModel::has_changes() const {
  return std::any_of(runs.begin(), runs.end(),
                     [](const StyledRun& r) { return r.style != RunStyle::Plain; });
}

PreviewModel render_preview(std::span<const DiffSpan> spans) {
  PreviewModel model;
  model.runs.reserve(spans.size());
  for (const auto& span : spans) {
    RunStyle style = RunStyle::Plain;
    if (span.kind == SpanKind::Delete) style = RunStyle::Removed;
    if (span.kind == SpanKind::Insert) style = RunStyle::Added;
    if (!model.runs.empty() && model.runs.back().style == style)
      model.runs.back().text += span.text;
    else
      model.runs.push_back({style, span.text});
  }
  return model;
}

PreviewModel plain_preview(std::string_view text) {
  PreviewModel model;
  if (!text.empty()) model.runs.push_back({RunStyle::Plain, std::string(text)});
  return model;
}

std::string_view to_string(RunStyle style) noexcept {
  switch (style) {
    case RunStyle::Plain: return "kept";
    case RunStyle::Removed: return "removed";
    case RunStyle::Added: return "added";
  }
  return "kept";
}

std::string_view to_string(SpanKind kind) noexcept {
  switch (kind) {
    case SpanKind::Equal: return "equal";
    case SpanKind::Delete: return "delete";
    case SpanKind::Insert: return "insert";
  }
  return "equal";
}

}  // namespace hotprompt
