#pragma once

#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hotprompt {

enum class SpanKind { Equal, Delete, Insert };

struct DiffSpan {
  SpanKind kind;
  std::string text;

  friend bool operator==(const DiffSpan&, const DiffSpan&) = default;
};

enum class Granularity {
  /// Non-whitespace runs with trailing blanks attached; newlines stand alone.
  Word,
  /// One token per UTF-8 code point.
  Character,
};

struct DiffOptions {
  Granularity granularity = Granularity::Word;
  /// Past this budget the diff degrades to [Delete original, Insert revised].
  std::chrono::milliseconds deadline{2000};
};

/// Tokens are views into `text`; concatenating them reproduces `text` exactly.
std::vector<std::string_view> tokenize(std::string_view text,
                                       Granularity granularity = Granularity::Word);

/// Token-level edit script. `ops` walks both sequences in order: Equal consumes
/// one token from each side, Delete one from the original, Insert one from the
/// revised sequence. Within every run of changes all Deletes precede all Inserts.
struct EditScript {
  std::vector<SpanKind> ops;
  bool bailed_out = false;

  std::size_t equal_count() const;
};

/// Shortest edit script (Myers, linear-space middle snake).
EditScript diff_tokens(std::span<const std::string_view> original,
                       std::span<const std::string_view> revised,
                       std::chrono::milliseconds deadline = std::chrono::milliseconds{2000});

/// Word diff for the preview. Adjacent spans never share a kind and no span is
/// empty. Whitespace shared by the tail of a Delete/Insert pair is folded into
/// the following Equal span so that "the cat sat" vs "the dog sat" reads
/// [Equal "the ", Delete "cat", Insert "dog", Equal " sat"].
std::vector<DiffSpan> word_diff(std::string_view original, std::string_view revised,
                                const DiffOptions& options = {});

std::string reconstruct_original(std::span<const DiffSpan> spans);
std::string reconstruct_revised(std::span<const DiffSpan> spans);

enum class RunStyle { Plain, Removed, Added };

struct StyledRun {
  RunStyle style;
  std::string text;

  friend bool operator==(const StyledRun&, const StyledRun&) = default;
};

/// What the popup renders in its preview field.
struct PreviewModel {
  std::vector<StyledRun> runs;

  bool has_changes() const;
  friend bool operator==(const PreviewModel&, const PreviewModel&) = default;
};

PreviewModel render_preview(std::span<const DiffSpan> spans);

/// Undiffed preview, used while streaming or when there is no selection.
PreviewModel plain_preview(std::string_view text);

std::string_view to_string(RunStyle style) noexcept;
std::string_view to_string(SpanKind kind) noexcept;

}  // namespace hotprompt
