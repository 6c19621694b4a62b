#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace voxstream {

using TokenId = std::uint32_t;

enum class Modality : std::uint8_t { kText, kSpeech };

std::string_view to_string(Modality kind);
Modality parse_modality(std::string_view name);

// Alternating block template: `text_chunk` text tokens, then
// `speech_chunk` speech tokens, repeated.
struct TemplateConfig {
  std::size_t text_chunk = 13;
  std::size_t speech_chunk = 26;

  void validate() const;
  std::size_t period() const noexcept { return text_chunk + speech_chunk; }
  bool operator==(const TemplateConfig&) const = default;
};

struct TaggedToken {
  Modality kind = Modality::kText;
  TokenId id = 0;
  bool operator==(const TaggedToken&) const = default;
};

Modality position_kind(const TemplateConfig& cfg, std::size_t position);

// Template order; once one side runs out the other is flushed contiguously.
std::vector<TaggedToken> interleave(std::span<const TokenId> text, std::span<const TokenId> speech,
                                    const TemplateConfig& cfg);

struct SplitStreams {
  std::vector<TokenId> text;
  std::vector<TokenId> speech;
  bool operator==(const SplitStreams&) const = default;
};

// Tags are authoritative. Throws kTemplateViolation at the first position
// whose tag disagrees with the template while the expected modality still
// has tokens left later in the stream.
SplitStreams deinterleave(std::span<const TaggedToken> stream, const TemplateConfig& cfg);

// Line-delimited {"pos","kind","id"} records.
void write_token_jsonl(std::ostream& out, std::span<const TaggedToken> stream);
std::vector<TaggedToken> read_token_jsonl(std::istream& in);

}  // namespace voxstream
