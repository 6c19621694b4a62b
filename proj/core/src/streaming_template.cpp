#include "voxstream/streaming_template.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "voxstream/error.hpp"

namespace voxstream {

std::string_view to_string(Modality kind) { return kind == Modality::kText ? "text" : "speech"; }

Modality parse_modality(std::string_view name) {
  if (name == "text") return Modality::kText;
  if (name == "speech") return Modality::kSpeech;
  throw Error(ErrorCode::kParse, fmt::format("unknown token kind '{}'", name),
              {{"kind", std::string(name)}});
}

void TemplateConfig::validate() const {
  if (text_chunk == 0 || speech_chunk == 0) {
    throw Error(ErrorCode::kInvalidArgument, "template chunks must both be >= 1",
                {{"text_chunk", text_chunk}, {"speech_chunk", speech_chunk}});
  }
}

Modality position_kind(const TemplateConfig& cfg, std::size_t position) {
  cfg.validate();
  return position % cfg.period() < cfg.text_chunk ? Modality::kText : Modality::kSpeech;
}

std::vector<TaggedToken> interleave(std::span<const TokenId> text, std::span<const TokenId> speech,
                                    const TemplateConfig& cfg) {
  cfg.validate();
  std::vector<TaggedToken> out;
  out.reserve(text.size() + speech.size());
  std::size_t ti = 0;
  std::size_t si = 0;
  while (ti < text.size() || si < speech.size()) {
    // An exhausted side contributes nothing, which flushes the other side
    // one block at a time; the result is the same as a contiguous flush.
    for (std::size_t n = 0; n < cfg.text_chunk && ti < text.size(); ++n) {
      out.push_back({Modality::kText, text[ti++]});
    }
    for (std::size_t n = 0; n < cfg.speech_chunk && si < speech.size(); ++n) {
      out.push_back({Modality::kSpeech, speech[si++]});
    }
  }
  return out;
}

SplitStreams deinterleave(std::span<const TaggedToken> stream, const TemplateConfig& cfg) {
  cfg.validate();
  std::size_t text_total = 0;
  for (const auto& tok : stream) text_total += tok.kind == Modality::kText;
  const std::size_t speech_total = stream.size() - text_total;

  SplitStreams out;
  out.text.reserve(text_total);
  out.speech.reserve(speech_total);

  // Walk the template block by block; `phase` is the modality whose block
  // is open and `filled` how many of its slots have been consumed.
  Modality phase = Modality::kText;
  std::size_t filled = 0;
  for (std::size_t pos = 0; pos < stream.size(); ++pos) {
    const bool text_left = out.text.size() < text_total;
    const bool speech_left = out.speech.size() < speech_total;
    if (phase == Modality::kText && (filled == cfg.text_chunk || !text_left)) {
      phase = Modality::kSpeech;
      filled = 0;
    } else if (phase == Modality::kSpeech && (filled == cfg.speech_chunk || !speech_left)) {
      phase = Modality::kText;
      filled = 0;
    }
    // Re-check after a switch: the newly opened side may itself be exhausted.
    if (phase == Modality::kText && !text_left) phase = Modality::kSpeech;
    if (phase == Modality::kSpeech && !speech_left) phase = Modality::kText;

    const auto& tok = stream[pos];
    if (tok.kind != phase) {
      throw Error(ErrorCode::kTemplateViolation,
                  fmt::format("position {}: expected {} token, found {}", pos, to_string(phase),
                              to_string(tok.kind)),
                  {{"position", pos},
                   {"expected", std::string(to_string(phase))},
                   {"found", std::string(to_string(tok.kind))}});
    }
    (tok.kind == Modality::kText ? out.text : out.speech).push_back(tok.id);
    ++filled;
  }
  return out;
}

void write_token_jsonl(std::ostream& out, std::span<const TaggedToken> stream) {
  for (std::size_t pos = 0; pos < stream.size(); ++pos) {
    const nlohmann::json rec = {
        {"pos", pos}, {"kind", std::string(to_string(stream[pos].kind))}, {"id", stream[pos].id}};
    out << rec.dump() << '\n';
  }
}

std::vector<TaggedToken> read_token_jsonl(std::istream& in) {
  std::vector<TaggedToken> stream;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      const auto pos = rec.at("pos").get<std::size_t>();
      if (pos != stream.size()) {
        throw Error(ErrorCode::kParse,
                    fmt::format("line {}: pos {} out of sequence (expected {})", line_no, pos, stream.size()),
                    {{"line", line_no}, {"pos", pos}, {"expected", stream.size()}});
      }
      stream.push_back({parse_modality(rec.at("kind").get<std::string>()), rec.at("id").get<TokenId>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: {}", line_no, e.what()), {{"line", line_no}});
    }
  }
  return stream;
}

}  // namespace voxstream
