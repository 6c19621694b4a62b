#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxstream/streaming_template.hpp"

namespace voxstream {

// Block length b of the chunked speech decoder. block_s * frame_rate must
// be a whole number of tokens.
class DecoderConfig {
 public:
  // Defaults: b = 0.8 s at 12.5 Hz, i.e. 10 tokens per block.
  DecoderConfig() = default;
  // Throws kInvalidArgument if the block is not a positive whole number
  // of frames (tolerance 1e-9).
  DecoderConfig(double block_s, double frame_rate);

  double block_s() const noexcept { return block_s_; }
  double frame_rate() const noexcept { return frame_rate_; }
  std::size_t tokens_per_block() const noexcept { return tokens_per_block_; }

  bool operator==(const DecoderConfig&) const = default;

 private:
  double block_s_ = 0.8;
  double frame_rate_ = 12.5;
  std::size_t tokens_per_block_ = 10;
};

// Chunk n decodes audio [(n-1)b, nb) using [0, (n-1)b) as prompt. Times
// are derived from token positions, so a final short chunk ends early.
struct DecoderChunk {
  std::size_t index = 0;  // n, 1-based
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  double audio_start_s = 0.0;
  double audio_end_s = 0.0;
  double prompt_end_s = 0.0;  // prompt span is [0, prompt_end_s)

  std::size_t token_count() const noexcept { return token_end - token_start; }
  bool operator==(const DecoderChunk&) const = default;
};

std::vector<DecoderChunk> plan_chunks(std::size_t total_tokens, const DecoderConfig& cfg);

std::size_t min_tokens_for_first_audio(const DecoderConfig& cfg);

// Incremental form of plan_chunks. Single owner; calls must be serialized.
class StreamingDecoder {
 public:
  explicit StreamingDecoder(DecoderConfig cfg = {});

  // Buffers tokens and returns every chunk that became complete.
  std::vector<DecoderChunk> feed(std::span<const TokenId> tokens);
  // Emits the residual partial chunk, if any. Further feeds are errors.
  std::vector<DecoderChunk> flush();

  const DecoderConfig& config() const noexcept { return cfg_; }
  // All tokens received so far, in order.
  std::span<const TokenId> received() const noexcept { return tokens_; }
  std::size_t buffered() const noexcept { return tokens_.size() - emitted_tokens_; }
  bool flushed() const noexcept { return flushed_; }

 private:
  DecoderChunk make_chunk(std::size_t end) const;

  DecoderConfig cfg_;
  std::vector<TokenId> tokens_;
  std::size_t emitted_tokens_ = 0;
  std::size_t emitted_chunks_ = 0;
  bool flushed_ = false;
};

nlohmann::json to_json(const DecoderChunk& chunk);
DecoderChunk decoder_chunk_from_json(const nlohmann::json& j);
nlohmann::json chunks_to_json(std::span<const DecoderChunk> chunks);

}  // namespace voxstream
