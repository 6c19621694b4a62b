#include "voxstream/stream_decoder.hpp"

#include <cmath>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

DecoderConfig::DecoderConfig(double block_s, double frame_rate)
    : block_s_(block_s), frame_rate_(frame_rate) {
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate) || !(block_s > 0.0) || !std::isfinite(block_s)) {
    throw Error(ErrorCode::kInvalidArgument, "decoder block and frame rate must be positive",
                {{"block_s", block_s}, {"frame_rate", frame_rate}});
  }
  const double tokens = block_s * frame_rate;
  const double rounded = std::round(tokens);
  if (std::abs(tokens - rounded) > 1e-9 || rounded < 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("block of {} s at {} Hz is {} tokens, not a positive whole number",
                            block_s, frame_rate, tokens),
                {{"block_s", block_s}, {"frame_rate", frame_rate}, {"tokens", tokens}});
  }
  tokens_per_block_ = static_cast<std::size_t>(rounded);
}

namespace {

DecoderChunk chunk_for(std::size_t index, std::size_t start, std::size_t end, const DecoderConfig& cfg) {
  const double fr = cfg.frame_rate();
  return DecoderChunk{.index = index,
                      .token_start = start,
                      .token_end = end,
                      .audio_start_s = static_cast<double>(start) / fr,
                      .audio_end_s = static_cast<double>(end) / fr,
                      .prompt_end_s = static_cast<double>(start) / fr};
}

}  // namespace

std::vector<DecoderChunk> plan_chunks(std::size_t total_tokens, const DecoderConfig& cfg) {
  const std::size_t tpb = cfg.tokens_per_block();
  std::vector<DecoderChunk> plan;
  plan.reserve((total_tokens + tpb - 1) / tpb);
  for (std::size_t start = 0; start < total_tokens; start += tpb) {
    plan.push_back(chunk_for(plan.size() + 1, start, std::min(start + tpb, total_tokens), cfg));
  }
  return plan;
}

std::size_t min_tokens_for_first_audio(const DecoderConfig& cfg) { return cfg.tokens_per_block(); }

StreamingDecoder::StreamingDecoder(DecoderConfig cfg) : cfg_(cfg) {}

DecoderChunk StreamingDecoder::make_chunk(std::size_t end) const {
  return chunk_for(emitted_chunks_ + 1, emitted_tokens_, end, cfg_);
}

std::vector<DecoderChunk> StreamingDecoder::feed(std::span<const TokenId> tokens) {
  if (flushed_) {
    throw Error(ErrorCode::kInvalidState, "feed after flush",
                {{"received", tokens_.size()}, {"chunks", emitted_chunks_}});
  }
  tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
  std::vector<DecoderChunk> ready;
  const std::size_t tpb = cfg_.tokens_per_block();
  while (tokens_.size() - emitted_tokens_ >= tpb) {
    ready.push_back(make_chunk(emitted_tokens_ + tpb));
    emitted_tokens_ += tpb;
    ++emitted_chunks_;
  }
  return ready;
}

std::vector<DecoderChunk> StreamingDecoder::flush() {
  if (flushed_) throw Error(ErrorCode::kInvalidState, "decoder already flushed");
  flushed_ = true;
  std::vector<DecoderChunk> ready;
  if (tokens_.size() > emitted_tokens_) {
    ready.push_back(make_chunk(tokens_.size()));
    emitted_tokens_ = tokens_.size();
    ++emitted_chunks_;
  }
  return ready;
}

nlohmann::json to_json(const DecoderChunk& chunk) {
  return {{"n", chunk.index},
          {"token_start", chunk.token_start},
          {"token_end", chunk.token_end},
          {"audio_start_s", chunk.audio_start_s},
          {"audio_end_s", chunk.audio_end_s},
          {"prompt_end_s", chunk.prompt_end_s}};
}

DecoderChunk decoder_chunk_from_json(const nlohmann::json& j) {
  try {
    return DecoderChunk{.index = j.at("n").get<std::size_t>(),
                        .token_start = j.at("token_start").get<std::size_t>(),
                        .token_end = j.at("token_end").get<std::size_t>(),
                        .audio_start_s = j.at("audio_start_s").get<double>(),
                        .audio_end_s = j.at("audio_end_s").get<double>(),
                        .prompt_end_s = j.at("prompt_end_s").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed chunk record: {}", e.what()));
  }
}

nlohmann::json chunks_to_json(std::span<const DecoderChunk> chunks) {
  auto arr = nlohmann::json::array();
  for (const auto& c : chunks) arr.push_back(to_json(c));
  return arr;
}

}  // namespace voxstream
