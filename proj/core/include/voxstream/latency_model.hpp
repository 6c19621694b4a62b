#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxstream/framing.hpp"
#include "voxstream/stream_decoder.hpp"
#include "voxstream/streaming_template.hpp"

namespace voxstream {

// Seconds spent by one pipeline stage as a function of its work units
// (tokens, or tokenizer blocks). Always >= 0 and nondecreasing.
class StageCost {
 public:
  enum class Kind { kConstant, kAffine, kTable };

  StageCost() = default;  // constant zero

  static StageCost constant(double seconds);
  static StageCost affine(double base_s, double per_unit_s);
  // (units, seconds) knots, linearly interpolated. Units strictly
  // increasing, seconds nondecreasing and >= 0.
  static StageCost table(std::vector<std::pair<double, double>> points);

  // Throws kOutOfRange when a table cost is queried outside its knots.
  double operator()(double units) const;

  Kind kind() const noexcept { return kind_; }
  double base_s() const noexcept { return base_s_; }
  double per_unit_s() const noexcept { return per_unit_s_; }
  const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

  bool operator==(const StageCost&) const = default;

 private:
  Kind kind_ = Kind::kConstant;
  double base_s_ = 0.0;
  double per_unit_s_ = 0.0;
  std::vector<std::pair<double, double>> points_;
};

struct StageCosts {
  StageCost tokenize;       // units: tokenizer blocks
  StageCost prefill;        // units: prompt tokens
  StageCost decode;         // units: generated tokens
  StageCost speech_decode;  // units: speech tokens in the chunk
  bool operator==(const StageCosts&) const = default;
};

struct LatencyScenario {
  double user_speech_s = 0.0;
  FrameConfig frame;
  TemplateConfig text_speech_template;
  DecoderConfig decoder;
  StageCosts costs;

  // Also requires decoder.frame_rate() == frame.frame_rate.
  void validate() const;
  bool operator==(const LatencyScenario&) const = default;
};

struct LatencyBreakdown {
  double t_tokenize = 0.0;
  double t_prefill = 0.0;
  double t_decode = 0.0;
  double t_speech_decode = 0.0;
  double total = 0.0;  // ((t_tokenize + t_prefill) + t_decode) + t_speech_decode
};

// floor(frame_rate * user_speech_s), same rule as token_count.
std::size_t prefill_token_count(const LatencyScenario& scenario);

// First text block plus the speech tokens that unlock the first decoder
// chunk. Requires tokens_per_block <= speech_chunk so the first chunk fits
// in the first speech block.
std::size_t first_chunk_decode_tokens(const TemplateConfig& tmpl, const DecoderConfig& decoder);

// Tokenizer is charged for one block regardless of utterance length.
LatencyBreakdown total_latency(const LatencyScenario& scenario);

nlohmann::json to_json(const StageCost& cost);
StageCost stage_cost_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LatencyScenario& scenario);
LatencyScenario latency_scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LatencyBreakdown& breakdown);

// Aligned human-readable table.
std::string format_breakdown(const LatencyBreakdown& breakdown);

}  // namespace voxstream
