#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxstream/latency_model.hpp"
#include "voxstream/stream_decoder.hpp"
#include "voxstream/streaming_template.hpp"

namespace voxstream {

enum class Stage : std::uint8_t { kTokenize, kPrefill, kDecode, kChunkReady, kAudioOut };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

// t is simulated seconds measured from the end of the user's utterance, so
// tokenizer blocks finished while the user was still talking have t < 0.
struct TraceEvent {
  double t = 0.0;
  Stage stage = Stage::kTokenize;
  nlohmann::json payload = nlohmann::json::object();
  bool operator==(const TraceEvent&) const = default;
};

// Deterministic PCM-like stand-in for the user's recording.
std::vector<float> synthetic_speech(double seconds, std::size_t sample_rate, std::uint64_t seed);

// Hashes each complete frame of samples to a token id.
class MockTokenizer {
 public:
  MockTokenizer(double frame_rate, std::size_t sample_rate, std::uint64_t seed,
                std::size_t vocab_size = 16384);

  std::size_t samples_per_frame() const noexcept { return samples_per_frame_; }
  TokenId frame_token(std::span<const float> frame) const;

 private:
  std::size_t samples_per_frame_;
  std::uint64_t seed_;
  std::size_t vocab_size_;
};

// Speech token -> 1/frame_rate seconds of a tone whose pitch is keyed by
// the id.
class MockVocoder {
 public:
  MockVocoder(double frame_rate, std::size_t sample_rate);

  std::size_t samples_per_token() const noexcept { return samples_per_token_; }
  std::size_t sample_rate() const noexcept { return sample_rate_; }
  std::vector<float> synthesize(std::span<const TokenId> tokens) const;

 private:
  std::size_t sample_rate_;
  std::size_t samples_per_token_;
};

// Scripted assistant answer. Explicit ids win; otherwise the mock LM
// draws `text_tokens` / `speech_tokens` ids from the run seed.
struct AnswerScript {
  std::optional<std::vector<TokenId>> text_ids;
  std::optional<std::vector<TokenId>> speech_ids;
  std::size_t text_tokens = 39;
  std::size_t speech_tokens = 78;
};

struct SimScenario {
  LatencyScenario latency;
  AnswerScript answer;
  std::size_t sample_rate = 16000;
  std::size_t vocab_size = 16384;
};

SimScenario sim_scenario_from_json(const nlohmann::json& j);
SimScenario load_sim_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const SimScenario& scenario);

// Runs tokenizer -> prefill -> template decode -> chunked speech decoder ->
// vocoder through an event queue on simulated time. Stage costs come from
// the scenario, so the first audio_out lands at total_latency(scenario).
std::vector<TraceEvent> run_scenario(const SimScenario& scenario, std::uint64_t seed);

// Time of the first audio_out event, if any.
std::optional<double> first_audio_time(std::span<const TraceEvent> events);

// Ordering and causality checks over a finished trace; empty when clean.
std::vector<std::string> trace_violations(std::span<const TraceEvent> events, const DecoderConfig& decoder);

enum class TraceFormat { kJson, kCsv };
TraceFormat parse_trace_format(std::string_view name);

void write_trace(std::ostream& out, std::span<const TraceEvent> events, TraceFormat format);
std::vector<TraceEvent> read_trace(std::istream& in, TraceFormat format);
void emit_trace(std::span<const TraceEvent> events, TraceFormat format, const std::filesystem::path& path);
std::vector<TraceEvent> load_trace(const std::filesystem::path& path, TraceFormat format);

}  // namespace voxstream
