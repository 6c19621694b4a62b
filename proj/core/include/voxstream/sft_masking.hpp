#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxstream/streaming_template.hpp"

namespace voxstream {

// One conversational turn: user speech (and optional transcript) in,
// text answer plus its speech rendering out.
struct TurnSample {
  std::vector<TokenId> q_speech;
  std::vector<TokenId> q_text;  // optional; placed after q_speech
  std::vector<TokenId> a_text;
  std::vector<TokenId> a_speech;
};

enum class Segment : std::uint8_t { kInput, kOutput };

std::string_view to_string(Segment segment);

struct TrainingToken {
  TaggedToken token;
  Segment segment = Segment::kInput;
  bool operator==(const TrainingToken&) const = default;
};

struct TrainingExample {
  std::vector<TrainingToken> tokens;
  std::vector<std::uint8_t> loss_mask;  // 1 = token contributes to the loss

  std::size_t supervised() const;
  bool operator==(const TrainingExample&) const = default;
};

// [input: q_speech, q_text] ++ [output: interleave(a_text, a_speech)],
// loss on every output token. Throws kEmptyInput if both outputs are empty.
TrainingExample build_streaming_turn(const TurnSample& turn, const TemplateConfig& tmpl);

// Multi-turn packing: earlier turns are laid out the same way but their
// outputs are relabelled as input, so only the final turn carries loss.
TrainingExample build_conversation(std::span<const TurnSample> turns, const TemplateConfig& tmpl);

struct DualObjective {
  TrainingExample text_focus;    // loss on output text only
  TrainingExample speech_focus;  // loss on output speech only
  bool text_focus_empty = false;
  bool speech_focus_empty = false;
};

// Throws kEmptyInput when the example has no supervised tokens.
DualObjective split_dual_objective(const TrainingExample& example);

// {"tokens":[{"kind","id","segment"}...],"mask":[0|1,...]}
nlohmann::json to_json(const TrainingExample& example);
TrainingExample training_example_from_json(const nlohmann::json& j);
void write_examples_jsonl(std::ostream& out, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_examples_jsonl(std::istream& in);

TurnSample turn_from_json(const nlohmann::json& j);

}  // namespace voxstream
