#include "voxstream/sft_masking.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

std::string_view to_string(Segment segment) { return segment == Segment::kInput ? "input" : "output"; }

std::size_t TrainingExample::supervised() const {
  return static_cast<std::size_t>(std::ranges::count(loss_mask, std::uint8_t{1}));
}

namespace {

void append_turn(TrainingExample& ex, const TurnSample& turn, const TemplateConfig& tmpl, bool supervise_output) {
  if (turn.a_text.empty() && turn.a_speech.empty()) {
    throw Error(ErrorCode::kEmptyInput, "turn has neither text nor speech output");
  }
  for (TokenId id : turn.q_speech) ex.tokens.push_back({{Modality::kSpeech, id}, Segment::kInput});
  for (TokenId id : turn.q_text) ex.tokens.push_back({{Modality::kText, id}, Segment::kInput});
  ex.loss_mask.resize(ex.tokens.size(), 0);

  const Segment out_segment = supervise_output ? Segment::kOutput : Segment::kInput;
  for (const auto& tok : interleave(turn.a_text, turn.a_speech, tmpl)) {
    ex.tokens.push_back({tok, out_segment});
    ex.loss_mask.push_back(supervise_output ? 1 : 0);
  }
}

}  // namespace

TrainingExample build_streaming_turn(const TurnSample& turn, const TemplateConfig& tmpl) {
  tmpl.validate();
  TrainingExample ex;
  append_turn(ex, turn, tmpl, true);
  return ex;
}

TrainingExample build_conversation(std::span<const TurnSample> turns, const TemplateConfig& tmpl) {
  tmpl.validate();
  if (turns.empty()) throw Error(ErrorCode::kEmptyInput, "conversation has no turns");
  TrainingExample ex;
  for (std::size_t i = 0; i < turns.size(); ++i) append_turn(ex, turns[i], tmpl, i + 1 == turns.size());
  return ex;
}

DualObjective split_dual_objective(const TrainingExample& example) {
  if (example.loss_mask.size() != example.tokens.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "loss mask length differs from token count",
                {{"tokens", example.tokens.size()}, {"mask", example.loss_mask.size()}});
  }
  if (example.supervised() == 0) {
    throw Error(ErrorCode::kEmptyInput, "example has no supervised output tokens");
  }
  DualObjective out{.text_focus = example, .speech_focus = example};
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    const auto& t = example.tokens[i];
    const bool on = example.loss_mask[i] != 0 && t.segment == Segment::kOutput;
    out.text_focus.loss_mask[i] = on && t.token.kind == Modality::kText;
    out.speech_focus.loss_mask[i] = on && t.token.kind == Modality::kSpeech;
  }
  out.text_focus_empty = out.text_focus.supervised() == 0;
  out.speech_focus_empty = out.speech_focus.supervised() == 0;
  return out;
}

nlohmann::json to_json(const TrainingExample& example) {
  auto tokens = nlohmann::json::array();
  for (const auto& t : example.tokens) {
    tokens.push_back({{"kind", std::string(to_string(t.token.kind))},
                      {"id", t.token.id},
                      {"segment", std::string(to_string(t.segment))}});
  }
  return {{"tokens", tokens}, {"mask", example.loss_mask}};
}

TrainingExample training_example_from_json(const nlohmann::json& j) {
  try {
    TrainingExample ex;
    for (const auto& t : j.at("tokens")) {
      const auto seg = t.at("segment").get<std::string>();
      if (seg != "input" && seg != "output") {
        throw Error(ErrorCode::kParse, fmt::format("unknown segment '{}'", seg), {{"segment", seg}});
      }
      ex.tokens.push_back({{parse_modality(t.at("kind").get<std::string>()), t.at("id").get<TokenId>()},
                           seg == "input" ? Segment::kInput : Segment::kOutput});
    }
    for (const auto& m : j.at("mask")) {
      ex.loss_mask.push_back(m.is_boolean() ? static_cast<std::uint8_t>(m.get<bool>()) : m.get<std::uint8_t>());
    }
    if (ex.loss_mask.size() != ex.tokens.size()) {
      throw Error(ErrorCode::kParse, "mask length differs from token count",
                  {{"tokens", ex.tokens.size()}, {"mask", ex.loss_mask.size()}});
    }
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed training example: {}", e.what()));
  }
}

void write_examples_jsonl(std::ostream& out, std::span<const TrainingExample> examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

std::vector<TrainingExample> read_examples_jsonl(std::istream& in) {
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(training_example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: {}", line_no, e.what()), {{"line", line_no}});
    }
  }
  return out;
}

TurnSample turn_from_json(const nlohmann::json& j) {
  try {
    TurnSample t;
    auto ids = [&](const char* key) {
      return j.contains(key) ? j.at(key).get<std::vector<TokenId>>() : std::vector<TokenId>{};
    };
    t.q_speech = ids("q_speech");
    t.q_text = ids("q_text");
    t.a_text = ids("a_text");
    t.a_speech = ids("a_speech");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed turn: {}", e.what()));
  }
}

}  // namespace voxstream
