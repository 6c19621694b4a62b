#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace voxstream {

using TokenCount = std::uint64_t;

struct FixedRatio {
  double ratio = 0.0;  // share of the total budget, in [0,1]
  bool operator==(const FixedRatio&) const = default;
};
struct FixedEpochs {
  double epochs = 0.0;  // passes over the corpus
  bool operator==(const FixedEpochs&) const = default;
};
struct Remainder {
  bool operator==(const Remainder&) const = default;
};

using SamplingPolicy = std::variant<FixedRatio, FixedEpochs, Remainder>;

struct CorpusSpec {
  std::string name;
  TokenCount speech_tokens = 0;
  TokenCount text_tokens = 0;
  SamplingPolicy policy = Remainder{};

  // Speech and text are sampled together.
  TokenCount size() const noexcept { return speech_tokens + text_tokens; }
  bool operator==(const CorpusSpec&) const = default;
};

struct CorpusAllocation {
  std::string name;
  TokenCount corpus_tokens = 0;
  TokenCount allocated = 0;
  double epochs = 0.0;  // allocated / corpus_tokens
};

struct MixturePlan {
  std::vector<CorpusAllocation> allocations;
  TokenCount total_tokens = 0;  // sum of allocations
};

// Fixed-ratio corpora get round(r * budget), fixed-epoch corpora
// round(e * size), and the single remainder corpus whatever is left.
// Throws kInvalidArgument unless exactly one corpus is the remainder, and
// kOverSubscribed (listing allocations) if fixed shares exceed the budget.
MixturePlan plan_mixture(TokenCount budget, std::span<const CorpusSpec> corpora);

// Same allocation rules without a remainder corpus: the total is whatever
// the fixed policies add up to, which need not match `budget`. Used to
// audit an existing mixture whose per-corpus epochs are all known.
MixturePlan tabulate_mixture(TokenCount budget, std::span<const CorpusSpec> corpora);

struct CorpusShare {
  std::string name;
  TokenCount allocated = 0;
  double share = 0.0;
  double epochs = 0.0;
};

struct PlanValidation {
  TokenCount total_tokens = 0;
  TokenCount stated_budget = 0;
  double relative_deviation = 0.0;  // |total - stated| / stated
  double tolerance = 0.0;
  bool passed = false;
  std::vector<CorpusShare> shares;
  std::vector<std::string> notes;
};

inline constexpr double kDefaultMixtureTolerance = 0.06;

// Report only; never throws on a failing plan.
PlanValidation validate_plan(const MixturePlan& plan, TokenCount stated_budget,
                             double tolerance = kDefaultMixtureTolerance);

// Accepts plain integers or K/M/B/T suffixes ("455B", "14.5B", "1T").
TokenCount parse_token_count(std::string_view text);
std::string format_token_count(TokenCount tokens);

// JSON: array of {name, speech_tokens, text_tokens, policy: {ratio|epochs|remainder}}
// CSV: header name,speech_tokens,text_tokens,policy,value
std::vector<CorpusSpec> corpora_from_json(const nlohmann::json& j);
std::vector<CorpusSpec> corpora_from_csv(std::string_view text);
std::vector<CorpusSpec> load_corpora(const std::filesystem::path& path);

nlohmann::json to_json(const MixturePlan& plan);
nlohmann::json to_json(const PlanValidation& report);
std::string format_validation(const PlanValidation& report);

// Reference four-corpus mixture (speech-text
// interleaved, speech-only, ASR+TTS, text-only) with fixed epochs/ratio.
std::vector<CorpusSpec> reference_corpora();

}  // namespace voxstream
