#include "voxstream/pretrain_mixture.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void validate_corpus(const CorpusSpec& c) {
  std::visit(Overloaded{
                 [&](const FixedRatio& p) {
                   if (!(p.ratio >= 0.0 && p.ratio <= 1.0)) {
                     throw Error(ErrorCode::kInvalidArgument,
                                 fmt::format("corpus '{}': ratio {} outside [0,1]", c.name, p.ratio),
                                 {{"corpus", c.name}, {"ratio", p.ratio}});
                   }
                 },
                 [&](const FixedEpochs& p) {
                   if (!(p.epochs >= 0.0) || !std::isfinite(p.epochs)) {
                     throw Error(ErrorCode::kInvalidArgument,
                                 fmt::format("corpus '{}': epochs {} must be >= 0", c.name, p.epochs),
                                 {{"corpus", c.name}, {"epochs", p.epochs}});
                   }
                 },
                 [](const Remainder&) {},
             },
             c.policy);
}

TokenCount round_tokens(double tokens) { return static_cast<TokenCount>(std::llround(tokens)); }

double epochs_of(TokenCount allocated, TokenCount size) {
  return size == 0 ? 0.0 : static_cast<double>(allocated) / static_cast<double>(size);
}

// Allocations for every non-remainder corpus; remainder slots stay 0.
MixturePlan fixed_allocations(TokenCount budget, std::span<const CorpusSpec> corpora) {
  MixturePlan plan;
  for (const auto& c : corpora) {
    validate_corpus(c);
    const TokenCount alloc = std::visit(
        Overloaded{
            [&](const FixedRatio& p) { return round_tokens(p.ratio * static_cast<double>(budget)); },
            [&](const FixedEpochs& p) { return round_tokens(p.epochs * static_cast<double>(c.size())); },
            [](const Remainder&) { return TokenCount{0}; },
        },
        c.policy);
    plan.allocations.push_back({.name = c.name, .corpus_tokens = c.size(), .allocated = alloc});
    plan.total_tokens += alloc;
  }
  return plan;
}

void finish_epochs(MixturePlan& plan) {
  for (auto& a : plan.allocations) a.epochs = epochs_of(a.allocated, a.corpus_tokens);
}

nlohmann::json allocations_json(const MixturePlan& plan) {
  auto arr = nlohmann::json::array();
  for (const auto& a : plan.allocations) arr.push_back({{"name", a.name}, {"allocated", a.allocated}});
  return arr;
}

}  // namespace

MixturePlan plan_mixture(TokenCount budget, std::span<const CorpusSpec> corpora) {
  std::size_t remainder_index = corpora.size();
  std::size_t remainder_count = 0;
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    if (std::holds_alternative<Remainder>(corpora[i].policy)) {
      remainder_index = i;
      ++remainder_count;
    }
  }
  if (remainder_count != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("mixture needs exactly one remainder corpus, found {}", remainder_count),
                {{"remainder_corpora", remainder_count}});
  }

  MixturePlan plan = fixed_allocations(budget, corpora);
  if (plan.total_tokens > budget) {
    throw Error(ErrorCode::kOverSubscribed,
                fmt::format("fixed allocations total {} tokens, budget is {}", plan.total_tokens, budget),
                {{"budget", budget}, {"fixed_total", plan.total_tokens}, {"allocations", allocations_json(plan)}});
  }
  plan.allocations[remainder_index].allocated = budget - plan.total_tokens;
  plan.total_tokens = budget;
  finish_epochs(plan);
  return plan;
}

MixturePlan tabulate_mixture(TokenCount budget, std::span<const CorpusSpec> corpora) {
  for (const auto& c : corpora) {
    if (std::holds_alternative<Remainder>(c.policy)) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("corpus '{}' has a remainder policy; use plan_mixture", c.name),
                  {{"corpus", c.name}});
    }
  }
  MixturePlan plan = fixed_allocations(budget, corpora);
  finish_epochs(plan);
  return plan;
}

PlanValidation validate_plan(const MixturePlan& plan, TokenCount stated_budget, double tolerance) {
  PlanValidation r;
  r.total_tokens = plan.total_tokens;
  r.stated_budget = stated_budget;
  r.tolerance = tolerance;
  if (stated_budget == 0) {
    r.relative_deviation = plan.total_tokens == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    const double diff = std::abs(static_cast<double>(plan.total_tokens) - static_cast<double>(stated_budget));
    r.relative_deviation = diff / static_cast<double>(stated_budget);
  }
  r.passed = r.relative_deviation <= tolerance;
  for (const auto& a : plan.allocations) {
    const double share =
        plan.total_tokens == 0 ? 0.0 : static_cast<double>(a.allocated) / static_cast<double>(plan.total_tokens);
    r.shares.push_back({.name = a.name, .allocated = a.allocated, .share = share, .epochs = a.epochs});
    if (a.epochs > 1.0) {
      r.notes.push_back(fmt::format("{}: {:.2f} epochs, data is repeated", a.name, a.epochs));
    }
  }
  if (!r.passed) {
    r.notes.push_back(fmt::format("total {} deviates {:.2f}% from stated {} (tolerance {:.2f}%)",
                                  format_token_count(r.total_tokens), 100.0 * r.relative_deviation,
                                  format_token_count(stated_budget), 100.0 * tolerance));
  }
  return r;
}

TokenCount parse_token_count(std::string_view text) {
  auto fail = [&] {
    return Error(ErrorCode::kParse, fmt::format("cannot parse token count '{}'", text), {{"value", std::string(text)}});
  };
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  if (text.empty()) throw fail();
  double scale = 1.0;
  switch (std::toupper(static_cast<unsigned char>(text.back()))) {
    case 'K': scale = 1e3; break;
    case 'M': scale = 1e6; break;
    case 'B': case 'G': scale = 1e9; break;
    case 'T': scale = 1e12; break;
    default: break;
  }
  if (scale != 1.0) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !(value >= 0.0) || !std::isfinite(value)) {
    throw fail();
  }
  return round_tokens(value * scale);
}

std::string format_token_count(TokenCount tokens) {
  const double t = static_cast<double>(tokens);
  if (tokens >= 1'000'000'000'000ULL) return fmt::format("{:.3f}T", t / 1e12);
  if (tokens >= 1'000'000'000ULL) return fmt::format("{:.2f}B", t / 1e9);
  if (tokens >= 1'000'000ULL) return fmt::format("{:.2f}M", t / 1e6);
  return fmt::format("{}", tokens);
}

namespace {

TokenCount token_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return 0;
  const auto& v = j.at(key);
  if (v.is_string()) return parse_token_count(v.get<std::string>());
  if (v.is_number_unsigned()) return v.get<TokenCount>();
  if (v.is_number()) return round_tokens(v.get<double>());
  throw Error(ErrorCode::kParse, fmt::format("field '{}' is not a token count", key));
}

SamplingPolicy make_policy(std::string_view kind, double value, const std::string& corpus) {
  if (kind == "ratio") return FixedRatio{value};
  if (kind == "epochs") return FixedEpochs{value};
  if (kind == "remainder") return Remainder{};
  throw Error(ErrorCode::kParse, fmt::format("corpus '{}': unknown policy '{}'", corpus, kind),
              {{"corpus", corpus}, {"policy", std::string(kind)}});
}

}  // namespace

std::vector<CorpusSpec> corpora_from_json(const nlohmann::json& j) {
  try {
    const auto& arr = j.is_object() ? j.at("corpora") : j;
    std::vector<CorpusSpec> out;
    for (const auto& c : arr) {
      CorpusSpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.speech_tokens = token_field(c, "speech_tokens");
      spec.text_tokens = token_field(c, "text_tokens");
      const auto& p = c.at("policy");
      if (p.is_string()) {
        spec.policy = make_policy(p.get<std::string>(), 0.0, spec.name);
      } else if (p.contains("ratio")) {
        spec.policy = FixedRatio{p.at("ratio").get<double>()};
      } else if (p.contains("epochs")) {
        spec.policy = FixedEpochs{p.at("epochs").get<double>()};
      } else if (p.contains("remainder")) {
        spec.policy = Remainder{};
      } else {
        throw Error(ErrorCode::kParse, fmt::format("corpus '{}': policy needs ratio, epochs or remainder", spec.name));
      }
      validate_corpus(spec);
      out.push_back(std::move(spec));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed corpora document: {}", e.what()));
  }
}

std::vector<CorpusSpec> corpora_from_csv(std::string_view text) {
  std::vector<CorpusSpec> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("name,", 0) == 0) continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 4) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: expected name,speech_tokens,text_tokens,policy[,value]", line_no),
                  {{"line", line_no}});
    }
    CorpusSpec spec;
    spec.name = cells[0];
    spec.speech_tokens = cells[1].empty() || cells[1] == "-" ? 0 : parse_token_count(cells[1]);
    spec.text_tokens = cells[2].empty() || cells[2] == "-" ? 0 : parse_token_count(cells[2]);
    double value = 0.0;
    if (cells.size() > 4 && !cells[4].empty() && cells[4] != "-") {
      const auto [ptr, ec] = std::from_chars(cells[4].data(), cells[4].data() + cells[4].size(), value);
      if (ec != std::errc{} || ptr != cells[4].data() + cells[4].size()) {
        throw Error(ErrorCode::kParse, fmt::format("line {}: bad policy value '{}'", line_no, cells[4]),
                    {{"line", line_no}});
      }
    }
    spec.policy = make_policy(cells[3], value, spec.name);
    validate_corpus(spec);
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<CorpusSpec> load_corpora(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()), {{"path", path.string()}});
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".csv") return corpora_from_csv(buf.str());
  try {
    return corpora_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()), {{"path", path.string()}});
  }
}

nlohmann::json to_json(const MixturePlan& plan) {
  auto arr = nlohmann::json::array();
  for (const auto& a : plan.allocations) {
    arr.push_back({{"name", a.name}, {"corpus_tokens", a.corpus_tokens}, {"allocated", a.allocated}, {"epochs", a.epochs}});
  }
  return {{"total_tokens", plan.total_tokens}, {"allocations", arr}};
}

nlohmann::json to_json(const PlanValidation& r) {
  auto shares = nlohmann::json::array();
  for (const auto& s : r.shares) {
    shares.push_back({{"name", s.name}, {"allocated", s.allocated}, {"share", s.share}, {"epochs", s.epochs}});
  }
  return {{"total_tokens", r.total_tokens},
          {"stated_budget", r.stated_budget},
          {"relative_deviation", r.relative_deviation},
          {"tolerance", r.tolerance},
          {"passed", r.passed},
          {"shares", shares},
          {"notes", r.notes}};
}

std::string format_validation(const PlanValidation& r) {
  std::size_t width = 8;
  for (const auto& s : r.shares) width = std::max(width, s.name.size() + 2);
  std::string out = fmt::format("{:<{}}{:>10}{:>10}{:>9}\n", "corpus", width, "tokens", "share", "epochs");
  for (const auto& s : r.shares) {
    out += fmt::format("{:<{}}{:>10}{:>9.2f}%{:>9.3f}\n", s.name, width, format_token_count(s.allocated),
                       100.0 * s.share, s.epochs);
  }
  out += fmt::format("total {} vs stated {}: deviation {:.2f}% (tolerance {:.2f}%) -> {}\n",
                     format_token_count(r.total_tokens), format_token_count(r.stated_budget),
                     100.0 * r.relative_deviation, 100.0 * r.tolerance, r.passed ? "PASS" : "FAIL");
  for (const auto& n : r.notes) out += "note: " + n + '\n';
  return out;
}

std::vector<CorpusSpec> reference_corpora() {
  return {
      {.name = "speech-text", .speech_tokens = 455'000'000'000ULL, .text_tokens = 279'000'000'000ULL,
       .policy = FixedEpochs{0.90}},
      {.name = "speech-only", .speech_tokens = 31'000'000'000ULL, .text_tokens = 0, .policy = FixedEpochs{2.10}},
      {.name = "asr+tts", .speech_tokens = 11'000'000'000ULL, .text_tokens = 3'500'000'000ULL,
       .policy = FixedEpochs{2.07}},
      {.name = "text-only", .speech_tokens = 0, .text_tokens = 10'000'000'000'000ULL, .policy = FixedRatio{0.30}},
  };
}

}  // namespace voxstream
