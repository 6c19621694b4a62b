#include "voxstream/latency_model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

namespace {

void require_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("{} must be a finite value >= 0, got {}", what, v),
                {{"field", what}, {"value", v}});
  }
}

}  // namespace

StageCost StageCost::constant(double seconds) {
  require_nonneg(seconds, "constant cost");
  StageCost c;
  c.kind_ = Kind::kConstant;
  c.base_s_ = seconds;
  return c;
}

StageCost StageCost::affine(double base_s, double per_unit_s) {
  require_nonneg(base_s, "affine base_s");
  require_nonneg(per_unit_s, "affine per_unit_s");
  StageCost c;
  c.kind_ = Kind::kAffine;
  c.base_s_ = base_s;
  c.per_unit_s_ = per_unit_s;
  return c;
}

StageCost StageCost::table(std::vector<std::pair<double, double>> points) {
  if (points.empty()) throw Error(ErrorCode::kInvalidArgument, "table cost needs at least one knot");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_nonneg(points[i].second, "table seconds");
    if (!std::isfinite(points[i].first)) {
      throw Error(ErrorCode::kInvalidArgument, "table units must be finite", {{"knot", i}});
    }
    if (i > 0 && !(points[i].first > points[i - 1].first)) {
      throw Error(ErrorCode::kInvalidArgument, "table units must be strictly increasing", {{"knot", i}});
    }
    if (i > 0 && points[i].second < points[i - 1].second) {
      throw Error(ErrorCode::kInvalidArgument, "table seconds must be nondecreasing", {{"knot", i}});
    }
  }
  StageCost c;
  c.kind_ = Kind::kTable;
  c.points_ = std::move(points);
  return c;
}

double StageCost::operator()(double units) const {
  switch (kind_) {
    case Kind::kConstant:
      return base_s_;
    case Kind::kAffine:
      return base_s_ + per_unit_s_ * units;
    case Kind::kTable: {
      const double lo = points_.front().first;
      const double hi = points_.back().first;
      if (units < lo || units > hi) {
        throw Error(ErrorCode::kOutOfRange,
                    fmt::format("table cost queried at {} units outside [{}, {}]", units, lo, hi),
                    {{"units", units}, {"min", lo}, {"max", hi}});
      }
      auto upper = std::ranges::lower_bound(points_, units, {}, &std::pair<double, double>::first);
      if (upper->first == units) return upper->second;
      const auto& [x1, y1] = *upper;
      const auto& [x0, y0] = *(upper - 1);
      return y0 + (y1 - y0) * ((units - x0) / (x1 - x0));
    }
  }
  return 0.0;
}

void LatencyScenario::validate() const {
  require_nonneg(user_speech_s, "user_speech_s");
  frame.validate();
  text_speech_template.validate();
  if (decoder.frame_rate() != frame.frame_rate) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("decoder frame rate {} differs from tokenizer frame rate {}",
                            decoder.frame_rate(), frame.frame_rate),
                {{"decoder_frame_rate", decoder.frame_rate()}, {"frame_rate", frame.frame_rate}});
  }
}

std::size_t prefill_token_count(const LatencyScenario& scenario) {
  scenario.validate();
  return frames_in(scenario.user_speech_s, scenario.frame.frame_rate);
}

std::size_t first_chunk_decode_tokens(const TemplateConfig& tmpl, const DecoderConfig& decoder) {
  tmpl.validate();
  if (decoder.tokens_per_block() > tmpl.speech_chunk) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("first decoder chunk needs {} speech tokens but a template speech block has {}",
                            decoder.tokens_per_block(), tmpl.speech_chunk),
                {{"tokens_per_block", decoder.tokens_per_block()}, {"speech_chunk", tmpl.speech_chunk}});
  }
  return tmpl.text_chunk + decoder.tokens_per_block();
}

LatencyBreakdown total_latency(const LatencyScenario& scenario) {
  scenario.validate();
  const auto& costs = scenario.costs;
  LatencyBreakdown b;
  b.t_tokenize = costs.tokenize(1.0);
  b.t_prefill = costs.prefill(static_cast<double>(prefill_token_count(scenario)));
  b.t_decode =
      costs.decode(static_cast<double>(first_chunk_decode_tokens(scenario.text_speech_template, scenario.decoder)));
  b.t_speech_decode = costs.speech_decode(static_cast<double>(scenario.decoder.tokens_per_block()));
  b.total = b.t_tokenize + b.t_prefill + b.t_decode + b.t_speech_decode;
  return b;
}

nlohmann::json to_json(const StageCost& cost) {
  switch (cost.kind()) {
    case StageCost::Kind::kConstant:
      return {{"kind", "constant"}, {"seconds", cost.base_s()}};
    case StageCost::Kind::kAffine:
      return {{"kind", "affine"}, {"base_s", cost.base_s()}, {"per_unit_s", cost.per_unit_s()}};
    case StageCost::Kind::kTable: {
      auto pts = nlohmann::json::array();
      for (const auto& [u, s] : cost.points()) pts.push_back({u, s});
      return {{"kind", "table"}, {"points", pts}};
    }
  }
  return {};
}

StageCost stage_cost_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "constant") return StageCost::constant(j.at("seconds").get<double>());
    if (kind == "affine") {
      return StageCost::affine(j.value("base_s", 0.0), j.at("per_unit_s").get<double>());
    }
    if (kind == "table") {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : j.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      return StageCost::table(std::move(pts));
    }
    throw Error(ErrorCode::kParse, fmt::format("unknown stage cost kind '{}'", kind), {{"kind", kind}});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed stage cost: {}", e.what()));
  }
}

nlohmann::json to_json(const LatencyScenario& s) {
  return {{"user_speech_s", s.user_speech_s},
          {"frame_rate", s.frame.frame_rate},
          {"tokenizer_block_s", s.frame.tokenizer_block_s},
          {"template", {{"text_chunk", s.text_speech_template.text_chunk},
                        {"speech_chunk", s.text_speech_template.speech_chunk}}},
          {"decoder", {{"block_s", s.decoder.block_s()}}},
          {"costs", {{"tokenize", to_json(s.costs.tokenize)},
                     {"prefill", to_json(s.costs.prefill)},
                     {"decode", to_json(s.costs.decode)},
                     {"speech_decode", to_json(s.costs.speech_decode)}}}};
}

LatencyScenario latency_scenario_from_json(const nlohmann::json& j) {
  try {
    LatencyScenario s;
    s.user_speech_s = j.at("user_speech_s").get<double>();
    s.frame.frame_rate = j.value("frame_rate", 12.5);
    s.frame.tokenizer_block_s = j.value("tokenizer_block_s", 0.8);
    if (j.contains("template")) {
      const auto& t = j.at("template");
      s.text_speech_template.text_chunk = t.value("text_chunk", std::size_t{13});
      s.text_speech_template.speech_chunk = t.value("speech_chunk", std::size_t{26});
    }
    double block_s = 0.8;
    if (j.contains("decoder")) block_s = j.at("decoder").value("block_s", 0.8);
    s.decoder = DecoderConfig(block_s, s.frame.frame_rate);
    if (j.contains("costs")) {
      const auto& c = j.at("costs");
      if (c.contains("tokenize")) s.costs.tokenize = stage_cost_from_json(c.at("tokenize"));
      if (c.contains("prefill")) s.costs.prefill = stage_cost_from_json(c.at("prefill"));
      if (c.contains("decode")) s.costs.decode = stage_cost_from_json(c.at("decode"));
      if (c.contains("speech_decode")) s.costs.speech_decode = stage_cost_from_json(c.at("speech_decode"));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed scenario: {}", e.what()));
  }
}

nlohmann::json to_json(const LatencyBreakdown& b) {
  return {{"t_tokenize", b.t_tokenize},
          {"t_prefill", b.t_prefill},
          {"t_decode", b.t_decode},
          {"t_speech_decode", b.t_speech_decode},
          {"total", b.total}};
}

std::string format_breakdown(const LatencyBreakdown& b) {
  std::string out;
  auto row = [&](std::string_view name, double v) { out += fmt::format("{:<16}{:>12.6f} s\n", name, v); };
  row("speech_tokenize", b.t_tokenize);
  row("llm_prefill", b.t_prefill);
  row("llm_decode", b.t_decode);
  row("speech_decode", b.t_speech_decode);
  out += std::string(30, '-') + '\n';
  row("total", b.total);
  return out;
}

}  // namespace voxstream
