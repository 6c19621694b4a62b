#include "voxstream/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <random>

#include <fmt/format.h>

#include "voxstream/error.hpp"
#include "voxstream/framing.hpp"

namespace voxstream {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kTokenize: return "tokenize";
    case Stage::kPrefill: return "prefill";
    case Stage::kDecode: return "decode";
    case Stage::kChunkReady: return "chunk_ready";
    case Stage::kAudioOut: return "audio_out";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::kTokenize, Stage::kPrefill, Stage::kDecode, Stage::kChunkReady, Stage::kAudioOut}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::kParse, fmt::format("unknown stage '{}'", name), {{"stage", std::string(name)}});
}

namespace {

std::size_t whole_samples_per(double frame_rate, std::size_t sample_rate, const char* who) {
  const double spf = static_cast<double>(sample_rate) / frame_rate;
  const double rounded = std::round(spf);
  if (std::abs(spf - rounded) > 1e-9 || rounded < 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("{}: sample rate {} is not a whole multiple of frame rate {}", who, sample_rate, frame_rate),
                {{"sample_rate", sample_rate}, {"frame_rate", frame_rate}});
  }
  return static_cast<std::size_t>(rounded);
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

}  // namespace

std::vector<float> synthetic_speech(double seconds, std::size_t sample_rate, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(std::floor(seconds * static_cast<double>(sample_rate) + 1e-9));
  std::vector<float> pcm(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.05f);
  // slowly wandering pitch so neighbouring frames differ
  double phase = 0.0;
  double pitch = 140.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 160 == 0) pitch = std::clamp(pitch + static_cast<double>(noise(rng)) * 200.0, 80.0, 300.0);
    phase += 2.0 * std::numbers::pi * pitch / static_cast<double>(sample_rate);
    pcm[i] = static_cast<float>(0.3 * std::sin(phase)) + noise(rng);
  }
  return pcm;
}

MockTokenizer::MockTokenizer(double frame_rate, std::size_t sample_rate, std::uint64_t seed, std::size_t vocab_size)
    : samples_per_frame_(whole_samples_per(frame_rate, sample_rate, "tokenizer")),
      seed_(seed),
      vocab_size_(vocab_size) {
  if (vocab_size == 0) throw Error(ErrorCode::kInvalidArgument, "tokenizer vocabulary must be non-empty");
}

TokenId MockTokenizer::frame_token(std::span<const float> frame) const {
  std::uint64_t h = kFnvOffset ^ seed_;
  for (float s : frame) {
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f));
    const auto u = static_cast<std::uint16_t>(q);
    h = (h ^ (u & 0xffu)) * kFnvPrime;
    h = (h ^ (u >> 8)) * kFnvPrime;
  }
  return static_cast<TokenId>(h % vocab_size_);
}

MockVocoder::MockVocoder(double frame_rate, std::size_t sample_rate)
    : sample_rate_(sample_rate), samples_per_token_(whole_samples_per(frame_rate, sample_rate, "vocoder")) {}

std::vector<float> MockVocoder::synthesize(std::span<const TokenId> tokens) const {
  std::vector<float> out;
  out.reserve(tokens.size() * samples_per_token_);
  for (TokenId id : tokens) {
    const double freq = 110.0 + 15.0 * static_cast<double>(id % 64);
    for (std::size_t n = 0; n < samples_per_token_; ++n) {
      const double t = static_cast<double>(n) / static_cast<double>(sample_rate_);
      out.push_back(static_cast<float>(0.2 * std::sin(2.0 * std::numbers::pi * freq * t)));
    }
  }
  return out;
}

namespace {

// Minimal discrete-event queue: earliest time first, FIFO among equal times.
class EventQueue {
 public:
  void at(double t, std::function<void(double)> action) { queue_.push({t, next_seq_++, std::move(action)}); }

  void run() {
    while (!queue_.empty()) {
      auto item = queue_.top();
      queue_.pop();
      item.action(item.t);
    }
  }

 private:
  struct Item {
    double t;
    std::uint64_t seq;
    std::function<void(double)> action;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const { return a.t != b.t ? a.t > b.t : a.seq > b.seq; }
  };
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::uint64_t next_seq_ = 0;
};

std::vector<TokenId> draw_ids(std::size_t n, std::uint32_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<TokenId> pick(0, vocab - 1);
  std::vector<TokenId> ids(n);
  for (auto& id : ids) id = pick(rng);
  return ids;
}

constexpr std::uint32_t kTextVocab = 151'329;

}  // namespace

std::vector<TraceEvent> run_scenario(const SimScenario& scenario, std::uint64_t seed) {
  const auto& lat = scenario.latency;
  lat.validate();
  const auto& costs = lat.costs;
  const auto& tmpl = lat.text_speech_template;
  const DecoderConfig& dec_cfg = lat.decoder;
  const double fr = lat.frame.frame_rate;

  // Mock LM answer: scripted or drawn from the seed.
  std::mt19937_64 lm_rng(seed ^ 0x5bd1e995ULL);
  const auto& ans = scenario.answer;
  const std::vector<TokenId> a_text =
      ans.text_ids ? *ans.text_ids : draw_ids(ans.text_tokens, kTextVocab, lm_rng);
  const std::vector<TokenId> a_speech =
      ans.speech_ids ? *ans.speech_ids
                     : draw_ids(ans.speech_tokens, static_cast<std::uint32_t>(scenario.vocab_size), lm_rng);

  // Rejects decoder blocks longer than a template speech block.
  (void)first_chunk_decode_tokens(tmpl, dec_cfg);
  if (a_text.size() < tmpl.text_chunk || a_speech.size() < dec_cfg.tokens_per_block()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("scripted answer ({} text, {} speech tokens) is too short to reach first audio "
                            "(needs {} text, {} speech)",
                            a_text.size(), a_speech.size(), tmpl.text_chunk, dec_cfg.tokens_per_block()),
                {{"text_tokens", a_text.size()},
                 {"speech_tokens", a_speech.size()},
                 {"min_text", tmpl.text_chunk},
                 {"min_speech", dec_cfg.tokens_per_block()}});
  }
  const auto stream = interleave(a_text, a_speech, tmpl);
  // Mock LM output must always parse back under the template.
  (void)deinterleave(stream, tmpl);

  const MockTokenizer tokenizer(fr, scenario.sample_rate, seed, scenario.vocab_size);
  const MockVocoder vocoder(fr, scenario.sample_rate);
  const std::vector<float> pcm = synthetic_speech(lat.user_speech_s, scenario.sample_rate, seed);
  const std::size_t total_frames = frames_in(lat.user_speech_s, fr);
  const double user_s = lat.user_speech_s;
  const double block_s = lat.frame.tokenizer_block_s;

  std::vector<TraceEvent> trace;
  EventQueue queue;
  StreamingDecoder decoder(dec_cfg);
  std::vector<TokenId> prompt_tokens;
  prompt_tokens.reserve(total_frames);

  // Vocoder: one chunk at a time, in order.
  std::deque<DecoderChunk> vocoder_queue;
  bool vocoder_busy = false;
  std::function<void(double)> start_vocoder = [&](double now) {
    if (vocoder_busy || vocoder_queue.empty()) return;
    vocoder_busy = true;
    const DecoderChunk chunk = vocoder_queue.front();
    vocoder_queue.pop_front();
    const double done = now + costs.speech_decode(static_cast<double>(chunk.token_count()));
    queue.at(done, [&, chunk](double t) {
      const auto tokens = decoder.received().subspan(chunk.token_start, chunk.token_count());
      const auto samples = vocoder.synthesize(tokens);
      double energy = 0.0;
      for (float s : samples) energy += static_cast<double>(s) * s;
      trace.push_back({t, Stage::kAudioOut,
                       {{"n", chunk.index},
                        {"audio_start_s", chunk.audio_start_s},
                        {"audio_end_s", chunk.audio_end_s},
                        {"prompt_end_s", chunk.prompt_end_s},
                        {"samples", samples.size()},
                        {"energy", energy}}});
      vocoder_busy = false;
      start_vocoder(t);
    });
  };

  auto chunks_ready = [&](double t, const std::vector<DecoderChunk>& ready) {
    for (const auto& chunk : ready) {
      trace.push_back({t, Stage::kChunkReady, to_json(chunk)});
      vocoder_queue.push_back(chunk);
    }
    start_vocoder(t);
  };

  // Decoding: token i (1-based) completes at prefill_done + f_decode(i).
  double prefill_done = 0.0;
  std::size_t text_out = 0;
  std::size_t speech_out = 0;
  std::function<void(std::size_t)> schedule_decode = [&](std::size_t i) {
    const double t = prefill_done + costs.decode(static_cast<double>(i));
    queue.at(t, [&, i](double now) {
      const TaggedToken& tok = stream[i - 1];
      if (tok.kind == Modality::kText) {
        ++text_out;
      } else {
        ++speech_out;
      }
      trace.push_back({now, Stage::kDecode,
                       {{"i", i}, {"kind", std::string(to_string(tok.kind))}, {"id", tok.id},
                        {"text_emitted", text_out}, {"speech_emitted", speech_out}}});
      if (tok.kind == Modality::kSpeech) {
        const TokenId id = tok.id;
        chunks_ready(now, decoder.feed(std::span<const TokenId>(&id, 1)));
      }
      if (i < stream.size()) {
        schedule_decode(i + 1);
      } else {
        chunks_ready(now, decoder.flush());
      }
    });
  };

  // Tokenizer: block k covers [k * block_s, min((k+1) * block_s, T)) and
  // finishes f_tokenize(1) after its audio has arrived.
  const double t_tokenize = costs.tokenize(1.0);
  std::size_t blocks = static_cast<std::size_t>(std::ceil(user_s / block_s - 1e-9));
  blocks = std::max<std::size_t>(blocks, 1);
  std::size_t frames_done = 0;
  for (std::size_t k = 0; k < blocks; ++k) {
    const bool last = k + 1 == blocks;
    const double block_end = last ? user_s : std::min(static_cast<double>(k + 1) * block_s, user_s);
    const std::size_t frames_end = last ? total_frames : std::min(total_frames, frames_in(block_end, fr));
    const double t = (block_end - user_s) + t_tokenize;
    queue.at(t, [&, k, frames_end, last](double now) {
      std::vector<TokenId> ids;
      const std::size_t spf = tokenizer.samples_per_frame();
      for (; frames_done < frames_end; ++frames_done) {
        const std::size_t begin = std::min(pcm.size(), frames_done * spf);
        const std::size_t end = std::min(pcm.size(), begin + spf);
        ids.push_back(tokenizer.frame_token(std::span<const float>(pcm).subspan(begin, end - begin)));
      }
      prompt_tokens.insert(prompt_tokens.end(), ids.begin(), ids.end());
      trace.push_back({now, Stage::kTokenize,
                       {{"block", k}, {"tokens", ids.size()}, {"ids", ids}, {"total_tokens", prompt_tokens.size()}}});
      if (last) {
        const double done = now + costs.prefill(static_cast<double>(prompt_tokens.size()));
        queue.at(done, [&](double t_done) {
          prefill_done = t_done;
          trace.push_back({t_done, Stage::kPrefill, {{"prompt_tokens", prompt_tokens.size()}}});
          schedule_decode(1);
        });
      }
    });
  }

  queue.run();
  return trace;
}

std::optional<double> first_audio_time(std::span<const TraceEvent> events) {
  for (const auto& e : events) {
    if (e.stage == Stage::kAudioOut) return e.t;
  }
  return std::nullopt;
}

std::vector<std::string> trace_violations(std::span<const TraceEvent> events, const DecoderConfig& decoder) {
  std::vector<std::string> out;
  std::optional<double> prefill_t;
  std::vector<double> speech_token_t;  // decode time of each speech token
  std::vector<std::optional<double>> ready_t;
  std::size_t audio_events = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i > 0 && e.t < events[i - 1].t) out.push_back(fmt::format("event {} goes back in time", i));
    switch (e.stage) {
      case Stage::kTokenize:
        if (prefill_t) out.push_back(fmt::format("event {}: tokenize after prefill", i));
        break;
      case Stage::kPrefill:
        if (prefill_t) out.push_back(fmt::format("event {}: second prefill", i));
        prefill_t = e.t;
        break;
      case Stage::kDecode:
        if (!prefill_t || e.t < *prefill_t) out.push_back(fmt::format("event {}: decode before prefill", i));
        if (e.payload.value("kind", std::string{}) == "speech") speech_token_t.push_back(e.t);
        break;
      case Stage::kChunkReady: {
        const auto n = e.payload.at("n").get<std::size_t>();
        const auto end = e.payload.at("token_end").get<std::size_t>();
        const auto start = e.payload.at("token_start").get<std::size_t>();
        if (end > speech_token_t.size()) {
          out.push_back(fmt::format("event {}: chunk {} ready before token {} was decoded", i, n, end));
        } else if (e.t < speech_token_t[end - 1]) {
          out.push_back(fmt::format("event {}: chunk {} ready before its last token", i, n));
        }
        if (end - start != decoder.tokens_per_block() && end != speech_token_t.size()) {
          out.push_back(fmt::format("event {}: short chunk {} emitted mid-stream", i, n));
        }
        if (ready_t.size() < n) ready_t.resize(n);
        ready_t[n - 1] = e.t;
        break;
      }
      case Stage::kAudioOut: {
        ++audio_events;
        const auto n = e.payload.at("n").get<std::size_t>();
        if (n > ready_t.size() || !ready_t[n - 1] || e.t < *ready_t[n - 1]) {
          out.push_back(fmt::format("event {}: audio for chunk {} before chunk_ready", i, n));
        }
        break;
      }
    }
  }
  if (audio_events == 0) out.emplace_back("no audio_out event");
  return out;
}

SimScenario sim_scenario_from_json(const nlohmann::json& j) {
  SimScenario s;
  s.latency = latency_scenario_from_json(j);
  try {
    s.sample_rate = j.value("sample_rate", std::size_t{16000});
    s.vocab_size = j.value("vocab_size", std::size_t{16384});
    if (j.contains("answer")) {
      const auto& a = j.at("answer");
      if (a.contains("text")) s.answer.text_ids = a.at("text").get<std::vector<TokenId>>();
      if (a.contains("speech")) s.answer.speech_ids = a.at("speech").get<std::vector<TokenId>>();
      s.answer.text_tokens = a.value("text_tokens", s.answer.text_tokens);
      s.answer.speech_tokens = a.value("speech_tokens", s.answer.speech_tokens);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed simulation scenario: {}", e.what()));
  }
  return s;
}

SimScenario load_sim_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()), {{"path", path.string()}});
  try {
    return sim_scenario_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()), {{"path", path.string()}});
  }
}

nlohmann::json to_json(const SimScenario& s) {
  auto j = to_json(s.latency);
  j["sample_rate"] = s.sample_rate;
  j["vocab_size"] = s.vocab_size;
  nlohmann::json a = {{"text_tokens", s.answer.text_tokens}, {"speech_tokens", s.answer.speech_tokens}};
  if (s.answer.text_ids) a["text"] = *s.answer.text_ids;
  if (s.answer.speech_ids) a["speech"] = *s.answer.speech_ids;
  j["answer"] = a;
  return j;
}

}  // namespace voxstream
