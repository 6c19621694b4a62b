// voxsim: command-line front end for the voxstream core library.
//
// Every failure exits nonzero and writes one JSON object to stderr:
//   {"error": "<code>", "message": "...", "details": {...}}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "voxstream/error.hpp"
#include "voxstream/latency_model.hpp"
#include "voxstream/pipeline_sim.hpp"
#include "voxstream/pretrain_mixture.hpp"
#include "voxstream/sft_masking.hpp"
#include "voxstream/streaming_template.hpp"
#include "voxstream/vq_codebook.hpp"
#include "voxstream/vq_fit.hpp"

namespace {

using namespace voxstream;
using nlohmann::json;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;

void emit_error(const json& j) { std::cerr << j.dump() << '\n'; }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path), {{"path", path}});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path, e.what()), {{"path", path}});
  }
}

TemplateConfig template_from(std::size_t text_chunk, std::size_t speech_chunk) {
  TemplateConfig cfg{text_chunk, speech_chunk};
  cfg.validate();
  return cfg;
}

std::vector<TokenId> iota_ids(std::size_t n, TokenId base) {
  std::vector<TokenId> v(n);
  std::iota(v.begin(), v.end(), base);
  return v;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
};

int run_simulate(const SimulateArgs& a) {
  const auto scenario = load_sim_scenario(a.scenario);
  const auto fmt_kind = parse_trace_format(a.format);
  const auto trace = run_scenario(scenario, a.seed);
  emit_trace(trace, fmt_kind, a.out);

  const auto model = total_latency(scenario.latency);
  const auto first = first_audio_time(trace);
  json summary = {{"events", trace.size()},
                  {"first_audio_s", first ? json(*first) : json(nullptr)},
                  {"model_total_s", model.total},
                  {"out", a.out}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// --- latency ----------------------------------------------------------------

int run_latency(const std::string& path, bool as_json) {
  const auto scenario = latency_scenario_from_json(read_json_file(path));
  const auto b = total_latency(scenario);
  if (as_json) {
    std::cout << to_json(b).dump(2) << '\n';
  } else {
    std::cout << format_breakdown(b);
  }
  return 0;
}

// --- mixture ----------------------------------------------------------------

struct MixtureArgs {
  std::string corpora;
  std::string budget;
  double tolerance = kDefaultMixtureTolerance;
  bool as_json = false;
};

int run_mixture(const MixtureArgs& a) {
  const auto corpora = load_corpora(a.corpora);
  const auto budget = parse_token_count(a.budget);
  const bool has_remainder = std::any_of(corpora.begin(), corpora.end(), [](const CorpusSpec& c) {
    return std::holds_alternative<Remainder>(c.policy);
  });
  // With a remainder corpus the budget is filled exactly; without one the
  // fixed shares are tabulated and checked against the budget.
  const auto plan = has_remainder ? plan_mixture(budget, corpora) : tabulate_mixture(budget, corpora);
  const auto report = validate_plan(plan, budget, a.tolerance);
  if (a.as_json) {
    std::cout << json{{"plan", to_json(plan)}, {"validation", to_json(report)}}.dump(2) << '\n';
  } else {
    std::cout << format_validation(report);
  }
  if (!report.passed) {
    emit_error({{"error", "validation_failed"},
                {"message", fmt::format("plan total deviates {:.4f} from budget (tolerance {:.4f})",
                                        report.relative_deviation, report.tolerance)},
                {"details", to_json(report)}});
    return kExitValidation;
  }
  return 0;
}

// --- template ---------------------------------------------------------------

struct TemplateArgs {
  std::size_t text = 0;
  std::size_t speech = 0;
  std::size_t dump = 0;
  std::size_t text_chunk = 13;
  std::size_t speech_chunk = 26;
};

int run_template(const TemplateArgs& a) {
  const auto cfg = template_from(a.text_chunk, a.speech_chunk);
  const auto stream = interleave(iota_ids(a.text, 0), iota_ids(a.speech, 0), cfg);
  const std::size_t n = std::min(a.dump, stream.size());
  write_token_jsonl(std::cout, std::span(stream).first(n));
  return 0;
}

// --- codebook-fit -----------------------------------------------------------

int run_codebook_fit(const FitConfig& cfg, const std::string& out) {
  const auto report = fit_codebook(cfg);
  if (!out.empty()) save_codebook(report.codebook, out);
  json j = {{"clusters", cfg.clusters},
            {"codes", cfg.codes},
            {"steps", cfg.steps},
            {"init", std::string(to_string(cfg.init))},
            {"seed", cfg.seed},
            {"code_distance", report.code_distance},
            {"max_code_distance", report.max_code_distance()},
            {"reset_count", report.reset_count},
            {"codes_ever_reset", report.codes_ever_reset()},
            {"final_commitment_loss", report.commitment_loss.empty() ? 0.0 : report.commitment_loss.back()},
            {"usage", report.codebook.usage()}};
  if (!out.empty()) j["out"] = out;
  std::cout << j.dump(2) << '\n';
  return 0;
}

// --- mask-demo --------------------------------------------------------------

int run_mask_demo(const std::string& path, std::size_t text_chunk, std::size_t speech_chunk, bool as_json) {
  const auto turn = turn_from_json(read_json_file(path));
  const auto example = build_streaming_turn(turn, template_from(text_chunk, speech_chunk));
  const auto dual = split_dual_objective(example);
  if (as_json) {
    std::cout << json{{"example", to_json(example)},
                      {"text_focus", to_json(dual.text_focus)},
                      {"speech_focus", to_json(dual.speech_focus)}}
                     .dump(2)
              << '\n';
    return 0;
  }
  fmt::print("{:>5}  {:<6}  {:>6}  {:<6}  {:>4}  {:>4}  {:>6}\n", "pos", "kind", "id", "seg", "loss", "text",
             "speech");
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    const auto& t = example.tokens[i];
    fmt::print("{:>5}  {:<6}  {:>6}  {:<6}  {:>4}  {:>4}  {:>6}\n", i, to_string(t.token.kind), t.token.id,
               to_string(t.segment), int{example.loss_mask[i]}, int{dual.text_focus.loss_mask[i]},
               int{dual.speech_focus.loss_mask[i]});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxstream pipeline tools"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run the event simulator and write a trace");
  simulate->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
  simulate->add_option("--seed", sim.seed, "RNG seed")->required();
  simulate->add_option("--out", sim.out, "Trace output path")->required();
  simulate->add_option("--format", sim.format, "Trace format")->check(CLI::IsMember({"json", "csv"}));

  std::string latency_path;
  bool latency_json = false;
  auto* latency = app.add_subcommand("latency", "Analytic first-audio latency breakdown");
  latency->add_option("--scenario", latency_path, "Scenario JSON")->required();
  latency->add_flag("--json", latency_json, "Print JSON instead of a table");

  MixtureArgs mix;
  auto* mixture = app.add_subcommand("mixture", "Plan and validate a pretraining mixture");
  mixture->add_option("--corpora", mix.corpora, "Corpora JSON or CSV")->required();
  mixture->add_option("--budget", mix.budget, "Token budget, e.g. 1T or 1e12")->required();
  mixture->add_option("--tolerance", mix.tolerance, "Allowed relative deviation")->check(CLI::Range(0.0, 1.0));
  mixture->add_flag("--json", mix.as_json, "Print plan and validation as JSON");

  TemplateArgs tmpl;
  auto* templ = app.add_subcommand("template", "Dump the interleaved text/speech stream");
  templ->add_option("--text", tmpl.text, "Number of text tokens")->required();
  templ->add_option("--speech", tmpl.speech, "Number of speech tokens")->required();
  templ->add_option("--dump", tmpl.dump, "Number of positions to print")->required();
  templ->add_option("--text-chunk", tmpl.text_chunk, "Text tokens per block");
  templ->add_option("--speech-chunk", tmpl.speech_chunk, "Speech tokens per block");

  FitConfig fit;
  std::string fit_init = "kmeans++";
  std::string fit_out;
  auto* cbfit = app.add_subcommand("codebook-fit", "Fit an EMA codebook on synthetic clusters");
  cbfit->add_option("--clusters", fit.clusters, "Number of true clusters")->required();
  cbfit->add_option("--codes", fit.codes, "Codebook size")->required();
  cbfit->add_option("--steps", fit.steps, "Training batches")->required();
  cbfit->add_option("--seed", fit.seed, "RNG seed")->required();
  cbfit->add_option("--dim", fit.dim, "Vector dimension");
  cbfit->add_option("--batch", fit.batch, "Batch size");
  cbfit->add_option("--sigma", fit.sigma, "Cluster standard deviation");
  cbfit->add_option("--reset-threshold", fit.reset_threshold, "Usage below which a code is reset");
  cbfit->add_option("--decay", fit.decay, "EMA decay");
  cbfit->add_option("--init", fit_init, "Codebook initialisation")->check(CLI::IsMember({"kmeans++", "gaussian"}));
  cbfit->add_option("--out", fit_out, "Write the fitted codebook as JSON");

  std::string turn_path;
  std::size_t mask_text_chunk = 13;
  std::size_t mask_speech_chunk = 26;
  bool mask_json = false;
  auto* mask = app.add_subcommand("mask-demo", "Show streaming SFT loss masks for one turn");
  mask->add_option("--turn", turn_path, "Turn JSON")->required();
  mask->add_option("--text-chunk", mask_text_chunk, "Text tokens per block");
  mask->add_option("--speech-chunk", mask_speech_chunk, "Speech tokens per block");
  mask->add_flag("--json", mask_json, "Print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error({{"error", "usage"}, {"message", e.what()}, {"details", {{"cli_error", e.get_name()}}}});
    return kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*latency) return run_latency(latency_path, latency_json);
    if (*mixture) return run_mixture(mix);
    if (*templ) return run_template(tmpl);
    if (*cbfit) {
      fit.init = parse_codebook_init(fit_init);
      return run_codebook_fit(fit, fit_out);
    }
    if (*mask) return run_mask_demo(turn_path, mask_text_chunk, mask_speech_chunk, mask_json);
  } catch (const Error& e) {
    emit_error(e.to_json());
    return kExitError;
  } catch (const std::exception& e) {
    emit_error({{"error", "internal"}, {"message", e.what()}, {"details", json::object()}});
    return kExitError;
  }
  return kExitUsage;
}
