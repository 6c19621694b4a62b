#include "voxstream/pretrain_mixture.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "voxstream/error.hpp"

namespace voxstream {
namespace {

constexpr TokenCount kB = 1'000'000'000ULL;
constexpr TokenCount kT = 1'000 * kB;

// Multiply-and-sum over the reference rows, independent of the planner.
long double reference_total() {
  const long double rows[][2] = {{455.0L + 279.0L, 0.90L}, {31.0L, 2.10L}, {11.0L + 3.5L, 2.07L}};
  long double total = 0.30L * 1000.0L;
  for (const auto& r : rows) total += r[0] * r[1];
  return total * 1e9L;
}

TEST(PlanMixture, TextRatioOfOneTrillion) {
  const std::vector<CorpusSpec> corpora = {
      {.name = "text", .text_tokens = 10 * kT, .policy = FixedRatio{0.30}},
      {.name = "rest", .speech_tokens = 500 * kB, .policy = Remainder{}},
  };
  const auto plan = plan_mixture(kT, corpora);
  EXPECT_EQ(plan.allocations[0].allocated, 300 * kB);
  EXPECT_DOUBLE_EQ(plan.allocations[0].epochs, 0.03);
  EXPECT_EQ(plan.allocations[1].allocated, 700 * kB);
  EXPECT_EQ(plan.total_tokens, kT);
}

TEST(PlanMixture, SingleRemainderTakesEverything) {
  const std::vector<CorpusSpec> corpora = {{.name = "only", .speech_tokens = 10, .policy = Remainder{}}};
  const auto plan = plan_mixture(12345, corpora);
  EXPECT_EQ(plan.allocations[0].allocated, 12345u);
  EXPECT_DOUBLE_EQ(plan.allocations[0].epochs, 1234.5);
}

TEST(PlanMixture, RemainderRules) {
  const std::vector<CorpusSpec> none = {{.name = "a", .speech_tokens = 10, .policy = FixedEpochs{1.0}}};
  EXPECT_THROW(plan_mixture(100, none), Error);
  const std::vector<CorpusSpec> two = {{.name = "a", .policy = Remainder{}}, {.name = "b", .policy = Remainder{}}};
  EXPECT_THROW(plan_mixture(100, two), Error);
}

TEST(PlanMixture, OverSubscriptionListsAllocations) {
  const std::vector<CorpusSpec> corpora = {
      {.name = "text", .text_tokens = 100, .policy = FixedRatio{0.8}},
      {.name = "speech", .speech_tokens = 50, .policy = FixedEpochs{1.0}},
      {.name = "rest", .speech_tokens = 1, .policy = Remainder{}},
  };
  try {
    plan_mixture(100, corpora);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOverSubscribed);
    EXPECT_EQ(e.details().at("fixed_total"), 130);
    EXPECT_EQ(e.details().at("allocations").size(), 3u);
  }
}

TEST(PlanMixture, InvalidPolicies) {
  const std::vector<CorpusSpec> bad_ratio = {{.name = "a", .policy = FixedRatio{1.5}}, {.name = "r", .policy = Remainder{}}};
  EXPECT_THROW(plan_mixture(100, bad_ratio), Error);
  const std::vector<CorpusSpec> bad_epochs = {{.name = "a", .policy = FixedEpochs{-1}}, {.name = "r", .policy = Remainder{}}};
  EXPECT_THROW(plan_mixture(100, bad_epochs), Error);
}

TEST(PlanMixture, ConservationRatioAndEpochInverse) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const TokenCount budget = 1 + rng() % (2 * kT);
    const double ratio = 0.4 * u(rng);
    std::vector<CorpusSpec> corpora = {
        {.name = "text", .text_tokens = 1 + rng() % (20 * kT), .policy = FixedRatio{ratio}},
        {.name = "unsup", .speech_tokens = 1 + rng() % (50 * kB), .policy = FixedEpochs{2.0 * u(rng)}},
        {.name = "interleaved", .speech_tokens = 1 + rng() % kT, .text_tokens = rng() % kT, .policy = Remainder{}},
    };
    MixturePlan plan;
    try {
      plan = plan_mixture(budget, corpora);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kOverSubscribed);
      continue;
    }
    TokenCount sum = 0;
    for (const auto& a : plan.allocations) {
      sum += a.allocated;
      EXPECT_NEAR(a.epochs * static_cast<double>(a.corpus_tokens), static_cast<double>(a.allocated),
                  1e-9 * static_cast<double>(a.allocated) + 1e-9);
    }
    EXPECT_EQ(sum, budget);
    EXPECT_EQ(plan.total_tokens, budget);
    // whole-token rounding is the only slack in the ratio
    EXPECT_LE(std::abs(static_cast<double>(plan.allocations[0].allocated) - ratio * static_cast<double>(budget)), 0.5);
  }
}

TEST(TabulateMixture, ReferenceMixtureTotal) {
  const auto plan = tabulate_mixture(kT, reference_corpora());
  ASSERT_EQ(plan.allocations.size(), 4u);
  EXPECT_EQ(plan.allocations[0].allocated, 660'600'000'000ULL);
  EXPECT_EQ(plan.allocations[1].allocated, 65'100'000'000ULL);
  EXPECT_EQ(plan.allocations[2].allocated, 30'015'000'000ULL);
  EXPECT_EQ(plan.allocations[3].allocated, 300 * kB);
  EXPECT_NEAR(static_cast<long double>(plan.total_tokens), reference_total(), 1.0L);
  EXPECT_NEAR(static_cast<double>(plan.total_tokens) / 1e12, 1.056, 5e-4);
  EXPECT_NEAR(plan.allocations[3].epochs, 0.03, 1e-15);
}

TEST(TabulateMixture, RejectsRemainderCorpus) {
  const std::vector<CorpusSpec> corpora = {{.name = "r", .policy = Remainder{}}};
  EXPECT_THROW(tabulate_mixture(10, corpora), Error);
}

TEST(ValidatePlan, ToleranceBands) {
  const auto plan = tabulate_mixture(kT, reference_corpora());
  const auto loose = validate_plan(plan, kT, 0.06);
  EXPECT_TRUE(loose.passed);
  EXPECT_NEAR(loose.relative_deviation, 0.055715, 1e-9);
  const auto tight = validate_plan(plan, kT, 0.01);
  EXPECT_FALSE(tight.passed);
  EXPECT_FALSE(tight.notes.empty());
  const auto self = validate_plan(plan, plan.total_tokens, 0.0);
  EXPECT_TRUE(self.passed);
  EXPECT_EQ(self.relative_deviation, 0.0);
  double shares = 0.0;
  for (const auto& s : loose.shares) shares += s.share;
  EXPECT_NEAR(shares, 1.0, 1e-12);
}

TEST(ValidatePlan, FlagsRepeatedData) {
  const auto report = validate_plan(tabulate_mixture(kT, reference_corpora()), kT);
  std::size_t repeated = 0;
  for (const auto& n : report.notes) repeated += n.find("repeated") != std::string::npos;
  EXPECT_EQ(repeated, 2u);  // the two corpora above one epoch
}

TEST(TokenCounts, ParseAndFormat) {
  EXPECT_EQ(parse_token_count("455B"), 455 * kB);
  EXPECT_EQ(parse_token_count("14.5B"), 14'500'000'000ULL);
  EXPECT_EQ(parse_token_count("1T"), kT);
  EXPECT_EQ(parse_token_count(" 42 "), 42u);
  EXPECT_EQ(parse_token_count("3.5b"), 3'500'000'000ULL);
  EXPECT_THROW(parse_token_count("lots"), Error);
  EXPECT_THROW(parse_token_count("-3B"), Error);
  EXPECT_EQ(format_token_count(1'055'715'000'000ULL), "1.056T");
  EXPECT_EQ(format_token_count(300 * kB), "300.00B");
}

TEST(CorpusFiles, JsonAndCsvAgree) {
  const auto json = nlohmann::json::parse(R"([
    {"name":"speech-text","speech_tokens":"455B","text_tokens":"279B","policy":{"epochs":0.9}},
    {"name":"text-only","text_tokens":"10T","policy":{"ratio":0.3}},
    {"name":"rest","speech_tokens":1000,"policy":"remainder"}
  ])");
  const auto from_json = corpora_from_json(json);
  const auto from_csv = corpora_from_csv(
      "name,speech_tokens,text_tokens,policy,value\n"
      "speech-text,455B,279B,epochs,0.9\n"
      "text-only,-,10T,ratio,0.3\n"
      "rest,1000,,remainder\n");
  EXPECT_EQ(from_json, from_csv);
  EXPECT_EQ(corpora_from_csv("rest,1000,-,remainder,-\n"), corpora_from_csv("rest,1000,,remainder\n"));
  EXPECT_THROW(corpora_from_csv("x,1,2,ratio,abc\n"), Error);
  EXPECT_THROW(corpora_from_csv("name,speech_tokens,text_tokens,policy\nx,1,2,bogus\n"), Error);
  EXPECT_THROW(corpora_from_json(nlohmann::json::parse(R"([{"name":"x","policy":{}}])")), Error);
}

}  // namespace
}  // namespace voxstream
