#include "voxstream/vq_codebook.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ema_oracle.hpp"
#include "voxstream/error.hpp"
#include "voxstream/vq_fit.hpp"

namespace voxstream {
namespace {

using testing::EmaState;
using testing::brute_nearest;
using testing::ema_reference_step;

CodebookConfig config(std::size_t dim, std::size_t size, double threshold = 0.01) {
  return CodebookConfig{.dim = dim, .size = size, .decay = 0.99, .commitment_coeff = 10.0, .reset_threshold = threshold};
}

Codebook unit_square() {
  return Codebook(config(2, 4), Matrix(4, 2, {0, 0, 1, 0, 0, 1, 1, 1}));
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

TEST(Quantize, ExactMatchHasZeroLoss) {
  const auto cb = unit_square();
  const auto q = quantize(cb, Matrix(1, 2, {1, 1}));
  EXPECT_EQ(q.indices, std::vector<CodeId>{3});
  EXPECT_EQ(q.commitment_loss, 0.0);
}

TEST(Quantize, NearestByBruteForce) {
  const auto cb = unit_square();
  const std::vector<double> x = {0.9, 0.1};
  // squared distances: 0.82, 0.02, 1.62, 0.82
  ASSERT_EQ(brute_nearest(rows_of(cb.vectors()), x), 1u);
  const auto q = quantize(cb, Matrix(1, 2, x));
  EXPECT_EQ(q.indices[0], 1u);
  EXPECT_NEAR(q.commitment_loss, 10.0 * 0.02, 1e-12);
}

TEST(Quantize, TiesGoToLowestIndex) {
  const auto cb = unit_square();
  // (0, 0.5) is equidistant to codes 0 and 2.
  EXPECT_EQ(quantize(cb, Matrix(1, 2, {0, 0.5})).indices[0], 0u);
  // centre of the square: all four tie.
  EXPECT_EQ(quantize(cb, Matrix(1, 2, {0.5, 0.5})).indices[0], 0u);
}

TEST(Quantize, CommitmentLossIsScaledMeanSquaredDistance) {
  std::mt19937_64 rng(7);
  const Codebook cb(config(5, 16), random_matrix(16, 5, rng));
  const Matrix x = random_matrix(64, 5, rng);
  const auto q = quantize(cb, x);
  const auto codes = rows_of(cb.vectors());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<double> xi(x.row(i).begin(), x.row(i).end());
    const auto k = brute_nearest(codes, xi);
    ASSERT_EQ(q.indices[i], k);
    for (std::size_t d = 0; d < 5; ++d) {
      ASSERT_EQ(q.quantized(i, d), cb.vectors()(k, d));
      acc += (xi[d] - codes[k][d]) * (xi[d] - codes[k][d]);
    }
  }
  EXPECT_NEAR(q.commitment_loss, 10.0 * acc / 64.0, 1e-12);
}

TEST(Quantize, Errors) {
  const auto cb = unit_square();
  try {
    quantize(cb, Matrix(2, 3));
    FAIL() << "expected dimension mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
    EXPECT_EQ(e.details().at("expected_dim"), 2);
    EXPECT_EQ(e.details().at("actual_dim"), 3);
  }
  try {
    quantize(cb, Matrix(0, 2));
    FAIL() << "expected empty input";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(Quantize, IdempotentOnQuantizedOutputs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Codebook cb(config(4, 32), random_matrix(32, 4, rng));
    const auto first = quantize(cb, random_matrix(50, 4, rng));
    const auto second = quantize(cb, first.quantized);
    EXPECT_EQ(second.commitment_loss, 0.0);
    // with distinct codes the re-quantized index is the same one
    EXPECT_EQ(second.indices, first.indices);
  }
}

EmaState zeroed_state(std::size_t K, std::size_t D) {
  return EmaState{std::vector<std::vector<double>>(K, std::vector<double>(D, 0.0)), std::vector<double>(K, 0.0),
                  std::vector<std::vector<double>>(K, std::vector<double>(D, 0.0)), std::vector<double>(K, 0.0)};
}

Codebook from_state(const CodebookConfig& cfg, const EmaState& s) {
  auto flat = [](const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
  };
  return Codebook::from_state(cfg, Matrix(cfg.size, cfg.dim, flat(s.vectors)), s.cluster_size,
                              Matrix(cfg.size, cfg.dim, flat(s.embed_sum)), s.usage);
}

TEST(EmaUpdate, ConstantBatchConvergesGeometrically) {
  const auto cfg = config(3, 1);
  const std::vector<double> x = {0.25, -1.5, 4.0};
  const Matrix batch(8, 3, [&] {
    std::vector<double> v;
    for (int i = 0; i < 8; ++i) v.insert(v.end(), x.begin(), x.end());
    return v;
  }());
  const std::vector<CodeId> idx(8, 0);

  // Zeroed statistics: the bias cancels in the ratio, so the code snaps to x.
  auto zeroed = from_state(cfg, zeroed_state(1, 3));
  // Seeded statistics (n=1, m=v0) decay toward x with factor <= 0.99^u.
  Codebook seeded(cfg, Matrix(1, 3, {2.0, 2.0, 2.0}));
  const double initial_gap = std::sqrt(squared_distance(seeded.vectors().row(0), x));
  for (int u = 1; u <= 300; ++u) {
    ema_update(zeroed, batch, idx);
    ema_update(seeded, batch, idx);
    const double bound = std::pow(0.99, u);
    EXPECT_LE(std::sqrt(squared_distance(zeroed.vectors().row(0), x)), 1e-12);
    EXPECT_LE(std::sqrt(squared_distance(seeded.vectors().row(0), x)), bound * initial_gap + 1e-12);
  }
}

TEST(EmaUpdate, UnassignedCodeKeepsVectorAndUsageDecays) {
  const auto cfg = config(2, 2);
  auto cb = Codebook::from_state(cfg, Matrix(2, 2, {0, 0, 5, 5}), {3.0, 2.0}, Matrix(2, 2, {0, 0, 10, 10}),
                                 {0.5, 0.4});
  ema_update(cb, Matrix(2, 2, {0.1, 0.0, 0.0, 0.1}), std::vector<CodeId>{0, 0});
  EXPECT_NEAR(cb.vectors()(1, 0), 5.0, 1e-12);
  EXPECT_NEAR(cb.vectors()(1, 1), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(cb.usage()[1], 0.99 * 0.4);
  EXPECT_DOUBLE_EQ(cb.ema_cluster_size()[1], 0.99 * 2.0);
}

TEST(EmaUpdate, TwoClusterBatchMatchesRecurrence) {
  std::mt19937_64 rng(3);
  const auto cfg = config(2, 2);
  EmaState ref{{{-1, 0}, {1, 0}}, {1, 1}, {{-1, 0}, {1, 0}}, {0.01, 0.01}};
  auto cb = from_state(cfg, ref);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int step = 0; step < 50; ++step) {
    std::vector<std::vector<double>> batch;
    std::vector<CodeId> assign;
    for (int i = 0; i < 32; ++i) {
      const double cx = i % 2 ? 2.0 : -2.0;
      batch.push_back({cx + noise(rng), noise(rng)});
      assign.push_back(i % 2);
    }
    std::vector<double> flat;
    for (const auto& r : batch) flat.insert(flat.end(), r.begin(), r.end());
    ema_update(cb, Matrix(32, 2, flat), assign);
    ema_reference_step(ref, batch, assign, 0.99);
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t d = 0; d < 2; ++d) {
        EXPECT_NEAR(cb.ema_embed_sum()(k, d), ref.embed_sum[k][d], 1e-12);
        EXPECT_NEAR(cb.vectors()(k, d), ref.vectors[k][d], 1e-12);
      }
      EXPECT_NEAR(cb.ema_cluster_size()[k], ref.cluster_size[k], 1e-12);
      EXPECT_NEAR(cb.usage()[k], ref.usage[k], 1e-12);
    }
  }
  // code 1 has moved onto the right-hand cluster
  EXPECT_NEAR(cb.vectors()(1, 0), 2.0, 0.1);
}

TEST(EmaUpdate, FixedPointWhenBatchEqualsCodes) {
  std::mt19937_64 rng(5);
  auto cb = Codebook(config(3, 6), random_matrix(6, 3, rng));
  const Matrix before = cb.vectors();
  std::vector<CodeId> idx(6);
  for (std::size_t k = 0; k < 6; ++k) idx[k] = k;
  for (int i = 0; i < 10; ++i) ema_update(cb, before, idx);
  for (std::size_t i = 0; i < before.data().size(); ++i) {
    EXPECT_NEAR(cb.vectors().data()[i], before.data()[i], 1e-12 * (1.0 + std::abs(before.data()[i])));
  }
}

TEST(EmaUpdate, Errors) {
  auto cb = unit_square();
  const Matrix batch(2, 2, {0, 0, 1, 1});
  EXPECT_THROW(ema_update(cb, batch, std::vector<CodeId>{0}), Error);
  try {
    ema_update(cb, batch, std::vector<CodeId>{0, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
    EXPECT_EQ(e.details().at("position"), 1);
  }
}

TEST(ResetDeadCodes, NoOpWhenAllCodesAlive) {
  auto cb = Codebook::from_state(config(2, 2, 0.1), Matrix(2, 2, {0, 0, 1, 1}), {1, 1}, Matrix(2, 2, {0, 0, 1, 1}),
                                 {0.5, 0.1});
  const auto before = cb;
  EXPECT_TRUE(reset_dead_codes(cb, Matrix(1, 2, {9, 9}), 42).empty());
  EXPECT_EQ(cb, before);
}

TEST(ResetDeadCodes, DeterministicAndAscending) {
  std::mt19937_64 rng(1);
  auto make = [&] {
    return Codebook::from_state(config(3, 5, 0.2), Matrix(5, 3), std::vector<double>(5, 1.0), Matrix(5, 3),
                                {0.0, 0.5, 0.1, 0.19, 0.3});
  };
  const Matrix candidates = random_matrix(10, 3, rng);
  auto a = make();
  auto b = make();
  const auto ids_a = reset_dead_codes(a, candidates, 99);
  const auto ids_b = reset_dead_codes(b, candidates, 99);
  EXPECT_EQ(ids_a, (std::vector<CodeId>{0, 2, 3}));
  EXPECT_EQ(ids_a, ids_b);
  EXPECT_EQ(a, b);
  for (CodeId k : ids_a) {
    EXPECT_EQ(a.ema_cluster_size()[k], 1.0);
    EXPECT_EQ(a.usage()[k], 0.2);
    bool from_candidates = false;
    for (std::size_t r = 0; r < candidates.rows(); ++r) {
      from_candidates |= squared_distance(candidates.row(r), a.vectors().row(k)) == 0.0;
    }
    EXPECT_TRUE(from_candidates);
    EXPECT_EQ(squared_distance(a.vectors().row(k), a.ema_embed_sum().row(k)), 0.0);
  }
  for (double u : a.usage()) EXPECT_GE(u, 0.2);
}

TEST(ResetDeadCodes, NeedsCandidatesOnlyWhenSomethingIsDead) {
  auto dead = Codebook::from_state(config(2, 1, 0.5), Matrix(1, 2), {1.0}, Matrix(1, 2), {0.0});
  EXPECT_THROW(reset_dead_codes(dead, Matrix(0, 2), 1), Error);
  auto alive = Codebook::from_state(config(2, 1, 0.5), Matrix(1, 2), {1.0}, Matrix(1, 2), {0.9});
  EXPECT_NO_THROW(reset_dead_codes(alive, Matrix(0, 2), 1));
}

TEST(ResetDeadCodes, SurplusCodesOnThreeClustersAreReset) {
  FitConfig fc;
  fc.clusters = 3;
  fc.codes = 8;
  fc.steps = 100;
  fc.reset_threshold = 0.01;
  fc.init = CodebookInit::kGaussian;
  fc.seed = 2024;
  const auto report = fit_codebook(fc);
  EXPECT_GE(report.codes_ever_reset(), 8u - 3u - 1u);
  for (double u : report.codebook.usage()) EXPECT_LE(u, 1.0);
}

TEST(Bitrate, ReferenceTokenizerRows) {
  EXPECT_EQ(bitrate(1u << 14, 12.5), 175.0);
  EXPECT_EQ(bitrate(1u << 12, 50.0), 600.0);
  EXPECT_EQ(bitrate(1u << 12, 25.0), 300.0);
  EXPECT_EQ(bitrate(1u << 16, 6.25), 100.0);
  EXPECT_EQ(bitrate(2, 1.0), 1.0);
}

TEST(Bitrate, RejectsDegenerateCodebooks) {
  EXPECT_THROW(bitrate(1, 12.5), Error);
  EXPECT_THROW(bitrate(0, 12.5), Error);
  EXPECT_THROW(bitrate(16, 0.0), Error);
}

TEST(Bitrate, MonotoneInBothArguments) {
  for (std::uint64_t k = 2; k < 4096; k = k * 3 / 2 + 1) {
    EXPECT_LT(bitrate(k, 12.5), bitrate(k + 1, 12.5));
    EXPECT_LT(bitrate(k, 12.5), bitrate(k, 12.6));
  }
}

TEST(CodebookConfig, Validation) {
  EXPECT_THROW(Codebook(config(2, 0), Matrix(0, 2)), Error);
  auto bad = config(2, 1);
  bad.decay = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad.decay = 0.5;
  bad.commitment_coeff = -1;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(Codebook(config(2, 2), Matrix(3, 2)), Error);
}

TEST(CodebookSerialization, ExactRoundTrip) {
  std::mt19937_64 rng(17);
  Codebook cb(config(7, 9, 0.015), random_matrix(9, 7, rng));
  const Matrix batch = random_matrix(40, 7, rng);
  for (int i = 0; i < 5; ++i) ema_update(cb, batch, quantize(cb, batch).indices);

  const auto path = std::filesystem::temp_directory_path() / "voxstream_codebook_roundtrip.json";
  save_codebook(cb, path);
  const auto back = load_codebook(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back, cb);
}

TEST(CodebookSerialization, RejectsForeignDocuments) {
  EXPECT_THROW(codebook_from_json(nlohmann::json{{"dim", 2}}), Error);
  auto j = to_json(unit_square());
  j["vectors"] = std::vector<double>{1.0};
  EXPECT_THROW(codebook_from_json(j), Error);
}

}  // namespace
}  // namespace voxstream
