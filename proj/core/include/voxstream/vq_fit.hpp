#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "voxstream/matrix.hpp"
#include "voxstream/vq_codebook.hpp"

namespace voxstream {

// Isotropic Gaussian mixture with equal weights. Means are random unit
// directions scaled to `mean_norm`.
class GaussianClusters {
 public:
  GaussianClusters(std::size_t clusters, std::size_t dim, double sigma, double mean_norm,
                   std::uint64_t seed);

  const Matrix& means() const noexcept { return means_; }
  double sigma() const noexcept { return sigma_; }

  // Draws `n` samples, advancing the internal generator.
  Matrix sample(std::size_t n);

 private:
  Matrix means_;
  double sigma_;
  std::mt19937_64 rng_;
};

enum class CodebookInit {
  kKMeansPlusPlus,  // greedy k-means++ seeding over a sample batch
  kGaussian,        // N(0, 1) vectors, independent of the data
};

CodebookInit parse_codebook_init(std::string_view name);
std::string_view to_string(CodebookInit init);

// Greedy k-means++: each new seed is the best (lowest potential) of
// 2 + floor(ln K) D^2-weighted candidates.
Matrix kmeanspp_seeds(const Matrix& samples, std::size_t k, std::mt19937_64& rng);

struct FitConfig {
  std::size_t clusters = 3;
  std::size_t codes = 3;
  std::size_t dim = 8;
  std::size_t steps = 200;
  std::size_t batch = 256;
  double sigma = 0.05;
  double mean_norm = 1.0;
  double reset_threshold = 0.01;
  double decay = 0.99;
  double commitment_coeff = 10.0;
  CodebookInit init = CodebookInit::kKMeansPlusPlus;
  std::uint64_t seed = 0;
};

struct FitReport {
  Codebook codebook;
  Matrix cluster_means;
  // L2 distance from each code to its nearest true cluster mean.
  std::vector<double> code_distance;
  std::vector<std::size_t> reset_count;
  std::vector<double> commitment_loss;  // per step
  std::size_t codes_ever_reset() const;
  double max_code_distance() const;
};

// Per step: reset dead codes from the fresh batch, quantize, EMA update.
FitReport fit_codebook(const FitConfig& config);

}  // namespace voxstream
