#include "voxstream/vq_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

GaussianClusters::GaussianClusters(std::size_t clusters, std::size_t dim, double sigma,
                                   double mean_norm, std::uint64_t seed)
    : means_(clusters, dim), sigma_(sigma), rng_(seed) {
  if (clusters == 0 || dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one cluster and one dimension");
  }
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t c = 0; c < clusters; ++c) {
    auto mean = means_.row(c);
    double norm2 = 0.0;
    for (auto& v : mean) {
      v = normal(rng_);
      norm2 += v * v;
    }
    const double scale = mean_norm / std::sqrt(norm2);
    for (auto& v : mean) v *= scale;
  }
}

Matrix GaussianClusters::sample(std::size_t n) {
  Matrix out(n, means_.cols());
  std::uniform_int_distribution<std::size_t> which(0, means_.rows() - 1);
  std::normal_distribution<double> noise(0.0, sigma_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto mean = means_.row(which(rng_));
    auto row = out.row(i);
    for (std::size_t d = 0; d < row.size(); ++d) row[d] = mean[d] + noise(rng_);
  }
  return out;
}

CodebookInit parse_codebook_init(std::string_view name) {
  if (name == "kmeans++") return CodebookInit::kKMeansPlusPlus;
  if (name == "gaussian") return CodebookInit::kGaussian;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown codebook init '{}'", name),
              {{"init", std::string(name)}, {"allowed", {"kmeans++", "gaussian"}}});
}

std::string_view to_string(CodebookInit init) {
  return init == CodebookInit::kKMeansPlusPlus ? "kmeans++" : "gaussian";
}

Matrix kmeanspp_seeds(const Matrix& samples, std::size_t k, std::mt19937_64& rng) {
  if (samples.rows() == 0 || k == 0) {
    throw Error(ErrorCode::kEmptyInput, "k-means++ needs samples and k >= 1");
  }
  const std::size_t n = samples.rows();
  Matrix seeds(k, samples.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::ranges::copy(samples.row(first(rng)), seeds.row(0).begin());

  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = squared_distance(samples.row(i), seeds.row(0));

  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> candidate_closest(n);
  for (std::size_t c = 1; c < k; ++c) {
    double potential = 0.0;
    for (double d : closest) potential += d;

    std::size_t best = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_closest;
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t pick = 0;
      if (potential > 0.0) {
        std::discrete_distribution<std::size_t> weighted(closest.begin(), closest.end());
        pick = weighted(rng);
      } else {
        pick = first(rng);
      }
      double trial_potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        candidate_closest[i] = std::min(closest[i], squared_distance(samples.row(i), samples.row(pick)));
        trial_potential += candidate_closest[i];
      }
      if (trial_potential < best_potential) {
        best_potential = trial_potential;
        best = pick;
        best_closest = candidate_closest;
      }
    }
    std::ranges::copy(samples.row(best), seeds.row(c).begin());
    closest = std::move(best_closest);
  }
  return seeds;
}

std::size_t FitReport::codes_ever_reset() const {
  return static_cast<std::size_t>(std::ranges::count_if(reset_count, [](std::size_t c) { return c > 0; }));
}

double FitReport::max_code_distance() const {
  return code_distance.empty() ? 0.0 : *std::ranges::max_element(code_distance);
}

FitReport fit_codebook(const FitConfig& config) {
  if (config.batch == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");

  GaussianClusters data(config.clusters, config.dim, config.sigma, config.mean_norm, config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  CodebookConfig cb_config{.dim = config.dim,
                           .size = config.codes,
                           .decay = config.decay,
                           .commitment_coeff = config.commitment_coeff,
                           .reset_threshold = config.reset_threshold};
  cb_config.validate();

  Matrix initial;
  if (config.init == CodebookInit::kKMeansPlusPlus) {
    initial = kmeanspp_seeds(data.sample(config.batch), config.codes, rng);
  } else {
    initial = Matrix(config.codes, config.dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : initial.data()) v = normal(rng);
  }

  Codebook codebook(cb_config, std::move(initial));
  std::vector<std::size_t> resets(config.codes, 0);
  std::vector<double> losses;
  losses.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const Matrix batch = data.sample(config.batch);
    for (CodeId k : reset_dead_codes(codebook, batch, rng())) ++resets[k];
    const auto q = quantize(codebook, batch);
    losses.push_back(q.commitment_loss);
    ema_update(codebook, batch, q.indices);
  }

  std::vector<double> distances(config.codes);
  for (std::size_t k = 0; k < config.codes; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < data.means().rows(); ++c) {
      best = std::min(best, squared_distance(codebook.vectors().row(k), data.means().row(c)));
    }
    distances[k] = std::sqrt(best);
  }

  return FitReport{.codebook = std::move(codebook),
                   .cluster_means = data.means(),
                   .code_distance = std::move(distances),
                   .reset_count = std::move(resets),
                   .commitment_loss = std::move(losses)};
}

}  // namespace voxstream
