#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxstream/matrix.hpp"

namespace voxstream {

using CodeId = std::size_t;

struct CodebookConfig {
  std::size_t dim = 0;
  std::size_t size = 0;
  double decay = 0.99;
  double commitment_coeff = 10.0;
  // No default: callers must pick the dead-code usage threshold.
  double reset_threshold = 0.0;

  // Throws kInvalidArgument on dim/size == 0, decay outside (0,1),
  // negative commitment coefficient or threshold.
  void validate() const;
  bool operator==(const CodebookConfig&) const = default;
};

// Divisor floor when re-estimating a code vector from its EMA statistics.
inline constexpr double kEmaEpsilon = 1e-5;

// K x dim vector table plus the EMA statistics that drive it.
//
// Plain value type: concurrent const access is fine, mutation through
// ema_update / reset_dead_codes needs exclusive access.
class Codebook {
 public:
  // Fresh codebook: each code starts as if it had just been reset, i.e.
  // ema_cluster_size = 1, ema_embed_sum = vector, usage = reset_threshold.
  Codebook(const CodebookConfig& config, Matrix vectors);

  // Full state, e.g. from a serialized file or a test fixture.
  static Codebook from_state(const CodebookConfig& config, Matrix vectors,
                             std::vector<double> ema_cluster_size, Matrix ema_embed_sum,
                             std::vector<double> usage);

  const CodebookConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.dim; }
  std::size_t size() const noexcept { return config_.size; }

  const Matrix& vectors() const noexcept { return vectors_; }
  const std::vector<double>& ema_cluster_size() const noexcept { return ema_cluster_size_; }
  const Matrix& ema_embed_sum() const noexcept { return ema_embed_sum_; }
  const std::vector<double>& usage() const noexcept { return usage_; }

  bool operator==(const Codebook&) const = default;

 private:
  Codebook() = default;
  void check_shapes() const;

  friend void ema_update(Codebook&, const Matrix&, std::span<const CodeId>);
  friend std::vector<CodeId> reset_dead_codes(Codebook&, const Matrix&, std::uint64_t);

  CodebookConfig config_;
  Matrix vectors_;
  std::vector<double> ema_cluster_size_;
  Matrix ema_embed_sum_;
  std::vector<double> usage_;
};

struct QuantizeResult {
  std::vector<CodeId> indices;
  Matrix quantized;
  // commitment_coeff * mean squared L2 distance (diagnostic only).
  double commitment_loss = 0.0;
};

// Nearest-neighbour assignment; ties go to the lowest code index.
QuantizeResult quantize(const Codebook& codebook, const Matrix& inputs);

// One EMA step over a batch and its assignments:
//   n_k <- d n_k + (1-d) count_k
//   m_k <- d m_k + (1-d) sum_{i: idx_i = k} x_i
//   e_k <- m_k / max(n_k, eps)
//   u_k <- d u_k + (1-d) count_k / N
void ema_update(Codebook& codebook, const Matrix& inputs, std::span<const CodeId> indices);

// Replaces every code whose usage is below reset_threshold with a candidate
// row drawn uniformly (seeded). Returns the replaced ids in ascending order.
std::vector<CodeId> reset_dead_codes(Codebook& codebook, const Matrix& candidates,
                                     std::uint64_t seed);

// log2(codebook_size) * frame_rate, in bits per second.
double bitrate(std::uint64_t codebook_size, double frame_rate);

nlohmann::json to_json(const Codebook& codebook);
Codebook codebook_from_json(const nlohmann::json& j);
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace voxstream
