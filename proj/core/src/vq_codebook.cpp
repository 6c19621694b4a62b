#include "voxstream/vq_codebook.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

void CodebookConfig::validate() const {
  if (dim == 0 || size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "codebook dim and size must be positive",
                {{"dim", dim}, {"size", size}});
  }
  if (!(decay > 0.0 && decay < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("decay {} outside (0,1)", decay),
                {{"decay", decay}});
  }
  if (!(commitment_coeff >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "commitment_coeff must be >= 0",
                {{"commitment_coeff", commitment_coeff}});
  }
  if (!(reset_threshold >= 0.0 && reset_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "reset_threshold must lie in [0,1]",
                {{"reset_threshold", reset_threshold}});
  }
}

Codebook::Codebook(const CodebookConfig& config, Matrix vectors)
    : config_(config), vectors_(std::move(vectors)) {
  config_.validate();
  ema_cluster_size_.assign(config_.size, 1.0);
  ema_embed_sum_ = vectors_;
  usage_.assign(config_.size, config_.reset_threshold);
  check_shapes();
}

Codebook Codebook::from_state(const CodebookConfig& config, Matrix vectors,
                              std::vector<double> ema_cluster_size, Matrix ema_embed_sum,
                              std::vector<double> usage) {
  config.validate();
  Codebook cb;
  cb.config_ = config;
  cb.vectors_ = std::move(vectors);
  cb.ema_cluster_size_ = std::move(ema_cluster_size);
  cb.ema_embed_sum_ = std::move(ema_embed_sum);
  cb.usage_ = std::move(usage);
  cb.check_shapes();
  for (double u : cb.usage_) {
    if (!(u >= 0.0 && u <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "usage entries must lie in [0,1]", {{"usage", u}});
    }
  }
  for (double n : cb.ema_cluster_size_) {
    if (!(n >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "ema_cluster_size entries must be >= 0",
                  {{"ema_cluster_size", n}});
    }
  }
  return cb;
}

void Codebook::check_shapes() const {
  const auto K = config_.size;
  const auto D = config_.dim;
  auto mismatch = [&](const char* what, std::size_t rows, std::size_t cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("{} is {}x{}, expected {}x{}", what, rows, cols, K, D),
                {{"field", what}, {"expected", {K, D}}, {"actual", {rows, cols}}});
  };
  if (vectors_.rows() != K || vectors_.cols() != D) mismatch("vectors", vectors_.rows(), vectors_.cols());
  if (ema_embed_sum_.rows() != K || ema_embed_sum_.cols() != D) {
    mismatch("ema_embed_sum", ema_embed_sum_.rows(), ema_embed_sum_.cols());
  }
  if (ema_cluster_size_.size() != K) mismatch("ema_cluster_size", ema_cluster_size_.size(), 1);
  if (usage_.size() != K) mismatch("usage", usage_.size(), 1);
}

namespace {

void check_batch(const Codebook& codebook, const Matrix& inputs) {
  if (inputs.rows() == 0) {
    throw Error(ErrorCode::kEmptyInput, "input batch is empty", {{"rows", 0}});
  }
  if (inputs.cols() != codebook.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("input rows have length {}, codebook dim is {}", inputs.cols(),
                            codebook.dim()),
                {{"expected_dim", codebook.dim()}, {"actual_dim", inputs.cols()}});
  }
}

}  // namespace

QuantizeResult quantize(const Codebook& codebook, const Matrix& inputs) {
  check_batch(codebook, inputs);
  const auto& vectors = codebook.vectors();
  const std::size_t n = inputs.rows();

  QuantizeResult result;
  result.indices.resize(n);
  result.quantized = Matrix(n, codebook.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = inputs.row(i);
    CodeId best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (CodeId k = 0; k < codebook.size(); ++k) {
      const double d = squared_distance(x, vectors.row(k));
      // strict < keeps the lowest index on ties
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    result.indices[i] = best;
    std::ranges::copy(vectors.row(best), result.quantized.row(i).begin());
    total += best_d;
  }
  result.commitment_loss = codebook.config().commitment_coeff * (total / static_cast<double>(n));
  return result;
}

void ema_update(Codebook& codebook, const Matrix& inputs, std::span<const CodeId> indices) {
  check_batch(codebook, inputs);
  if (indices.size() != inputs.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("{} indices for {} inputs", indices.size(), inputs.rows()),
                {{"expected", inputs.rows()}, {"actual", indices.size()}});
  }
  const std::size_t K = codebook.size();
  const std::size_t D = codebook.dim();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= K) {
      throw Error(ErrorCode::kOutOfRange,
                  fmt::format("index {} at position {} outside [0,{})", indices[i], i, K),
                  {{"position", i}, {"index", indices[i]}, {"size", K}});
    }
  }

  std::vector<double> counts(K, 0.0);
  Matrix sums(K, D);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    counts[indices[i]] += 1.0;
    auto dst = sums.row(indices[i]);
    const auto src = inputs.row(i);
    for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
  }

  const double decay = codebook.config().decay;
  const double n = static_cast<double>(inputs.rows());
  for (std::size_t k = 0; k < K; ++k) {
    auto& cluster = codebook.ema_cluster_size_[k];
    cluster = decay * cluster + (1.0 - decay) * counts[k];
    const double denom = std::max(cluster, kEmaEpsilon);
    auto embed = codebook.ema_embed_sum_.row(k);
    auto vec = codebook.vectors_.row(k);
    const auto batch_sum = sums.row(k);
    for (std::size_t d = 0; d < D; ++d) {
      embed[d] = decay * embed[d] + (1.0 - decay) * batch_sum[d];
      vec[d] = embed[d] / denom;
    }
    codebook.usage_[k] = decay * codebook.usage_[k] + (1.0 - decay) * (counts[k] / n);
  }
}

std::vector<CodeId> reset_dead_codes(Codebook& codebook, const Matrix& candidates,
                                     std::uint64_t seed) {
  const double threshold = codebook.config().reset_threshold;
  std::vector<CodeId> dead;
  for (CodeId k = 0; k < codebook.size(); ++k) {
    if (codebook.usage_[k] < threshold) dead.push_back(k);
  }
  if (dead.empty()) return dead;
  if (candidates.rows() == 0) {
    throw Error(ErrorCode::kEmptyInput,
                fmt::format("{} dead codes but no candidate inputs to reset from", dead.size()),
                {{"dead_codes", dead}});
  }
  if (candidates.cols() != codebook.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("candidate rows have length {}, codebook dim is {}", candidates.cols(),
                            codebook.dim()),
                {{"expected_dim", codebook.dim()}, {"actual_dim", candidates.cols()}});
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.rows() - 1);
  for (CodeId k : dead) {
    const auto src = candidates.row(pick(rng));
    std::ranges::copy(src, codebook.vectors_.row(k).begin());
    std::ranges::copy(src, codebook.ema_embed_sum_.row(k).begin());
    codebook.ema_cluster_size_[k] = 1.0;
    codebook.usage_[k] = threshold;
  }
  return dead;
}

double bitrate(std::uint64_t codebook_size, double frame_rate) {
  if (codebook_size < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("codebook size {} carries no information (need >= 2)", codebook_size),
                {{"codebook_size", codebook_size}});
  }
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "frame rate must be positive",
                {{"frame_rate", frame_rate}});
  }
  return std::log2(static_cast<double>(codebook_size)) * frame_rate;
}

nlohmann::json to_json(const Codebook& codebook) {
  const auto& cfg = codebook.config();
  return {
      {"format", "voxstream.codebook"},
      {"version", 1},
      {"dim", cfg.dim},
      {"size", cfg.size},
      {"decay", cfg.decay},
      {"commitment_coeff", cfg.commitment_coeff},
      {"reset_threshold", cfg.reset_threshold},
      {"vectors", codebook.vectors().data()},
      {"ema_cluster_size", codebook.ema_cluster_size()},
      {"ema_embed_sum", codebook.ema_embed_sum().data()},
      {"usage", codebook.usage()},
  };
}

Codebook codebook_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "voxstream.codebook") {
      throw Error(ErrorCode::kParse, "not a voxstream codebook document");
    }
    CodebookConfig cfg;
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.size = j.at("size").get<std::size_t>();
    cfg.decay = j.at("decay").get<double>();
    cfg.commitment_coeff = j.at("commitment_coeff").get<double>();
    cfg.reset_threshold = j.at("reset_threshold").get<double>();
    cfg.validate();
    return Codebook::from_state(cfg, Matrix(cfg.size, cfg.dim, j.at("vectors").get<std::vector<double>>()),
                                j.at("ema_cluster_size").get<std::vector<double>>(),
                                Matrix(cfg.size, cfg.dim, j.at("ema_embed_sum").get<std::vector<double>>()),
                                j.at("usage").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("malformed codebook document: {}", e.what()));
  }
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIo, fmt::format("cannot open {} for writing", path.string()),
                {{"path", path.string()}});
  }
  out << to_json(codebook).dump() << '\n';
  if (!out) {
    throw Error(ErrorCode::kIo, fmt::format("write to {} failed", path.string()),
                {{"path", path.string()}});
  }
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()), {{"path", path.string()}});
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()),
                {{"path", path.string()}});
  }
  return codebook_from_json(j);
}

}  // namespace voxstream
