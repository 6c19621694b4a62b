#include "voxstream/framing.hpp"

#include <cmath>

#include <fmt/format.h>

#include "voxstream/error.hpp"

namespace voxstream {

void FrameConfig::validate() const {
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("frame_rate {} must be positive", frame_rate),
                {{"frame_rate", frame_rate}});
  }
  if (!(tokenizer_block_s > 0.0) || !std::isfinite(tokenizer_block_s)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("tokenizer_block_s {} must be positive", tokenizer_block_s),
                {{"tokenizer_block_s", tokenizer_block_s}});
  }
}

std::size_t frames_in(double duration_s, double frame_rate) {
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("duration {} s must be >= 0", duration_s),
                {{"duration_s", duration_s}});
  }
  const double frames = duration_s * frame_rate;
  return static_cast<std::size_t>(std::floor(frames + 1e-9));
}

std::size_t token_count(double duration_s, const FrameConfig& cfg) {
  cfg.validate();
  return frames_in(duration_s, cfg.frame_rate);
}

AttentionMask::AttentionMask(std::size_t seq_len, std::vector<std::uint8_t> allowed)
    : n_(seq_len), cells_(std::move(allowed)) {
  if (cells_.size() != n_ * n_) {
    throw Error(ErrorCode::kDimensionMismatch, "mask cells do not form a square matrix",
                {{"seq_len", n_}, {"cells", cells_.size()}});
  }
}

AttentionMask block_causal_mask(std::size_t seq_len, std::size_t block) {
  if (block == 0) {
    throw Error(ErrorCode::kInvalidArgument, "attention block size must be >= 1", {{"block", block}});
  }
  std::vector<std::uint8_t> cells(seq_len * seq_len, 0);
  for (std::size_t i = 0; i < seq_len; ++i) {
    // keys up to the end of the query's block are visible
    const std::size_t visible = std::min(seq_len, (i / block + 1) * block);
    std::fill_n(cells.begin() + static_cast<std::ptrdiff_t>(i * seq_len), visible, std::uint8_t{1});
  }
  return AttentionMask(seq_len, std::move(cells));
}

std::vector<double> causal_conv1d(std::span<const double> signal, std::span<const double> kernel) {
  if (kernel.empty()) throw Error(ErrorCode::kEmptyInput, "convolution kernel is empty");
  std::vector<double> out(signal.size(), 0.0);
  for (std::size_t t = 0; t < signal.size(); ++t) {
    const std::size_t taps = std::min(kernel.size(), t + 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < taps; ++j) acc += kernel[j] * signal[t - j];
    out[t] = acc;
  }
  return out;
}

}  // namespace voxstream
