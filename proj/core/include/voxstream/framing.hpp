#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace voxstream {

struct FrameConfig {
  double frame_rate = 12.5;        // speech tokens per second
  double tokenizer_block_s = 0.8;  // streaming tokenizer block length

  void validate() const;
  bool operator==(const FrameConfig&) const = default;
};

// floor(duration_s * frame_rate): a partial frame never yields a token.
// Products within 1e-9 of the next integer are snapped up so that decimal
// durations such as 2.4 s land on the intended frame.
std::size_t token_count(double duration_s, const FrameConfig& cfg);

// Shared by token_count and the latency model.
std::size_t frames_in(double duration_s, double frame_rate);

// O(1) form of the block-causal predicate.
constexpr bool block_causal_allowed(std::size_t query, std::size_t key, std::size_t block) {
  return key / block <= query / block;
}

// Dense seq_len x seq_len boolean attention mask.
class AttentionMask {
 public:
  AttentionMask(std::size_t seq_len, std::vector<std::uint8_t> allowed);

  std::size_t size() const noexcept { return n_; }
  bool allowed(std::size_t query, std::size_t key) const { return cells_[query * n_ + key] != 0; }
  std::span<const std::uint8_t> row(std::size_t query) const { return {cells_.data() + query * n_, n_}; }

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> cells_;
};

// (i, j) allowed iff floor(j / block) <= floor(i / block). block must be >= 1.
AttentionMask block_causal_mask(std::size_t seq_len, std::size_t block);

// out[t] = sum_j kernel[j] * signal[t - j], zero left padding.
std::vector<double> causal_conv1d(std::span<const double> signal, std::span<const double> kernel);

}  // namespace voxstream
