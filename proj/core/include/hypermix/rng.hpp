// Copyright 2026 The HyperMix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hypermix {

/// Philox4x32-10 counter-based block function (Salmon et al., Random123).
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Reproducible random stream built on Philox4x32-10.
///
/// A stream is identified by (seed, stream id). Draw number i of the stream is
/// taken from the Philox block with key = seed and counter =
/// (i_lo, i_hi, stream_lo, stream_hi); each block yields two 64-bit words.
/// split(child) derives an independent stream whose id is the first 64-bit
/// word of the Philox block keyed by (seed XOR golden constants) at counter
/// (child_lo, child_hi, stream_lo, stream_hi). Non-uniform variates use only
/// documented transforms of 64-bit draws (see the member comments), so the
/// same stream reproduces the same values on any IEEE-754 platform up to
/// libm rounding in log/exp/sqrt/cos.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  RandomStream split(std::uint64_t child) const;

  std::uint64_t next_u64();

  /// Top 53 bits scaled to [0, 1).
  double uniform();

  /// Uniform integer in [0, n) by rejection on the 64-bit draw (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; both outputs of a pair are used in order.
  double normal();

  /// Marsaglia-Tsang gamma; shape < 1 boosted via Gamma(a+1) * U^(1/a).
  double gamma(double shape);

  /// X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
  double beta(double a, double b);

  /// Partial Fisher-Yates: the first k entries become a uniform sample
  /// without replacement, in draw order.
  template <typename T>
  void partial_shuffle(std::span<T> items, std::size_t k) {
    for (std::size_t i = 0; i < k && i + 1 < items.size(); ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(items.size() - i));
      std::swap(items[i], items[j]);
    }
  }

  /// k distinct indices from [0, n), uniformly, in draw order.
  std::vector<std::size_t> choose(std::size_t n, std::size_t k);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hypermix
