#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "seedmix/errors.hpp"
#include "seedmix/random.hpp"

namespace seedmix {

struct SplitRatios {
  double train = 0.70;
  double valid = 0.15;
  double test = 0.15;
};

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
};

// Partition sizes: valid and test get floor(n * ratio); the remainder goes to
// train.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (!(ratios.train > 0 && ratios.valid > 0 && ratios.test > 0) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("split ratios must be positive and sum to 1");
  }
  // The small bias absorbs representation error such as 100 * 0.15.
  const auto part = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t valid = part(ratios.valid);
  const std::size_t test = part(ratios.test);
  return {n - valid - test, valid, test};
}

// Seeded shuffle followed by contiguous cuts (train, valid, test).
template <typename T>
Split<T> split_dataset(const std::vector<T>& records, const SplitRatios& ratios,
                       std::uint64_t seed) {
  const auto sizes = split_sizes(records.size(), ratios);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  Split<T> out;
  out.train.reserve(sizes[0]);
  out.valid.reserve(sizes[1]);
  out.test.reserve(sizes[2]);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const T& item = records[order[i]];
    if (i < sizes[0]) {
      out.train.push_back(item);
    } else if (i < sizes[0] + sizes[1]) {
      out.valid.push_back(item);
    } else {
      out.test.push_back(item);
    }
  }
  return out;
}

}  // namespace seedmix
