#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <vector>

namespace weakmeas {

using Rng = std::mt19937_64;

/// Hierarchical seed: a master seed plus a path of indices (experiment, grid
/// point, block, ...). Every leaf yields an independent engine whose state is
/// a pure function of the path.
class SeedPath {
 public:
  explicit SeedPath(std::uint64_t seed) : path_{seed} {}

  SeedPath child(std::uint64_t index) const {
    SeedPath p = *this;
    p.path_.push_back(index);
    return p;
  }

  SeedPath child(std::initializer_list<std::uint64_t> indices) const {
    SeedPath p = *this;
    p.path_.insert(p.path_.end(), indices);
    return p;
  }

  Rng engine() const;

  const std::vector<std::uint64_t>& path() const { return path_; }

 private:
  std::vector<std::uint64_t> path_;
};

/// Default worker count: $WEAKMEAS_THREADS if set, else 1.
unsigned default_thread_count();

/// Trials are cut into fixed-size blocks, each with its own stream
/// seeds.child(block). Blocks are distributed over `threads` workers but the
/// block partition itself does not depend on the worker count.
inline constexpr std::size_t kTrialBlock = 4096;

void for_each_block(std::size_t trials, unsigned threads,
                    const std::function<void(std::size_t block, std::size_t begin, std::size_t end)>& body);

inline std::size_t block_count(std::size_t trials) { return (trials + kTrialBlock - 1) / kTrialBlock; }

/// Running mean/variance accumulator; merge in block order for bit-exact
/// totals independent of scheduling.
struct Tally {
  std::size_t n = 0;
  double sum = 0;
  double sum_sq = 0;

  void add(double v) {
    ++n;
    sum += v;
    sum_sq += v * v;
  }
  void merge(const Tally& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  /// Standard error of the mean.
  double std_error() const;
};

/// Binomial standard error sqrt(p(1-p)/n).
double binomial_se(double p, std::size_t n);

}  // namespace weakmeas
