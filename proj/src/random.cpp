#include "weakmeas/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace weakmeas {

Rng SeedPath::engine() const {
  std::vector<std::uint32_t> words;
  words.reserve(2 * path_.size() + 1);
  words.push_back(static_cast<std::uint32_t>(path_.size()));
  for (const std::uint64_t v : path_) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("WEAKMEAS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

void for_each_block(std::size_t trials, unsigned threads,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t blocks = block_count(trials);
  auto run_block = [&](std::size_t b) {
    const std::size_t begin = b * kTrialBlock;
    body(b, begin, std::min(trials, begin + kTrialBlock));
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), blocks));
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < blocks; b = next++) {
        try {
          run_block(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

double Tally::std_error() const {
  if (n < 2) return 0.0;
  const double m = mean();
  const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
  return std::sqrt(var / static_cast<double>(n));
}

double binomial_se(double p, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

}  // namespace weakmeas
