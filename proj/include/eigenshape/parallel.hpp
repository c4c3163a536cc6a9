#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace eigenshape {

// Worker count for parallel_for. Thread count must never change results:
// loops parallelized with this helper write disjoint outputs, and reductions
// are accumulated per fixed stripe and combined in stripe order.
inline int& thread_count() {
  static int n = 1;
  return n;
}

inline void set_thread_count(int n) {
  thread_count() = std::max(1, n);
}

// Runs fn(begin, end) over [0, n) split into contiguous chunks.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int workers = std::min<std::int64_t>(thread_count(), std::max<std::int64_t>(n, 1));
  if (workers <= 1 || n < 1024) {
    fn(std::int64_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t b = w * chunk;
    const std::int64_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

// Stripe-deterministic reduction: partial sums are computed per stripe of
// fixed width and added in stripe order, independent of worker count.
template <typename Fn>
double stripe_sum(std::int64_t n, std::int64_t stripe, Fn&& term_sum) {
  if (stripe <= 0) stripe = 1;
  const std::int64_t nstripes = (n + stripe - 1) / stripe;
  std::vector<double> partial(static_cast<std::size_t>(nstripes), 0.0);
  parallel_for(nstripes, [&](std::int64_t sb, std::int64_t se) {
    for (std::int64_t s = sb; s < se; ++s) {
      const std::int64_t b = s * stripe;
      const std::int64_t e = std::min(n, b + stripe);
      partial[static_cast<std::size_t>(s)] = term_sum(b, e);
    }
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace eigenshape
