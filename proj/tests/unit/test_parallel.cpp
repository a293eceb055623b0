#include <doctest.h>

#include <atomic>
#include <random>
#include <vector>

#include "mcox/parallel.hpp"

using namespace mcox;

TEST_SUITE("parallel") {
  TEST_CASE("blocks cover the range exactly once") {
    const unsigned saved = num_threads();
    for (unsigned t : {1u, 3u, 8u}) {
      set_num_threads(t);
      std::vector<std::atomic<int>> hits(10007);
      parallel_for_blocks(hits.size(), 64, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) hits[i]++;
      });
      for (const auto& h : hits) CHECK(h.load() == 1);
    }
    set_num_threads(saved);
  }

  TEST_CASE("tree reduction is bitwise independent of the thread count") {
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> d(0.0, 3.0);
    std::vector<double> v(100003);
    for (auto& x : v) x = d(rng) * (rng() % 2 ? 1 : -1);
    auto sum = [&] {
      return block_reduce(v.size(), 256, 0.0,
                          [&](std::size_t a, std::size_t b) {
                            CompensatedSum s;
                            for (std::size_t i = a; i < b; ++i) s.add(v[i]);
                            return s.value();
                          },
                          [](double& a, double b) { a += b; });
    };
    const unsigned saved = num_threads();
    set_num_threads(1);
    const double a = sum();
    set_num_threads(8);
    const double b = sum();
    set_num_threads(saved);
    CHECK(a == b);
  }

  TEST_CASE("compensated sum recovers cancelled mass") {
    CompensatedSum s;
    s.add(1.0);
    for (int k = 0; k < 1000; ++k) s.add(1e-16);
    s.add(-1.0);
    CHECK(s.value() == doctest::Approx(1e-13).epsilon(1e-6));
  }
}
