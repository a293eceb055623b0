#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mcox/coxph.hpp"
#include "mcox/data.hpp"

namespace mcox {

// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// ceil(r^(2/3) * ln r), at least 1.
std::size_t default_pilot_size(double expected_size);

struct SubsamplePlan {
  double expected_size = 0.0;   // r
  std::size_t pilot_size = 0;   // r0
  std::uint64_t seed = 0;
  double rate = 1.0;            // min(r / n, 1)

  static SubsamplePlan make(std::size_t n, double expected_size, std::uint64_t seed,
                            std::optional<std::size_t> pilot_size = std::nullopt);

  // Plan for the pilot draw: expected size r0 on an independent stream.
  SubsamplePlan pilot(std::size_t n) const;
};

struct SubsampleIndex {
  std::vector<std::size_t> indices;  // strictly increasing, each < parent_n
  std::size_t parent_n = 0;

  std::size_t realized_size() const noexcept { return indices.size(); }
};

// Uniform in [0, 1) as a pure function of (seed, index).
double inclusion_uniform(std::uint64_t seed, std::uint64_t index) noexcept;

// Independent Bernoulli(rate) inclusion per index. Throws
// Error(EmptySubsample) when nothing is drawn.
SubsampleIndex poisson_subsample(std::size_t n, const SubsamplePlan& plan);

Dataset subset(const Dataset& dataset, const SubsampleIndex& index);

struct UniformFit {
  FitResult fit;         // variance = (realized_r * information)^-1
  SubsampleIndex index;
  Dataset subsample;
};

// Throws Error(TooFewEvents) when the subsample has fewer events than
// parameters.
UniformFit fit_uniform(const Dataset& dataset, const SubsamplePlan& plan,
                       const FitOptions& options = {});

}  // namespace mcox
