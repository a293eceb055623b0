#include "mcox/subsampling.hpp"

#include <algorithm>
#include <cmath>

#include "mcox/error.hpp"
#include "mcox/parallel.hpp"

namespace mcox {
namespace {

constexpr std::size_t kDrawBlock = 1 << 14;
constexpr std::uint64_t kPilotStream = 0x5bd1e9955bd1e995ULL;

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t default_pilot_size(double r) {
  if (r <= 1.0) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::pow(r, 2.0 / 3.0) * std::log(r))));
}

SubsamplePlan SubsamplePlan::make(std::size_t n, double expected_size, std::uint64_t seed,
                                  std::optional<std::size_t> pilot_size) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "parent dataset is empty");
  if (!(expected_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "expected subsample size must be positive");
  SubsamplePlan plan;
  plan.expected_size = expected_size;
  plan.pilot_size = pilot_size.value_or(default_pilot_size(expected_size));
  plan.seed = seed;
  plan.rate = std::min(1.0, expected_size / static_cast<double>(n));
  return plan;
}

SubsamplePlan SubsamplePlan::pilot(std::size_t n) const {
  return make(n, static_cast<double>(pilot_size), splitmix64(seed ^ kPilotStream), pilot_size);
}

double inclusion_uniform(std::uint64_t seed, std::uint64_t index) noexcept {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

SubsampleIndex poisson_subsample(std::size_t n, const SubsamplePlan& plan) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "parent dataset is empty");
  SubsampleIndex out;
  out.parent_n = n;
  if (plan.rate >= 1.0) {
    out.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.indices[i] = i;
    return out;
  }
  const std::size_t n_blocks = (n + kDrawBlock - 1) / kDrawBlock;
  std::vector<std::vector<std::size_t>> parts(n_blocks);
  parallel_for_blocks(n, kDrawBlock, [&](std::size_t i0, std::size_t i1) {
    auto& part = parts[i0 / kDrawBlock];
    for (std::size_t i = i0; i < i1; ++i) {
      if (inclusion_uniform(plan.seed, i) < plan.rate) part.push_back(i);
    }
  });
  for (const auto& part : parts) out.indices.insert(out.indices.end(), part.begin(), part.end());
  if (out.indices.empty()) {
    throw Error(ErrorKind::EmptySubsample, "no index drawn; redraw with another seed");
  }
  return out;
}

Dataset subset(const Dataset& dataset, const SubsampleIndex& index) {
  const std::size_t m = index.indices.size();
  const std::size_t d = dataset.feature_dim();
  std::vector<double> y(m);
  std::vector<std::uint8_t> delta(m);
  RowMatrix x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = index.indices[k];
    if (i >= dataset.n()) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "index " + std::to_string(i) + " >= n=" + std::to_string(dataset.n()));
    }
    y[k] = dataset.y(i);
    delta[k] = dataset.event(i) ? 1 : 0;
    const auto f = dataset.features(i);
    std::copy(f.begin(), f.end(), x.data() + k * d);
  }
  return Dataset(std::move(y), std::move(delta), std::move(x), dataset.path());
}

UniformFit fit_uniform(const Dataset& dataset, const SubsamplePlan& plan, const FitOptions& options) {
  UniformFit out;
  out.index = poisson_subsample(dataset.n(), plan);
  out.subsample = subset(dataset, out.index);
  if (out.subsample.n_events() < dataset.p()) {
    throw Error(ErrorKind::TooFewEvents,
                std::to_string(out.subsample.n_events()) + " events for " +
                    std::to_string(dataset.p()) + " parameters; enlarge r");
  }
  out.fit = newton_raphson_fit(out.subsample, {}, options);
  return out;
}

}  // namespace mcox
