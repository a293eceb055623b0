#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mcox::fixture {

Dataset random_dataset(std::mt19937_64& rng, const RandomSpec& spec) {
  std::normal_distribution<double> normal(0.0, spec.scale);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> y(spec.n);
  std::vector<std::uint8_t> delta(spec.n);
  RowMatrix x(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.d));
  for (std::size_t i = 0; i < spec.n; ++i) {
    double lin = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = normal(rng);
      lin += 0.3 * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    double t = expo(rng) * std::exp(-lin);
    if (spec.ties) t = std::ceil(t * 4.0) / 4.0;
    y[i] = t;
    delta[i] = unif(rng) < spec.censor_prob ? 0 : 1;
  }
  delta[0] = 1;
  return Dataset(std::move(y), std::move(delta), std::move(x), spec.path);
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mcox-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace mcox::fixture
