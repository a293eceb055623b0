#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "mcox/data.hpp"

namespace mcox::fixture {

struct RandomSpec {
  std::size_t n = 50;
  std::size_t d = 3;          // static feature dimension
  bool ties = true;           // times rounded to a coarse grid
  double censor_prob = 0.3;
  double scale = 1.0;         // feature scale
  CovariatePath path = CovariatePath::constant();
};

Dataset random_dataset(std::mt19937_64& rng, const RandomSpec& spec);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

std::string read_file(const std::filesystem::path& file);

}  // namespace mcox::fixture
