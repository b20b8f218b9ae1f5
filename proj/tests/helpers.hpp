#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "eovseg/rng.hpp"
#include "eovseg/tensor.hpp"

namespace testing {

// Copy of the data; safe to range-for over even when the tensor is a temporary.
inline std::vector<float> vals(const eovseg::Tensor& t) { return t.values(); }

inline eovseg::Tensor rand_tensor(eovseg::Rng& rng, eovseg::Shape shape, float lo = -1.0f, float hi = 1.0f) {
    return rng.uniform_tensor(std::move(shape), lo, hi);
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("eovseg_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path data_dir() { return std::filesystem::path(EOVSEG_DATA_DIR); }

}  // namespace testing
