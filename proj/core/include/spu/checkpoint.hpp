#pragma once

#include "spu/policy_net.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>

namespace spu::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Parameter files: one line of JSON describing the shape, a newline, then
 * num_params raw little-endian 64-bit floats.
 */
void write_params(const std::filesystem::path& path, nlohmann::json header, const Vector& params);
/// Returns the header; fills params with exactly header["num_params"] values.
nlohmann::json read_params(const std::filesystem::path& path, Vector& params);

void save_policy(const std::filesystem::path& path, const PolicyNet& net);
PolicyNet load_policy(const std::filesystem::path& path);

void save_value(const std::filesystem::path& path, const ValueNet& net);
ValueNet load_value(const std::filesystem::path& path);

}  // namespace spu::nn
