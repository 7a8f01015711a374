#include "spu/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <string>

namespace spu::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

namespace {

constexpr const char* kFormat = "spu-params";
constexpr int kVersion = 1;

std::vector<int> hidden_sizes(const Mlp& trunk) {
  const auto& sizes = trunk.layer_sizes();
  return {sizes.begin() + 1, sizes.end() - 1};
}

}  // namespace

void write_params(const std::filesystem::path& path, nlohmann::json header, const Vector& params) {
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["num_params"] = params.size();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

nlohmann::json read_params(const std::filesystem::path& path, Vector& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CheckpointError(path.string() + ": missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad header: " + e.what());
  }
  if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
    throw CheckpointError(path.string() + ": not a version 1 parameter file");
  }
  const auto count = header.at("num_params").get<Eigen::Index>();
  params.resize(count);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double))) {
    throw CheckpointError(path.string() + ": truncated parameter data");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError(path.string() + ": trailing bytes after parameter data");
  }
  return header;
}

void save_policy(const std::filesystem::path& path, const PolicyNet& net) {
  nlohmann::json header{{"kind", "policy"},
                        {"head", std::string(to_string(net.kind()))},
                        {"state_dim", net.state_dim()},
                        {"action_dim", net.action_dim()},
                        {"hidden", hidden_sizes(net.trunk())}};
  write_params(path, std::move(header), net.parameters());
}

PolicyNet load_policy(const std::filesystem::path& path) {
  Vector params;
  const auto header = read_params(path, params);
  if (header.value("kind", "") != "policy") throw CheckpointError(path.string() + ": not a policy");
  PolicyNet net(parse_head_kind(header.at("head").get<std::string>()),
                header.at("state_dim").get<int>(), header.at("action_dim").get<int>(),
                header.at("hidden").get<std::vector<int>>());
  if (params.size() != net.num_params()) {
    throw CheckpointError(path.string() + ": parameter count does not match the shape header");
  }
  net.set_parameters(params);
  return net;
}

void save_value(const std::filesystem::path& path, const ValueNet& net) {
  nlohmann::json header{
      {"kind", "value"}, {"state_dim", net.state_dim()}, {"hidden", hidden_sizes(net.trunk())}};
  write_params(path, std::move(header), net.parameters());
}

ValueNet load_value(const std::filesystem::path& path) {
  Vector params;
  const auto header = read_params(path, params);
  if (header.value("kind", "") != "value") throw CheckpointError(path.string() + ": not a value net");
  ValueNet net(header.at("state_dim").get<int>(), header.at("hidden").get<std::vector<int>>());
  if (params.size() != net.num_params()) {
    throw CheckpointError(path.string() + ": parameter count does not match the shape header");
  }
  net.set_parameters(params);
  return net;
}

}  // namespace spu::nn
