#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "numerics/tensor.hpp"

namespace dvr::num {

struct NamedArray {
  std::string name;
  Tensor tensor;
};

// Container layout:
//   8 bytes   magic "DVRPARAM"
//   8 bytes   header length H, uint64 little-endian
//   H bytes   UTF-8 JSON: {"format":1,"meta":{...},"tensors":[{"name","shape","offset"}]}
//   rest      float64 little-endian payload; offsets are bytes from payload start
struct ParamFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const Tensor* find(const std::string& name) const;
};

void save_param_file(const std::filesystem::path& path, const ParamFile& file);
ParamFile load_param_file(const std::filesystem::path& path);

std::string encode_param_file(const ParamFile& file);
ParamFile decode_param_file(const std::string& bytes);

}  // namespace dvr::num
