#include "numerics/param_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace dvr::num {

namespace {

constexpr char kMagic[8] = {'D', 'V', 'R', 'P', 'A', 'R', 'A', 'M'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

const Tensor* ParamFile::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a.tensor;
  }
  return nullptr;
}

std::string encode_param_file(const ParamFile& file) {
  nlohmann::json header;
  header["format"] = 1;
  header["meta"] = file.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : file.arrays) {
    header["tensors"].push_back({{"name", a.name}, {"shape", a.tensor.shape()}, {"offset", offset}});
    offset += a.tensor.size() * sizeof(double);
  }
  const auto text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& a : file.arrays) {
    for (double v : a.tensor.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ParamFile decode_param_file(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a parameter container (bad magic)");
  }
  const auto hlen = get_u64(bytes, 8);
  if (16 + hlen > bytes.size()) throw IoError("parameter container truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("parameter container header is not valid JSON: ") + e.what());
  }
  const std::size_t base = 16 + hlen;
  ParamFile file;
  file.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    Shape shape = t.at("shape").get<Shape>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto n = shape_size(shape);
    if (base + offset + n * sizeof(double) > bytes.size()) {
      throw IoError("parameter container truncated in tensor '" + t.at("name").get<std::string>() + "'");
    }
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = std::bit_cast<double>(get_u64(bytes, base + offset + 8 * i));
    file.arrays.push_back({t.at("name").get<std::string>(), Tensor(std::move(shape), std::move(vals))});
  }
  return file;
}

void save_param_file(const std::filesystem::path& path, const ParamFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto bytes = encode_param_file(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ParamFile load_param_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_param_file(ss.str());
}

}  // namespace dvr::num
