#include "pyformer/hsi_cube.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace pyformer {

namespace {

using nlohmann::json;

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f.seekg(0, std::ios::end);
  const std::streamoff n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  if (n > 0) f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw std::runtime_error("failed reading " + path.string());
  return bytes;
}

void write_binary(const std::filesystem::path& path,
                  const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

// Explicit little-endian packing so files are portable regardless of host.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                       (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

std::vector<std::size_t> HsiCube::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (std::uint16_t l : labels)
    if (l > 0) ++counts[l - 1];
  return counts;
}

HsiCube load_cube(const std::filesystem::path& header_path) {
  std::ifstream hf(header_path);
  if (!hf) throw std::runtime_error("cannot open " + header_path.string());
  json header;
  try {
    header = json::parse(hf);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed cube header " + header_path.string() +
                             ": " + e.what());
  }
  if (header.value("magic", "") != std::string("HSICUBE1"))
    throw std::runtime_error(header_path.string() +
                             ": missing or wrong magic, expected HSICUBE1");
  if (header.value("dtype", "") != std::string("f32le"))
    throw std::runtime_error(header_path.string() + ": unsupported dtype '" +
                             header.value("dtype", "") + "', expected f32le");

  HsiCube cube;
  cube.height = header.at("M").get<std::size_t>();
  cube.width = header.at("N").get<std::size_t>();
  cube.bands = header.at("B").get<std::size_t>();
  if (cube.height == 0 || cube.width == 0 || cube.bands == 0)
    throw std::runtime_error(header_path.string() + ": zero extent in header");
  cube.class_names = header.at("class_names").get<std::vector<std::string>>();

  const auto dir = header_path.parent_path();
  const auto data_path = dir / header.at("data_file").get<std::string>();
  const auto label_path = dir / header.at("label_file").get<std::string>();

  const std::size_t n_pixels = cube.height * cube.width;
  const std::size_t n_values = n_pixels * cube.bands;

  const auto data_bytes = read_binary(data_path);
  if (data_bytes.size() != n_values * 4)
    throw std::runtime_error(data_path.string() + ": expected " +
                             std::to_string(n_values * 4) + " bytes for " +
                             std::to_string(cube.height) + "x" +
                             std::to_string(cube.width) + "x" +
                             std::to_string(cube.bands) + ", got " +
                             std::to_string(data_bytes.size()));
  cube.reflectance.resize(n_values);
  for (std::size_t i = 0; i < n_values; ++i)
    cube.reflectance[i] = get_f32(data_bytes.data() + 4 * i);

  const auto label_bytes = read_binary(label_path);
  if (label_bytes.size() != n_pixels * 2)
    throw std::runtime_error(label_path.string() + ": expected " +
                             std::to_string(n_pixels * 2) + " bytes, got " +
                             std::to_string(label_bytes.size()));
  cube.labels.resize(n_pixels);
  for (std::size_t i = 0; i < n_pixels; ++i) {
    cube.labels[i] = get_u16(label_bytes.data() + 2 * i);
    if (cube.labels[i] > cube.class_names.size())
      throw std::runtime_error(label_path.string() + ": label " +
                               std::to_string(cube.labels[i]) + " exceeds " +
                               std::to_string(cube.class_names.size()) +
                               " classes");
  }
  return cube;
}

void save_cube(const HsiCube& cube, const std::filesystem::path& header_path) {
  if (cube.reflectance.size() != cube.height * cube.width * cube.bands)
    throw std::invalid_argument("save_cube: reflectance size mismatch");
  if (cube.labels.size() != cube.height * cube.width)
    throw std::invalid_argument("save_cube: label size mismatch");
  for (std::uint16_t l : cube.labels)
    if (l > cube.class_names.size())
      throw std::invalid_argument("save_cube: label " + std::to_string(l) +
                                  " exceeds " +
                                  std::to_string(cube.class_names.size()) +
                                  " classes");

  const std::string stem = header_path.stem().string();
  const std::string data_name = stem + "_data.raw";
  const std::string label_name = stem + "_labels.raw";
  const auto dir = header_path.parent_path();

  json header;
  header["magic"] = "HSICUBE1";
  header["dtype"] = "f32le";
  header["M"] = cube.height;
  header["N"] = cube.width;
  header["B"] = cube.bands;
  header["data_file"] = data_name;
  header["label_file"] = label_name;
  header["class_names"] = cube.class_names;

  std::ofstream hf(header_path, std::ios::trunc);
  if (!hf) throw std::runtime_error("cannot open " + header_path.string() + " for writing");
  hf << header.dump(2) << '\n';
  if (!hf) throw std::runtime_error("failed writing " + header_path.string());
  hf.close();

  std::vector<std::uint8_t> data_bytes;
  data_bytes.reserve(cube.reflectance.size() * 4);
  for (float v : cube.reflectance) put_f32(data_bytes, v);
  write_binary(dir / data_name, data_bytes);

  std::vector<std::uint8_t> label_bytes;
  label_bytes.reserve(cube.labels.size() * 2);
  for (std::uint16_t v : cube.labels) put_u16(label_bytes, v);
  write_binary(dir / label_name, label_bytes);
}

}  // namespace pyformer
