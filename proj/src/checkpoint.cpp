#include "pyformer/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace pyformer {

namespace {

using nlohmann::json;

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const PyFormerParams& params, const PyFormerConfig& config,
                     const std::filesystem::path& manifest_path) {
  config.validate();
  const std::string data_name = manifest_path.stem().string() + "_params.bin";

  json manifest;
  manifest["magic"] = "PYFORMER1";
  manifest["config"] = config;
  manifest["data_file"] = data_name;

  std::vector<std::uint8_t> blob;
  json tensors = json::array();
  for (const auto& [name, tensor] : named_params(params)) {
    json entry;
    entry["name"] = name;
    entry["shape"] = tensor->shape().dims;
    entry["offset"] = blob.size();
    entry["count"] = tensor->size();
    tensors.push_back(entry);
    for (std::size_t i = 0; i < tensor->size(); ++i) put_f64(blob, (*tensor)[i]);
  }
  manifest["tensors"] = tensors;

  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf)
    throw std::runtime_error("cannot open " + manifest_path.string() +
                             " for writing");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw std::runtime_error("failed writing " + manifest_path.string());
  mf.close();

  std::ofstream df(manifest_path.parent_path() / data_name,
                   std::ios::binary | std::ios::trunc);
  if (!df) throw std::runtime_error("cannot open " + data_name + " for writing");
  df.write(reinterpret_cast<const char*>(blob.data()),
           static_cast<std::streamsize>(blob.size()));
  if (!df) throw std::runtime_error("failed writing " + data_name);
}

std::pair<PyFormerParams, PyFormerConfig> load_checkpoint(
    const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed checkpoint manifest " +
                             manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("magic", "") != std::string("PYFORMER1"))
    throw std::runtime_error(manifest_path.string() +
                             ": missing or wrong magic, expected PYFORMER1");

  PyFormerConfig config = manifest.at("config").get<PyFormerConfig>();
  config.validate();
  PyFormerParams params = allocate_params(config);

  const auto data_path =
      manifest_path.parent_path() / manifest.at("data_file").get<std::string>();
  std::ifstream df(data_path, std::ios::binary);
  if (!df) throw std::runtime_error("cannot open " + data_path.string());
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(df)),
                                 std::istreambuf_iterator<char>());

  auto named = named_params(params);
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != named.size())
    throw std::runtime_error(manifest_path.string() + ": manifest lists " +
                             std::to_string(tensors.size()) + " tensors, config implies " +
                             std::to_string(named.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    const json& entry = tensors[i];
    auto& [name, tensor] = named[i];
    if (entry.at("name").get<std::string>() != name)
      throw std::runtime_error(manifest_path.string() + ": tensor " +
                               std::to_string(i) + " is '" +
                               entry.at("name").get<std::string>() +
                               "', expected '" + name + "'");
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (!(Shape(shape) == tensor->shape()))
      throw std::runtime_error(manifest_path.string() + ": tensor '" + name +
                               "' has shape " + Shape(shape).str() +
                               ", config implies " + tensor->shape().str());
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (count != tensor->size() || offset + 8 * count > blob.size())
      throw std::runtime_error(data_path.string() + ": tensor '" + name +
                               "' extends past end of blob");
    for (std::size_t k = 0; k < count; ++k)
      (*tensor)[k] = get_f64(blob.data() + offset + 8 * k);
  }
  return {std::move(params), config};
}

}  // namespace pyformer
