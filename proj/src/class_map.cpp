#include "pyformer/class_map.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pyformer {

namespace {

std::array<unsigned char, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  auto byte = [m](double u) {
    return static_cast<unsigned char>(std::lround((u + m) * 255.0));
  };
  return {byte(r), byte(g), byte(b)};
}

}  // namespace

std::array<unsigned char, 3> class_color(int label, std::size_t num_classes) {
  if (num_classes == 0 || label < 1 ||
      static_cast<std::size_t>(label) > num_classes)
    throw std::invalid_argument("class_color: label " + std::to_string(label) +
                                " outside 1.." + std::to_string(num_classes));
  const double hue = static_cast<double>(label - 1) /
                     static_cast<double>(num_classes);
  return hsv_to_rgb(hue, 0.8, 0.95);
}

ClassMap render_map(const PyFormerParams& params, const PyFormerConfig& config,
                    const PatchSet& patches, std::size_t height,
                    std::size_t width) {
  ClassMap map;
  map.height = height;
  map.width = width;
  map.rgb.assign(3 * height * width, 0);

  const std::vector<int> predicted =
      predict_classes(params, config, patches, patches.centers);
  for (std::size_t i = 0; i < patches.centers.size(); ++i) {
    const Center& c = patches.centers[i];
    if (c.row >= height || c.col >= width)
      throw std::invalid_argument("render_map: center (" +
                                  std::to_string(c.row) + ", " +
                                  std::to_string(c.col) +
                                  ") outside a " + std::to_string(height) +
                                  "x" + std::to_string(width) + " scene");
    const auto color = class_color(predicted[i], config.num_classes);
    unsigned char* px = map.rgb.data() + 3 * (c.row * width + c.col);
    px[0] = color[0];
    px[1] = color[1];
    px[2] = color[2];
  }
  return map;
}

void write_ppm(const std::string& path, const ClassMap& map) {
  if (map.rgb.size() != 3 * map.height * map.width)
    throw std::invalid_argument("write_ppm: buffer holds " +
                                std::to_string(map.rgb.size()) +
                                " bytes, expected " +
                                std::to_string(3 * map.height * map.width));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
  out << "P6\n" << map.width << " " << map.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(map.rgb.data()),
            static_cast<std::streamsize>(map.rgb.size()));
  if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

}  // namespace pyformer
