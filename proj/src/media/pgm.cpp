#include <string>

#include "lvae/errors.hpp"
#include "lvae/media.hpp"

namespace lvae {

std::vector<std::uint8_t> write_pgm(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height)
    throw DimensionError("PGM pixel count does not match " + std::to_string(image.width) +
                         "x" + std::to_string(image.height));
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

}  // namespace lvae
