#include <algorithm>
#include <cmath>

#include "lvae/errors.hpp"
#include "lvae/media.hpp"

namespace lvae {

namespace {

void require_model(const VaeModel& model) {
  if (model.empty()) throw ModelError("no trained model loaded");
}

}  // namespace

void InterpolationSpec::validate() const {
  if (num_images < 2) throw ConfigError("num_images must be at least 2");
  if (frame_delay_cs <= 0) throw ConfigError("frame_delay_cs must be positive");
}

Tensor endpoint_latent(const VaeModel& model, const Endpoint& e) {
  require_model(model);
  if (e.kind == Endpoint::Kind::latent) {
    if (e.values.size() != model.latent_dim())
      throw DimensionError("latent endpoint has " + std::to_string(e.values.size()) +
                           " values, model latent dim is " +
                           std::to_string(model.latent_dim()));
    return Tensor({model.latent_dim()}, std::vector<double>(e.values.data().begin(),
                                                            e.values.data().end()));
  }
  if (e.values.size() != kImagePixels)
    throw DimensionError("image endpoint has " + std::to_string(e.values.size()) +
                         " values, expected 784");
  const Tensor x({1, kImagePixels},
                 std::vector<double>(e.values.data().begin(), e.values.data().end()));
  const LatentCode code = encode(model, x);
  return Tensor({model.latent_dim()},
                std::vector<double>(code.mu.data().begin(), code.mu.data().end()));
}

Tensor interpolate_latents(const Tensor& z_a, const Tensor& z_b, int num_images) {
  if (num_images < 2) throw ConfigError("num_images must be at least 2");
  if (z_a.size() != z_b.size())
    throw DimensionError("endpoint latents differ: " + z_a.shape_string() + " vs " +
                         z_b.shape_string());
  const std::size_t L = z_a.size();
  Tensor z({static_cast<std::size_t>(num_images), L});
  for (int k = 0; k < num_images; ++k) {
    const double t = double(k) / double(num_images - 1);
    for (std::size_t j = 0; j < L; ++j) z(k, j) = (1.0 - t) * z_a[j] + t * z_b[j];
  }
  return z;
}

Tensor interpolate_decoded(const VaeModel& model, const InterpolationSpec& spec) {
  spec.validate();
  require_model(model);
  const Tensor z = interpolate_latents(endpoint_latent(model, spec.a),
                                       endpoint_latent(model, spec.b), spec.num_images);
  return decode(model, z);
}

FrameSequence interpolate(const VaeModel& model, const InterpolationSpec& spec) {
  return to_frames(interpolate_decoded(model, spec));
}

Tensor interpolate_2d_latents(const std::array<Tensor, 4>& c, int grid_n) {
  if (grid_n < 2) throw ConfigError("grid_n must be at least 2");
  const std::size_t L = c[0].size();
  for (const auto& corner : c)
    if (corner.size() != L) throw DimensionError("corner latents differ in size");
  const auto n = static_cast<std::size_t>(grid_n);
  Tensor z({n * n, L});
  for (std::size_t r = 0; r < n; ++r) {
    const double s = double(r) / double(grid_n - 1);
    for (std::size_t col = 0; col < n; ++col) {
      const double t = double(col) / double(grid_n - 1);
      const double w00 = (1.0 - s) * (1.0 - t), w01 = (1.0 - s) * t;
      const double w10 = s * (1.0 - t), w11 = s * t;
      // Summed in this order so that zero weights leave an edge equal to the
      // 1-D blend of its two corners.
      for (std::size_t j = 0; j < L; ++j)
        z(r * n + col, j) = ((w00 * c[0][j] + w01 * c[1][j]) + w10 * c[2][j]) + w11 * c[3][j];
    }
  }
  return z;
}

FrameSequence interpolate_2d(const VaeModel& model, const std::array<Tensor, 4>& corner_images,
                             int grid_n) {
  require_model(model);
  std::array<Tensor, 4> z;
  for (int i = 0; i < 4; ++i) z[i] = endpoint_latent(model, Endpoint::image(corner_images[i]));
  return to_frames(decode(model, interpolate_2d_latents(z, grid_n)));
}

Tensor reconstruct(const VaeModel& model, const Tensor& images) {
  require_model(model);
  return decode(model, encode(model, images).mu);
}

GrayImage to_gray(std::span<const double> pixels) {
  if (pixels.size() != kImagePixels)
    throw DimensionError("frame has " + std::to_string(pixels.size()) + " pixels, expected 784");
  GrayImage img;
  img.pixels.resize(kImagePixels);
  for (std::size_t i = 0; i < kImagePixels; ++i)
    img.pixels[i] =
        static_cast<std::uint8_t>(std::lround(std::clamp(pixels[i], 0.0, 1.0) * 255.0));
  return img;
}

FrameSequence to_frames(const Tensor& decoded) {
  FrameSequence frames;
  for (std::size_t r = 0; r < decoded.rows(); ++r) frames.push_back(to_gray(decoded.row(r)));
  return frames;
}

GrayImage tile(const FrameSequence& frames, std::size_t cols) {
  if (frames.empty() || cols == 0) throw ConfigError("nothing to tile");
  const std::size_t w = frames[0].width, h = frames[0].height;
  const std::size_t rows = (frames.size() + cols - 1) / cols;
  GrayImage out{w * cols, h * rows, std::vector<std::uint8_t>(w * cols * h * rows, 0)};
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].width != w || frames[i].height != h)
      throw DimensionError("tiled frames differ in size");
    const std::size_t ox = (i % cols) * w, oy = (i / cols) * h;
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(frames[i].pixels.begin() + y * w, w,
                  out.pixels.begin() + (oy + y) * out.width + ox);
  }
  return out;
}

}  // namespace lvae
