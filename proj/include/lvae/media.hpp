#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lvae/image.hpp"
#include "lvae/vae.hpp"

namespace lvae {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = kImageSide;
  std::size_t height = kImageSide;
  std::vector<std::uint8_t> pixels;

  bool operator==(const GrayImage&) const = default;
};

using FrameSequence = std::vector<GrayImage>;

// An interpolation endpoint is either a 784-pixel image, replaced by its
// encoder mean, or a latent vector used as is.
struct Endpoint {
  enum class Kind { image, latent };
  Kind kind = Kind::image;
  Tensor values;

  static Endpoint image(Tensor pixels) { return {Kind::image, std::move(pixels)}; }
  static Endpoint latent(Tensor z) { return {Kind::latent, std::move(z)}; }
};

inline constexpr int kDefaultFrameDelayCs = 10;

struct InterpolationSpec {
  Endpoint a;
  Endpoint b;
  int num_images = 10;
  bool show_gif_only = false;
  int frame_delay_cs = kDefaultFrameDelayCs;

  void validate() const;
};

// Latent mean of an endpoint, shape [L].
Tensor endpoint_latent(const VaeModel& model, const Endpoint& e);

// Rows k = 0..n-1 hold (1 - t) z_a + t z_b with t = k / (n - 1).
Tensor interpolate_latents(const Tensor& z_a, const Tensor& z_b, int num_images);

// Decoder outputs [n, 784] along the line and their quantised frames.
Tensor interpolate_decoded(const VaeModel& model, const InterpolationSpec& spec);
FrameSequence interpolate(const VaeModel& model, const InterpolationSpec& spec);

// Corners in order (0,0), (0,1), (1,0), (1,1); returns grid_n * grid_n frames
// row-major, with row r / column c at s = r / (n-1), t = c / (n-1).
Tensor interpolate_2d_latents(const std::array<Tensor, 4>& corners, int grid_n);
FrameSequence interpolate_2d(const VaeModel& model, const std::array<Tensor, 4>& corner_images,
                             int grid_n);

// Decodes each image's encoder mean: [N, 784] -> [N, 784].
Tensor reconstruct(const VaeModel& model, const Tensor& images);

// round(255 * x) per pixel of a [784] row.
GrayImage to_gray(std::span<const double> pixels);
FrameSequence to_frames(const Tensor& decoded);

// Lays square frames out as a cols-wide mosaic.
GrayImage tile(const FrameSequence& frames, std::size_t cols);

// GIF89a with a 256-level grayscale palette; every frame shares the size of
// the first. Delay is in hundredths of a second.
std::vector<std::uint8_t> encode_gif(const FrameSequence& frames,
                                     int delay_cs = kDefaultFrameDelayCs,
                                     bool loop_forever = true);

// LZW code stream (before sub-block packing) for 8-bit indices.
std::vector<std::uint8_t> lzw_compress(std::span<const std::uint8_t> indices);

// Binary "P5" with maxval 255.
std::vector<std::uint8_t> write_pgm(const GrayImage& image);

}  // namespace lvae
