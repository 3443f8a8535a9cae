#include <array>
#include <string_view>

#include "lvae/errors.hpp"
#include "lvae/media.hpp"

namespace lvae {

namespace {

constexpr int kMinCodeSize = 8;
constexpr int kClearCode = 1 << kMinCodeSize;
constexpr int kEndCode = kClearCode + 1;
constexpr int kMaxCodes = 4096;

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(int code, int width) {
    acc_ |= static_cast<std::uint32_t>(code) << bits_;
    bits_ += width;
    while (bits_ >= 8) {
      out_.push_back(static_cast<std::uint8_t>(acc_ & 0xff));
      acc_ >>= 8;
      bits_ -= 8;
    }
  }

  void flush() {
    if (bits_ > 0) out_.push_back(static_cast<std::uint8_t>(acc_ & 0xff));
    acc_ = 0;
    bits_ = 0;
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint32_t acc_ = 0;
  int bits_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::size_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void put_text(std::vector<std::uint8_t>& out, std::string_view s) {
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace

std::vector<std::uint8_t> lzw_compress(std::span<const std::uint8_t> indices) {
  std::vector<std::uint8_t> out;
  BitWriter bw(out);
  // child[code * 256 + byte] is the code of string(code) + byte, or 0.
  std::vector<std::uint16_t> child(static_cast<std::size_t>(kMaxCodes) * 256, 0);
  int next = kEndCode + 1;
  int width = kMinCodeSize + 1;

  auto reset = [&] {
    std::fill(child.begin(), child.end(), 0);
    next = kEndCode + 1;
    width = kMinCodeSize + 1;
  };

  bw.put(kClearCode, width);
  if (indices.empty()) {
    bw.put(kEndCode, width);
    bw.flush();
    return out;
  }

  int current = indices[0];
  for (std::size_t i = 1; i < indices.size(); ++i) {
    const int byte = indices[i];
    const auto slot = static_cast<std::size_t>(current) * 256 + byte;
    if (child[slot] != 0) {
      current = child[slot];
      continue;
    }
    bw.put(current, width);
    child[slot] = static_cast<std::uint16_t>(next++);
    // The decoder learns each entry one code later, so widen once the code it
    // will have just added no longer fits.
    if (next - 1 == (1 << width) && width < 12) ++width;
    if (next == kMaxCodes) {
      bw.put(kClearCode, width);
      reset();
    }
    current = byte;
  }
  bw.put(current, width);
  if (next == (1 << width) && width < 12) ++width;
  bw.put(kEndCode, width);
  bw.flush();
  return out;
}

std::vector<std::uint8_t> encode_gif(const FrameSequence& frames, int delay_cs,
                                     bool loop_forever) {
  if (frames.empty()) throw ConfigError("cannot encode a GIF with no frames");
  const std::size_t w = frames[0].width, h = frames[0].height;
  if (w == 0 || h == 0 || w > 0xffff || h > 0xffff)
    throw DimensionError("GIF frame size out of range");
  for (const auto& f : frames)
    if (f.width != w || f.height != h || f.pixels.size() != w * h)
      throw DimensionError("GIF frames differ in size");
  if (delay_cs < 0 || delay_cs > 0xffff) throw ConfigError("GIF delay out of range");

  std::vector<std::uint8_t> out;
  put_text(out, "GIF89a");
  put_u16(out, w);
  put_u16(out, h);
  out.push_back(0xf7);  // global table, 8-bit colour resolution, 256 entries
  out.push_back(0);     // background index
  out.push_back(0);     // aspect ratio
  for (int i = 0; i < 256; ++i) out.insert(out.end(), 3, static_cast<std::uint8_t>(i));

  if (loop_forever) {
    out.insert(out.end(), {0x21, 0xff, 0x0b});
    put_text(out, "NETSCAPE2.0");
    out.insert(out.end(), {0x03, 0x01, 0x00, 0x00, 0x00});
  }

  for (const auto& f : frames) {
    out.insert(out.end(), {0x21, 0xf9, 0x04, 0x04});  // keep previous frame
    put_u16(out, static_cast<std::size_t>(delay_cs));
    out.insert(out.end(), {0x00, 0x00});

    out.push_back(0x2c);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, w);
    put_u16(out, h);
    out.push_back(0);  // no local table, not interlaced

    out.push_back(kMinCodeSize);
    const auto data = lzw_compress(f.pixels);
    for (std::size_t at = 0; at < data.size(); at += 255) {
      const std::size_t n = std::min<std::size_t>(255, data.size() - at);
      out.push_back(static_cast<std::uint8_t>(n));
      out.insert(out.end(), data.begin() + at, data.begin() + at + n);
    }
    out.push_back(0);
  }
  out.push_back(0x3b);
  return out;
}

}  // namespace lvae
