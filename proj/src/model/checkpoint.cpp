#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lvae/errors.hpp"
#include "lvae/vae.hpp"

namespace lvae {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'A', 'E'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_le(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  void expect_magic() {
    need(4);
    if (std::memcmp(bytes_.data(), kMagic, 4) != 0)
      throw ModelError("checkpoint: bad magic (expected \"LVAE\")");
    pos_ += 4;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ModelError("checkpoint: truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const VaeModel& model) {
  if (model.empty()) throw ModelError("cannot checkpoint an empty model");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden_dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.latent_dim()));
  for (const auto& layer : model.layers()) {
    for (double w : layer.weights.data()) put_f64(out, w);
    for (double b : layer.bias.data()) put_f64(out, b);
  }
  return out;
}

VaeModel model_from_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic();
  const auto version = r.le<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw ModelError("checkpoint: unsupported version " +
                     std::to_string(version));
  const auto hidden = r.le<std::uint32_t>();
  const auto latent = r.le<std::uint32_t>();
  if (hidden == 0 || latent == 0)
    throw ModelError("checkpoint: zero dimension");
  VaeModel model = VaeModel::zeros(hidden, latent);
  for (auto& layer : model.layers()) {
    for (auto& w : layer.weights.data()) w = r.f64();
    for (auto& b : layer.bias.data()) b = r.f64();
  }
  if (!r.at_end()) throw ModelError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const VaeModel& model, const std::string& path) {
  const auto bytes = checkpoint_bytes(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ModelError("cannot write checkpoint " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ModelError("failed writing checkpoint " + path);
}

VaeModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return model_from_checkpoint(bytes);
}

}  // namespace lvae
