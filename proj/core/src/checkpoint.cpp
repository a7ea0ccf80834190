#include "lsm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lsm/errors.hpp"

namespace lsm {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'M', '1'};

enum : std::uint8_t {
  kTagKindMask = 0x0f,
  kTagRelu = 0x10,
  kTagResidual = 0x20,
  kTagRenormalize = 0x40,
  kTagPool = 0x80,
};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint: truncated", bytes_.size());
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const NetworkModel<float>& model) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(model.layer_count()));
  w.u32(static_cast<std::uint32_t>(model.input_shape().size()));
  for (std::size_t d : model.input_shape()) w.u32(static_cast<std::uint32_t>(d));
  for (const auto& layer : model.layers()) {
    std::uint8_t tag = static_cast<std::uint8_t>(layer.kind);
    if (layer.activation == Activation::kRelu) tag |= kTagRelu;
    if (layer.residual) tag |= kTagResidual;
    if (layer.renormalize) tag |= kTagRenormalize;
    if (layer.pool_input) tag |= kTagPool;
    w.u8(tag);
    w.u8(static_cast<std::uint8_t>(layer.weights.rank()));
    for (std::size_t d : layer.weights.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : layer.weights.data()) w.f32(v);
    for (float v : layer.bias.data()) w.f32(v);
    if (layer.residual) w.f32(static_cast<float>(layer.residual_alpha));
  }
  return w.take();
}

NetworkModel<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic (expected LSM1)", 0);
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.u8();

  const std::uint32_t count = r.u32();
  if (count == 0) throw FormatError("checkpoint: zero layers", 4);
  const std::size_t rank_at = r.position();
  const std::uint32_t input_rank = r.u32();
  if (input_rank == 0 || input_rank > 3) throw FormatError("checkpoint: bad input rank", rank_at);
  Shape input;
  for (std::uint32_t i = 0; i < input_rank; ++i) input.push_back(r.u32());

  std::vector<Layer<float>> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::size_t tag_at = r.position();
    const std::uint8_t tag = r.u8();
    const std::uint8_t kind = tag & kTagKindMask;
    if (kind > 2) throw FormatError("checkpoint: unknown layer kind", tag_at);
    Layer<float> layer;
    layer.kind = static_cast<LayerKind>(kind);
    layer.activation = (tag & kTagRelu) ? Activation::kRelu : Activation::kNone;
    layer.residual = (tag & kTagResidual) != 0;
    layer.renormalize = (tag & kTagRenormalize) != 0;
    layer.pool_input = (tag & kTagPool) != 0;

    const std::size_t wrank_at = r.position();
    const std::uint8_t wrank = r.u8();
    if (wrank == 0 || wrank > 4) throw FormatError("checkpoint: bad weight rank", wrank_at);
    Shape wshape;
    for (std::uint8_t i = 0; i < wrank; ++i) {
      const std::size_t at = r.position();
      const std::uint32_t d = r.u32();
      if (d == 0) throw FormatError("checkpoint: zero weight dimension", at);
      wshape.push_back(d);
    }
    std::vector<float> wv(shape_size(wshape));
    for (float& v : wv) v = r.f32();
    std::vector<float> bv(wshape[0]);
    for (float& v : bv) v = r.f32();
    if (layer.residual) layer.residual_alpha = r.f32();
    layer.weights = DenseTensor<float>(wshape, std::move(wv));
    layer.bias = DenseTensor<float>({wshape[0]}, std::move(bv));
    layers.push_back(std::move(layer));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes", r.position());
  try {
    return NetworkModel<float>(std::move(input), std::move(layers));
  } catch (const InputError& e) {
    throw FormatError(std::string("checkpoint: inconsistent model: ") + e.what(), bytes.size());
  }
}

void save_checkpoint(const NetworkModel<float>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string(), 0);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

NetworkModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string(), 0);
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace lsm
