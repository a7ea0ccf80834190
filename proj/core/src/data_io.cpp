#include "lsm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include "lsm/errors.hpp"
#include "lsm/rng.hpp"

namespace lsm::data {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarChannels = 3;
constexpr std::size_t kCifarRecord = 1 + kCifarChannels * kCifarSide * kCifarSide;
constexpr int kCifarClasses = 10;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string(), 0);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& file) {
  if (offset + 4 > bytes.size())
    throw FormatError(file + ": truncated header", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& bytes, std::uint32_t v) {
  bytes.push_back(static_cast<std::uint8_t>(v >> 24));
  bytes.push_back(static_cast<std::uint8_t>(v >> 16));
  bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  bytes.push_back(static_cast<std::uint8_t>(v));
}

float byte_to_pixel(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

std::uint8_t pixel_to_byte(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

int infer_classes(const std::vector<int>& labels) {
  int top = 0;
  for (int l : labels) top = std::max(top, l + 1);
  return std::max(top, 1);
}

}  // namespace

DenseTensor<float> Dataset::batch(std::size_t first, std::size_t count) const {
  Shape shape = images.shape();
  shape[0] = count;
  DenseTensor<float> out(shape);
  const std::size_t stride = images.stride0();
  std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(first * stride), count * stride,
              out.data().begin());
  return out;
}

DenseTensor<float> Dataset::gather(std::span<const std::size_t> indices) const {
  Shape shape = images.shape();
  shape[0] = indices.size();
  DenseTensor<float> out(shape);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto src = images.slice(indices[n]);
    std::copy(src.begin(), src.end(), out.slice(n).begin());
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const std::string iname = images_path.filename().string();
  const std::string lname = labels_path.filename().string();
  const auto ib = read_file(images_path);
  const auto lb = read_file(labels_path);

  if (read_be32(ib, 0, iname) != kIdxImagesMagic)
    throw FormatError(iname + ": bad IDX image magic", 0);
  const std::uint32_t n = read_be32(ib, 4, iname);
  const std::uint32_t h = read_be32(ib, 8, iname);
  const std::uint32_t w = read_be32(ib, 12, iname);
  if (n == 0) throw FormatError(iname + ": empty dimension (count)", 4);
  if (h == 0) throw FormatError(iname + ": empty dimension (rows)", 8);
  if (w == 0) throw FormatError(iname + ": empty dimension (cols)", 12);
  const std::size_t pixels = std::size_t{n} * h * w;
  if (ib.size() < 16 + pixels) throw FormatError(iname + ": truncated pixel data", ib.size());
  if (ib.size() > 16 + pixels) throw FormatError(iname + ": trailing bytes", 16 + pixels);

  if (read_be32(lb, 0, lname) != kIdxLabelsMagic)
    throw FormatError(lname + ": bad IDX label magic", 0);
  const std::uint32_t nl = read_be32(lb, 4, lname);
  if (nl != n)
    throw FormatError(lname + ": label count " + std::to_string(nl) + " does not match " +
                          std::to_string(n) + " images",
                      4);
  if (lb.size() < 8 + std::size_t{nl}) throw FormatError(lname + ": truncated labels", lb.size());
  if (lb.size() > 8 + std::size_t{nl}) throw FormatError(lname + ": trailing bytes", 8 + nl);

  Dataset ds;
  ds.images = DenseTensor<float>({n, 1, h, w});
  auto px = ds.images.data();
  for (std::size_t i = 0; i < pixels; ++i) px[i] = byte_to_pixel(ib[16 + i]);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lb[8 + i];
  ds.num_classes = infer_classes(ds.labels);
  return ds;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  if (dataset.images.rank() != 4 || dataset.images.dim(1) != 1)
    throw InputError("write_idx: IDX images are single-channel");
  std::vector<std::uint8_t> ib;
  append_be32(ib, kIdxImagesMagic);
  append_be32(ib, static_cast<std::uint32_t>(dataset.size()));
  append_be32(ib, static_cast<std::uint32_t>(dataset.images.dim(2)));
  append_be32(ib, static_cast<std::uint32_t>(dataset.images.dim(3)));
  for (float v : dataset.images.data()) ib.push_back(pixel_to_byte(v));
  write_file(images_path, ib);

  std::vector<std::uint8_t> lb;
  append_be32(lb, kIdxLabelsMagic);
  append_be32(lb, static_cast<std::uint32_t>(dataset.size()));
  for (int l : dataset.labels) lb.push_back(static_cast<std::uint8_t>(l));
  write_file(labels_path, lb);
}

Dataset load_cifar_bin(std::span<const std::filesystem::path> paths) {
  std::vector<std::uint8_t> all;
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    const std::string name = path.filename().string();
    if (bytes.empty()) throw FormatError(name + ": empty dataset file", 0);
    if (bytes.size() % kCifarRecord != 0)
      throw FormatError(name + ": length " + std::to_string(bytes.size()) +
                            " is not a multiple of 3073-byte records",
                        bytes.size() - bytes.size() % kCifarRecord);
    for (std::size_t r = 0; r < bytes.size(); r += kCifarRecord)
      if (bytes[r] >= kCifarClasses)
        throw FormatError(name + ": label byte " + std::to_string(bytes[r]) + " out of range", r);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  if (all.empty()) throw FormatError("load_cifar_bin: empty dataset", 0);

  const std::size_t n = all.size() / kCifarRecord;
  const std::size_t per = kCifarRecord - 1;
  Dataset ds;
  ds.images = DenseTensor<float>({n, kCifarChannels, kCifarSide, kCifarSide});
  ds.labels.resize(n);
  ds.num_classes = kCifarClasses;
  auto px = ds.images.data();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t base = r * kCifarRecord;
    ds.labels[r] = all[base];
    for (std::size_t i = 0; i < per; ++i) px[r * per + i] = byte_to_pixel(all[base + 1 + i]);
  }
  return ds;
}

void write_cifar_bin(const Dataset& dataset, const std::filesystem::path& path) {
  if (dataset.images.rank() != 4 || dataset.images.stride0() != kCifarRecord - 1)
    throw InputError("write_cifar_bin: images must be 3x32x32");
  std::vector<std::uint8_t> bytes;
  bytes.reserve(dataset.size() * kCifarRecord);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    bytes.push_back(static_cast<std::uint8_t>(dataset.labels[r]));
    for (float v : dataset.images.slice(r)) bytes.push_back(pixel_to_byte(v));
  }
  write_file(path, bytes);
}

NormalizationStats compute_normalization(const Dataset& training) {
  if (training.size() == 0) throw InputError("compute_normalization: empty training split");
  const std::size_t channels = training.channels();
  const std::size_t area = training.images.stride0() / channels;
  NormalizationStats stats{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0),
                           std::vector<bool>(channels, false)};
  const double count = static_cast<double>(training.size() * area);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < training.size(); ++n) {
      const auto img = training.images.slice(n);
      for (std::size_t i = 0; i < area; ++i) sum += img[c * area + i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < training.size(); ++n) {
      const auto img = training.images.slice(n);
      for (std::size_t i = 0; i < area; ++i) {
        const double d = img[c * area + i] - mean;
        sq += d * d;
      }
    }
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(sq / count);
    if (stats.std[c] < kStdGuard) {
      std::clog << "warning: channel " << c << " has std " << stats.std[c] << ", clamped to "
                << kStdGuard << "\n";
      stats.std[c] = kStdGuard;
      stats.guarded[c] = true;
    }
  }
  return stats;
}

DenseTensor<float> normalize_images(const DenseTensor<float>& images,
                                    const NormalizationStats& stats) {
  const std::size_t channels = images.dim(1);
  if (channels != stats.mean.size())
    throw InputError("normalize: channel count does not match the statistics");
  DenseTensor<float> out = images;
  const std::size_t area = images.stride0() / channels;
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    auto img = out.slice(n);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < area; ++i) {
        float& v = img[c * area + i];
        v = static_cast<float>((static_cast<double>(v) - stats.mean[c]) / stats.std[c]);
      }
  }
  return out;
}

DenseTensor<float> denormalize(const DenseTensor<float>& images, const NormalizationStats& stats) {
  const std::size_t channels = images.dim(1);
  if (channels != stats.mean.size())
    throw InputError("denormalize: channel count does not match the statistics");
  DenseTensor<float> out = images;
  const std::size_t area = images.stride0() / channels;
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    auto img = out.slice(n);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < area; ++i) {
        float& v = img[c * area + i];
        v = static_cast<float>(static_cast<double>(v) * stats.std[c] + stats.mean[c]);
      }
  }
  return out;
}

Dataset normalize(const Dataset& dataset, const NormalizationStats& stats) {
  Dataset out;
  out.images = normalize_images(dataset.images, stats);
  out.labels = dataset.labels;
  out.num_classes = dataset.num_classes;
  return out;
}

Dataset subset(const Dataset& dataset, std::size_t first, std::size_t count) {
  first = std::min(first, dataset.size());
  count = std::min(count, dataset.size() - first);
  if (count == 0) throw InputError("subset: empty selection");
  Dataset out;
  out.images = dataset.batch(first, count);
  out.labels.assign(dataset.labels.begin() + static_cast<std::ptrdiff_t>(first),
                    dataset.labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.num_classes = dataset.num_classes;
  return out;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.count == 0 || spec.side < 4 || spec.num_classes < 2)
    throw InputError("make_synthetic: need count > 0, side >= 4, at least 2 classes");
  const std::size_t side = spec.side;
  const double lo = 2.0, hi = static_cast<double>(side) - 3.0;

  Rng proto_rng = make_rng(spec.prototype_seed, "synthetic-prototypes");
  std::vector<std::vector<double>> prototypes;
  for (int c = 0; c < spec.num_classes; ++c) {
    std::vector<double> img(side * side, 0.0);
    for (int blob = 0; blob < 3; ++blob) {
      const double cy = lo + (hi - lo) * uniform01(proto_rng);
      const double cx = lo + (hi - lo) * uniform01(proto_rng);
      const double sigma = 1.0 + uniform01(proto_rng);
      const double amp = 0.5 + 0.5 * uniform01(proto_rng);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          img[y * side + x] += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        }
    }
    const double top = *std::max_element(img.begin(), img.end());
    for (double& v : img) v /= top;
    prototypes.push_back(std::move(img));
  }

  Rng rng = make_rng(spec.sample_seed, "synthetic-samples");
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.images = DenseTensor<float>({spec.count, 1, side, side});
  ds.labels.resize(spec.count);
  const int span = 2 * spec.max_shift + 1;
  for (std::size_t n = 0; n < spec.count; ++n) {
    const int c = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.num_classes));
    ds.labels[n] = c;
    const int sy = static_cast<int>(rng() % static_cast<std::uint64_t>(span)) - spec.max_shift;
    const int sx = static_cast<int>(rng() % static_cast<std::uint64_t>(span)) - spec.max_shift;
    const double gain = 0.7 + 0.6 * uniform01(rng);
    auto img = ds.images.slice(n);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const int py = static_cast<int>(y) - sy, px = static_cast<int>(x) - sx;
        double v = 0.0;
        if (py >= 0 && px >= 0 && py < static_cast<int>(side) && px < static_cast<int>(side))
          v = gain * prototypes[static_cast<std::size_t>(c)]
                                [static_cast<std::size_t>(py) * side + static_cast<std::size_t>(px)];
        v += spec.pixel_noise * standard_normal(rng);
        // Stored at byte resolution so IDX/CIFAR round trips are exact.
        img[y * side + x] = byte_to_pixel(pixel_to_byte(static_cast<float>(v)));
      }
  }
  return ds;
}

}  // namespace lsm::data
