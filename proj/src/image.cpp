#include "floodforensics/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "floodforensics/errors.hpp"

namespace floodforensics {

ImageTensor::ImageTensor(int height, int width, float fill, ValueDomain domain)
    : height_(height), width_(width), domain_(domain) {
  if (height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width * kChannels, fill);
}

ImageTensor::ImageTensor(int height, int width, std::vector<float> data, ValueDomain domain)
    : height_(height), width_(width), domain_(domain), data_(std::move(data)) {
  if (height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(height) * width * kChannels)
    throw ShapeError("image buffer size does not match H x W x 3");
}

void ImageTensor::clamp_unit() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

FloodMask::FloodMask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
  if (fill > 1) throw ShapeError("mask values must be 0 or 1");
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

FloodMask::FloodMask(int height, int width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("mask buffer size does not match H x W");
  for (auto& v : data_) v = v ? 1 : 0;
}

std::size_t FloodMask::count_ones() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

namespace {

struct Tap {
  int lo;
  int hi;
  float frac;
};

// Source taps for one output axis, half-pixel centre convention.
std::vector<Tap> bilinear_taps(int in_size, int out_size) {
  std::vector<Tap> taps(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in_size - 1) lo = in_size - 1;
    const int hi = std::min(lo + 1, in_size - 1);
    taps[o] = {lo, hi, static_cast<float>(src - lo)};
  }
  return taps;
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw InvalidConfig("resize target must be positive");
  if (out_height == image.height() && out_width == image.width()) return image;
  const auto ty = bilinear_taps(image.height(), out_height);
  const auto tx = bilinear_taps(image.width(), out_width);
  ImageTensor out(out_height, out_width, 0.0f, image.domain());
  for (int y = 0; y < out_height; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < out_width; ++x) {
      const Tap& b = tx[x];
      for (int c = 0; c < ImageTensor::kChannels; ++c) {
        const float top = image.at(a.lo, b.lo, c) * (1 - b.frac) + image.at(a.lo, b.hi, c) * b.frac;
        const float bot = image.at(a.hi, b.lo, c) * (1 - b.frac) + image.at(a.hi, b.hi, c) * b.frac;
        out.at(y, x, c) = top * (1 - a.frac) + bot * a.frac;
      }
    }
  }
  return out;
}

FloodMask resize_nearest(const FloodMask& mask, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw InvalidConfig("resize target must be positive");
  if (out_height == mask.height() && out_width == mask.width()) return mask;
  FloodMask out(out_height, out_width);
  for (int y = 0; y < out_height; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * mask.height() / out_height), mask.height() - 1);
    for (int x = 0; x < out_width; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * mask.width() / out_width), mask.width() - 1);
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

FloodMask binarize(std::span<const float> probabilities, int height, int width, float threshold) {
  if (probabilities.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("probability map size does not match H x W");
  std::vector<std::uint8_t> bits(probabilities.size());
  std::transform(probabilities.begin(), probabilities.end(), bits.begin(),
                 [threshold](float p) { return static_cast<std::uint8_t>(p >= threshold); });
  return FloodMask(height, width, std::move(bits));
}

namespace {

ImageTensor from_bgr_mat(const cv::Mat& decoded, const std::filesystem::path& origin) {
  cv::Mat rgb;
  switch (decoded.channels()) {
    case 1: cv::cvtColor(decoded, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(decoded, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw DecodeError(origin.string(), "unsupported channel count");
  }
  double scale = 1.0 / 255.0;
  if (rgb.depth() == CV_16U) scale = 1.0 / 65535.0;
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, scale);
  std::vector<float> data(reinterpret_cast<const float*>(f.datastart), reinterpret_cast<const float*>(f.dataend));
  ImageTensor out(f.rows, f.cols, std::move(data));
  out.clamp_unit();
  return out;
}

}  // namespace

ImageTensor decode_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError(path.string(), "cannot open image");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_image_bytes(bytes, path);
}

ImageTensor decode_image_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& origin) {
  if (bytes.empty()) throw DecodeError(origin.string(), "empty image file");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat decoded;
  try {
    decoded = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw DecodeError(origin.string(), std::string("cannot decode image (") + e.what() + ")");
  }
  if (decoded.empty()) throw DecodeError(origin.string(), "cannot decode image");
  return from_bgr_mat(decoded, origin);
}

FloodMask decode_mask(const std::filesystem::path& path) {
  cv::Mat decoded;
  try {
    decoded = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  } catch (const cv::Exception& e) {
    throw DecodeError(path.string(), std::string("cannot decode mask (") + e.what() + ")");
  }
  if (decoded.empty()) throw DecodeError(path.string(), "cannot decode mask");
  std::vector<std::uint8_t> bits(decoded.total());
  for (int y = 0; y < decoded.rows; ++y) {
    const auto* row = decoded.ptr<std::uint8_t>(y);
    for (int x = 0; x < decoded.cols; ++x) bits[static_cast<std::size_t>(y) * decoded.cols + x] = row[x] >= 128;
  }
  return FloodMask(decoded.rows, decoded.cols, std::move(bits));
}

std::vector<std::uint8_t> to_rgb8(const ImageTensor& image) {
  const auto src = image.data();
  std::vector<std::uint8_t> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });
  return out;
}

ImageTensor from_rgb8(std::span<const std::uint8_t> rgb, int height, int width) {
  std::vector<float> data(rgb.size());
  std::transform(rgb.begin(), rgb.end(), data.begin(), [](std::uint8_t v) { return v / 255.0f; });
  return ImageTensor(height, width, std::move(data));
}

void write_png_rgb8(const std::filesystem::path& path, std::span<const std::uint8_t> rgb, int height, int width) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) throw ShapeError("RGB buffer size mismatch");
  const cv::Mat view(height, width, CV_8UC3, const_cast<std::uint8_t*>(rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw Error("failed to write " + path.string());
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
  write_png_rgb8(path, to_rgb8(image), image.height(), image.width());
}

void write_png(const std::filesystem::path& path, const FloodMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8U);
  const auto bits = mask.data();
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = bits[static_cast<std::size_t>(y) * mask.width() + x] ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw Error("failed to write " + path.string());
}

bool is_image_file(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace floodforensics
