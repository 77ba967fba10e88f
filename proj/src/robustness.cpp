#include "floodforensics/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/errors.hpp"
#include "floodforensics/random.hpp"

namespace floodforensics {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<AttackName, std::string_view>, 6> kAttackNames{{
    {AttackName::none, "none"},
    {AttackName::jpeg, "jpeg"},
    {AttackName::resize_down, "resize_down"},
    {AttackName::median, "median"},
    {AttackName::gaussian_blur, "gaussian_blur"},
    {AttackName::gaussian_noise, "gaussian_noise"},
}};

// Mirror about the edge sample without repeating it: ... c b | a b c ... .
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
  return i;
}

bool is_integer(const json& v) { return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()); }

void check_window(int window) {
  if (window < 3 || window % 2 == 0) throw InvalidConfig("window must be an odd integer >= 3");
}

}  // namespace

std::string_view to_string(AttackName a) {
  for (const auto& [k, v] : kAttackNames)
    if (k == a) return v;
  return "none";
}

AttackName parse_attack_name(std::string_view name) {
  for (const auto& [k, v] : kAttackNames)
    if (v == name) return k;
  throw InvalidConfig("unknown attack '" + std::string(name) + "'");
}

AttackSpec AttackSpec::jpeg(int quality) { return {AttackName::jpeg, {{"quality", quality}}, 0}; }
AttackSpec AttackSpec::resize_down(double factor) { return {AttackName::resize_down, {{"factor", factor}}, 0}; }
AttackSpec AttackSpec::median(int window) { return {AttackName::median, {{"window", window}}, 0}; }
AttackSpec AttackSpec::gaussian_blur(int window, double sigma) {
  return {AttackName::gaussian_blur, {{"window", window}, {"sigma", sigma}}, 0};
}
AttackSpec AttackSpec::gaussian_noise(double mean, double variance, std::uint64_t seed) {
  return {AttackName::gaussian_noise, {{"mean", mean}, {"variance", variance}}, seed};
}

AttackSpec AttackSpec::resolved() const {
  if (!params.is_object()) throw InvalidConfig("attack params must be an object");
  json defaults;
  switch (name) {
    case AttackName::none: defaults = json::object(); break;
    case AttackName::jpeg: defaults = {{"quality", 50}}; break;
    case AttackName::resize_down: defaults = {{"factor", 0.5}}; break;
    case AttackName::median: defaults = {{"window", 3}}; break;
    case AttackName::gaussian_blur: defaults = {{"window", 3}, {"sigma", 0.8}}; break;
    case AttackName::gaussian_noise: defaults = {{"mean", 0.0}, {"variance", 0.003}}; break;
  }
  AttackSpec out = *this;
  for (const auto& [key, value] : params.items()) {
    if (!defaults.contains(key))
      throw InvalidConfig("unknown parameter '" + key + "' for attack " + std::string(to_string(name)));
    if (!value.is_number()) throw InvalidConfig("attack parameter '" + key + "' must be numeric");
  }
  out.params = defaults;
  out.params.update(params);

  switch (name) {
    case AttackName::jpeg: {
      const auto& q = out.params["quality"];
      if (!is_integer(q) || q.get<double>() < 1 || q.get<double>() > 100)
        throw InvalidConfig("jpeg quality must be an integer in [1,100]");
      out.params["quality"] = static_cast<int>(q.get<double>());
      break;
    }
    case AttackName::resize_down: {
      const double f = out.params["factor"].get<double>();
      if (!(f > 0 && f <= 1)) throw InvalidConfig("resize factor must lie in (0,1]");
      break;
    }
    case AttackName::median:
    case AttackName::gaussian_blur: {
      const auto& w = out.params["window"];
      if (!is_integer(w)) throw InvalidConfig("window must be an integer");
      check_window(static_cast<int>(w.get<double>()));
      out.params["window"] = static_cast<int>(w.get<double>());
      if (name == AttackName::gaussian_blur && !(out.params["sigma"].get<double>() > 0))
        throw InvalidConfig("sigma must be positive");
      break;
    }
    case AttackName::gaussian_noise:
      if (!(out.params["variance"].get<double>() >= 0)) throw InvalidConfig("noise variance must be non-negative");
      break;
    case AttackName::none: break;
  }
  return out;
}

json to_json(const AttackSpec& spec) {
  return {{"name", std::string(to_string(spec.name))}, {"params", spec.params}, {"seed", spec.seed}};
}

AttackSpec attack_spec_from_json(const json& j) {
  if (!j.is_object()) throw InvalidConfig("attack spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "name" && key != "params" && key != "seed") throw InvalidConfig("unknown attack spec key '" + key + "'");
  AttackSpec s;
  try {
    s.name = parse_attack_name(j.at("name").get<std::string>());
    s.params = j.value("params", json::object());
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("malformed attack spec: ") + e.what());
  }
  return s.resolved();
}

ImageTensor jpeg_compress(const ImageTensor& image, int quality) {
  if (quality < 1 || quality > 100) throw InvalidConfig("jpeg quality must lie in [1,100]");
  auto rgb = to_rgb8(image);
  const cv::Mat view(image.height(), image.width(), CV_8UC3, rgb.data());
  cv::Mat bgr;
  cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> encoded;
  // libjpeg defaults: baseline sequential, 2x2 luma sampling (4:2:0 chroma).
  const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_PROGRESSIVE, 0,
                                cv::IMWRITE_JPEG_OPTIMIZE, 0};
  if (!cv::imencode(".jpg", bgr, encoded, params)) throw Error("JPEG encoding failed");
  const cv::Mat decoded = cv::imdecode(encoded, cv::IMREAD_COLOR);
  if (decoded.empty()) throw Error("JPEG decoding failed");
  cv::Mat back;
  cv::cvtColor(decoded, back, cv::COLOR_BGR2RGB);
  return from_rgb8(std::span<const std::uint8_t>(back.data, back.total() * 3), back.rows, back.cols);
}

ImageTensor resize_down(const ImageTensor& image, double factor) {
  if (!(factor > 0 && factor <= 1)) throw InvalidConfig("resize factor must lie in (0,1]");
  const int h = static_cast<int>(std::floor(factor * image.height() + 1e-9));
  const int w = static_cast<int>(std::floor(factor * image.width() + 1e-9));
  if (h == 0 || w == 0) throw InvalidConfig("resize factor leaves an empty image");
  return resize_bilinear(image, h, w);
}

ImageTensor median_filter(const ImageTensor& image, int window) {
  check_window(window);
  const int r = window / 2;
  ImageTensor out(image.height(), image.width(), 0.0f, image.domain());
  std::vector<float> values(static_cast<std::size_t>(window) * window);
  const std::size_t mid = values.size() / 2;
  for (int c = 0; c < ImageTensor::kChannels; ++c)
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x) {
        std::size_t k = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            values[k++] = image.at(reflect_index(y + dy, image.height()), reflect_index(x + dx, image.width()), c);
        std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
        out.at(y, x, c) = values[mid];
      }
  return out;
}

std::vector<double> gaussian_kernel(int window, double sigma) {
  check_window(window);
  if (!(sigma > 0)) throw InvalidConfig("sigma must be positive");
  const int r = window / 2;
  std::vector<double> k(window);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

ImageTensor gaussian_blur(const ImageTensor& image, int window, double sigma) {
  const auto k = gaussian_kernel(window, sigma);
  const int r = window / 2;
  const int h = image.height(), w = image.width();
  ImageTensor tmp(h, w, 0.0f, image.domain());
  ImageTensor out(h, w, 0.0f, image.domain());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * image.at(y, reflect_index(x + i, w), c);
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(reflect_index(y + i, h), x, c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

std::vector<double> gaussian_noise_field(std::size_t count, double mean, double variance, std::uint64_t seed) {
  if (!(variance >= 0)) throw InvalidConfig("noise variance must be non-negative");
  std::vector<double> out(count, mean);
  if (variance == 0) return out;
  const double sd = std::sqrt(variance);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; i += 2) {
    const auto [a, b] = standard_normal_pair(rng);
    out[i] = mean + sd * a;
    if (i + 1 < count) out[i + 1] = mean + sd * b;
  }
  return out;
}

ImageTensor gaussian_noise(const ImageTensor& image, double mean, double variance, std::uint64_t seed) {
  if (!(variance >= 0)) throw InvalidConfig("noise variance must be non-negative");
  if (variance == 0 && mean == 0) return image;
  ImageTensor out = image;
  auto d = out.data();
  const auto noise = gaussian_noise_field(d.size(), mean, variance, seed);
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<float>(std::clamp(static_cast<double>(d[i]) + noise[i], 0.0, 1.0));
  return out;
}

ImageTensor apply_attack(const AttackSpec& spec, const ImageTensor& image, std::uint64_t image_index) {
  const AttackSpec s = spec.resolved();
  switch (s.name) {
    case AttackName::none: return image;
    case AttackName::jpeg: return jpeg_compress(image, s.params["quality"].get<int>());
    case AttackName::resize_down: return resize_down(image, s.params["factor"].get<double>());
    case AttackName::median: return median_filter(image, s.params["window"].get<int>());
    case AttackName::gaussian_blur:
      return gaussian_blur(image, s.params["window"].get<int>(), s.params["sigma"].get<double>());
    case AttackName::gaussian_noise:
      return gaussian_noise(image, s.params["mean"].get<double>(), s.params["variance"].get<double>(),
                            derive_seed(s.seed, image_index));
  }
  throw InvalidConfig("unknown attack");
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("PSNR needs equal shapes");
  const auto da = a.data();
  const auto db = b.data();
  double se = 0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    se += d * d;
  }
  const double mse = se / da.size();
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double total_variation(const ImageTensor& image) {
  double tv = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        if (x + 1 < image.width()) tv += std::abs(image.at(y, x + 1, c) - image.at(y, x, c));
        if (y + 1 < image.height()) tv += std::abs(image.at(y + 1, x, c) - image.at(y, x, c));
      }
  return tv;
}

}  // namespace floodforensics
