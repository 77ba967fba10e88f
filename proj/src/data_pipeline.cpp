#include "floodforensics/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "floodforensics/errors.hpp"
#include "floodforensics/random.hpp"

namespace floodforensics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<Source, std::string_view>, 6> kSources{{
    {Source::RWFI, "RWFI"},
    {Source::WSOC, "WSOC"},
    {Source::StreetG, "StreetG"},
    {Source::WebG132, "WebG132"},
    {Source::WebG504, "WebG504"},
    {Source::synthetic, "synthetic"},
}};

constexpr std::array<std::pair<Split, std::string_view>, 3> kSplits{{
    {Split::train, "train"},
    {Split::val, "val"},
    {Split::test, "test"},
}};

}  // namespace

std::string_view to_string(Source s) {
  for (const auto& [k, v] : kSources)
    if (k == s) return v;
  return "synthetic";
}

std::string_view to_string(Split s) {
  for (const auto& [k, v] : kSplits)
    if (k == s) return v;
  return "test";
}

Source parse_source(std::string_view name) {
  for (const auto& [k, v] : kSources)
    if (v == name) return k;
  throw InvalidConfig("unknown source '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
  for (const auto& [k, v] : kSplits)
    if (v == name) return k;
  throw InvalidConfig("unknown split '" + std::string(name) + "'");
}

void PreprocessConfig::validate() const {
  if (target_size <= 0) throw InvalidConfig("target_size must be positive");
  for (float s : channel_std)
    if (!(s > 0)) throw InvalidConfig("channel_std components must be positive");
  for (float f : augment_factors)
    if (!(f >= 0 && f < 1)) throw InvalidConfig("augment factors must lie in [0,1)");
}

Manifest build_manifest(const fs::path& image_dir, int label, const std::optional<fs::path>& mask_dir,
                        Source source, std::optional<Split> split) {
  if (label != 0 && label != 1) throw InvalidConfig("label must be 0 or 1");
  if (!fs::is_directory(image_dir)) throw ManifestEmpty("image directory does not exist: " + image_dir.string());

  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(image_dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) images.push_back(entry.path());
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::map<std::string, fs::path> masks_by_stem;
  if (mask_dir) {
    if (!fs::is_directory(*mask_dir)) throw InvalidConfig("mask directory does not exist: " + mask_dir->string());
    std::vector<fs::path> masks;
    for (const auto& entry : fs::directory_iterator(*mask_dir))
      if (entry.is_regular_file() && is_image_file(entry.path())) masks.push_back(entry.path());
    std::sort(masks.begin(), masks.end());
    for (const auto& m : masks) masks_by_stem.emplace(m.stem().string(), m);  // first extension wins
  }

  Manifest out;
  for (const auto& path : images) {
    ImageTensor decoded;
    try {
      decoded = decode_image(path);
    } catch (const DecodeError& e) {
      out.skipped.push_back({path, e.what()});
      continue;
    }
    SampleRecord rec;
    rec.image_path = path;
    rec.label = label;
    rec.source = source;
    rec.split = split;
    if (auto it = masks_by_stem.find(path.stem().string()); it != masks_by_stem.end()) {
      try {
        const FloodMask mask = decode_mask(it->second);
        const double image_aspect = static_cast<double>(decoded.width()) / decoded.height();
        const double mask_aspect = static_cast<double>(mask.width()) / mask.height();
        if (std::abs(image_aspect - mask_aspect) > 0.02 * image_aspect) {
          out.skipped.push_back({it->second, "mask aspect ratio differs from image"});
          continue;
        }
      } catch (const DecodeError& e) {
        out.skipped.push_back({it->second, e.what()});
        continue;
      }
      rec.mask_path = it->second;
    }
    out.records.push_back(std::move(rec));
  }
  if (out.records.empty()) throw ManifestEmpty("no decodable images in " + image_dir.string());
  return out;
}

namespace {

std::string relative_string(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  std::error_code ec;
  const fs::path abs = fs::absolute(p, ec);
  const fs::path rel = fs::relative(abs, fs::absolute(base), ec);
  if (ec || rel.empty()) return p.generic_string();
  return rel.generic_string();
}

}  // namespace

std::string manifest_to_jsonl(const std::vector<SampleRecord>& records, const fs::path& base_dir) {
  std::ostringstream os;
  for (const auto& r : records) {
    json j;
    j["image_path"] = relative_string(r.image_path, base_dir);
    j["label"] = r.label;
    j["mask_path"] = r.mask_path ? json(relative_string(*r.mask_path, base_dir)) : json(nullptr);
    j["source"] = std::string(to_string(r.source));
    j["split"] = r.split ? json(std::string(to_string(*r.split))) : json(nullptr);
    os << j.dump() << '\n';
  }
  return os.str();
}

void write_manifest(const fs::path& manifest_path, const std::vector<SampleRecord>& records) {
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw Error("cannot write manifest " + manifest_path.string());
  out << manifest_to_jsonl(records, base);
}

std::vector<SampleRecord> read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw InvalidConfig("cannot open manifest " + manifest_path.string());
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
  };
  std::vector<SampleRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      SampleRecord r;
      r.image_path = resolve(j.at("image_path").get<std::string>());
      r.label = j.at("label").get<int>();
      if (r.label != 0 && r.label != 1) throw InvalidConfig("label must be 0 or 1");
      if (j.contains("mask_path") && !j["mask_path"].is_null()) r.mask_path = resolve(j["mask_path"].get<std::string>());
      r.source = parse_source(j.at("source").get<std::string>());
      if (j.contains("split") && !j["split"].is_null()) r.split = parse_split(j["split"].get<std::string>());
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw InvalidConfig(manifest_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_manifest(const std::vector<SampleRecord>& records,
                                                                               double train_fraction,
                                                                               std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw InvalidConfig("train_fraction must lie in (0,1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) by_class[records[i].label == 1].push_back(i);
  for (const auto& cls : by_class)
    if (cls.size() < 2) throw SplitTooSmall("each class needs at least 2 records to split");

  const std::size_t n = records.size();
  const auto total_train = static_cast<std::size_t>(std::floor(train_fraction * n + 1e-9));

  // Per-class quotas: floor of the proportional share, remainder to the
  // classes with the largest fractional part (class 0 first on ties).
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> frac{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double share = train_fraction * by_class[c].size();
    quota[c] = static_cast<std::size_t>(std::floor(share + 1e-9));
    frac[c] = share - quota[c];
    assigned += quota[c];
  }
  while (assigned < total_train) {
    const int c = frac[1] > frac[0] ? 1 : 0;
    ++quota[c];
    frac[c] = -1;
    ++assigned;
  }

  std::vector<bool> is_train(n, false);
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    shuffle(idx, rng);
    for (std::size_t k = 0; k < quota[c]; ++k) is_train[idx[k]] = true;
  }

  std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> out;
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r = records[i];
    r.split = is_train[i] ? Split::train : Split::val;
    (is_train[i] ? out.first : out.second).push_back(std::move(r));
  }
  return out;
}

LabeledImage resize_sample(const LabeledImage& sample, const PreprocessConfig& cfg) {
  cfg.validate();
  LabeledImage out;
  out.label = sample.label;
  out.image = resize_bilinear(sample.image, cfg.target_size, cfg.target_size);
  out.image.clamp_unit();
  if (sample.mask) out.mask = resize_nearest(*sample.mask, cfg.target_size, cfg.target_size);
  return out;
}

LabeledImage load_resized(const SampleRecord& record, const PreprocessConfig& cfg) {
  LabeledImage raw;
  raw.label = record.label;
  raw.image = decode_image(record.image_path);
  if (record.mask_path) raw.mask = decode_mask(*record.mask_path);
  return resize_sample(raw, cfg);
}

LabeledImage load_and_preprocess(const SampleRecord& record, const PreprocessConfig& cfg) {
  LabeledImage s = load_resized(record, cfg);
  s.image = normalize(s.image, cfg);
  return s;
}

ImageTensor normalize(const ImageTensor& unit, const PreprocessConfig& cfg) {
  if (unit.domain() != ValueDomain::unit) throw InvalidConfig("normalize expects a unit-domain image");
  ImageTensor out = unit;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = i % 3;
    d[i] = (d[i] - cfg.channel_mean[c]) / cfg.channel_std[c];
  }
  out.set_domain(ValueDomain::normalized);
  return out;
}

ImageTensor denormalize(const ImageTensor& normalized, const PreprocessConfig& cfg) {
  if (normalized.domain() != ValueDomain::normalized) throw InvalidConfig("denormalize expects a normalized image");
  ImageTensor out = normalized;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = i % 3;
    d[i] = d[i] * cfg.channel_std[c] + cfg.channel_mean[c];
  }
  out.set_domain(ValueDomain::unit);
  return out;
}

namespace {

void clamp01(std::span<float> d) {
  for (float& v : d) v = std::clamp(v, 0.0f, 1.0f);
}

void adjust_saturation(ImageTensor& img, float factor) {
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); i += 3) {
    const float g = luma(d[i], d[i + 1], d[i + 2]);
    for (std::size_t c = 0; c < 3; ++c) d[i + c] = g + factor * (d[i + c] - g);
  }
  clamp01(d);
}

void adjust_brightness(ImageTensor& img, float factor) {
  auto d = img.data();
  for (float& v : d) v *= factor;
  clamp01(d);
}

void adjust_contrast(ImageTensor& img, float factor) {
  auto d = img.data();
  double sum = 0;
  for (std::size_t i = 0; i < d.size(); i += 3) sum += luma(d[i], d[i + 1], d[i + 2]);
  const auto mean = static_cast<float>(sum / (d.size() / 3));
  for (float& v : d) v = mean + factor * (v - mean);
  clamp01(d);
}

}  // namespace

ImageTensor augment(const ImageTensor& image, const std::array<float, 3>& factors, std::uint64_t seed) {
  if (image.domain() != ValueDomain::unit) throw InvalidConfig("augment expects a unit-domain image");
  for (float f : factors)
    if (!(f >= 0 && f < 1)) throw InvalidConfig("augment factors must lie in [0,1)");

  Rng rng(seed);
  std::array<float, 3> draw{};
  for (int k = 0; k < 3; ++k) draw[k] = static_cast<float>(1.0 - factors[k] + 2.0 * factors[k] * uniform01(rng));

  ImageTensor out = image;
  // A factor of exactly 1 is skipped so that zero jitter is a bitwise identity.
  if (draw[0] != 1.0f) adjust_saturation(out, draw[0]);
  if (draw[1] != 1.0f) adjust_brightness(out, draw[1]);
  if (draw[2] != 1.0f) adjust_contrast(out, draw[2]);
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = splitmix64(base ^ 0x6a09e667f3bcc909ULL);
  s = splitmix64(s ^ a);
  return splitmix64(s ^ (b * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL));
}

}  // namespace floodforensics
