#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "floodforensics/image.hpp"

namespace floodforensics {

enum class Source { RWFI, WSOC, StreetG, WebG132, WebG504, synthetic };
enum class Split { train, val, test };

std::string_view to_string(Source s);
std::string_view to_string(Split s);
Source parse_source(std::string_view name);
Split parse_split(std::string_view name);

/// One dataset entry. Paths are absolute (or relative to the working
/// directory) in memory; manifests store them relative to the manifest file.
struct SampleRecord {
  std::filesystem::path image_path;
  int label = 0;  // 1 = GAN-manipulated, 0 = real
  std::optional<std::filesystem::path> mask_path;
  Source source = Source::synthetic;
  std::optional<Split> split;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct PreprocessConfig {
  int target_size = 224;
  std::array<float, 3> channel_mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> channel_std{0.229f, 0.224f, 0.225f};
  // saturation, brightness, contrast
  std::array<float, 3> augment_factors{0.05f, 0.05f, 0.05f};
  bool augment_enabled = true;

  /// Throws InvalidConfig when an invariant is violated.
  void validate() const;
};

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

struct Manifest {
  std::vector<SampleRecord> records;
  std::vector<SkippedFile> skipped;
};

/// Scan `image_dir` (non-recursive) for PNG/JPEG files, sorted by filename.
/// Masks are paired by file stem. Undecodable files land in `skipped`.
Manifest build_manifest(const std::filesystem::path& image_dir, int label,
                        const std::optional<std::filesystem::path>& mask_dir, Source source,
                        std::optional<Split> split = std::nullopt);

/// JSON-lines manifest I/O. Paths are written relative to the manifest's directory.
void write_manifest(const std::filesystem::path& manifest_path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_manifest(const std::filesystem::path& manifest_path);
std::string manifest_to_jsonl(const std::vector<SampleRecord>& records, const std::filesystem::path& base_dir);

/// Stratified, seeded train/val partition. The returned records carry their split tag.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_manifest(
    const std::vector<SampleRecord>& records, double train_fraction, std::uint64_t seed);

struct LabeledImage {
  ImageTensor image;
  std::optional<FloodMask> mask;
  int label = 0;
};

/// Decode, resize to target_size (bilinear for the image, nearest for the mask).
/// The image stays in the unit domain.
LabeledImage load_resized(const SampleRecord& record, const PreprocessConfig& cfg);

/// Same as load_resized, then per-channel standardization.
LabeledImage load_and_preprocess(const SampleRecord& record, const PreprocessConfig& cfg);

/// Resize an in-memory unit-domain image/mask pair to target_size.
LabeledImage resize_sample(const LabeledImage& sample, const PreprocessConfig& cfg);

ImageTensor normalize(const ImageTensor& unit, const PreprocessConfig& cfg);
ImageTensor denormalize(const ImageTensor& normalized, const PreprocessConfig& cfg);

/// Colour jitter: saturation, brightness and contrast scaled by independent
/// factors drawn from [1-f, 1+f], applied in that order, then clamped to [0,1].
ImageTensor augment(const ImageTensor& image, const std::array<float, 3>& factors, std::uint64_t seed);

/// Deterministic seed derivation from a base seed and a stream of indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// ITU-R 601 luma, used by the jitter operators.
inline float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

}  // namespace floodforensics
