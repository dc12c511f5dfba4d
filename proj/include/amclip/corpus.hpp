#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amclip {

/// H×W×3 image, channel-last, row-major, values nominally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Dense displacement field from frame i to frame i+1, stored as (dx, dy) pairs.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  FlowField() = default;
  FlowField(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 2, 0.0f) {}

  float& dx(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  float& dy(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
  float dx(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  float dy(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
  friend bool operator==(const FlowField&, const FlowField&) = default;
};

struct ClipRecord {
  std::string clip_id;
  std::string frame_source;
  int frame_count = 0;
  std::vector<std::string> labels;

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

struct VideoClip {
  std::string clip_id;
  std::vector<Image> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
};

/// Sorted, de-duplicated class names. Position defines score-vector coordinates.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> names);

  static LabelVocabulary from_records(const std::vector<ClipRecord>& records);

  std::size_t size() const { return classes_.size(); }
  bool empty() const { return classes_.empty(); }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& name(std::size_t i) const { return classes_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index(const std::string& name) const;

  /// Binary indicator vector for a label set; unknown names throw ValidationError.
  std::vector<double> encode(const std::vector<std::string>& labels) const;

 private:
  std::vector<std::string> classes_;
  std::map<std::string, std::size_t> index_;
};

// Manifest: JSON lines with exactly {"clip_id","frame_source","frame_count","labels"}.
std::vector<ClipRecord> parse_manifest(std::istream& in);
std::vector<ClipRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const std::vector<ClipRecord>& records);
void save_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records);
std::string serialize_record(const ClipRecord& record);

/// Reads binary PPM (P6) or PGM (P5) into [0,1]. Gray images are replicated to 3 channels.
Image read_image(const std::filesystem::path& path);
/// Writes an 8-bit binary PPM, clamping to [0,1].
void write_image(const std::filesystem::path& path, const Image& image);

/// Frame file name for index i: zero-padded to 5 digits with a .ppm extension.
std::string frame_file_name(int index);

/// Loads the frames of `record`. Relative frame_source paths resolve against `base_dir`.
VideoClip load_clip(const ClipRecord& record, const std::filesystem::path& base_dir = {});

// Flow cache ("AMCF" v1, little-endian, CRC32 over the body).
std::vector<std::uint8_t> encode_flow_cache(const std::vector<FlowField>& flows);
std::vector<FlowField> decode_flow_cache(const std::vector<std::uint8_t>& bytes);
std::filesystem::path flow_cache_path(const std::string& clip_id, const std::filesystem::path& dir);
void write_flow_cache(const std::string& clip_id, const std::vector<FlowField>& flows,
                      const std::filesystem::path& dir);
/// Reads a cached flow sequence; when `expected_hw` is given the header must match it.
std::vector<FlowField> read_flow_cache(const std::string& clip_id, const std::filesystem::path& dir,
                                       std::optional<std::pair<int, int>> expected_hw = {});

}  // namespace amclip
