#include "amclip/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amclip/errors.hpp"

namespace amclip {

namespace fs = std::filesystem;
using nlohmann::json;

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  classes_ = std::move(names);
  for (std::size_t i = 0; i < classes_.size(); ++i) index_[classes_[i]] = i;
}

LabelVocabulary LabelVocabulary::from_records(const std::vector<ClipRecord>& records) {
  std::vector<std::string> names;
  for (const auto& r : records) names.insert(names.end(), r.labels.begin(), r.labels.end());
  return LabelVocabulary(std::move(names));
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelVocabulary::index(const std::string& name) const {
  auto i = find(name);
  if (!i) throw ValidationError("unknown class name '" + name + "'");
  return *i;
}

std::vector<double> LabelVocabulary::encode(const std::vector<std::string>& labels) const {
  std::vector<double> y(classes_.size(), 0.0);
  for (const auto& l : labels) y[index(l)] = 1.0;
  return y;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

ClipRecord parse_record(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(lineno, "record is not a JSON object");
  static const std::set<std::string> kFields = {"clip_id", "frame_source", "frame_count", "labels"};
  for (const auto& [key, _] : j.items()) {
    if (!kFields.count(key)) throw ParseError(lineno, "unexpected field '" + key + "'");
  }
  for (const auto& key : kFields) {
    if (!j.contains(key)) throw ParseError(lineno, "missing field '" + key + "'");
  }
  if (!j["clip_id"].is_string()) throw ParseError(lineno, "clip_id must be a string");
  if (!j["frame_source"].is_string()) throw ParseError(lineno, "frame_source must be a string");
  if (!j["frame_count"].is_number_integer()) throw ParseError(lineno, "frame_count must be an integer");
  if (!j["labels"].is_array()) throw ParseError(lineno, "labels must be an array");

  ClipRecord r;
  r.clip_id = j["clip_id"].get<std::string>();
  r.frame_source = j["frame_source"].get<std::string>();
  auto count = j["frame_count"].get<std::int64_t>();
  for (const auto& l : j["labels"]) {
    if (!l.is_string()) throw ParseError(lineno, "labels must be strings");
    r.labels.push_back(l.get<std::string>());
  }
  if (r.clip_id.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty clip_id");
  if (count < 2 || count > std::numeric_limits<int>::max()) {
    throw ValidationError("line " + std::to_string(lineno) + ": frame_count must be >= 2, got " +
                          std::to_string(count));
  }
  r.frame_count = static_cast<int>(count);
  return r;
}

}  // namespace

std::vector<ClipRecord> parse_manifest(std::istream& in) {
  std::vector<ClipRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto r = parse_record(line, lineno);
    if (!seen.insert(r.clip_id).second) {
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate clip_id '" + r.clip_id + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<ClipRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

std::string serialize_record(const ClipRecord& r) {
  json j;
  j["clip_id"] = r.clip_id;
  j["frame_source"] = r.frame_source;
  j["frame_count"] = r.frame_count;
  j["labels"] = r.labels;
  return j.dump();
}

void write_manifest(std::ostream& out, const std::vector<ClipRecord>& records) {
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

void save_manifest(const fs::path& path, const std::vector<ClipRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  write_manifest(out, records);
}

// ---------------------------------------------------------------------------
// Images (netpbm)

namespace {

int next_header_int(std::istream& in) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v)) throw IngestionError("truncated image header");
  return v;
}

}  // namespace

Image read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open image " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '6' && magic[1] != '5')) {
    throw IngestionError("unsupported image format (expected binary PPM/PGM): " + path.string());
  }
  const int channels = magic[1] == '6' ? 3 : 1;
  const int w = next_header_int(in);
  const int h = next_header_int(in);
  const int maxval = next_header_int(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw IngestionError("bad image header: " + path.string());
  }
  in.get();  // single whitespace before raster
  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IngestionError("truncated image raster: " + path.string());
  }
  Image img(h, w);
  const double denom = maxval;
  for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p) {
    for (int c = 0; c < 3; ++c) {
      const std::size_t s = (p * channels + (channels == 3 ? c : 0)) * bytes_per_sample;
      const int v = bytes_per_sample == 2 ? (raw[s] << 8 | raw[s + 1]) : raw[s];
      img.data[p * 3 + c] = v / denom;
    }
  }
  return img;
}

void write_image(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

std::string frame_file_name(int index) {
  std::ostringstream os;
  os << std::setw(5) << std::setfill('0') << index << ".ppm";
  return os.str();
}

VideoClip load_clip(const ClipRecord& record, const fs::path& base_dir) {
  fs::path dir = record.frame_source;
  if (dir.is_relative() && !base_dir.empty()) dir = base_dir / dir;
  if (!fs::is_directory(dir)) {
    throw IngestionError("frame_source is not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (static_cast<int>(files.size()) != record.frame_count) {
    throw IngestionError("clip '" + record.clip_id + "': expected " + std::to_string(record.frame_count) +
                         " frames, found " + std::to_string(files.size()));
  }
  std::sort(files.begin(), files.end());
  VideoClip clip;
  clip.clip_id = record.clip_id;
  clip.frames.reserve(files.size());
  for (const auto& f : files) {
    clip.frames.push_back(read_image(f));
    if (!clip.frames.back().same_shape(clip.frames.front())) {
      throw IngestionError("clip '" + record.clip_id + "': inconsistent frame dimensions in " + f.string());
    }
  }
  return clip;
}

// ---------------------------------------------------------------------------
// Flow cache

namespace {

constexpr char kMagic[4] = {'A', 'M', 'C', 'F'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kHeaderSize = 4 + 1 + 4 + 4 + 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_flow_cache(const std::vector<FlowField>& flows) {
  const std::uint32_t h = flows.empty() ? 0 : flows.front().height;
  const std::uint32_t w = flows.empty() ? 0 : flows.front().width;
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  put_u32(out, h);
  put_u32(out, w);
  put_u32(out, static_cast<std::uint32_t>(flows.size()));
  const std::size_t body_start = out.size();
  for (const auto& f : flows) {
    if (static_cast<std::uint32_t>(f.height) != h || static_cast<std::uint32_t>(f.width) != w) {
      throw ShapeMismatchError("flow fields in one cache must share dimensions");
    }
    for (float v : f.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, crc_of(out.data() + body_start, out.size() - body_start));
  return out;
}

std::vector<FlowField> decode_flow_cache(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize + 4) throw CacheCorruptionError("flow cache truncated (header)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CacheCorruptionError("flow cache: bad magic");
  if (bytes[4] != kVersion) {
    throw CacheCorruptionError("flow cache: unsupported version " + std::to_string(bytes[4]));
  }
  const std::uint32_t h = get_u32(&bytes[5]);
  const std::uint32_t w = get_u32(&bytes[9]);
  const std::uint32_t count = get_u32(&bytes[13]);
  const std::uint64_t values = std::uint64_t(h) * w * 2 * count;
  const std::uint64_t expected = kHeaderSize + values * 4 + 4;
  if (bytes.size() != expected) {
    throw CacheCorruptionError("flow cache: size " + std::to_string(bytes.size()) + " != expected " +
                               std::to_string(expected));
  }
  const std::uint8_t* body = bytes.data() + kHeaderSize;
  const std::size_t body_len = values * 4;
  if (crc_of(body, body_len) != get_u32(body + body_len)) {
    throw CacheCorruptionError("flow cache: checksum mismatch");
  }
  std::vector<FlowField> flows(count, FlowField(static_cast<int>(h), static_cast<int>(w)));
  const std::uint8_t* p = body;
  for (auto& f : flows) {
    for (auto& v : f.data) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
  }
  return flows;
}

fs::path flow_cache_path(const std::string& clip_id, const fs::path& dir) {
  return dir / (clip_id + ".amcf");
}

void write_flow_cache(const std::string& clip_id, const std::vector<FlowField>& flows, const fs::path& dir) {
  const auto bytes = encode_flow_cache(flows);
  fs::create_directories(dir);
  const auto path = flow_cache_path(clip_id, dir);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write flow cache " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<FlowField> read_flow_cache(const std::string& clip_id, const fs::path& dir,
                                       std::optional<std::pair<int, int>> expected_hw) {
  const auto path = flow_cache_path(clip_id, dir);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open flow cache " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (expected_hw && bytes.size() >= kHeaderSize && std::memcmp(bytes.data(), kMagic, 4) == 0) {
    const auto h = static_cast<int>(get_u32(&bytes[5]));
    const auto w = static_cast<int>(get_u32(&bytes[9]));
    if (h != expected_hw->first || w != expected_hw->second) {
      throw ShapeMismatchError("flow cache for '" + clip_id + "' is " + std::to_string(h) + "x" +
                               std::to_string(w) + ", clip frames are " + std::to_string(expected_hw->first) +
                               "x" + std::to_string(expected_hw->second));
    }
  }
  return decode_flow_cache(bytes);
}

}  // namespace amclip
