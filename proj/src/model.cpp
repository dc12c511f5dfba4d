#include "amclip/model.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "amclip/errors.hpp"

namespace amclip {

using ag::Matrix;
using nlohmann::json;

void EncoderConfig::validate() const {
  if (image_height < 1 || image_width < 1 || patch < 1 || dim < 1 || heads < 1 || frame_layers < 0 ||
      temporal_layers < 0 || text_layers < 0 || max_text_len < 2) {
    throw ConfigError("encoder config: sizes must be positive");
  }
  if (image_height % patch != 0 || image_width % patch != 0) {
    throw ConfigError("encoder config: image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                      " is not divisible by patch size " + std::to_string(patch));
  }
  if (dim % heads != 0) {
    throw ConfigError("encoder config: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
}

// ---------------------------------------------------------------------------
// Tokenizer

std::vector<std::string> TextTokenizer::split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TextTokenizer::TextTokenizer(const std::vector<std::string>& texts, int max_len) {
  std::set<std::string> all;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) all.insert(std::move(w));
  }
  *this = from_words({all.begin(), all.end()}, max_len);
}

TextTokenizer TextTokenizer::from_words(std::vector<std::string> words, int max_len) {
  if (max_len < 2) throw ConfigError("tokenizer: max length must be at least 2");
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  TextTokenizer tok;
  tok.words_ = std::move(words);
  tok.max_len_ = max_len;
  for (std::size_t i = 0; i < tok.words_.size(); ++i) tok.ids_[tok.words_[i]] = static_cast<int>(i) + 3;
  return tok;
}

TextTokenizer::Result TextTokenizer::tokenize(const std::string& text) const {
  Result r;
  r.ids.push_back(kBos);
  for (const auto& w : split_words(text)) {
    if (static_cast<int>(r.ids.size()) >= max_len_ - 1) {
      r.truncated = true;
      break;
    }
    auto it = ids_.find(w);
    r.ids.push_back(it == ids_.end() ? kUnk : it->second);
  }
  r.ids.push_back(kEos);
  return r;
}

std::string TextTokenizer::detokenize(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kBos || id == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += (id >= 3 && id - 3 < static_cast<int>(words_.size())) ? words_[id - 3] : "<unk>";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

int ParamStore::add(std::string name, Matrix value) {
  if (index_.count(name)) throw ArgumentError("duplicate parameter name " + name);
  const int slot = static_cast<int>(values_.size());
  index_[name] = slot;
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return slot;
}

int ParamStore::slot(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

Gradients::Gradients(const ParamStore& params) {
  values.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params.value(static_cast<int>(i));
    values.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
}

void Gradients::scale(double s) {
  for (auto& v : values) v *= s;
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  // Zero-mean normal with variance 2 / (fan_in + fan_out).
  Matrix xavier(int fan_in, int fan_out) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = dist(rng_);
    return m;
  }

  Matrix normal(int rows, int cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = dist(rng_);
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

BlockSlots add_block(ParamStore& ps, Initializer& init, const std::string& prefix, int d) {
  BlockSlots b{};
  auto zeros = [](int r, int c) { return Matrix::Zero(r, c); };
  b.ln1_gain = ps.add(prefix + ".ln1.gain", Matrix::Ones(1, d));
  b.ln1_bias = ps.add(prefix + ".ln1.bias", zeros(1, d));
  b.wq = ps.add(prefix + ".attn.wq", init.xavier(d, d));
  b.bq = ps.add(prefix + ".attn.bq", zeros(1, d));
  b.wk = ps.add(prefix + ".attn.wk", init.xavier(d, d));
  b.bk = ps.add(prefix + ".attn.bk", zeros(1, d));
  b.wv = ps.add(prefix + ".attn.wv", init.xavier(d, d));
  b.bv = ps.add(prefix + ".attn.bv", zeros(1, d));
  b.wo = ps.add(prefix + ".attn.wo", init.xavier(d, d));
  b.bo = ps.add(prefix + ".attn.bo", zeros(1, d));
  b.ln2_gain = ps.add(prefix + ".ln2.gain", Matrix::Ones(1, d));
  b.ln2_bias = ps.add(prefix + ".ln2.bias", zeros(1, d));
  b.ff1_w = ps.add(prefix + ".ff1.w", init.xavier(d, 4 * d));
  b.ff1_b = ps.add(prefix + ".ff1.b", zeros(1, 4 * d));
  b.ff2_w = ps.add(prefix + ".ff2.w", init.xavier(4 * d, d));
  b.ff2_b = ps.add(prefix + ".ff2.b", zeros(1, d));
  return b;
}

}  // namespace

Model Model::create(const EncoderConfig& config, const LabelVocabulary& classes, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  m.classes = classes;
  m.tokenizer = TextTokenizer(classes.classes(), config.max_text_len);
  Initializer init(seed);
  ParamStore& ps = m.params;
  ModelSlots& s = m.slots;
  const int d = config.dim;

  s.patch_w = ps.add("video.patch.w", init.xavier(config.patch_features(), d));
  s.patch_b = ps.add("video.patch.b", Matrix::Zero(1, d));
  s.summary = ps.add("video.summary", Matrix::Zero(1, d));
  s.kind = ps.add("video.kind", init.normal(2, d, 0.02));
  for (int l = 0; l < config.frame_layers; ++l) {
    s.frame.push_back(add_block(ps, init, "video.frame." + std::to_string(l), d));
  }
  s.frame_ln_gain = ps.add("video.frame.ln_out.gain", Matrix::Ones(1, d));
  s.frame_ln_bias = ps.add("video.frame.ln_out.bias", Matrix::Zero(1, d));
  for (int l = 0; l < config.temporal_layers; ++l) {
    s.temporal.push_back(add_block(ps, init, "video.temporal." + std::to_string(l), d));
  }
  s.temporal_ln_gain = ps.add("video.temporal.ln_out.gain", Matrix::Ones(1, d));
  s.temporal_ln_bias = ps.add("video.temporal.ln_out.bias", Matrix::Zero(1, d));

  s.text_embed = ps.add("text.embed", init.xavier(m.tokenizer.vocab_size(), d));
  for (int l = 0; l < config.text_layers; ++l) {
    s.text.push_back(add_block(ps, init, "text.block." + std::to_string(l), d));
  }
  s.text_ln_gain = ps.add("text.ln_out.gain", Matrix::Ones(1, d));
  s.text_ln_bias = ps.add("text.ln_out.bias", Matrix::Zero(1, d));

  s.align_wq = ps.add("align.wq", init.xavier(d, d));
  s.align_bq = ps.add("align.bq", Matrix::Zero(1, d));
  s.align_wk = ps.add("align.wk", init.xavier(d, d));
  s.align_bk = ps.add("align.bk", Matrix::Zero(1, d));
  s.align_wv = ps.add("align.wv", init.xavier(d, d));
  s.align_bv = ps.add("align.bv", Matrix::Zero(1, d));
  // Output projection starts at zero so alignment is initially the identity.
  s.align_wo = ps.add("align.wo", Matrix::Zero(d, d));
  s.align_bo = ps.add("align.bo", Matrix::Zero(1, d));
  return m;
}

ag::Var Graph::param(int slot) {
  auto& v = bound_[slot];
  if (!v.valid()) v = tape_.leaf(model_.params.value(slot));
  return v;
}

void Graph::collect(Gradients& grads) const {
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i].valid()) grads.values[i] += tape_.grad(bound_[i]);
  }
}

Matrix sinusoidal_table(int positions, int dim) {
  Matrix t(positions, dim);
  for (int p = 0; p < positions; ++p) {
    for (int i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / dim);
      t(p, i) = (i % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
    }
  }
  return t;
}

Matrix load_external_text_embeddings(const std::filesystem::path& path, const LabelVocabulary& classes, int dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open text embedding file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("text embedding file: ") + e.what());
  }
  if (!j.is_object()) throw DataError("text embedding file must be a JSON object");
  Matrix out(static_cast<Eigen::Index>(classes.size()), dim);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& name = classes.name(c);
    if (!j.contains(name)) throw DataError("text embedding file lacks class '" + name + "'");
    const auto& arr = j[name];
    if (!arr.is_array() || static_cast<int>(arr.size()) != dim) {
      throw ShapeMismatchError("text embedding for '" + name + "' must have " + std::to_string(dim) + " numbers");
    }
    for (int i = 0; i < dim; ++i) out(static_cast<Eigen::Index>(c), i) = arr[i].get<double>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr char kCkptMagic[4] = {'A', 'M', 'C', 'K'};
constexpr std::uint8_t kCkptVersion = 0x01;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw CacheCorruptionError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::uint32_t crc_of(const std::string& s, std::size_t begin, std::size_t end) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(s.data() + begin), static_cast<uInt>(end - begin)));
}

json config_to_json(const EncoderConfig& c) {
  return {{"image_height", c.image_height}, {"image_width", c.image_width},     {"patch", c.patch},
          {"dim", c.dim},                   {"heads", c.heads},                 {"frame_layers", c.frame_layers},
          {"temporal_layers", c.temporal_layers}, {"text_layers", c.text_layers}, {"max_text_len", c.max_text_len},
          {"temporal_positions", c.temporal_positions}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.image_height = j.at("image_height");
  c.image_width = j.at("image_width");
  c.patch = j.at("patch");
  c.dim = j.at("dim");
  c.heads = j.at("heads");
  c.frame_layers = j.at("frame_layers");
  c.temporal_layers = j.at("temporal_layers");
  c.text_layers = j.at("text_layers");
  c.max_text_len = j.at("max_text_len");
  c.temporal_positions = j.at("temporal_positions");
  return c;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  json meta;
  meta["config"] = config_to_json(model.config);
  meta["classes"] = model.classes.classes();
  meta["words"] = model.tokenizer.words();
  if (model.external_text) {
    const auto& e = *model.external_text;
    std::vector<std::vector<double>> rows(e.rows(), std::vector<double>(e.cols()));
    for (Eigen::Index r = 0; r < e.rows(); ++r)
      for (Eigen::Index c = 0; c < e.cols(); ++c) rows[r][c] = e(r, c);
    meta["external_text"] = rows;
  }
  const std::string meta_str = meta.dump();

  std::string out(kCkptMagic, 4);
  out.push_back(static_cast<char>(kCkptVersion));
  put_u32(out, static_cast<std::uint32_t>(meta_str.size()));
  out += meta_str;
  put_u32(out, static_cast<std::uint32_t>(model.params.size()));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& name = model.params.name(static_cast<int>(i));
    const auto& v = model.params.value(static_cast<int>(i));
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(v.rows()));
    put_u32(out, static_cast<std::uint32_t>(v.cols()));
    // Row-major payload.
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v(r, c))));
  }
  put_u32(out, crc_of(out, 0, out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 13 || std::memcmp(in.data(), kCkptMagic, 4) != 0) {
    throw CacheCorruptionError("checkpoint: bad magic");
  }
  if (static_cast<std::uint8_t>(in[4]) != kCkptVersion) throw CacheCorruptionError("checkpoint: bad version");
  {
    std::size_t tail = in.size() - 4;
    if (crc_of(in, 0, tail) != get_u32(in, tail)) throw CacheCorruptionError("checkpoint: checksum mismatch");
  }
  std::size_t pos = 5;
  const std::uint32_t meta_len = get_u32(in, pos);
  if (pos + meta_len > in.size()) throw CacheCorruptionError("checkpoint truncated");
  const json meta = json::parse(in.substr(pos, meta_len));
  pos += meta_len;

  const EncoderConfig cfg = config_from_json(meta.at("config"));
  const LabelVocabulary classes(meta.at("classes").get<std::vector<std::string>>());
  Model model = Model::create(cfg, classes, 0);
  model.tokenizer = TextTokenizer::from_words(meta.at("words").get<std::vector<std::string>>(), cfg.max_text_len);
  if (model.tokenizer.vocab_size() != model.params.value(model.slots.text_embed).rows()) {
    throw ShapeMismatchError("checkpoint: text vocabulary does not match class names");
  }
  if (meta.contains("external_text")) {
    const auto rows = meta["external_text"].get<std::vector<std::vector<double>>>();
    Matrix e(static_cast<Eigen::Index>(rows.size()), cfg.dim);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (int c = 0; c < cfg.dim; ++c) e(static_cast<Eigen::Index>(r), c) = rows[r].at(c);
    model.external_text = e;
  }

  const std::uint32_t groups = get_u32(in, pos);
  if (groups != model.params.size()) throw ShapeMismatchError("checkpoint: parameter group count mismatch");
  for (std::uint32_t g = 0; g < groups; ++g) {
    const std::uint32_t name_len = get_u32(in, pos);
    if (pos + name_len > in.size()) throw CacheCorruptionError("checkpoint truncated");
    const std::string name = in.substr(pos, name_len);
    pos += name_len;
    const std::uint32_t rows = get_u32(in, pos);
    const std::uint32_t cols = get_u32(in, pos);
    Matrix& v = model.params.value(model.params.slot(name));
    if (v.rows() != static_cast<Eigen::Index>(rows) || v.cols() != static_cast<Eigen::Index>(cols)) {
      throw ShapeMismatchError("checkpoint: shape mismatch for " + name);
    }
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = std::bit_cast<float>(get_u32(in, pos));
  }
  return model;
}

}  // namespace amclip
