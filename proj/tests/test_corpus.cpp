#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "amclip/corpus.hpp"
#include "amclip/errors.hpp"
#include "test_util.hpp"

using namespace amclip;
namespace fs = std::filesystem;

TEST_CASE("manifest parsing") {
  std::istringstream in(
      R"({"clip_id": "a", "frame_source": "f/a", "frame_count": 16, "labels": ["moving"]})"
      "\n"
      R"({"clip_id": "b", "frame_source": "f/b", "frame_count": 16, "labels": ["keeping still", "sensing"]})"
      "\n");
  const auto records = parse_manifest(in);
  REQUIRE(records.size() == 2);
  CHECK(records[0].clip_id == "a");
  CHECK(records[1].labels == std::vector<std::string>{"keeping still", "sensing"});
  const auto vocab = LabelVocabulary::from_records(records);
  CHECK(vocab.classes() == std::vector<std::string>{"keeping still", "moving", "sensing"});
  CHECK(vocab.encode({"sensing"}) == std::vector<double>{0, 0, 1});
}

TEST_CASE("manifest edge cases and errors") {
  std::istringstream empty("");
  const auto none = parse_manifest(empty);
  CHECK(none.empty());
  CHECK(LabelVocabulary::from_records(none).empty());

  std::istringstream short_clip(R"({"clip_id": "a", "frame_source": "x", "frame_count": 1, "labels": ["m"]})");
  CHECK_THROWS_AS(parse_manifest(short_clip), ValidationError);

  std::istringstream dup(
      R"({"clip_id": "a", "frame_source": "x", "frame_count": 2, "labels": ["m"]})"
      "\n"
      R"({"clip_id": "a", "frame_source": "y", "frame_count": 2, "labels": ["m"]})");
  CHECK_THROWS_AS(parse_manifest(dup), ValidationError);

  std::istringstream bad(R"({"clip_id": "a", "frame_source": "x", "frame_count": 2, "labels": ["m"]})"
                         "\n{not json\n");
  try {
    parse_manifest(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::istringstream extra(R"({"clip_id": "a", "frame_source": "x", "frame_count": 2, "labels": [], "x": 1})");
  CHECK_THROWS_AS(parse_manifest(extra), ParseError);
}

TEST_CASE("manifest serialize/parse is idempotent") {
  std::vector<ClipRecord> records = {{"c1", "frames/c1", 16, {"move left", "blinking"}},
                                     {"c \"2\"", "frames/c2", 3, {"keeping still"}}};
  std::ostringstream out;
  write_manifest(out, records);
  std::istringstream in(out.str());
  const auto parsed = parse_manifest(in);
  CHECK(parsed == records);
  std::ostringstream again;
  write_manifest(again, parsed);
  CHECK(again.str() == out.str());
}

TEST_CASE("load_clip") {
  const auto dir = test::temp_dir("load_clip");
  std::mt19937_64 rng(1);
  Image frame = test::random_image(32, 32, rng);
  // 8-bit quantization is what survives the file round trip.
  for (auto& v : frame.data) v = std::round(v * 255.0) / 255.0;

  fs::create_directories(dir / "ok");
  for (int i = 0; i < 16; ++i) write_image(dir / "ok" / frame_file_name(i), frame);
  const VideoClip clip = load_clip({"ok", "ok", 16, {"x"}}, dir);
  REQUIRE(clip.frame_count() == 16);
  for (const auto& f : clip.frames) CHECK(f == frame);

  fs::create_directories(dir / "short");
  for (int i = 0; i < 15; ++i) write_image(dir / "short" / frame_file_name(i), frame);
  CHECK_THROWS_AS(load_clip({"short", "short", 16, {"x"}}, dir), IngestionError);

  fs::create_directories(dir / "mixed");
  write_image(dir / "mixed" / frame_file_name(0), frame);
  write_image(dir / "mixed" / frame_file_name(1), Image(64, 64, 0.5));
  CHECK_THROWS_AS(load_clip({"mixed", "mixed", 2, {"x"}}, dir), IngestionError);
}

TEST_CASE("read_image accepts PGM and 16-bit PPM") {
  const auto dir = test::temp_dir("netpbm");
  {
    std::ofstream f(dir / "g.pgm", std::ios::binary);
    f << "P5\n# comment\n2 1\n255\n";
    f.put(static_cast<char>(0));
    f.put(static_cast<char>(255));
  }
  const Image g = read_image(dir / "g.pgm");
  CHECK(g.at(0, 0, 2) == 0.0);
  CHECK(g.at(0, 1, 1) == 1.0);
  {
    std::ofstream f(dir / "w.ppm", std::ios::binary);
    f << "P6 1 1 65535\n";
    for (int i = 0; i < 3; ++i) {
      f.put(static_cast<char>(0xFF));
      f.put(static_cast<char>(0xFF));
    }
  }
  CHECK(read_image(dir / "w.ppm").at(0, 0, 0) == 1.0);
}

TEST_CASE("flow cache round trip is bit exact") {
  const auto dir = test::temp_dir("flow_cache");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-1e6f, 1e6f);
  std::vector<FlowField> flows(15, FlowField(32, 32));
  for (auto& f : flows)
    for (auto& v : f.data) v = u(rng);
  flows[0].data[0] = std::numeric_limits<float>::denorm_min();
  flows[0].data[1] = -0.0f;
  write_flow_cache("clip", flows, dir);
  const auto back = read_flow_cache("clip", dir, std::make_pair(32, 32));
  REQUIRE(back.size() == flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    CHECK(std::memcmp(back[i].data.data(), flows[i].data.data(), flows[i].data.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("flow cache layout") {
  FlowField f(1, 2);
  f.dx(0, 0) = 1.0f;
  f.dy(0, 1) = -2.0f;
  const auto bytes = encode_flow_cache({f});
  REQUIRE(bytes.size() == 17 + 4 * 4 + 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "AMCF");
  CHECK(bytes[4] == 0x01);
  CHECK(bytes[5] == 1);   // H
  CHECK(bytes[9] == 2);   // W
  CHECK(bytes[13] == 1);  // count
  // 1.0f little endian = 00 00 80 3F
  CHECK(bytes[17] == 0x00);
  CHECK(bytes[20] == 0x3F);
}

TEST_CASE("flow cache corruption") {
  const auto dir = test::temp_dir("flow_cache_bad");
  std::vector<FlowField> flows(3, FlowField(8, 8));
  flows[1].dx(2, 2) = 3.0f;
  auto bytes = encode_flow_cache(flows);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 10);
  CHECK_THROWS_AS(decode_flow_cache(truncated), CacheCorruptionError);

  auto flipped = bytes;
  flipped[30] ^= 0x40;
  CHECK_THROWS_AS(decode_flow_cache(flipped), CacheCorruptionError);

  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_flow_cache(magic), CacheCorruptionError);

  write_flow_cache("c", flows, dir);
  CHECK_THROWS_AS(read_flow_cache("c", dir, std::make_pair(16, 16)), ShapeMismatchError);
  {
    std::ofstream out(flow_cache_path("t", dir), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_flow_cache("t", dir), CacheCorruptionError);
}
