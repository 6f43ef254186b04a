#include <doctest.h>

#include <fstream>
#include <string>

#include "harfuse/container.hpp"
#include "harfuse/errors.hpp"
#include "harfuse/features.hpp"
#include "support.hpp"

using namespace harfuse;
using harfuse::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

ErrorCode code_of(const std::filesystem::path& p, std::string_view magic) {
  try {
    (void)read_container(p, magic);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::contract;
}

}  // namespace

TEST_CASE("container round trip preserves bits") {
  TempDir dir("container");
  const auto path = dir.path() / "x.bin";
  Rng rng(1);
  const linalg::Matrix m = harfuse::testing::random_matrix(3, 5, rng);
  write_container(path, kCcaMagic, R"({"k": 1})", {matrix_block("M", m), {"v", {2}, {-0.0, 1e-300}}});

  const auto bytes = slurp(path);
  CHECK(bytes.substr(0, 6) == "HFCCA1");

  const auto c = read_container(path, kCcaMagic);
  CHECK(c.meta_json == R"({"k":1})");
  CHECK(block_matrix(c.block("M")) == m);
  CHECK(c.block("v").values[1] == 1e-300);
  CHECK(std::signbit(c.block("v").values[0]));
  CHECK_THROWS_AS((void)c.block("missing"), Error);
}

TEST_CASE("container rejects corruption") {
  TempDir dir("corrupt");
  const auto path = dir.path() / "x.bin";
  write_container(path, kSvmMagic, "{}", {{"v", {4}, {1, 2, 3, 4}}});
  const std::string good = slurp(path);

  SUBCASE("wrong magic") {
    CHECK(code_of(path, kCnnMagic) == ErrorCode::deserialization);
    std::string bad = good;
    bad[0] = 'X';
    spit(path, bad);
    CHECK(code_of(path, kSvmMagic) == ErrorCode::deserialization);
  }
  SUBCASE("truncated") {
    spit(path, good.substr(0, good.size() - 3));
    CHECK(code_of(path, kSvmMagic) == ErrorCode::deserialization);
    spit(path, good.substr(0, 9));
    CHECK(code_of(path, kSvmMagic) == ErrorCode::deserialization);
  }
  SUBCASE("trailing bytes") {
    spit(path, good + "zz");
    CHECK(code_of(path, kSvmMagic) == ErrorCode::deserialization);
  }
  SUBCASE("missing file") {
    CHECK(code_of(dir.path() / "nope", kSvmMagic) == ErrorCode::io);
  }
}

TEST_CASE("container from a newer format version names both versions") {
  TempDir dir("version");
  const auto path = dir.path() / "x.bin";
  write_container(path, kCnnMagic, "{}", {});
  std::string bytes = slurp(path);
  const auto pos = bytes.find("\"format_version\":1");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 18, "\"format_version\":7");
  spit(path, bytes);
  try {
    (void)read_container(path, kCnnMagic);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::deserialization);
    CHECK(std::string(e.what()).find("format version 7 is newer than the supported version 1") != std::string::npos);
  }
}

TEST_CASE("feature matrices validate their identities") {
  FeatureMatrix f;
  f.values = linalg::Matrix(3, 2);
  f.sample_ids = {1, 2, 3};
  CHECK_NOTHROW(f.validate());
  f.sample_ids = {1, 2, 2};
  CHECK_THROWS_AS(f.validate(), Error);
  f.sample_ids = {1, 2};
  CHECK_THROWS_AS(f.validate(), Error);

  FeatureMatrix a, b;
  a.values = b.values = linalg::Matrix(2, 1);
  a.sample_ids = {4, 5};
  b.sample_ids = {5, 4};
  try {
    require_aligned(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::alignment);
  }
  b.sample_ids = {4, 5};
  CHECK_NOTHROW(require_aligned(a, b));
}

TEST_CASE("sample ids separate variants of one origin") {
  ImageMeta m;
  m.origin = 10;
  const auto base = sample_id(m);
  for (int v = 1; v <= 7; ++v) {
    m.provenance = {true, v};
    CHECK(sample_id(m) == base + static_cast<std::uint64_t>(v));
  }
  m.origin = 11;
  m.provenance = {};
  CHECK(sample_id(m) == base + 8);
}
