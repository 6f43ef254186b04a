#include "harfuse/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "harfuse/errors.hpp"

namespace harfuse {

namespace {

using nlohmann::json;

Error deser(const std::filesystem::path& path, const std::string& why) {
  return Error(ErrorCode::deserialization, path.string() + ": " + why);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(const unsigned char* bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

TensorBlock matrix_block(std::string name, const linalg::Matrix& m) {
  return {std::move(name), {m.rows(), m.cols()}, {m.values().begin(), m.values().end()}};
}

linalg::Matrix block_matrix(const TensorBlock& b) {
  if (b.shape.size() != 2)
    throw Error(ErrorCode::deserialization, "block '" + b.name + "' is not a matrix");
  return linalg::Matrix(b.shape[0], b.shape[1], b.values);
}

const TensorBlock& ContainerContents::block(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw Error(ErrorCode::deserialization, "missing block '" + std::string(name) + "'");
}

void write_container(const std::filesystem::path& path, std::string_view magic,
                     const std::string& meta_json, const std::vector<TensorBlock>& blocks) {
  json header;
  header["format_version"] = kContainerFormatVersion;
  header["meta"] = meta_json.empty() ? json::object() : json::parse(meta_json);
  header["blocks"] = json::array();
  for (const auto& b : blocks) {
    if (element_count(b.shape) != b.values.size())
      throw Error(ErrorCode::contract, "block '" + b.name + "' shape does not match its data");
    header["blocks"].push_back({{"name", b.name}, {"shape", b.shape}});
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  put_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& b : blocks) {
    for (double v : b.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

ContainerContents read_container(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());

  if (bytes.size() < magic.size() + 8) throw deser(path, "truncated file");
  if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0)
    throw deser(path, "bad magic bytes, expected " + std::string(magic));

  std::size_t pos = magic.size();
  const std::uint64_t header_len = get_u64(bytes.data() + pos);
  pos += 8;
  if (header_len > bytes.size() - pos) throw deser(path, "truncated header");

  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const json::exception& e) {
    throw deser(path, std::string("malformed header: ") + e.what());
  }
  pos += header_len;

  ContainerContents out;
  try {
    const auto version = header.at("format_version").get<std::uint32_t>();
    if (version > kContainerFormatVersion) {
      throw deser(path, "format version " + std::to_string(version) +
                            " is newer than the supported version " +
                            std::to_string(kContainerFormatVersion));
    }
    if (version < 1) throw deser(path, "invalid format version " + std::to_string(version));
    out.meta_json = header.value("meta", json::object()).dump();
    for (const auto& b : header.at("blocks")) {
      TensorBlock block;
      block.name = b.at("name").get<std::string>();
      block.shape = b.at("shape").get<std::vector<std::size_t>>();
      const std::size_t count = element_count(block.shape);
      if (count > (bytes.size() - pos) / 8)
        throw deser(path, "truncated data in block '" + block.name + "'");
      block.values.resize(count);
      for (std::size_t i = 0; i < count; ++i, pos += 8)
        block.values[i] = std::bit_cast<double>(get_u64(bytes.data() + pos));
      out.blocks.push_back(std::move(block));
    }
  } catch (const json::exception& e) {
    throw deser(path, std::string("malformed header: ") + e.what());
  }
  if (pos != bytes.size()) throw deser(path, "trailing bytes after last block");
  return out;
}

}  // namespace harfuse
