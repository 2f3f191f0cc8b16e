#include "graphvec/blockio.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "graphvec/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "block files are little-endian; this build targets LE hosts only");

namespace graphvec {

namespace {

constexpr char kMagic[8] = {'G', 'V', 'B', 'K', '0', '0', '0', '1'};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

void BlockFile::add_f64(const std::string& name, const Matrix& m) {
  Block b;
  b.name = name;
  b.dtype = "f64";
  b.rows = m.rows();
  b.cols = m.cols();
  b.f64 = m;
  blocks.push_back(std::move(b));
}

void BlockFile::add_i32(const std::string& name, std::vector<std::int32_t> data, std::int64_t rows,
                        std::int64_t cols) {
  if (static_cast<std::int64_t>(data.size()) != rows * cols)
    throw ShapeError("BlockFile: i32 block '" + name + "' size != rows*cols");
  Block b;
  b.name = name;
  b.dtype = "i32";
  b.rows = rows;
  b.cols = cols;
  b.i32 = std::move(data);
  blocks.push_back(std::move(b));
}

const Block& BlockFile::require(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw MalformedInputError("block file: missing block '" + name + "'");
}

bool BlockFile::has(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return true;
  return false;
}

void write_block_file(const std::string& path, const BlockFile& file) {
  nlohmann::json header;
  header["format"] = file.format;
  header["version"] = file.version;
  header["meta"] = file.meta;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : file.blocks) {
    blocks.push_back({{"name", b.name}, {"dtype", b.dtype}, {"rows", b.rows}, {"cols", b.cols}});
  }
  header["blocks"] = blocks;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot open for writing: " + path);
  out.write(kMagic, 8);
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& b : file.blocks) {
    if (b.dtype == "f64") {
      RowMajorMatrix rm = b.f64;
      out.write(reinterpret_cast<const char*>(rm.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
    } else if (b.dtype == "i32") {
      out.write(reinterpret_cast<const char*>(b.i32.data()),
                static_cast<std::streamsize>(sizeof(std::int32_t) * b.i32.size()));
    } else {
      throw ParameterError("block file: unknown dtype '" + b.dtype + "'");
    }
  }
  if (!out) throw IngestError("write failed: " + path);
}

BlockFile read_block_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw MalformedInputError("block file: bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || len > (1ULL << 32)) throw MalformedInputError("block file: bad header length in " + path);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw MalformedInputError("block file: truncated header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInputError("block file: invalid JSON header in " + path + ": " + e.what());
  }

  BlockFile file;
  try {
    file.format = header.at("format").get<std::string>();
    file.version = header.at("version").get<int>();
    file.meta = header.value("meta", nlohmann::json::object());
    for (const auto& jb : header.at("blocks")) {
      Block b;
      b.name = jb.at("name").get<std::string>();
      b.dtype = jb.at("dtype").get<std::string>();
      b.rows = jb.at("rows").get<std::int64_t>();
      b.cols = jb.at("cols").get<std::int64_t>();
      if (b.rows < 0 || b.cols < 0)
        throw MalformedInputError("block file: negative block shape in " + path);
      if (b.dtype == "f64") {
        RowMajorMatrix rm(b.rows, b.cols);
        in.read(reinterpret_cast<char*>(rm.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
        if (!in) throw MalformedInputError("block file: truncated f64 block '" + b.name + "'");
        b.f64 = rm;
      } else if (b.dtype == "i32") {
        b.i32.resize(static_cast<std::size_t>(b.rows * b.cols));
        in.read(reinterpret_cast<char*>(b.i32.data()),
                static_cast<std::streamsize>(sizeof(std::int32_t) * b.i32.size()));
        if (!in) throw MalformedInputError("block file: truncated i32 block '" + b.name + "'");
      } else {
        throw MalformedInputError("block file: unknown dtype '" + b.dtype + "' in " + path);
      }
      file.blocks.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInputError("block file: malformed header fields in " + path + ": " + e.what());
  }
  return file;
}

}  // namespace graphvec
