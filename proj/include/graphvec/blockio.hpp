#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphvec/kernels.hpp"

namespace graphvec {

// Shared on-disk container: 8-byte magic, little-endian uint64 header length,
// JSON header, then raw data blocks in header order.  Matrices are row-major
// little-endian; dtype is "f64" or "i32".  All artifact dumps (datasets,
// embeddings, alignment states, checkpoints, graph vectors) use this shape,
// so byte-identical content implies byte-identical files.

struct Block {
  std::string name;
  std::string dtype;  // "f64" | "i32"
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  Matrix f64;                      // populated when dtype == "f64"
  std::vector<std::int32_t> i32;   // populated when dtype == "i32" (row-major)
};

struct BlockFile {
  std::string format;  // e.g. "graphvec.dataset"
  int version = 1;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<Block> blocks;

  void add_f64(const std::string& name, const Matrix& m);
  void add_i32(const std::string& name, std::vector<std::int32_t> data, std::int64_t rows,
               std::int64_t cols);
  const Block& require(const std::string& name) const;  // MalformedInputError if absent
  bool has(const std::string& name) const;
};

void write_block_file(const std::string& path, const BlockFile& file);
BlockFile read_block_file(const std::string& path);

}  // namespace graphvec
