#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nep/nn/layers.hpp"

namespace nep::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Self-describing model blob.
///
///   magic "NEPCKPT\0", u32 version,
///   u32 n_meta, n_meta x (str key, str value),
///   u32 n_tensors, n_tensors x (str name, u64 rows, u64 cols, rows*cols f64),
///   u64 num_objects, u64 n_rows, n_rows x u32 object, n_rows x u8 touched,
///   embedding tensor (u64 rows, u64 cols, f64 data)
///
/// Strings are u32 length + bytes; all integers and doubles little-endian;
/// matrices row-major.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Matrix>> tensors;
  std::size_t num_objects = 0;
  std::vector<ObjectIndex> embedded_objects;
  std::vector<std::uint8_t> touched;
  Matrix embeddings;
};

Checkpoint snapshot(const ParameterStore& params, const EmbeddingTable& table,
                    std::map<std::string, std::string> metadata = {});

/// Copies tensors back by name; shapes must match. Replaces the table.
void restore(const Checkpoint& ckpt, ParameterStore& params, EmbeddingTable& table);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nep::nn
