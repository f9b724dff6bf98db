#include "nep/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "nep/error.hpp"

namespace nep::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'E', 'P', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 4);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

void need(std::istream& in) {
  if (!in) throw Error(ErrorCode::kCheckpoint, "truncated checkpoint");
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  need(in);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  need(in);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  need(in);
  return s;
}

Matrix get_matrix(std::istream& in) {
  const auto rows = get_u64(in);
  const auto cols = get_u64(in);
  if (rows > (1ull << 32) || cols > (1ull << 32))
    throw Error(ErrorCode::kCheckpoint, "implausible tensor shape in checkpoint");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(in));
  return m;
}

}  // namespace

Checkpoint snapshot(const ParameterStore& params, const EmbeddingTable& table,
                    std::map<std::string, std::string> metadata) {
  Checkpoint c;
  c.metadata = std::move(metadata);
  for (std::uint32_t p = 0; p < params.size(); ++p)
    c.tensors.emplace_back(params.name(ParamId{p}), params.value(ParamId{p}));
  c.num_objects = table.num_objects();
  c.embedded_objects.assign(table.objects().begin(), table.objects().end());
  c.touched = table.touched_flags();
  c.embeddings = table.values();
  return c;
}

void restore(const Checkpoint& ckpt, ParameterStore& params, EmbeddingTable& table) {
  if (ckpt.tensors.size() != params.size())
    throw Error(ErrorCode::kCheckpoint, "checkpoint tensor count does not match the model");
  for (const auto& [name, value] : ckpt.tensors) {
    const auto id = params.find(name);
    if (!id) throw Error(ErrorCode::kCheckpoint, "checkpoint tensor '" + name + "' not in model");
    auto& dst = params.value(*id);
    if (dst.rows() != value.rows() || dst.cols() != value.cols())
      throw Error(ErrorCode::kCheckpoint, "shape mismatch for tensor '" + name + "'");
    dst = value;
  }
  table = EmbeddingTable(ckpt.embedded_objects, ckpt.num_objects, ckpt.embeddings, ckpt.touched);
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(c.metadata.size()));
  for (const auto& [k, v] : c.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, m] : c.tensors) {
    put_string(out, name);
    put_matrix(out, m);
  }
  put_u64(out, c.num_objects);
  put_u64(out, c.embedded_objects.size());
  for (const auto v : c.embedded_objects) put_u32(out, v);
  out.write(reinterpret_cast<const char*>(c.touched.data()),
            static_cast<std::streamsize>(c.touched.size()));
  put_matrix(out, c.embeddings);
  if (!out) throw Error(ErrorCode::kIo, "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::kCheckpoint, "not a checkpoint (bad magic)");
  const auto version = get_u32(in);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::kCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  const auto n_meta = get_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = get_string(in);
    c.metadata[std::move(k)] = get_string(in);
  }
  const auto n_tensors = get_u32(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto name = get_string(in);
    c.tensors.emplace_back(std::move(name), get_matrix(in));
  }
  c.num_objects = get_u64(in);
  const auto rows = get_u64(in);
  if (rows > c.num_objects) throw Error(ErrorCode::kCheckpoint, "more embedded rows than objects");
  c.embedded_objects.resize(rows);
  for (auto& v : c.embedded_objects) v = get_u32(in);
  c.touched.resize(rows);
  in.read(reinterpret_cast<char*>(c.touched.data()), static_cast<std::streamsize>(rows));
  need(in);
  c.embeddings = get_matrix(in);
  if (static_cast<std::uint64_t>(c.embeddings.rows()) != rows)
    throw Error(ErrorCode::kCheckpoint, "embedding tensor does not match row list");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace nep::nn
