#include "jam/checkpoint.hpp"

#include "binary_io.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

namespace jam {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(::crc32(crc, data, static_cast<uInt>(n)));
}

}  // namespace detail

namespace {
constexpr char kMagic[4] = {'J', 'A', 'M', 'C'};
}

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store) {
  detail::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(store.size()));
  for (const auto& p : store.all()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.put_bytes(p.name.data(), p.name.size());
    w.put<std::uint32_t>(2);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(p.value.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(p.value.cols()));
    w.put_bytes(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  return std::move(w.bytes());
}

ParameterStore decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  char magic[4];
  try {
    r.get_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: version mismatch (file " + std::to_string(version) + ")");
    }
    const auto count = r.get<std::uint64_t>("count");
    ParameterStore store;
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto len = r.get<std::uint32_t>("name length");
      std::string name(len, '\0');
      r.get_bytes(name.data(), len, "name");
      const auto rank = r.get<std::uint32_t>("rank");
      if (rank != 2) throw CheckpointError("checkpoint: unsupported rank for " + name);
      const auto rows = r.get<std::uint64_t>("extent");
      const auto cols = r.get<std::uint64_t>("extent");
      Matrix value(static_cast<Index>(rows), static_cast<Index>(cols));
      r.get_bytes(value.data(), sizeof(double) * rows * cols, "values");
      store.add(std::move(name), std::move(value));
    }
    if (r.remaining() != 0) throw CheckpointError("checkpoint: trailing bytes");
    return store;
  } catch (const detail::TruncatedError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const ParameterStore& store) {
  detail::write_file(path, encode_checkpoint(store));
}

ParameterStore load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

void assign_parameters(ParameterStore& target, const ParameterStore& loaded) {
  if (target.size() != loaded.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(loaded.size()) + " parameters, model expects " +
                          std::to_string(target.size()));
  }
  for (int i = 0; i < target.size(); ++i) {
    const auto& src = loaded[i];
    auto& dst = target[i];
    if (src.name != dst.name || src.value.rows() != dst.value.rows() || src.value.cols() != dst.value.cols()) {
      throw CheckpointError("checkpoint parameter " + src.name + " does not match model parameter " + dst.name);
    }
  }
  for (int i = 0; i < target.size(); ++i) target[i].value = loaded[i].value;
}

}  // namespace jam
