#include "binary_io.hpp"
#include "jam/scene.hpp"

namespace jam {

namespace {

constexpr char kMagic[4] = {'J', 'A', 'M', 'D'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 * 4 + 4 + 8;

std::size_t scene_floats(const SceneDims& d) {
  const std::size_t agents = static_cast<std::size_t>(d.agents);
  return 4 + agents + agents * d.history * SceneDims::state_dim +
         agents * d.map_elements * d.map_points * SceneDims::point_dim + agents * d.future * 2;
}

void put_matrix(detail::ByteWriter& w, const Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) w.put<float>(static_cast<float>(m.data()[i]));
}

void get_matrix(const float*& p, Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(*p++);
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  const auto& d = ds.header.dims;
  if (ds.header.scenes != ds.scenes.size()) {
    throw DatasetError(DatasetError::Code::CountMismatch, "scenes", "header scene count differs from payload");
  }
  detail::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kDatasetVersion);
  for (const int v : {static_cast<int>(ds.header.scenes), d.agents, d.history, d.future, d.map_elements,
                      d.map_points, SceneDims::state_dim, SceneDims::point_dim}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  }
  w.put<float>(static_cast<float>(d.sample_rate_hz));
  w.put<std::uint64_t>(ds.header.seed);
  for (const auto& s : ds.scenes) {
    if (!(s.dims == d)) throw DatasetError(DatasetError::Code::Invalid, "dims", "scene dims differ from header");
    w.put<float>(static_cast<float>(s.kind));
    w.put<float>(static_cast<float>(s.interacting[0]));
    w.put<float>(static_cast<float>(s.interacting[1]));
    w.put<float>(s.low_probability_maneuver ? 1.0f : 0.0f);
    for (const auto t : s.agent_types) w.put<float>(static_cast<float>(t));
    put_matrix(w, s.histories);
    put_matrix(w, s.map);
    put_matrix(w, s.futures);
  }
  const std::uint32_t crc = detail::crc32(w.bytes().data(), w.bytes().size());
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  using Code = DatasetError::Code;
  if (bytes.size() < kHeaderBytes + 4) throw DatasetError(Code::Truncated, "header", "dataset: truncated header");
  detail::ByteReader r(bytes.data(), bytes.size());
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw DatasetError(Code::BadMagic, "magic", "dataset: bad magic");
  Dataset ds;
  ds.header.version = r.get<std::uint32_t>("version");
  if (ds.header.version != kDatasetVersion) {
    throw DatasetError(Code::VersionMismatch, "version",
                       "dataset: version " + std::to_string(ds.header.version) + ", expected " +
                           std::to_string(kDatasetVersion));
  }
  const char* names[8] = {"scenes", "agents", "history", "future", "map_elements", "map_points", "state_dim",
                          "point_dim"};
  std::uint32_t counts[8];
  for (int i = 0; i < 8; ++i) counts[i] = r.get<std::uint32_t>(names[i]);
  auto& d = ds.header.dims;
  ds.header.scenes = counts[0];
  d.agents = static_cast<int>(counts[1]);
  d.history = static_cast<int>(counts[2]);
  d.future = static_cast<int>(counts[3]);
  d.map_elements = static_cast<int>(counts[4]);
  d.map_points = static_cast<int>(counts[5]);
  if (counts[6] != SceneDims::state_dim) throw DatasetError(Code::Invalid, "state_dim", "dataset: unsupported d_s");
  if (counts[7] != SceneDims::point_dim) throw DatasetError(Code::Invalid, "point_dim", "dataset: unsupported d_p");
  if (d.agents < 2 || d.history < 1 || d.future < 1 || d.map_elements < 1 || d.map_points < 1) {
    throw DatasetError(Code::Invalid, "dims", "dataset: invalid dimensions in header");
  }
  d.sample_rate_hz = static_cast<double>(r.get<float>("sample_rate_hz"));
  ds.header.seed = r.get<std::uint64_t>("seed");

  const std::size_t stride = scene_floats(d) * sizeof(float);
  const std::size_t payload = bytes.size() - kHeaderBytes - 4;
  if (payload != stride * ds.header.scenes) {
    if (payload % stride == 0) {
      throw DatasetError(Code::CountMismatch, "scenes",
                         "dataset: header field 'scenes' = " + std::to_string(ds.header.scenes) + " but payload holds " +
                             std::to_string(payload / stride) + " scenes");
    }
    throw DatasetError(Code::Truncated, "payload",
                       "dataset: payload of " + std::to_string(payload) + " bytes is not a whole number of " +
                           std::to_string(stride) + "-byte scenes");
  }
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (detail::crc32(bytes.data(), bytes.size() - 4) != stored_crc) {
    throw DatasetError(Code::Checksum, "crc32", "dataset: checksum mismatch");
  }

  std::vector<float> floats(scene_floats(d));
  ds.scenes.reserve(ds.header.scenes);
  for (std::uint32_t i = 0; i < ds.header.scenes; ++i) {
    r.get_bytes(floats.data(), stride, "scene");
    const float* p = floats.data();
    SceneSample s;
    s.dims = d;
    const int kind = static_cast<int>(*p++);
    if (kind < 0 || kind >= kScenarioKindCount) throw DatasetError(Code::Invalid, "kind", "dataset: bad scenario kind");
    s.kind = static_cast<ScenarioKind>(kind);
    s.interacting = {static_cast<int>(*p++), static_cast<int>(*p++)};
    if (s.interacting[0] < 0 || s.interacting[0] >= d.agents || s.interacting[1] < 0 || s.interacting[1] >= d.agents ||
        s.interacting[0] == s.interacting[1]) {
      throw DatasetError(Code::Invalid, "interacting", "dataset: bad interacting pair");
    }
    s.low_probability_maneuver = *p++ > 0.5f;
    s.agent_types.resize(static_cast<std::size_t>(d.agents));
    for (auto& t : s.agent_types) {
      const int code = static_cast<int>(*p++);
      if (code < 0 || code >= kAgentTypeCount) throw DatasetError(Code::Invalid, "agent_type", "dataset: bad agent type");
      t = static_cast<AgentType>(code);
    }
    s.histories.resize(Index(d.agents) * d.history, SceneDims::state_dim);
    s.map.resize(Index(d.agents) * d.map_elements * d.map_points, SceneDims::point_dim);
    s.futures.resize(Index(d.agents) * d.future, 2);
    get_matrix(p, s.histories);
    get_matrix(p, s.map);
    get_matrix(p, s.futures);
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  detail::write_file(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::string& path) { return decode_dataset(detail::read_file(path)); }

}  // namespace jam
