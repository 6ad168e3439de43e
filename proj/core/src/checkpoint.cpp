#include "convdysat/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "convdysat/error.hpp"

namespace convdysat {
namespace {

constexpr char kMagic[5] = {'C', 'D', 'Y', 'S', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw InputError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

CheckpointRecord tensor_record(const std::string& name, const Tensor& t) {
  return {name, t.shape(), t.storage()};
}

CheckpointRecord scalar_record(const std::string& name, double v) { return {name, {1}, {v}}; }

std::uint64_t as_u64(double v) { return static_cast<std::uint64_t>(v); }

const std::string kParam = "param/";
const std::string kFirst = "adam.m/";
const std::string kSecond = "adam.v/";
const std::string kStep = "step/";

}  // namespace

void write_records(std::ostream& out, const std::vector<CheckpointRecord>& records) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (shape_size(r.shape) != r.data.size()) throw DimensionError("checkpoint record '" + r.name + "' shape/data mismatch");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put<std::uint64_t>(out, d);
    for (double v : r.data) put<double>(out, v);
  }
}

std::vector<CheckpointRecord> read_records(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw InputError("checkpoint: bad magic (expected CDYS1)");
  }
  const auto count = get<std::uint32_t>(in);
  std::vector<CheckpointRecord> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord r;
    r.name.resize(get<std::uint32_t>(in));
    if (!in.read(r.name.data(), static_cast<std::streamsize>(r.name.size()))) throw InputError("checkpoint: truncated name");
    const auto rank = get<std::uint32_t>(in);
    for (std::uint32_t k = 0; k < rank; ++k) r.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
    r.data.resize(shape_size(r.shape));
    for (auto& v : r.data) v = get<double>(in);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<CheckpointRecord> checkpoint_records(const TrainState& state, std::uint64_t config_hash) {
  std::vector<CheckpointRecord> out;
  out.push_back({"config.hash", {2}, {static_cast<double>(config_hash >> 32), static_cast<double>(config_hash & 0xFFFFFFFFULL)}});
  out.push_back(scalar_record("state.step", state.step));
  out.push_back(scalar_record("state.epoch", state.epoch));
  out.push_back(scalar_record("state.finished", state.finished ? 1.0 : 0.0));
  out.push_back(scalar_record("adam.step", static_cast<double>(state.adam.step)));
  for (const auto& [name, t] : state.params) out.push_back(tensor_record(kParam + name, t));
  for (const auto& [name, m] : state.adam.first_moment) out.push_back({kFirst + name, {m.size()}, m});
  for (const auto& [name, v] : state.adam.second_moment) out.push_back({kSecond + name, {v.size()}, v});
  CheckpointRecord log{"log", {state.log.size(), 3}, {}};
  for (const auto& r : state.log) log.data.insert(log.data.end(), {double(r.epoch), double(r.time_step), r.loss});
  out.push_back(std::move(log));
  for (const auto& [t, params] : state.step_params) {
    for (const auto& [name, tensor] : params) out.push_back(tensor_record(kStep + std::to_string(t) + "/" + name, tensor));
  }
  return out;
}

TrainState state_from_records(const std::vector<CheckpointRecord>& records, std::uint64_t* config_hash) {
  TrainState state;
  for (const auto& r : records) {
    if (r.name == "config.hash") {
      if (config_hash && r.data.size() == 2) *config_hash = (as_u64(r.data[0]) << 32) | as_u64(r.data[1]);
    } else if (r.name == "state.step") {
      state.step = static_cast<int>(r.data.at(0));
    } else if (r.name == "state.epoch") {
      state.epoch = static_cast<int>(r.data.at(0));
    } else if (r.name == "state.finished") {
      state.finished = r.data.at(0) != 0.0;
    } else if (r.name == "adam.step") {
      state.adam.step = as_u64(r.data.at(0));
    } else if (r.name.starts_with(kParam)) {
      state.params.add(r.name.substr(kParam.size()), Tensor(r.shape, r.data));
    } else if (r.name.starts_with(kFirst)) {
      state.adam.first_moment[r.name.substr(kFirst.size())] = r.data;
    } else if (r.name.starts_with(kSecond)) {
      state.adam.second_moment[r.name.substr(kSecond.size())] = r.data;
    } else if (r.name == "log") {
      for (std::size_t i = 0; i + 2 < r.data.size(); i += 3) {
        state.log.push_back({static_cast<int>(r.data[i]), static_cast<int>(r.data[i + 1]), r.data[i + 2], 0.0});
      }
    } else if (r.name.starts_with(kStep)) {
      const auto rest = r.name.substr(kStep.size());
      const auto slash = rest.find('/');
      if (slash == std::string::npos) throw InputError("checkpoint: malformed record name '" + r.name + "'");
      state.step_params[std::stoi(rest.substr(0, slash))].add(rest.substr(slash + 1), Tensor(r.shape, r.data));
    } else {
      throw InputError("checkpoint: unknown record '" + r.name + "'");
    }
  }
  return state;
}

void save_checkpoint(const std::string& path, const TrainState& state, std::uint64_t config_hash) {
  // Write-then-rename so an interrupted save never clobbers the previous checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint '" + tmp + "'");
    write_records(out, checkpoint_records(state, config_hash));
    if (!out) throw InputError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path, std::uint64_t* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  return state_from_records(read_records(in), config_hash);
}

}  // namespace convdysat
