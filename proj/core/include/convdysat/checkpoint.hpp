#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "convdysat/tensor.hpp"
#include "convdysat/training.hpp"

namespace convdysat {

// Binary container: magic "CDYS1", u32 record count, then per record a u32-length-prefixed
// name, u32 rank, u64 extents and float64 data. All integers and floats little-endian.
struct CheckpointRecord {
  std::string name;
  Shape shape;  // extents may be zero for empty records
  std::vector<double> data;
};

void write_records(std::ostream& out, const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_records(std::istream& in);

// Parameters, optimiser moments, counters, loss log and per-step parameters, plus a hash
// of the configuration that produced them.
std::vector<CheckpointRecord> checkpoint_records(const TrainState& state, std::uint64_t config_hash);
TrainState state_from_records(const std::vector<CheckpointRecord>& records, std::uint64_t* config_hash = nullptr);

void save_checkpoint(const std::string& path, const TrainState& state, std::uint64_t config_hash);
TrainState load_checkpoint(const std::string& path, std::uint64_t* config_hash = nullptr);

}  // namespace convdysat
