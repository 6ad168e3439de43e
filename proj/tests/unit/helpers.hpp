#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "convdysat/graph.hpp"
#include "convdysat/tensor.hpp"

namespace testutil {

inline convdysat::Tensor random_tensor(convdysat::Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  convdysat::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("convdysat_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Records with one timestamp per step, so binning into `steps` snapshots is exact.
inline std::vector<convdysat::EdgeRecord> records_per_step(
    const std::vector<std::vector<std::pair<std::string, std::string>>>& links_per_step) {
  std::vector<convdysat::EdgeRecord> out;
  const double steps = static_cast<double>(links_per_step.size());
  for (std::size_t t = 0; t < links_per_step.size(); ++t) {
    for (const auto& [u, v] : links_per_step[t]) {
      // mid-bin, except the last bin whose records sit at its closed right end
      const double ts = t + 1 == links_per_step.size() ? steps : static_cast<double>(t) + 0.5;
      out.push_back({u, v, 1.0, t == 0 ? 0.0 : ts});
    }
  }
  return out;
}

}  // namespace testutil
