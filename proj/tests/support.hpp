#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmlpc/mmlpc.hpp"

namespace support {

inline float uniform(mmlpc::CounterRng& rng, double lo, double hi) {
  return static_cast<float>(lo + (hi - lo) * rng.uniform());
}

inline std::vector<float> random_vector(mmlpc::CounterRng& rng, std::size_t n, double scale = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = uniform(rng, -scale, scale);
  return v;
}

inline mmlpc::DenseMatrix random_dense(mmlpc::CounterRng& rng, std::size_t rows, std::size_t cols,
                                       double scale = 1.0) {
  mmlpc::DenseMatrix m(rows, cols);
  for (float& x : m.data()) x = uniform(rng, -scale, scale);
  return m;
}

inline mmlpc::BlockSparseMatrix random_sparse(mmlpc::CounterRng& rng, std::size_t rows, std::size_t cols,
                                              double density) {
  return mmlpc::detail::random_block_sparse(rows, cols, density, rng);
}

// Per-test scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mmlpc_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace support
