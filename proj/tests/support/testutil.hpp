#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "embedlab/common.hpp"

namespace testutil {

// Self-cleaning scratch directory for fixture files.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "embedlab") {
    std::random_device rd;
    for (int attempt = 0; attempt < 16; ++attempt) {
      auto candidate = std::filesystem::temp_directory_path() /
                       (prefix + "-" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw embedlab::IoError("could not create temp directory");
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::filesystem::path& path() const { return path_; }

  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::string p = file(name);
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
