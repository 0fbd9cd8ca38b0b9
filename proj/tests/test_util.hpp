#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testutil {

/// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::path(CROWDSYNTH_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Scratch directory private to this process and removed at exit. ctest
/// runs each test case in its own process, possibly in parallel, so shared
/// fixtures cannot live at a fixed path.
class ProcessScratch {
 public:
  explicit ProcessScratch(const std::string& name)
      : dir_(scratch(name + "_" + std::to_string(::getpid()))) {}
  ~ProcessScratch() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  ProcessScratch(const ProcessScratch&) = delete;
  ProcessScratch& operator=(const ProcessScratch&) = delete;
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace testutil
