#include "support.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace support {

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = (base / ("staplr_" + tag + "_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter++)))
                .string();
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace support
