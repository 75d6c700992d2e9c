#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

inline std::string data_dir() { return VERIHTN_DATA_DIR; }
inline std::string testdata_dir() { return VERIHTN_TESTDATA_DIR; }
inline std::string golden_dir() { return VERIHTN_GOLDEN_DIR; }

// Fresh directory under the system temp root; callers may leave it behind.
inline std::string fresh_temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() /
                 ("verihtn-" + tag + "-" + std::to_string(rng()));
    fs::create_directories(p);
    return p.string();
}

} // namespace testsupport
