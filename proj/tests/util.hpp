#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef NEUROGRAPH_SOURCE_DIR
#define NEUROGRAPH_SOURCE_DIR "."
#endif

namespace testutil {

// Scratch space under the test working directory.
inline std::filesystem::path temp_dir() {
    const std::filesystem::path dir = std::filesystem::path("test_tmp");
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string mnist_dir() {
    if (const char* env = std::getenv("NEUROGRAPH_MNIST_DIR")) {
        return env;
    }
    return std::string(NEUROGRAPH_SOURCE_DIR) + "/data/mnist";
}

inline bool has_mnist() {
    return std::filesystem::exists(std::filesystem::path(mnist_dir()) /
                                   "train-images-idx3-ubyte");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
