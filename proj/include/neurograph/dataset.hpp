#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace neurograph {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Split { train, test };

// Flattened feature vectors plus integer class labels. Treated as immutable
// once loaded.
struct Dataset {
    FeatureMatrix features;   // rows = samples, cols = feature dimension
    std::vector<int> labels;  // labels[i] in [0, class_count)
    int class_count = 0;
    Split split = Split::train;

    Eigen::Index sample_count() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

constexpr std::uint32_t kIdxImagesMagic = 2051;  // 0x00000803: ubyte, 3 dims
constexpr std::uint32_t kIdxLabelsMagic = 2049;  // 0x00000801: ubyte, 1 dim

// Raw IDX container. Only the unsigned-byte element type is supported, which
// is the only type MNIST-format files ship with.
struct IdxFile {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    std::uint32_t magic() const {
        return 0x00000800u | static_cast<std::uint32_t>(dims.size());
    }
};

// Reads an IDX file, decompressing transparently if it is gzip-compressed.
// Malformed input raises pipeline_error naming the offending byte offset.
IdxFile read_idx_file(const std::string& path, std::uint32_t expected_magic);

// Writes an uncompressed IDX file (big-endian header, raw payload).
void write_idx_file(const std::string& path, const IdxFile& file);

// Loads an images/labels IDX pair into a Dataset; pixel bytes are scaled to
// [0,1], images flattened row-major. class_count = max label + 1.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Split split = Split::train);

// Label-permutation control ("mixed" variant): labels shuffled with a seeded
// uniform permutation, features left untouched.
Dataset shuffle_labels(const Dataset& dataset, std::uint64_t seed);

// Seeded Gaussian blobs for fast tests: one unit-norm mean direction per
// class, per-sample noise spread * N(0, I); per-class 80/20 train/test split.
std::pair<Dataset, Dataset> synth_blobs(int class_count, int per_class, int dim,
                                        double spread, std::uint64_t seed);

// Deterministic per-class subset: cap/class_count samples per class with the
// remainder going to the lowest class ids, taking each class's first samples
// in dataset order. Classes short of their quota contribute what they have.
Dataset stratified_subset(const Dataset& dataset, Eigen::Index cap);

// CRC-32 of a file's raw on-disk bytes (no decompression).
std::uint32_t file_crc32(const std::string& path);

// Dataset manifest: JSON object mapping the four IDX roles to a path string
// or to {"path": ..., "crc32": <uint>}. Relative paths resolve against the
// manifest's own directory; present checksums are verified on load.
struct DatasetManifest {
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

DatasetManifest read_dataset_manifest(const std::string& path);

}  // namespace neurograph
