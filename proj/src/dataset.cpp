#include "neurograph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "neurograph/errors.hpp"
#include "neurograph/rng.hpp"

namespace neurograph {

namespace {

// Reads the whole file through zlib so plain and gzip-compressed IDX files
// are handled identically.
std::vector<std::uint8_t> read_all_bytes(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
        throw pipeline_error("cannot open " + path);
    }
    std::vector<std::uint8_t> bytes;
    std::uint8_t buf[1u << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) {
        bytes.insert(bytes.end(), buf, buf + n);
    }
    if (n < 0) {
        int errnum = 0;
        const char* msg = gzerror(f, &errnum);
        const std::string detail = msg != nullptr ? msg : "read error";
        gzclose(f);
        throw pipeline_error("error reading " + path + ": " + detail);
    }
    gzclose(f);
    return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw pipeline_error(path + ": truncated at byte offset " +
                             std::to_string(bytes.size()) + " (need 4 bytes at offset " +
                             std::to_string(offset) + ")");
    }
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t value) {
    const char b[4] = {
        static_cast<char>((value >> 24) & 0xFF),
        static_cast<char>((value >> 16) & 0xFF),
        static_cast<char>((value >> 8) & 0xFF),
        static_cast<char>(value & 0xFF),
    };
    out.write(b, 4);
}

}  // namespace

IdxFile read_idx_file(const std::string& path, std::uint32_t expected_magic) {
    const std::vector<std::uint8_t> bytes = read_all_bytes(path);
    const std::uint32_t magic = read_be32(bytes, 0, path);
    if (magic != expected_magic) {
        throw pipeline_error(path + ": bad magic " + std::to_string(magic) +
                             " at byte offset 0 (expected " + std::to_string(expected_magic) + ")");
    }

    IdxFile file;
    const std::size_t dim_count = magic & 0xFFu;
    std::size_t payload_size = 1;
    for (std::size_t i = 0; i < dim_count; ++i) {
        const std::uint32_t d = read_be32(bytes, 4 + 4 * i, path);
        file.dims.push_back(d);
        payload_size *= d;
    }

    const std::size_t header_size = 4 + 4 * dim_count;
    if (bytes.size() != header_size + payload_size) {
        throw pipeline_error(path + ": expected " + std::to_string(payload_size) +
                             " data bytes after byte offset " + std::to_string(header_size) +
                             ", found " + std::to_string(bytes.size() - header_size));
    }
    file.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header_size), bytes.end());
    return file;
}

void write_idx_file(const std::string& path, const IdxFile& file) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path + " for writing");
    }
    write_be32(out, file.magic());
    for (std::uint32_t d : file.dims) {
        write_be32(out, d);
    }
    out.write(reinterpret_cast<const char*>(file.payload.data()),
              static_cast<std::streamsize>(file.payload.size()));
    if (!out) {
        throw pipeline_error("error writing " + path);
    }
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, Split split) {
    const IdxFile images = read_idx_file(images_path, kIdxImagesMagic);
    const IdxFile labels = read_idx_file(labels_path, kIdxLabelsMagic);

    const std::uint32_t n = images.dims[0];
    if (labels.dims[0] != n) {
        throw pipeline_error("count mismatch: " + std::to_string(n) + " images in " +
                             images_path + " vs " + std::to_string(labels.dims[0]) +
                             " labels in " + labels_path);
    }
    const std::size_t dim = static_cast<std::size_t>(images.dims[1]) * images.dims[2];

    Dataset dataset;
    dataset.split = split;
    dataset.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            dataset.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<double>(images.payload[i * dim + j]) / 255.0;
        }
    }
    dataset.labels.reserve(n);
    int max_label = -1;
    for (std::uint8_t b : labels.payload) {
        dataset.labels.push_back(static_cast<int>(b));
        max_label = std::max(max_label, static_cast<int>(b));
    }
    dataset.class_count = max_label + 1;
    return dataset;
}

Dataset shuffle_labels(const Dataset& dataset, std::uint64_t seed) {
    Dataset out = dataset;
    Rng rng(seed);
    rng.shuffle(out.labels);
    return out;
}

std::pair<Dataset, Dataset> synth_blobs(int class_count, int per_class, int dim, double spread,
                                        std::uint64_t seed) {
    if (class_count < 2) {
        throw config_error("synth_blobs: class_count must be at least 2");
    }
    if (per_class < 1 || dim < 1) {
        throw config_error("synth_blobs: per_class and dim must be positive");
    }

    Rng rng(seed);
    const int train_per_class = per_class * 4 / 5;
    const int test_per_class = per_class - train_per_class;

    Dataset train;
    Dataset test;
    train.split = Split::train;
    test.split = Split::test;
    train.class_count = class_count;
    test.class_count = class_count;
    train.features.resize(static_cast<Eigen::Index>(class_count) * train_per_class, dim);
    test.features.resize(static_cast<Eigen::Index>(class_count) * test_per_class, dim);

    Eigen::Index train_row = 0;
    Eigen::Index test_row = 0;
    std::vector<double> mean(static_cast<std::size_t>(dim));
    for (int c = 0; c < class_count; ++c) {
        // Class mean: a random direction normalized onto the unit sphere.
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& m : mean) {
                m = rng.normal();
                norm += m * m;
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        for (double& m : mean) {
            m /= norm;
        }

        for (int s = 0; s < per_class; ++s) {
            const bool is_train = s < train_per_class;
            Eigen::Index row = is_train ? train_row++ : test_row++;
            FeatureMatrix& target = is_train ? train.features : test.features;
            for (int j = 0; j < dim; ++j) {
                target(row, j) = mean[static_cast<std::size_t>(j)] + spread * rng.normal();
            }
            (is_train ? train.labels : test.labels).push_back(c);
        }
    }
    return {std::move(train), std::move(test)};
}

Dataset stratified_subset(const Dataset& dataset, Eigen::Index cap) {
    if (cap < 1) {
        throw config_error("stratified_subset: cap must be positive");
    }
    const int k = dataset.class_count;
    if (k < 1) {
        throw config_error("stratified_subset: dataset has no classes");
    }

    std::vector<Eigen::Index> quota(static_cast<std::size_t>(k), cap / k);
    for (Eigen::Index r = 0; r < cap % k; ++r) {
        ++quota[static_cast<std::size_t>(r)];
    }

    std::vector<Eigen::Index> chosen;
    std::vector<Eigen::Index> taken(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < dataset.sample_count(); ++i) {
        const auto c = static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(i)]);
        if (taken[c] < quota[c]) {
            ++taken[c];
            chosen.push_back(i);
        }
    }

    Dataset out;
    out.split = dataset.split;
    out.class_count = dataset.class_count;
    out.features.resize(static_cast<Eigen::Index>(chosen.size()), dataset.dim());
    out.labels.reserve(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = dataset.features.row(chosen[i]);
        out.labels.push_back(dataset.labels[static_cast<std::size_t>(chosen[i])]);
    }
    return out;
}

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw pipeline_error("cannot open " + path);
    }
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1u << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
    }
    return static_cast<std::uint32_t>(crc);
}

DatasetManifest read_dataset_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot open dataset manifest " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("dataset manifest " + path + ": " + e.what());
    }

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& key) {
        if (!doc.contains(key)) {
            throw config_error("dataset manifest " + path + ": missing \"" + key + "\"");
        }
        const nlohmann::json& entry = doc.at(key);
        std::string file_path;
        std::optional<std::uint32_t> crc;
        if (entry.is_string()) {
            file_path = entry.get<std::string>();
        } else if (entry.is_object()) {
            file_path = entry.at("path").get<std::string>();
            if (entry.contains("crc32")) {
                crc = entry.at("crc32").get<std::uint32_t>();
            }
        } else {
            throw config_error("dataset manifest " + path + ": \"" + key +
                               "\" must be a path or {path, crc32} object");
        }
        std::filesystem::path p(file_path);
        if (p.is_relative()) {
            p = base / p;
        }
        const std::string resolved = p.string();
        if (crc.has_value()) {
            const std::uint32_t actual = file_crc32(resolved);
            if (actual != *crc) {
                throw pipeline_error("checksum mismatch for " + resolved + ": crc32 " +
                                     std::to_string(actual) + ", manifest says " +
                                     std::to_string(*crc));
            }
        }
        return resolved;
    };

    DatasetManifest manifest;
    manifest.train_images = resolve("train_images");
    manifest.train_labels = resolve("train_labels");
    manifest.test_images = resolve("test_images");
    manifest.test_labels = resolve("test_labels");
    return manifest;
}

}  // namespace neurograph
