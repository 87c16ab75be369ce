#include "neurograph/activation.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "neurograph/errors.hpp"

namespace neurograph {

ActivationMatrix record_activations(const Model& model, const Dataset& dataset,
                                    Eigen::Index sample_cap) {
    if (dataset.sample_count() == 0) {
        throw pipeline_error("record_activations: empty dataset");
    }
    if (sample_cap < dataset.class_count) {
        throw config_error("record_activations: sample_cap " + std::to_string(sample_cap) +
                           " is below the class count " +
                           std::to_string(dataset.class_count));
    }
    const Dataset* source = &dataset;
    Dataset capped;
    if (sample_cap < dataset.sample_count()) {
        capped = stratified_subset(dataset, sample_cap);
        source = &capped;
    }

    const int hidden_layers = model.layer_count() - 1;
    ActivationMatrix f;
    f.layer_offsets.push_back(0);
    for (int l = 0; l < hidden_layers; ++l) {
        f.layer_offsets.push_back(f.layer_offsets.back() +
                                  model.weights[static_cast<std::size_t>(l)].rows());
    }
    const Eigen::Index n = source->sample_count();
    const Eigen::Index width = f.layer_offsets.back();
    f.values.resize(n, width);
    f.labels = source->labels;
    f.class_count = source->class_count;

    const auto quantize = [](double x) { return static_cast<double>(static_cast<float>(x)); };
    constexpr Eigen::Index kBatch = 512;
    for (Eigen::Index start = 0; start < n; start += kBatch) {
        const Eigen::Index count = std::min(kBatch, n - start);
        const FeatureMatrix block = source->features.middleRows(start, count);
        const ForwardResult result = forward(model, block, /*capture=*/true);
        for (int l = 0; l < hidden_layers; ++l) {
            f.values.block(start, f.layer_begin(l), count, f.layer_width(l)) =
                result.hidden[static_cast<std::size_t>(l)].unaryExpr(quantize);
        }
    }
    return f;
}

ActivationMatrix normalize_columns(const ActivationMatrix& f) {
    ActivationMatrix out = f;
    out.normalized = true;
    out.dead_columns.assign(static_cast<std::size_t>(f.cols()), false);
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
        const double sum = f.values.col(c).sum();
        if (sum == 0.0) {
            out.dead_columns[static_cast<std::size_t>(c)] = true;
        } else {
            out.values.col(c) /= sum;
        }
    }
    return out;
}

Eigen::VectorXd class_mean_activation(const ActivationMatrix& f, int class_id, int layer) {
    if (layer < 0 || layer >= f.layer_count()) {
        throw pipeline_error("class_mean_activation: layer " + std::to_string(layer) +
                             " out of range");
    }
    const Eigen::Index begin = f.layer_begin(layer);
    const Eigen::Index width = f.layer_width(layer);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(width);
    Eigen::Index count = 0;
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        if (f.labels[static_cast<std::size_t>(r)] == class_id) {
            mean += f.values.row(r).segment(begin, width).transpose();
            ++count;
        }
    }
    if (count == 0) {
        throw pipeline_error("class_mean_activation: class " + std::to_string(class_id) +
                             " has no samples");
    }
    return mean / static_cast<double>(count);
}

ClassMeanActivations compute_class_means(const ActivationMatrix& f) {
    ClassMeanActivations result;
    result.class_counts.assign(static_cast<std::size_t>(f.class_count), 0);
    for (int label : f.labels) {
        ++result.class_counts[static_cast<std::size_t>(label)];
    }
    result.means.resize(static_cast<std::size_t>(f.class_count));
    for (int i = 0; i < f.class_count; ++i) {
        if (result.class_counts[static_cast<std::size_t>(i)] == 0) {
            continue;
        }
        for (int l = 0; l < f.layer_count(); ++l) {
            result.means[static_cast<std::size_t>(i)].push_back(class_mean_activation(f, i, l));
        }
    }
    return result;
}

void save_activations(const std::string& path, const ActivationMatrix& f) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path + " for writing");
    }
    out.write("NGACT1", 6);
    io::write_u32(out, static_cast<std::uint32_t>(f.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(f.cols()));
    io::write_u32(out, static_cast<std::uint32_t>(f.layer_offsets.size()));
    for (Eigen::Index offset : f.layer_offsets) {
        io::write_u32(out, static_cast<std::uint32_t>(offset));
    }
    io::write_u32(out, static_cast<std::uint32_t>(f.class_count));
    for (int label : f.labels) {
        io::write_u32(out, static_cast<std::uint32_t>(label));
    }
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        for (Eigen::Index c = 0; c < f.cols(); ++c) {
            io::write_f32(out, static_cast<float>(f.values(r, c)));
        }
    }
    if (!out) {
        throw pipeline_error("error writing " + path);
    }
}

ActivationMatrix load_activations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw pipeline_error("cannot open " + path);
    }
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "NGACT1", 6) != 0) {
        throw pipeline_error(path + ": bad activation snapshot magic at byte offset 0");
    }

    ActivationMatrix f;
    const std::uint32_t rows = io::read_u32(in, path);
    const std::uint32_t cols = io::read_u32(in, path);
    const std::uint32_t offset_count = io::read_u32(in, path);
    if (offset_count < 2 || offset_count > 1024) {
        throw pipeline_error(path + ": implausible layer offset count " +
                             std::to_string(offset_count));
    }
    for (std::uint32_t i = 0; i < offset_count; ++i) {
        f.layer_offsets.push_back(static_cast<Eigen::Index>(io::read_u32(in, path)));
    }
    if (f.layer_offsets.front() != 0 ||
        f.layer_offsets.back() != static_cast<Eigen::Index>(cols) ||
        !std::is_sorted(f.layer_offsets.begin(), f.layer_offsets.end())) {
        throw pipeline_error(path + ": layer offsets do not partition the columns");
    }
    f.class_count = static_cast<int>(io::read_u32(in, path));
    f.labels.reserve(rows);
    for (std::uint32_t r = 0; r < rows; ++r) {
        const auto label = static_cast<int>(io::read_u32(in, path));
        if (label < 0 || label >= f.class_count) {
            throw pipeline_error(path + ": label " + std::to_string(label) +
                                 " out of range for class count " +
                                 std::to_string(f.class_count));
        }
        f.labels.push_back(label);
    }
    f.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                static_cast<double>(io::read_f32(in, path));
        }
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw pipeline_error(path + ": trailing bytes after activation payload");
    }
    return f;
}

}  // namespace neurograph
