#include "neurograph/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <utility>

#include "binary_io.hpp"
#include "neurograph/errors.hpp"

namespace neurograph {

namespace {

// Everything backprop needs from one forward pass. `fed` holds what the next
// layer actually consumed (post-dropout); `post_relu` the pre-dropout
// activations that capture and the ReLU mask are based on.
struct Trace {
    std::vector<FeatureMatrix> post_relu;
    std::vector<FeatureMatrix> fed;
    std::vector<FeatureMatrix> scale;  // inverted-dropout factors; empty in eval mode
    FeatureMatrix logits;
};

Trace trace_forward(const Model& model, const FeatureMatrix& inputs, bool train_mode,
                    double dropout_rate, Rng* dropout_rng) {
    if (model.weights.empty()) {
        throw pipeline_error("forward: model has no layers");
    }
    if (inputs.cols() != model.weights.front().cols()) {
        throw pipeline_error("forward: input dimension " + std::to_string(inputs.cols()) +
                             " does not match model fan-in " +
                             std::to_string(model.weights.front().cols()));
    }
    const int layers = model.layer_count();
    const bool dropping = train_mode && dropout_rate > 0.0;
    if (dropping && dropout_rng == nullptr) {
        throw pipeline_error("forward: dropout requested without an rng");
    }

    Trace t;
    t.post_relu.reserve(static_cast<std::size_t>(layers) - 1);
    t.fed.reserve(static_cast<std::size_t>(layers) - 1);
    t.scale.reserve(static_cast<std::size_t>(layers) - 1);

    const FeatureMatrix* current = &inputs;
    for (int l = 0; l < layers; ++l) {
        FeatureMatrix z =
            (*current * model.weights[static_cast<std::size_t>(l)].transpose()).rowwise() +
            model.biases[static_cast<std::size_t>(l)].transpose();
        if (l + 1 < layers) {
            z = z.cwiseMax(0.0);
            t.post_relu.push_back(std::move(z));
            const FeatureMatrix& a = t.post_relu.back();
            if (dropping) {
                FeatureMatrix s(a.rows(), a.cols());
                const double keep_scale = 1.0 / (1.0 - dropout_rate);
                for (Eigen::Index r = 0; r < s.rows(); ++r) {
                    for (Eigen::Index c = 0; c < s.cols(); ++c) {
                        s(r, c) = dropout_rng->uniform() < dropout_rate ? 0.0 : keep_scale;
                    }
                }
                t.scale.push_back(std::move(s));
                t.fed.push_back(a.cwiseProduct(t.scale.back()));
            } else {
                t.fed.push_back(a);
            }
            current = &t.fed.back();
        } else {
            t.logits = std::move(z);
        }
    }
    return t;
}

FeatureMatrix softmax_rows(const FeatureMatrix& logits) {
    FeatureMatrix p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        const auto e = (logits.row(r).array() - m).exp().eval();
        p.row(r) = (e / e.sum()).matrix();
    }
    return p;
}

double mean_cross_entropy(const FeatureMatrix& logits, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        throw pipeline_error("loss: batch has " + std::to_string(logits.rows()) +
                             " rows but " + std::to_string(labels.size()) + " labels");
    }
    double total = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y < 0 || y >= logits.cols()) {
            throw pipeline_error("loss: label " + std::to_string(y) + " out of range [0, " +
                                 std::to_string(logits.cols()) + ")");
        }
        const double m = logits.row(r).maxCoeff();
        const double lse = std::log((logits.row(r).array() - m).exp().sum()) + m;
        total += lse - logits(r, y);
    }
    return total / static_cast<double>(logits.rows());
}

std::pair<double, Gradients> loss_and_gradients(const Model& model, const Trace& t,
                                                const FeatureMatrix& inputs,
                                                const std::vector<int>& labels) {
    const double loss = mean_cross_entropy(t.logits, labels);
    const auto batch = static_cast<double>(inputs.rows());
    const int layers = model.layer_count();

    FeatureMatrix delta = softmax_rows(t.logits);
    for (Eigen::Index r = 0; r < delta.rows(); ++r) {
        delta(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
    }
    delta /= batch;

    Gradients g;
    g.weight.resize(static_cast<std::size_t>(layers));
    g.bias.resize(static_cast<std::size_t>(layers));
    for (int l = layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const FeatureMatrix& in = (l == 0) ? inputs : t.fed[lu - 1];
        g.weight[lu] = delta.transpose() * in;
        g.bias[lu] = delta.colwise().sum().transpose();
        if (l > 0) {
            FeatureMatrix back = delta * model.weights[lu];
            back = back.cwiseProduct(
                (t.post_relu[lu - 1].array() > 0.0).cast<double>().matrix());
            if (!t.scale.empty()) {
                back = back.cwiseProduct(t.scale[lu - 1]);
            }
            delta = std::move(back);
        }
    }
    return {loss, std::move(g)};
}

}  // namespace

void validate_architecture(const Architecture& arch) {
    if (arch.input_dim < 1) {
        throw config_error("invalid architecture: input_dim must be positive");
    }
    if (arch.hidden_sizes.empty()) {
        throw config_error("invalid architecture: at least one hidden layer required");
    }
    for (int h : arch.hidden_sizes) {
        if (h < 1) {
            throw config_error("invalid architecture: zero-width hidden layer");
        }
    }
    if (arch.output_classes < 2) {
        throw config_error("invalid architecture: output_classes must be at least 2");
    }
    if (!(arch.dropout_rate >= 0.0 && arch.dropout_rate < 1.0)) {
        throw config_error("invalid architecture: dropout_rate must be in [0, 1)");
    }
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
    validate_architecture(arch);

    std::vector<int> sizes;
    sizes.push_back(arch.input_dim);
    sizes.insert(sizes.end(), arch.hidden_sizes.begin(), arch.hidden_sizes.end());
    sizes.push_back(arch.output_classes);

    Model model;
    model.rng_seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                w(r, c) = rng.uniform(-limit, limit);
            }
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return model;
}

ForwardResult forward(const Model& model, const FeatureMatrix& inputs, bool capture,
                      bool train_mode, double dropout_rate, Rng* dropout_rng) {
    Trace t = trace_forward(model, inputs, train_mode, dropout_rate, dropout_rng);
    ForwardResult result;
    if (capture) {
        result.hidden = std::move(t.post_relu);
    }
    result.probabilities = softmax_rows(t.logits);
    return result;
}

double batch_loss(const Model& model, const FeatureMatrix& inputs,
                  const std::vector<int>& labels) {
    const Trace t = trace_forward(model, inputs, false, 0.0, nullptr);
    return mean_cross_entropy(t.logits, labels);
}

Gradients loss_gradients(const Model& model, const FeatureMatrix& inputs,
                         const std::vector<int>& labels) {
    const Trace t = trace_forward(model, inputs, false, 0.0, nullptr);
    return loss_and_gradients(model, t, inputs, labels).second;
}

double train_step(Model& model, const FeatureMatrix& batch, const std::vector<int>& labels,
                  double learning_rate, double dropout_rate, Rng* dropout_rng) {
    const Trace t = trace_forward(model, batch, true, dropout_rate, dropout_rng);
    auto [loss, g] = loss_and_gradients(model, t, batch, labels);
    if (!std::isfinite(loss)) {
        throw pipeline_error("training diverged: non-finite loss");
    }
    for (int l = 0; l < model.layer_count(); ++l) {
        const auto lu = static_cast<std::size_t>(l);
        model.weights[lu] -= learning_rate * g.weight[lu];
        model.biases[lu] -= learning_rate * g.bias[lu];
    }
    return loss;
}

double evaluate(const Model& model, const Dataset& dataset) {
    const Eigen::Index n = dataset.sample_count();
    if (n == 0) {
        throw pipeline_error("evaluate: empty dataset");
    }
    constexpr Eigen::Index kBatch = 512;
    long correct = 0;
    for (Eigen::Index start = 0; start < n; start += kBatch) {
        const Eigen::Index count = std::min(kBatch, n - start);
        const FeatureMatrix block = dataset.features.middleRows(start, count);
        const Trace t = trace_forward(model, block, false, 0.0, nullptr);
        for (Eigen::Index r = 0; r < count; ++r) {
            int best = 0;
            double best_value = t.logits(r, 0);
            for (Eigen::Index c = 1; c < t.logits.cols(); ++c) {
                if (t.logits(r, c) > best_value) {
                    best_value = t.logits(r, c);
                    best = static_cast<int>(c);
                }
            }
            if (best == dataset.labels[static_cast<std::size_t>(start + r)]) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

SnapshotSeries train_with_snapshots(const Architecture& arch, const Dataset& train,
                                    const Dataset& test, const TrainConfig& config) {
    validate_architecture(arch);
    if (train.sample_count() == 0 || test.sample_count() == 0) {
        throw pipeline_error("train_with_snapshots: empty dataset");
    }
    if (config.epochs < 1) {
        throw config_error("epochs must be positive");
    }
    if (config.snapshot_count < 2) {
        throw config_error("snapshot_count must be at least 2");
    }
    if (config.snapshot_count > config.epochs) {
        throw config_error("snapshot_count must not exceed epochs");
    }
    if (config.batch_size < 1) {
        throw config_error("batch_size must be positive");
    }
    if (train.dim() != arch.input_dim || test.dim() != arch.input_dim) {
        throw config_error("dataset dimension does not match architecture input_dim " +
                           std::to_string(arch.input_dim));
    }
    for (const Dataset* d : {&train, &test}) {
        for (int label : d->labels) {
            if (label < 0 || label >= arch.output_classes) {
                throw config_error("label " + std::to_string(label) +
                                   " out of range for output_classes " +
                                   std::to_string(arch.output_classes));
            }
        }
    }

    Model model = init_model(arch, config.init_seed);
    Rng shuffle_rng(config.shuffle_seed);
    Rng dropout_rng(config.dropout_seed);

    const Eigen::Index n = train.sample_count();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    SnapshotSeries series;
    series.arch = arch;
    int next_snapshot = 1;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += config.batch_size) {
            const Eigen::Index count = std::min<Eigen::Index>(config.batch_size, n - start);
            FeatureMatrix batch(count, train.dim());
            std::vector<int> labels(static_cast<std::size_t>(count));
            for (Eigen::Index i = 0; i < count; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                batch.row(i) = train.features.row(src);
                labels[static_cast<std::size_t>(i)] = train.labels[static_cast<std::size_t>(src)];
            }
            train_step(model, batch, labels, config.learning_rate, arch.dropout_rate,
                       &dropout_rng);
        }
        if (next_snapshot <= config.snapshot_count &&
            epoch == next_snapshot * config.epochs / config.snapshot_count) {
            Snapshot snap;
            snap.epoch = epoch;
            snap.model = quantized_to_float32(model);
            snap.train_accuracy = evaluate(snap.model, train);
            snap.test_accuracy = evaluate(snap.model, test);
            series.snapshots.push_back(std::move(snap));
            ++next_snapshot;
        }
    }
    return series;
}

Model quantized_to_float32(const Model& model) {
    Model out = model;
    const auto quantize = [](double x) { return static_cast<double>(static_cast<float>(x)); };
    for (Eigen::MatrixXd& w : out.weights) {
        w = w.unaryExpr(quantize);
    }
    for (Eigen::VectorXd& b : out.biases) {
        b = b.unaryExpr(quantize);
    }
    return out;
}

void save_checkpoint(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path + " for writing");
    }
    out.write("NGMDL1", 6);
    io::write_u64(out, model.rng_seed);
    io::write_u32(out, static_cast<std::uint32_t>(model.layer_count()));
    for (const Eigen::MatrixXd& w : model.weights) {
        io::write_u32(out, static_cast<std::uint32_t>(w.rows()));
        io::write_u32(out, static_cast<std::uint32_t>(w.cols()));
    }
    for (int l = 0; l < model.layer_count(); ++l) {
        const auto lu = static_cast<std::size_t>(l);
        const Eigen::MatrixXd& w = model.weights[lu];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                io::write_f32(out, static_cast<float>(w(r, c)));
            }
        }
        const Eigen::VectorXd& b = model.biases[lu];
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            io::write_f32(out, static_cast<float>(b(i)));
        }
    }
    if (!out) {
        throw pipeline_error("error writing " + path);
    }
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw pipeline_error("cannot open " + path);
    }
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "NGMDL1", 6) != 0) {
        throw pipeline_error(path + ": bad checkpoint magic at byte offset 0");
    }

    Model model;
    model.rng_seed = io::read_u64(in, path);
    const std::uint32_t layers = io::read_u32(in, path);
    if (layers == 0 || layers > 64) {
        throw pipeline_error(path + ": implausible layer count " + std::to_string(layers));
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
    for (std::uint32_t l = 0; l < layers; ++l) {
        const std::uint32_t rows = io::read_u32(in, path);
        const std::uint32_t cols = io::read_u32(in, path);
        if (rows == 0 || cols == 0 || rows > 1000000 || cols > 1000000) {
            throw pipeline_error(path + ": implausible layer shape " + std::to_string(rows) +
                                 "x" + std::to_string(cols));
        }
        if (l > 0 && cols != shapes.back().first) {
            throw pipeline_error(path + ": layer " + std::to_string(l) + " fan-in " +
                                 std::to_string(cols) + " does not chain to previous fan-out " +
                                 std::to_string(shapes.back().first));
        }
        shapes.emplace_back(rows, cols);
    }
    for (const auto& [rows, cols] : shapes) {
        Eigen::MatrixXd w(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                w(r, c) = static_cast<double>(io::read_f32(in, path));
            }
        }
        Eigen::VectorXd b(rows);
        for (std::uint32_t i = 0; i < rows; ++i) {
            b(i) = static_cast<double>(io::read_f32(in, path));
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw pipeline_error(path + ": trailing bytes after checkpoint payload");
    }
    return model;
}

}  // namespace neurograph
