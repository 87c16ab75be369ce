#include "neurograph/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neurograph/errors.hpp"

namespace neurograph {

double neuron_entropy(const Eigen::VectorXd& column, const EntropyConfig& config, bool* dead) {
    if (config.bins < 2) {
        throw config_error("entropy: bin count must be at least 2");
    }
    if (dead != nullptr) {
        *dead = false;
    }

    double min_nz = std::numeric_limits<double>::infinity();
    double max_nz = -std::numeric_limits<double>::infinity();
    Eigen::Index nonzero = 0;
    for (Eigen::Index r = 0; r < column.size(); ++r) {
        const double x = column(r);
        if (x != 0.0) {
            ++nonzero;
            min_nz = std::min(min_nz, x);
            max_nz = std::max(max_nz, x);
        }
    }
    if (nonzero == 0) {
        if (dead != nullptr) {
            *dead = true;
        }
        return 0.0;
    }

    const auto bins = static_cast<std::size_t>(config.bins);
    const double width = (max_nz - min_nz) / static_cast<double>(config.bins);
    std::vector<Eigen::Index> histogram(bins, 0);
    for (Eigen::Index r = 0; r < column.size(); ++r) {
        const double x = column(r);
        if (x == 0.0) {
            continue;
        }
        // All values equal: one occupied bin, entropy 0 below.
        std::size_t bin = 0;
        if (width > 0.0) {
            bin = std::min(bins - 1,
                           static_cast<std::size_t>(std::floor((x - min_nz) / width)));
        }
        ++histogram[bin];
    }

    double entropy = 0.0;
    for (Eigen::Index count : histogram) {
        if (count == 0) {
            continue;
        }
        const double h = static_cast<double>(count) / static_cast<double>(nonzero);
        entropy -= h * (config.log_base_2 ? std::log2(h) : std::log(h));
    }
    return entropy;
}

EntropyResult model_entropy(const ActivationMatrix& f_norm, const EntropyConfig& config) {
    EntropyResult result;
    result.per_neuron.reserve(static_cast<std::size_t>(f_norm.cols()));
    for (Eigen::Index c = 0; c < f_norm.cols(); ++c) {
        bool dead = false;
        const double e = neuron_entropy(f_norm.values.col(c), config, &dead);
        result.per_neuron.push_back(e);
        result.total += e;
        if (dead) {
            result.dead_neurons.push_back(c);
        }
    }
    return result;
}

EntropyResult class_entropy(const ActivationMatrix& f, int class_id, const EntropyConfig& config) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        if (f.labels[static_cast<std::size_t>(r)] == class_id) {
            rows.push_back(r);
        }
    }
    if (rows.empty()) {
        throw pipeline_error("class_entropy: class " + std::to_string(class_id) +
                             " has no samples");
    }

    ActivationMatrix filtered;
    filtered.layer_offsets = f.layer_offsets;
    filtered.class_count = f.class_count;
    filtered.values.resize(static_cast<Eigen::Index>(rows.size()), f.cols());
    filtered.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        filtered.values.row(static_cast<Eigen::Index>(i)) = f.values.row(rows[i]);
        filtered.labels.push_back(class_id);
    }
    return model_entropy(normalize_columns(filtered), config);
}

NormalizedSeries normalize_series(const std::vector<double>& values) {
    if (values.size() < 2) {
        throw pipeline_error("normalize_series: need at least 2 values");
    }
    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    NormalizedSeries result;
    result.values.reserve(values.size());
    if (*min_it == *max_it) {
        result.constant = true;
        result.values.assign(values.size(), 0.5);
        return result;
    }
    const double range = *max_it - *min_it;
    for (double v : values) {
        result.values.push_back((v - *min_it) / range);
    }
    return result;
}

}  // namespace neurograph
