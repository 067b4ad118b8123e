#include "feddtg/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "feddtg/data/idx.hpp"
#include "feddtg/error.hpp"
#include "feddtg/rng.hpp"

namespace feddtg::data {

void LabeledDataset::validate() const {
    if (samples.rows() != labels.size()) throw DimensionError("dataset label count", samples.rows(), labels.size());
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
            throw ParameterError("dataset label " + std::to_string(l) + " outside [0, " + std::to_string(n_classes) + ")");
        }
    }
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(n_classes, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.samples = samples.gather_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels[i]);
    out.n_classes = n_classes;
    out.normalization = normalization;
    return out;
}

LabelMap LabelMap::fit(std::span<const int> raw) {
    LabelMap m;
    for (int v : raw) m.to_dense_.emplace(v, 0);
    int next = 0;
    for (auto& [value, dense] : m.to_dense_) dense = next++;
    return m;
}

std::vector<int> LabelMap::apply(std::span<const int> raw) const {
    std::vector<int> out;
    out.reserve(raw.size());
    for (int v : raw) {
        auto it = to_dense_.find(v);
        if (it == to_dense_.end()) throw ParameterError("label value " + std::to_string(v) + " unseen in training labels");
        out.push_back(it->second);
    }
    return out;
}

LabeledDataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& label_file,
                                const LabelMap* labels) {
    auto img = parse_idx_images(read_file_bytes(images));
    auto raw = parse_idx_labels(read_file_bytes(label_file));
    if (raw.size() != img.count()) throw DimensionError("IDX label count vs image count", img.count(), raw.size());
    const LabelMap fitted = labels != nullptr ? *labels : LabelMap::fit(raw);
    LabeledDataset ds;
    ds.samples = std::move(img.pixels);
    ds.labels = fitted.apply(raw);
    ds.n_classes = fitted.n_classes();
    ds.normalization = {1.0 / 127.5, -1.0};
    ds.validate();
    return ds;
}

MixtureSpec MixtureSpec::default_spec() {
    MixtureSpec s;
    s.n_classes = 4;
    s.means = {{-0.5, -0.5}, {0.5, -0.5}, {-0.5, 0.5}, {0.5, 0.5}};
    s.stds = {0.15, 0.15, 0.15, 0.15};
    s.samples_per_class = 500;
    return s;
}

void MixtureSpec::validate() const {
    if (n_classes == 0) throw ParameterError("mixture needs at least one class");
    if (means.size() != n_classes) throw DimensionError("mixture mean count", n_classes, means.size());
    if (stds.size() != n_classes) throw DimensionError("mixture std count", n_classes, stds.size());
    const std::size_t d = dim();
    if (d == 0) throw ParameterError("mixture dimension must be positive");
    for (const auto& m : means) {
        if (m.size() != d) throw DimensionError("mixture mean width", d, m.size());
    }
    for (double s : stds) {
        if (!(s >= 0.0)) throw ParameterError("mixture std must be non-negative");
    }
    for (std::size_t a = 0; a < n_classes; ++a) {
        for (std::size_t b = a + 1; b < n_classes; ++b) {
            if (means[a] == means[b]) throw ParameterError("mixture means must be distinct");
        }
    }
}

LabeledDataset synth_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng = derive_stream(seed, StreamTag::mixture);
    std::normal_distribution<double> unit(0.0, 1.0);
    const std::size_t d = spec.dim();
    LabeledDataset ds;
    ds.n_classes = spec.n_classes;
    ds.samples = nn::Tensor(spec.n_classes * spec.samples_per_class, d);
    ds.labels.reserve(ds.samples.rows());
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (std::size_t i = 0; i < spec.samples_per_class; ++i, ++row) {
            for (std::size_t j = 0; j < d; ++j) {
                ds.samples(row, j) = std::clamp(spec.means[c][j] + spec.stds[c] * unit(rng), -1.0, 1.0);
            }
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

LabeledDataset subsample(const LabeledDataset& ds, double r, std::uint64_t seed) {
    if (!(r > 0.0 && r <= 1.0)) throw ParameterError("sampling ratio r must lie in (0, 1]");
    std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    Rng rng = derive_stream(seed, StreamTag::subsample);
    std::vector<std::size_t> keep;
    for (auto& idx : by_class) {
        const auto take = static_cast<std::size_t>(std::floor(r * static_cast<double>(idx.size()) + 1e-9));
        std::shuffle(idx.begin(), idx.end(), rng);
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(keep.begin(), keep.end());
    return ds.subset(keep);
}

}  // namespace feddtg::data
