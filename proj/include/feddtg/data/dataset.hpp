#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "feddtg/nn/tensor.hpp"

namespace feddtg::data {

/// Affine map applied to raw values: normalized = raw * scale + offset.
struct Normalization {
    double scale = 1.0;
    double offset = 0.0;
};

struct LabeledDataset {
    nn::Tensor samples;  // (N, sample_dim), values in [-1, 1]
    std::vector<int> labels;
    std::size_t n_classes = 0;
    Normalization normalization;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t sample_dim() const noexcept { return samples.cols(); }

    /// Throws unless counts agree and every label is in [0, n_classes).
    void validate() const;

    std::vector<std::size_t> class_counts() const;

    /// Rows at indices, in the given order.
    LabeledDataset subset(std::span<const std::size_t> indices) const;
};

/// Dense re-indexing of raw label values, fitted on a training set.
class LabelMap {
public:
    static LabelMap fit(std::span<const int> raw);

    std::size_t n_classes() const noexcept { return to_dense_.size(); }
    /// Throws ParameterError for values never seen during fit.
    std::vector<int> apply(std::span<const int> raw) const;

private:
    std::map<int, int> to_dense_;
};

/// Images + labels from an IDX pair (optionally gzip-compressed). Labels are
/// re-indexed densely with `labels` (fit on the training labels).
LabeledDataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& label_file,
                                const LabelMap* labels = nullptr);

struct MixtureSpec {
    std::size_t n_classes = 4;
    std::vector<std::vector<double>> means;  // n_classes x dim
    std::vector<double> stds;                // one per class
    std::size_t samples_per_class = 500;

    std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }

    /// Four well separated 2-D classes at (+-0.5, +-0.5), std 0.15, 500 per class.
    static MixtureSpec default_spec();

    void validate() const;
};

/// Class-by-class isotropic Gaussian draws, clipped to [-1, 1].
LabeledDataset synth_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed);

/// Per-class stratified sample of floor(r * count_c) items without replacement.
/// Selected rows keep their original relative order.
LabeledDataset subsample(const LabeledDataset& ds, double r, std::uint64_t seed);

}  // namespace feddtg::data
