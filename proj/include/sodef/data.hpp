#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sodef/tensor.hpp"

namespace sodef {

struct LabeledDataset {
    std::vector<Tensor> inputs;        // each {d}
    std::vector<std::size_t> labels;   // each < num_classes
    std::size_t d = 0;
    std::size_t num_classes = 0;
    std::vector<double> lo, hi;        // per-dimension bounds containing every input

    std::size_t size() const { return inputs.size(); }
};

// Gaussian blobs: L class centers drawn uniformly in a box scaled by spread,
// redrawn until every pairwise distance is >= 6*spread (error after 1000
// attempts); points are center + N(0, spread^2 I). Bounds are the generated
// data's per-dimension min/max.
LabeledDataset make_blobs(std::size_t num_classes, std::size_t d, std::size_t per_class,
                          double spread, std::uint64_t seed);

// Two interleaved unit half-circles (outer: (cos t, sin t); inner:
// (1 - cos t, 1/2 - sin t), t uniform in [0, pi]) plus N(0, noise^2) per
// coordinate. L = 2, d = 2.
LabeledDataset make_moons(std::size_t per_class, double noise, std::uint64_t seed);

// IDX image/label pair (big-endian magics 0x803/0x801), pixels scaled to
// [0,1] by 1/255; takes the first `limit` samples. Labels are digits, so
// num_classes is fixed at 10. Throws on bad magic, truncation, or a count
// mismatch between the two files.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t limit);

// CSV with header `d,L,n_samples`, then one row per sample: d inputs at 17
// significant digits followed by the label. Reload is bit-exact; bounds are
// recomputed from the data.
void save_dataset_csv(const LabeledDataset& data, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path);

// Seeded permutation split; both halves keep the parent's bounds so attack
// clipping stays consistent across train/test.
std::pair<LabeledDataset, LabeledDataset> shuffle_split(const LabeledDataset& data,
                                                        double train_fraction,
                                                        std::uint64_t seed);

}  // namespace sodef
