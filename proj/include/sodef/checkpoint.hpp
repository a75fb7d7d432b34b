#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sodef/model.hpp"
#include "sodef/train.hpp"

namespace sodef {

// Single-file checkpoint: one JSON header line (shapes, variant, head,
// solver, seed, parameter count), a newline, then every parameter tensor
// flattened as little-endian 64-bit floats in declaration order (extractor
// layers, field, head). Round-trips bit-exactly.
void save_checkpoint(const SodefModel& model, std::uint64_t seed, const std::string& path);

struct Checkpoint {
    SodefModel model;
    std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

// Per-epoch CSV: epoch,loss,clean_acc,r1_mean,r2_mean,r3_mean.
void save_history_csv(const std::vector<EpochStats>& history, const std::string& path);

// Row-major CSV at 17 significant digits; used for FC matrices and other
// small dense outputs.
void save_matrix_csv(const Tensor& m, const std::string& path);
Tensor load_matrix_csv(const std::string& path);

}  // namespace sodef
