#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sodef/data.hpp"
#include "sodef/model.hpp"
#include "sodef/parallel.hpp"

namespace sodef {

enum class AttackKind { Fgsm, Pgd };

AttackKind attack_kind_from_string(const std::string& name);
std::string to_string(AttackKind k);

struct AttackConfig {
    AttackKind kind = AttackKind::Pgd;
    double epsilon = 0.1;       // l-inf budget; 0 degenerates to the identity
    double step_alpha = 0.1;    // pgd step size
    std::size_t iters = 20;     // pgd iterations
    std::vector<double> clip_lo{0.0};  // size d, or size 1 broadcast
    std::vector<double> clip_hi{1.0};
    bool random_start = false;
    std::uint64_t seed = 0;     // drives random_start only

    void validate(std::size_t d) const;
};

// Defaults (pgd 20 x 0.1) with clip bounds taken from the dataset.
AttackConfig attack_config_for(const LabeledDataset& data);

// d(CE(V^T z(T), y))/dx through the tape. Models whose solver is dopri5 are
// differentiated through rk38 with step 0.05 instead (the adaptive path does
// not unroll onto the tape); the returned example is still evaluated with
// the model's own solver.
Tensor input_gradient(const SodefModel& model, const Tensor& x, std::size_t y);

// x' = clip(x + eps * sign(grad)); sign(0) = 0.
Tensor fgsm(const SodefModel& model, const Tensor& x, std::size_t y, const AttackConfig& cfg);

// Iterated sign steps, each projected onto the eps-ball around x intersected
// with the clip box: min{hi, x+eps, max{lo, x-eps, v}} per component. The
// gradient is taken at the current iterate. iters=1 with alpha=eps
// reproduces fgsm exactly.
Tensor pgd(const SodefModel& model, const Tensor& x, std::size_t y, const AttackConfig& cfg);

// Dispatch on cfg.kind.
Tensor craft_adversarial(const SodefModel& model, const Tensor& x, std::size_t y,
                         const AttackConfig& cfg);

// The whole dataset attacked; inputs replaced, labels kept. Samples are
// independent (one tape each) so Parallel mode is safe and bit-identical to
// Serial.
LabeledDataset adversarial_dataset(const SodefModel& model, const LabeledDataset& data,
                                   const AttackConfig& cfg,
                                   par::Mode mode = par::Mode::Parallel);

// Fraction of adversarial examples still classified correctly.
double attack_accuracy(const SodefModel& model, const LabeledDataset& data,
                       const AttackConfig& cfg, par::Mode mode = par::Mode::Parallel);

// Examples crafted on `source`, accuracy measured on `target`.
double transfer_attack(const SodefModel& source, const SodefModel& target,
                       const LabeledDataset& data, const AttackConfig& cfg,
                       par::Mode mode = par::Mode::Parallel);

}  // namespace sodef
