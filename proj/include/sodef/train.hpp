#pragma once

#include <cstdint>
#include <vector>

#include "sodef/data.hpp"
#include "sodef/model.hpp"

namespace sodef {

struct TrainConfig {
    double alpha1 = 1.0;   // weight on ||f(z0)||
    double alpha2 = 0.05;  // weight on exp(trace)
    double alpha3 = 0.05;  // weight on exp(row-dominance excess)
    std::size_t epochs_phase1 = 10;  // extractor only, plain CE
    std::size_t epochs_phase2 = 40;  // extractor + field, full objective
    double lr = 0.05;
    std::size_t batch = 32;
    double exp_clamp = 30.0;
    std::uint64_t seed = 0;
    bool train_head = false;             // update V in phase 2 (unfixed-head ablation)
    bool freeze_extractor_phase2 = false;

    // Paper-scale schedule (30 + 120 epochs); the constructor defaults are
    // desk-scale for synthetic data.
    static TrainConfig paper_preset();

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    int phase = 1;
    double loss = 0.0;      // mean total objective over the epoch's samples
    double accuracy = 0.0;  // training accuracy at the pre-update forward
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;  // regularizer means (pre-update)
};

// Two-phase minibatch gradient descent with a fixed learning rate and seeded
// shuffling. Phase 1 updates the extractor only against plain CE (all alpha
// weights forced to 0), leaving the field and head bit-identical; phase 2
// updates extractor + field (+ head if cfg.train_head) against the full
// objective. Throws with the epoch index if the loss turns non-finite.
std::vector<EpochStats> train(SodefModel& model, const LabeledDataset& data,
                              const TrainConfig& cfg);

}  // namespace sodef
