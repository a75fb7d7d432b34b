#include "sodef/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "sodef/rng.hpp"

namespace sodef {

TrainConfig TrainConfig::paper_preset() {
    TrainConfig cfg;
    cfg.epochs_phase1 = 30;
    cfg.epochs_phase2 = 120;
    return cfg;
}

void TrainConfig::validate() const {
    if (!(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha3 >= 0.0))
        throw std::invalid_argument("TrainConfig: alpha weights must be >= 0");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("TrainConfig: lr must be finite and > 0");
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
    if (!(exp_clamp > 0.0)) throw std::invalid_argument("TrainConfig: exp_clamp must be > 0");
}

std::vector<EpochStats> train(SodefModel& model, const LabeledDataset& data,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (data.d != model.in_dim()) throw std::invalid_argument("train: input dimension mismatch");
    if (data.num_classes != model.num_classes())
        throw std::invalid_argument("train: class count mismatch");

    Rng shuffle_rng = Rng(cfg.seed).substream("train/shuffle");
    std::vector<std::size_t> perm(data.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    const std::size_t total_epochs = cfg.epochs_phase1 + cfg.epochs_phase2;
    std::vector<EpochStats> history;
    history.reserve(total_epochs);

    for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
        const bool phase2 = epoch >= cfg.epochs_phase1;
        const double a1 = phase2 ? cfg.alpha1 : 0.0;
        const double a2 = phase2 ? cfg.alpha2 : 0.0;
        const double a3 = phase2 ? cfg.alpha3 : 0.0;
        const bool with_reg = a1 != 0.0 || a2 != 0.0 || a3 != 0.0;
        shuffle_rng.shuffle(perm);

        double loss_sum = 0.0, r1_sum = 0.0, r2_sum = 0.0, r3_sum = 0.0;
        std::size_t correct = 0;

        for (std::size_t start = 0; start < data.size(); start += cfg.batch) {
            const std::size_t stop = std::min(start + cfg.batch, data.size());
            const std::size_t bs = stop - start;

            Tape tape;
            SodefModel step = model;  // tensors are value types; params re-leafed below
            std::vector<std::pair<Tensor*, Tensor*>> bound;  // {master, leafed}
            auto leaf_into = [&](Tensor* master, Tensor* slot) {
                *slot = tape.leaf(*master);
                bound.emplace_back(master, slot);
            };
            if (!phase2 || !cfg.freeze_extractor_phase2)
                for (std::size_t l = 0; l < model.extractor.weights.size(); ++l) {
                    leaf_into(&model.extractor.weights[l], &step.extractor.weights[l]);
                    leaf_into(&model.extractor.biases[l], &step.extractor.biases[l]);
                }
            if (phase2) {
                auto masters = model.field.params();
                auto slots = step.field.params();
                for (std::size_t p = 0; p < masters.size(); ++p)
                    leaf_into(masters[p], slots[p]);
                if (cfg.train_head) leaf_into(&model.v, &step.v);
            }

            Tensor batch_loss = Tensor::scalar(0.0);
            for (std::size_t s = start; s < stop; ++s) {
                const Tensor& x = data.inputs[perm[s]];
                const std::size_t y = data.labels[perm[s]];

                Forward fw = forward(step, x);
                if (predict_class(fw.logits) == y) ++correct;
                Tensor term = softmax_cross_entropy(fw.logits, y);
                if (with_reg) {
                    Regularizers r = sodef_regularizers(step.field, fw.z0, cfg.exp_clamp);
                    if (a1 != 0.0) term = add(term, scale(r.r1, a1));
                    if (a2 != 0.0) term = add(term, scale(r.r2, a2));
                    if (a3 != 0.0) term = add(term, scale(r.r3, a3));
                }
                batch_loss = add(batch_loss, term);

                // Stats use the untaped master field at the detached feature.
                Regularizers rs = sodef_regularizers(model.field, fw.z0.detach(), cfg.exp_clamp);
                r1_sum += rs.r1.value();
                r2_sum += rs.r2.value();
                r3_sum += rs.r3.value();
                loss_sum += term.value();
            }
            if (!std::isfinite(batch_loss.value()))
                throw std::runtime_error("train: loss diverged to non-finite at epoch " +
                                         std::to_string(epoch));

            if (!bound.empty()) {
                tape.backward(scale(batch_loss, 1.0 / static_cast<double>(bs)));
                for (auto& [master, leafed] : bound) {
                    Tensor g = tape.grad(*leafed);
                    for (std::size_t i = 0; i < master->size(); ++i)
                        master->data()[i] -= cfg.lr * g[i];
                }
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.phase = phase2 ? 2 : 1;
        const double n = static_cast<double>(data.size());
        st.loss = loss_sum / n;
        st.accuracy = static_cast<double>(correct) / n;
        st.r1 = r1_sum / n;
        st.r2 = r2_sum / n;
        st.r3 = r3_sum / n;
        history.push_back(st);
    }
    return history;
}

}  // namespace sodef
