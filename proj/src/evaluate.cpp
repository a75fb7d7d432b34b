#include "sodef/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "sodef/linalg.hpp"

namespace sodef {

double evaluate_accuracy(const SodefModel& model, const LabeledDataset& data, par::Mode mode) {
    if (data.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty dataset");
    std::vector<char> correct(data.size(), 0);
    par::for_each_index(data.size(), mode, [&](std::size_t i) {
        Forward fw = forward(model, data.inputs[i]);
        correct[i] = predict_class(fw.logits) == data.labels[i] ? 1 : 0;
    });
    std::size_t hits = 0;
    for (char c : correct) hits += c;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

StabilityReport stability_report(const SodefModel& model, const LabeledDataset& data,
                                 par::Mode mode) {
    if (data.size() == 0) throw std::invalid_argument("stability_report: empty dataset");
    StabilityReport rep;
    rep.eigenvalues.resize(data.size());
    rep.abscissa.assign(data.size(), std::numeric_limits<double>::quiet_NaN());
    rep.certificate.assign(data.size(), false);
    rep.eig_converged.assign(data.size(), false);

    par::for_each_index(data.size(), mode, [&](std::size_t i) {
        Tensor z0 = model.extractor.forward(data.inputs[i]);
        Tensor j = model.field.jacobian(z0);
        EigenResult eig = eig_general(j);
        rep.eigenvalues[i] = eig.eigenvalues;
        rep.eig_converged[i] = eig.converged;
        if (eig.converged) rep.abscissa[i] = eig.eigenvalues.front().real();
        DominanceCertificate cert = dominance_certificate(j);
        rep.certificate[i] = cert.is_dominant && cert.is_negative_diag;
    });

    std::size_t neg = 0, cert = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (rep.eig_converged[i] && rep.abscissa[i] < 0.0) ++neg;
        if (rep.certificate[i]) ++cert;
    }
    rep.frac_abscissa_negative = static_cast<double>(neg) / static_cast<double>(data.size());
    rep.frac_certificate = static_cast<double>(cert) / static_cast<double>(data.size());
    return rep;
}

void save_stability_csv(const StabilityReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_stability_csv: cannot open " + path);
    out << "sample_id,re,im\n";
    char buf[96];
    for (std::size_t i = 0; i < report.eigenvalues.size(); ++i)
        for (const auto& ev : report.eigenvalues[i]) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, ev.real(), ev.imag());
            out << buf;
        }
    if (!out) throw std::runtime_error("save_stability_csv: write failed for " + path);
}

std::vector<double> median_damping(const SodefModel& model, const LabeledDataset& data,
                                   const Tensor& delta, const std::vector<double>& times,
                                   par::Mode mode) {
    if (data.size() == 0) throw std::invalid_argument("median_damping: empty dataset");
    std::vector<std::vector<double>> per_sample(data.size());
    par::for_each_index(data.size(), mode, [&](std::size_t i) {
        per_sample[i] = perturbation_damping(model, data.inputs[i], delta, times);
    });

    std::vector<double> out;
    out.reserve(times.size());
    for (std::size_t t = 0; t < times.size(); ++t) {
        std::vector<double> column(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) column[i] = per_sample[i][t];
        out.push_back(median(std::move(column)));
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace sodef
