#pragma once

#include <complex>
#include <string>
#include <vector>

#include "sodef/data.hpp"
#include "sodef/model.hpp"
#include "sodef/parallel.hpp"

namespace sodef {

// Fraction of samples whose argmax prediction matches the label. Samples are
// independent; Parallel mode fans them out over OpenMP threads and writes
// into per-sample slots, so both modes produce identical results.
double evaluate_accuracy(const SodefModel& model, const LabeledDataset& data,
                         par::Mode mode = par::Mode::Parallel);

struct StabilityReport {
    // Per sample, eigenvalues of the field Jacobian at z(0).
    std::vector<std::vector<std::complex<double>>> eigenvalues;
    std::vector<double> abscissa;      // NaN where the eigensolver failed
    std::vector<bool> certificate;     // strict dominance with negative diagonal
    std::vector<bool> eig_converged;
    double frac_abscissa_negative = 0.0;
    double frac_certificate = 0.0;
};

// Eigensolver failures are flagged per sample and count as not-stable in the
// aggregate fractions; they do not abort the report.
StabilityReport stability_report(const SodefModel& model, const LabeledDataset& data,
                                 par::Mode mode = par::Mode::Parallel);

// Scatter rows `sample_id,re,im`, one per eigenvalue, for external plotting.
void save_stability_csv(const StabilityReport& report, const std::string& path);

// Median over the dataset of ||z~(t) - z(t)|| at each requested time, with
// one shared perturbation delta (input- or feature-space by dimension).
std::vector<double> median_damping(const SodefModel& model, const LabeledDataset& data,
                                   const Tensor& delta, const std::vector<double>& times,
                                   par::Mode mode = par::Mode::Parallel);

// Middle order statistic; mean of the two middles for even sizes.
double median(std::vector<double> values);

}  // namespace sodef
