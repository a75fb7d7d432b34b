#include "sodef/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sodef {

namespace {

using nlohmann::json;

std::vector<const Tensor*> all_params(const SodefModel& m) {
    std::vector<const Tensor*> ps;
    for (std::size_t l = 0; l < m.extractor.weights.size(); ++l) {
        ps.push_back(&m.extractor.weights[l]);
        ps.push_back(&m.extractor.biases[l]);
    }
    for (const Tensor* p : m.field.params()) ps.push_back(p);
    ps.push_back(&m.v);
    return ps;
}

void write_f64_le(std::ostream& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("load_checkpoint: truncated parameter blob");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

json solver_to_json(const SolverConfig& cfg) {
    return json{{"kind", to_string(cfg.kind)}, {"step", cfg.step},   {"rtol", cfg.rtol},
                {"atol", cfg.atol},            {"t_end", cfg.t_end}};
}

SolverConfig solver_from_json(const json& j) {
    SolverConfig cfg;
    cfg.kind = solver_kind_from_string(j.at("kind").get<std::string>());
    cfg.step = j.at("step").get<double>();
    cfg.rtol = j.at("rtol").get<double>();
    cfg.atol = j.at("atol").get<double>();
    cfg.t_end = j.at("t_end").get<double>();
    return cfg;
}

}  // namespace

void save_checkpoint(const SodefModel& model, std::uint64_t seed, const std::string& path) {
    std::vector<std::size_t> widths;
    widths.push_back(model.in_dim());
    for (std::size_t l = 0; l + 1 < model.extractor.weights.size(); ++l)
        widths.push_back(model.extractor.weights[l].shape()[0]);
    widths.push_back(model.feature_dim());

    auto params = all_params(model);
    std::size_t count = 0;
    for (const Tensor* p : params) count += p->size();

    json header{{"format", "sodef-checkpoint-v1"},
                {"widths", widths},
                {"num_classes", model.num_classes()},
                {"variant", to_string(model.field.variant)},
                {"head", to_string(model.head)},
                {"solver", solver_to_json(model.solver)},
                {"seed", seed},
                {"param_count", count}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << header.dump() << "\n";
    for (const Tensor* p : params)
        for (std::size_t i = 0; i < p->size(); ++i) write_f64_le(out, (*p)[i]);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: missing header");

    json header = json::parse(line, nullptr, false);
    if (header.is_discarded())
        throw std::runtime_error("load_checkpoint: header is not valid JSON in " + path);

    std::vector<std::size_t> widths;
    std::size_t L = 0, param_count = 0;
    Checkpoint cp;
    SodefModel& m = cp.model;
    try {
        if (header.at("format").get<std::string>() != "sodef-checkpoint-v1")
            throw std::runtime_error("load_checkpoint: unknown format");
        widths = header.at("widths").get<std::vector<std::size_t>>();
        L = header.at("num_classes").get<std::size_t>();
        param_count = header.at("param_count").get<std::size_t>();
        cp.seed = header.at("seed").get<std::uint64_t>();
        m.solver = solver_from_json(header.at("solver"));
        m.head = head_kind_from_string(header.at("head").get<std::string>());
        m.field.variant = field_variant_from_string(header.at("variant").get<std::string>());
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("load_checkpoint: bad header field: ") + e.what());
    }
    if (widths.size() < 2) throw std::runtime_error("load_checkpoint: bad widths");
    const std::size_t n = widths.back();
    m.field.n = n;

    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        m.extractor.weights.push_back(Tensor::zeros({widths[l + 1], widths[l]}));
        m.extractor.biases.push_back(Tensor::zeros({widths[l + 1]}));
    }
    switch (m.field.variant) {
        case FieldVariant::Mlp2:
            m.field.w1 = Tensor::zeros({n, n});
            m.field.b1 = Tensor::zeros({n});
            m.field.w2 = Tensor::zeros({n, n});
            m.field.b2 = Tensor::zeros({n});
            break;
        case FieldVariant::NegGram:
            m.field.c = Tensor::zeros({n, n});
            break;
        case FieldVariant::Affine:
            m.field.c = Tensor::zeros({n, n});
            m.field.b = Tensor::zeros({n});
            break;
    }
    m.v = Tensor::zeros({n, L});

    std::vector<const Tensor*> params = all_params(m);
    std::size_t count = 0;
    for (const Tensor* p : params) count += p->size();
    if (count != param_count)
        throw std::runtime_error("load_checkpoint: parameter count mismatch");

    for (const Tensor* p : params) {
        Tensor* mut = const_cast<Tensor*>(p);
        for (std::size_t i = 0; i < mut->size(); ++i) mut->data()[i] = read_f64_le(in);
    }
    char extra;
    if (in.read(&extra, 1)) throw std::runtime_error("load_checkpoint: trailing bytes");
    return cp;
}

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_history_csv: cannot open " + path);
    out << "epoch,loss,clean_acc,r1_mean,r2_mean,r3_mean\n";
    char buf[256];
    for (const EpochStats& st : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", st.epoch, st.loss,
                      st.accuracy, st.r1, st.r2, st.r3);
        out << buf;
    }
    if (!out) throw std::runtime_error("save_history_csv: write failed for " + path);
}

void save_matrix_csv(const Tensor& m, const std::string& path) {
    if (m.ndim() != 2) throw std::invalid_argument("save_matrix_csv: expects a matrix");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_matrix_csv: cannot open " + path);
    char buf[40];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m.at(i, j));
            out << buf << (j + 1 < m.cols() ? "," : "\n");
        }
    }
    if (!out) throw std::runtime_error("save_matrix_csv: write failed for " + path);
}

Tensor load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_matrix_csv: cannot open " + path);
    std::vector<double> vals;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            vals.push_back(std::stod(cell));
            ++c;
        }
        if (cols == 0) cols = c;
        if (c != cols) throw std::runtime_error("load_matrix_csv: ragged rows in " + path);
        ++rows;
    }
    if (rows == 0) throw std::runtime_error("load_matrix_csv: empty file " + path);
    return Tensor::from_data({rows, cols}, std::move(vals));
}

}  // namespace sodef
