#include "sodef/data.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sodef/rng.hpp"

namespace sodef {

namespace {

void recompute_bounds(LabeledDataset& data) {
    data.lo.assign(data.d, 0.0);
    data.hi.assign(data.d, 0.0);
    if (data.inputs.empty()) return;
    data.lo.assign(data.d, std::numeric_limits<double>::infinity());
    data.hi.assign(data.d, -std::numeric_limits<double>::infinity());
    for (const Tensor& x : data.inputs)
        for (std::size_t i = 0; i < data.d; ++i) {
            data.lo[i] = std::min(data.lo[i], x[i]);
            data.hi[i] = std::max(data.hi[i], x[i]);
        }
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint32_t read_u32_be(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("load_idx: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

LabeledDataset make_blobs(std::size_t num_classes, std::size_t d, std::size_t per_class,
                          double spread, std::uint64_t seed) {
    if (num_classes < 2 || d < 2)
        throw std::invalid_argument("make_blobs: requires L >= 2 and d >= 2");
    if (!(spread >= 0.0)) throw std::invalid_argument("make_blobs: spread must be >= 0");

    Rng rng = Rng(seed).substream("blobs");
    const double box = spread * static_cast<double>(std::max<std::size_t>(2 * num_classes, 6));
    const double min_dist = 6.0 * spread;

    std::vector<Tensor> centers;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        centers.clear();
        for (std::size_t c = 0; c < num_classes; ++c) {
            Tensor center = Tensor::zeros({d});
            for (std::size_t i = 0; i < d; ++i) center[i] = rng.uniform(-box, box);
            centers.push_back(center);
        }
        placed = true;
        for (std::size_t a = 0; a < num_classes && placed; ++a)
            for (std::size_t b = a + 1; b < num_classes && placed; ++b) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double diff = centers[a][i] - centers[b][i];
                    d2 += diff * diff;
                }
                if (d2 < min_dist * min_dist) placed = false;
            }
    }
    if (!placed)
        throw std::runtime_error("make_blobs: could not place centers after 1000 attempts");

    LabeledDataset data;
    data.d = d;
    data.num_classes = num_classes;
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t s = 0; s < per_class; ++s) {
            Tensor x = Tensor::zeros({d});
            for (std::size_t i = 0; i < d; ++i) x[i] = centers[c][i] + rng.normal(0.0, spread);
            data.inputs.push_back(std::move(x));
            data.labels.push_back(c);
        }
    recompute_bounds(data);
    return data;
}

LabeledDataset make_moons(std::size_t per_class, double noise, std::uint64_t seed) {
    if (per_class < 1) throw std::invalid_argument("make_moons: per_class must be >= 1");
    Rng rng = Rng(seed).substream("moons");

    LabeledDataset data;
    data.d = 2;
    data.num_classes = 2;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t s = 0; s < per_class; ++s) {
            const double t = rng.uniform(0.0, std::numbers::pi);
            double x0, x1;
            if (c == 0) {
                x0 = std::cos(t);
                x1 = std::sin(t);
            } else {
                x0 = 1.0 - std::cos(t);
                x1 = 0.5 - std::sin(t);
            }
            x0 += rng.normal(0.0, noise);
            x1 += rng.normal(0.0, noise);
            data.inputs.push_back(Tensor::from_data({2}, {x0, x1}));
            data.labels.push_back(c);
        }
    recompute_bounds(data);
    return data;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t limit) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("load_idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path);

    if (read_u32_be(img, "image header") != 0x00000803u)
        throw std::runtime_error("load_idx: bad image magic");
    const std::uint32_t n_img = read_u32_be(img, "image count");
    const std::uint32_t rows = read_u32_be(img, "image rows");
    const std::uint32_t cols = read_u32_be(img, "image cols");

    if (read_u32_be(lab, "label header") != 0x00000801u)
        throw std::runtime_error("load_idx: bad label magic");
    const std::uint32_t n_lab = read_u32_be(lab, "label count");
    if (n_img != n_lab) throw std::runtime_error("load_idx: image/label count mismatch");

    const std::size_t take = std::min<std::size_t>(limit, n_img);
    const std::size_t d = static_cast<std::size_t>(rows) * cols;

    LabeledDataset data;
    data.d = d;
    data.num_classes = 10;
    std::vector<unsigned char> pix(d);
    for (std::size_t s = 0; s < take; ++s) {
        if (!img.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(d)))
            throw std::runtime_error("load_idx: truncated image data");
        unsigned char y = 0;
        if (!lab.read(reinterpret_cast<char*>(&y), 1))
            throw std::runtime_error("load_idx: truncated label data");
        if (y > 9) throw std::runtime_error("load_idx: label out of digit range");
        std::vector<double> vals(d);
        for (std::size_t i = 0; i < d; ++i) vals[i] = pix[i] / 255.0;
        data.inputs.push_back(Tensor::from_data({d}, std::move(vals)));
        data.labels.push_back(y);
    }
    data.lo.assign(d, 0.0);
    data.hi.assign(d, 1.0);
    return data;
}

void save_dataset_csv(const LabeledDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset_csv: cannot open " + path);
    out << data.d << "," << data.num_classes << "," << data.size() << "\n";
    for (std::size_t s = 0; s < data.size(); ++s) {
        for (std::size_t i = 0; i < data.d; ++i) out << format_g17(data.inputs[s][i]) << ",";
        out << data.labels[s] << "\n";
    }
    if (!out) throw std::runtime_error("save_dataset_csv: write failed for " + path);
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);

    char comma;
    std::size_t d = 0, L = 0, n = 0;
    if (!(in >> d >> comma >> L >> comma >> n))
        throw std::runtime_error("load_dataset_csv: bad header in " + path);

    LabeledDataset data;
    data.d = d;
    data.num_classes = L;
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> vals(d);
        for (std::size_t i = 0; i < d; ++i)
            if (!(in >> vals[i] >> comma))
                throw std::runtime_error("load_dataset_csv: truncated row");
        std::size_t y;
        if (!(in >> y) || y >= L) throw std::runtime_error("load_dataset_csv: bad label");
        data.inputs.push_back(Tensor::from_data({d}, std::move(vals)));
        data.labels.push_back(y);
    }
    recompute_bounds(data);
    return data;
}

std::pair<LabeledDataset, LabeledDataset> shuffle_split(const LabeledDataset& data,
                                                        double train_fraction,
                                                        std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("shuffle_split: fraction must be in [0,1]");
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = Rng(seed).substream("split");
    rng.shuffle(idx);

    const std::size_t n_train =
        static_cast<std::size_t>(train_fraction * static_cast<double>(data.size()) + 0.5);

    LabeledDataset train, test;
    train.d = test.d = data.d;
    train.num_classes = test.num_classes = data.num_classes;
    train.lo = test.lo = data.lo;
    train.hi = test.hi = data.hi;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        LabeledDataset& dst = i < n_train ? train : test;
        dst.inputs.push_back(data.inputs[idx[i]]);
        dst.labels.push_back(data.labels[idx[i]]);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace sodef
