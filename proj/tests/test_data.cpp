#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "sodef/data.hpp"

using namespace sodef;

namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("sodef_data_test_" + name);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

void write_idx_images(const fs::path& path, std::uint32_t magic, std::uint32_t n,
                      std::uint32_t rows, std::uint32_t cols,
                      const std::vector<unsigned char>& pixels) {
    std::ofstream out(path, std::ios::binary);
    write_u32_be(out, magic);
    write_u32_be(out, n);
    write_u32_be(out, rows);
    write_u32_be(out, cols);
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const fs::path& path, std::uint32_t magic, std::uint32_t n,
                      const std::vector<unsigned char>& labels) {
    std::ofstream out(path, std::ios::binary);
    write_u32_be(out, magic);
    write_u32_be(out, n);
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

// Fraction of samples whose nearest class mean matches their label.
double nearest_centroid_accuracy(const LabeledDataset& data) {
    std::vector<std::vector<double>> means(data.num_classes,
                                           std::vector<double>(data.d, 0.0));
    std::vector<std::size_t> counts(data.num_classes, 0);
    for (std::size_t s = 0; s < data.size(); ++s) {
        ++counts[data.labels[s]];
        for (std::size_t i = 0; i < data.d; ++i) means[data.labels[s]][i] += data.inputs[s][i];
    }
    for (std::size_t c = 0; c < data.num_classes; ++c)
        for (std::size_t i = 0; i < data.d; ++i) means[c][i] /= static_cast<double>(counts[c]);

    std::size_t hits = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        std::size_t best = 0;
        double best_d2 = HUGE_VAL;
        for (std::size_t c = 0; c < data.num_classes; ++c) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < data.d; ++i) {
                const double diff = data.inputs[s][i] - means[c][i];
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        if (best == data.labels[s]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

using Row = std::pair<std::vector<double>, std::size_t>;

std::vector<Row> sorted_rows(const LabeledDataset& data) {
    std::vector<Row> rows;
    for (std::size_t s = 0; s < data.size(); ++s) {
        rows.emplace_back(data.inputs[s].data(), data.labels[s]);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("blobs: shape, balance, bounds") {
    const LabeledDataset data = make_blobs(3, 4, 50, 0.7, 11);
    REQUIRE(data.size() == 150);
    CHECK(data.d == 4);
    CHECK(data.num_classes == 3);
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t y : data.labels) {
        REQUIRE(y < 3);
        ++counts[y];
    }
    for (std::size_t c : counts) CHECK(c == 50);

    REQUIRE(data.lo.size() == 4);
    REQUIRE(data.hi.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        double lo = HUGE_VAL, hi = -HUGE_VAL;
        for (const Tensor& x : data.inputs) {
            lo = std::min(lo, x[i]);
            hi = std::max(hi, x[i]);
        }
        CHECK(data.lo[i] == lo);  // bounds are the attained extremes
        CHECK(data.hi[i] == hi);
    }
}

TEST_CASE("blobs separate at 6 sigma") {
    const LabeledDataset data = make_blobs(4, 6, 80, 0.5, 3);
    CHECK(nearest_centroid_accuracy(data) >= 0.99);
}

TEST_CASE("blobs are seed-deterministic") {
    const LabeledDataset a = make_blobs(3, 5, 20, 0.4, 42);
    const LabeledDataset b = make_blobs(3, 5, 20, 0.4, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(a.inputs[s].data() == b.inputs[s].data());
        CHECK(a.labels[s] == b.labels[s]);
    }
    const LabeledDataset c = make_blobs(3, 5, 20, 0.4, 43);
    CHECK(a.inputs[0].data() != c.inputs[0].data());
}

TEST_CASE("blobs degenerate and invalid arguments") {
    // spread 0 collapses every point onto the shared center at the origin.
    const LabeledDataset flat = make_blobs(2, 2, 3, 0.0, 1);
    for (const Tensor& x : flat.inputs) {
        CHECK(x[0] == 0.0);
        CHECK(x[1] == 0.0);
    }
    CHECK_THROWS_AS(make_blobs(1, 4, 10, 0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_blobs(3, 1, 10, 0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_blobs(3, 4, 10, -0.5, 0), std::invalid_argument);
}

TEST_CASE("moons: noiseless points sit on their circles") {
    const LabeledDataset data = make_moons(40, 0.0, 5);
    REQUIRE(data.size() == 80);
    CHECK(data.d == 2);
    CHECK(data.num_classes == 2);
    for (std::size_t s = 0; s < data.size(); ++s) {
        const double x = data.inputs[s][0];
        const double y = data.inputs[s][1];
        if (data.labels[s] == 0) {
            CHECK(x * x + y * y == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(y >= -1e-12);  // upper half circle
        } else {
            CHECK((x - 1.0) * (x - 1.0) + (y - 0.5) * (y - 0.5) ==
                  doctest::Approx(1.0).epsilon(1e-12));
            CHECK(y <= 0.5 + 1e-12);  // lower half circle
        }
    }
    const LabeledDataset again = make_moons(40, 0.0, 5);
    CHECK(data.inputs[7].data() == again.inputs[7].data());
    CHECK_THROWS_AS(make_moons(0, 0.1, 1), std::invalid_argument);
}

TEST_CASE("idx round trip with scaling and limit") {
    const fs::path img = temp_file("img.idx");
    const fs::path lab = temp_file("lab.idx");
    const std::vector<unsigned char> pixels{0,  128, 255, 64,   //
                                            10, 20,  30,  40,   //
                                            1,  2,   3,   255};
    write_idx_images(img, 0x803, 3, 2, 2, pixels);
    write_idx_labels(lab, 0x801, 3, {7, 0, 9});

    const LabeledDataset data = load_idx(img.string(), lab.string(), 10);
    REQUIRE(data.size() == 3);
    CHECK(data.d == 4);
    CHECK(data.num_classes == 10);
    CHECK(data.inputs[0][0] == 0.0);
    CHECK(data.inputs[0][1] == 128.0 / 255.0);
    CHECK(data.inputs[0][2] == 1.0);
    CHECK(data.inputs[0][3] == 64.0 / 255.0);
    CHECK(data.labels[0] == 7);
    CHECK(data.labels[2] == 9);
    CHECK(data.lo == std::vector<double>(4, 0.0));
    CHECK(data.hi == std::vector<double>(4, 1.0));

    const LabeledDataset limited = load_idx(img.string(), lab.string(), 2);
    CHECK(limited.size() == 2);

    fs::remove(img);
    fs::remove(lab);
}

TEST_CASE("idx rejects malformed files") {
    const fs::path img = temp_file("bad_img.idx");
    const fs::path lab = temp_file("bad_lab.idx");
    const std::vector<unsigned char> pixels(12, 0);

    write_idx_images(img, 0x804, 3, 2, 2, pixels);  // wrong magic
    write_idx_labels(lab, 0x801, 3, {1, 2, 3});
    CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 10), std::runtime_error);

    write_idx_images(img, 0x803, 4, 2, 2, pixels);  // count mismatch
    CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 10), std::runtime_error);

    write_idx_images(img, 0x803, 3, 2, 2, {0, 1, 2});  // truncated image payload
    CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 10), std::runtime_error);

    write_idx_images(img, 0x803, 3, 2, 2, pixels);
    write_idx_labels(lab, 0x801, 3, {1, 2, 10});  // label beyond digit range
    CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 10), std::runtime_error);

    CHECK_THROWS_AS(load_idx("/nonexistent/images", lab.string(), 10), std::runtime_error);

    fs::remove(img);
    fs::remove(lab);
}

TEST_CASE("dataset csv round trip is bit-exact") {
    const LabeledDataset data = make_blobs(3, 4, 15, 0.9, 21);
    const fs::path path = temp_file("roundtrip.csv");
    save_dataset_csv(data, path.string());
    const LabeledDataset back = load_dataset_csv(path.string());
    REQUIRE(back.size() == data.size());
    CHECK(back.d == data.d);
    CHECK(back.num_classes == data.num_classes);
    for (std::size_t s = 0; s < data.size(); ++s) {
        CHECK(back.inputs[s].data() == data.inputs[s].data());
        CHECK(back.labels[s] == data.labels[s]);
    }
    CHECK(back.lo == data.lo);
    CHECK(back.hi == data.hi);
    fs::remove(path);
    CHECK_THROWS_AS(load_dataset_csv(path.string()), std::runtime_error);
}

TEST_CASE("shuffle_split partitions deterministically") {
    const LabeledDataset data = make_blobs(3, 3, 34, 0.6, 9);  // 102 samples
    const auto [train, test] = shuffle_split(data, 0.7, 55);
    CHECK(train.size() == 71);  // rounds half up
    CHECK(test.size() == 31);
    CHECK(train.d == 3);
    CHECK(test.num_classes == 3);
    CHECK(train.lo == data.lo);
    CHECK(train.hi == data.hi);
    CHECK(test.lo == data.lo);
    CHECK(test.hi == data.hi);

    // Union preserves the sample multiset.
    LabeledDataset merged = train;
    for (std::size_t s = 0; s < test.size(); ++s) {
        merged.inputs.push_back(test.inputs[s]);
        merged.labels.push_back(test.labels[s]);
    }
    CHECK(sorted_rows(merged) == sorted_rows(data));

    const auto [train2, test2] = shuffle_split(data, 0.7, 55);
    REQUIRE(train2.size() == train.size());
    for (std::size_t s = 0; s < train.size(); ++s) {
        CHECK(train2.inputs[s].data() == train.inputs[s].data());
        CHECK(train2.labels[s] == train.labels[s]);
    }

    const auto [all, none] = shuffle_split(data, 1.0, 1);
    CHECK(all.size() == data.size());
    CHECK(none.size() == 0);
    CHECK_THROWS_AS(shuffle_split(data, 1.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(shuffle_split(data, -0.1, 1), std::invalid_argument);
}

}  // TEST_SUITE
