#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "sodef/rng.hpp"
#include "sodef/tensor.hpp"

using namespace sodef;

namespace {

// Tape gradient of build(x) against central differences, relative error.
template <class Build>
void check_gradient(const std::vector<std::size_t>& shape, const std::vector<double>& x0,
                    Build&& build, double tol = 1e-5) {
    Tape tape;
    Tensor x = tape.leaf(Tensor::from_data(shape, x0));
    Tensor y = build(x);
    REQUIRE(y.size() == 1);
    tape.backward(y);
    const Tensor g = tape.grad(x);
    auto plain = [&](const std::vector<double>& v) {
        return build(Tensor::from_data(shape, v)).value();
    };
    const std::vector<double> fd = test::fd_gradient(plain, x0);
    CHECK(test::max_grad_rel_err(g, fd) < tol);
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Tensor m = Tensor::zeros({r, c});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal();
    return m;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("construction and accessors") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.size() == 6);
    CHECK(z.rows() == 2);
    CHECK(z.cols() == 3);
    CHECK(z.at(1, 2) == 0.0);

    Tensor f = Tensor::full({4}, 2.5);
    for (std::size_t i = 0; i < 4; ++i) CHECK(f[i] == 2.5);

    Tensor s = Tensor::scalar(-1.25);
    CHECK(s.value() == -1.25);
    CHECK(s.size() == 1);

    Tensor d = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(d.at(0, 1) == 2.0);
    CHECK(d.at(1, 0) == 3.0);
}

TEST_CASE("construction rejects bad input") {
    CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::from_data({1}, {std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::from_data({1}, {HUGE_VAL}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::full({2}, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::zeros({2, 2}).value(), std::logic_error);
    CHECK_THROWS_AS(Tensor::zeros({4}).rows(), std::logic_error);
}

TEST_CASE("elementwise forward values") {
    const Tensor a = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    const Tensor b = Tensor::from_data({3}, {0.5, 4.0, -1.0});

    const Tensor s = add(a, b);
    CHECK(s[0] == 1.5);
    CHECK(s[1] == 2.0);
    CHECK(s[2] == -0.5);

    const Tensor d = sub(a, b);
    CHECK(d[0] == 0.5);
    CHECK(d[1] == -6.0);
    CHECK(d[2] == 1.5);

    const Tensor p = mul(a, b);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == -8.0);
    CHECK(p[2] == -0.5);

    const Tensor n = neg(a);
    CHECK(n[1] == 2.0);
    const Tensor ab = abs(a);
    CHECK(ab[1] == 2.0);
    CHECK(ab[2] == 0.5);
    const Tensor r = relu(a);
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 0.0);
    const Tensor sc = scale(a, -2.0);
    CHECK(sc[0] == -2.0);
    CHECK(sc[2] == -1.0);
    const Tensor cm = clamp_max(a, 0.75);
    CHECK(cm[0] == 0.75);
    CHECK(cm[1] == -2.0);
    CHECK(cm[2] == 0.5);
}

TEST_CASE("tanh and exp match libm") {
    const Tensor x = Tensor::from_data({2}, {0.5, -1.0});
    const Tensor t = tanh(x);
    CHECK(t[0] == 0.46211715726000974);
    CHECK(t[1] == std::tanh(-1.0));
    const Tensor e = exp(x);
    CHECK(e[0] == std::exp(0.5));
    CHECK(e[1] == std::exp(-1.0));
    CHECK_THROWS_AS(exp(Tensor::from_data({1}, {1000.0})), std::runtime_error);
}

TEST_CASE("size-1 operands broadcast") {
    const Tensor v = Tensor::from_data({3}, {1.0, 2.0, 3.0});
    const Tensor c = Tensor::scalar(10.0);
    const Tensor l = add(v, c);
    const Tensor r = add(c, v);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(l[i] == v[i] + 10.0);
        CHECK(r[i] == v[i] + 10.0);
    }
    const Tensor m = mul(c, v);
    CHECK(m[2] == 30.0);
    CHECK(sub(c, v)[0] == 9.0);
    CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("matmul forward, shapes, and errors") {
    const Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    const Tensor c = matmul(a, b);
    REQUIRE(c.shape() == std::vector<std::size_t>{2, 2});
    CHECK(c.at(0, 0) == 58.0);
    CHECK(c.at(0, 1) == 64.0);
    CHECK(c.at(1, 0) == 139.0);
    CHECK(c.at(1, 1) == 154.0);

    const Tensor v = Tensor::from_data({3}, {1, 0, -1});
    const Tensor av = matmul(a, v);
    REQUIRE(av.shape() == std::vector<std::size_t>{2});
    CHECK(av[0] == -2.0);
    CHECK(av[1] == -2.0);

    CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), std::invalid_argument);
    CHECK_THROWS_AS(matmul(Tensor::zeros({3}), a), std::invalid_argument);
}

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
    Rng rng(2024);
    const Tensor a = random_matrix(64, 48, rng);
    const Tensor b = random_matrix(48, 72, rng);
    const Tensor want = reference::matmul_serial(a, b);
    CHECK(matmul(a, b, par::Mode::Parallel).data() == want.data());
    CHECK(matmul(a, b, par::Mode::Serial).data() == want.data());
    const Tensor v = random_matrix(48, 1, rng);
    const Tensor vv = Tensor::from_data({48}, v.data());
    CHECK(matmul(a, vv, par::Mode::Parallel).data() ==
          reference::matmul_serial(a, vv).data());
}

TEST_CASE("structural ops") {
    const Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor at = transpose(a);
    REQUIRE(at.shape() == std::vector<std::size_t>{3, 2});
    CHECK(at.at(0, 1) == 4.0);
    CHECK(at.at(2, 0) == 3.0);

    const Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    const Tensor dp = diag_part(m);
    CHECK(dp[0] == 1.0);
    CHECK(dp[1] == 4.0);
    const Tensor de = diag_embed(Tensor::from_data({2}, {5, 6}));
    CHECK(de.at(0, 0) == 5.0);
    CHECK(de.at(0, 1) == 0.0);
    CHECK(de.at(1, 1) == 6.0);

    CHECK(sum(a).value() == 21.0);
    CHECK(norm2(Tensor::from_data({2}, {3.0, 4.0})).value() == 5.0);

    CHECK_THROWS_AS(diag_part(a), std::invalid_argument);
    CHECK_THROWS_AS(diag_embed(m), std::invalid_argument);
    CHECK_THROWS_AS(transpose(Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("softmax cross-entropy values") {
    CHECK(softmax_cross_entropy(Tensor::from_data({2}, {10.0, 0.0}), 0).value() ==
          doctest::Approx(4.5398899216870535e-05).epsilon(1e-12));
    CHECK(softmax_cross_entropy(Tensor::from_data({2}, {0.0, 10.0}), 0).value() ==
          doctest::Approx(10.000045398899218).epsilon(1e-14));
    CHECK(softmax_cross_entropy(Tensor::from_data({4}, {1.0, 1.0, 1.0, 1.0}), 2).value() ==
          doctest::Approx(1.3862943611198906).epsilon(1e-14));
    // Max subtraction keeps huge logits finite.
    CHECK(std::isfinite(
        softmax_cross_entropy(Tensor::from_data({2}, {700.0, -700.0}), 1).value()));
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::from_data({2}, {0.0, 0.0}), 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({2, 2}), 0), std::invalid_argument);
}

TEST_CASE("softmax cross-entropy gradient is p - e_y") {
    Tape tape;
    Tensor logits = tape.leaf(Tensor::from_data({3}, {1.0, 2.0, 0.5}));
    Tensor loss = softmax_cross_entropy(logits, 1);
    tape.backward(loss);
    const Tensor g = tape.grad(logits);
    CHECK(g[0] == doctest::Approx(0.23122389762214907).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(0.6285317192117624 - 1.0).epsilon(1e-14));
    CHECK(g[2] == doctest::Approx(0.14024438316608848).epsilon(1e-14));
}

TEST_CASE("gradients match finite differences op by op") {
    const std::vector<double> x0{0.8, -1.3, 0.4, 2.1};
    const Tensor other = Tensor::from_data({4}, {0.5, 1.5, -2.0, 0.3});

    check_gradient({4}, x0, [&](const Tensor& x) { return sum(add(x, other)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(sub(other, x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(mul(x, other)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(mul(x, x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(neg(x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(abs(x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(exp(x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(tanh(x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(relu(x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(scale(x, -2.5)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return sum(clamp_max(x, 0.6)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return norm2(x); });
    check_gradient({4}, x0, [&](const Tensor& x) { return softmax_cross_entropy(x, 2); });
    check_gradient({2, 2}, x0, [&](const Tensor& x) { return sum(diag_part(x)); });
    check_gradient({4}, x0, [&](const Tensor& x) { return norm2(diag_embed(x)); });
    check_gradient({2, 2}, x0, [&](const Tensor& x) { return norm2(transpose(x)); });
    // Broadcast: scalar leaf added to / multiplied with a vector.
    check_gradient({1}, {0.7}, [&](const Tensor& x) { return sum(add(other, x)); });
    check_gradient({1}, {0.7}, [&](const Tensor& x) { return norm2(mul(x, other)); });
}

TEST_CASE("matmul gradients, both operands and matvec") {
    const std::vector<double> a0{0.3, -0.7, 1.2, 0.5, -0.2, 0.9};
    const Tensor b = Tensor::from_data({3, 2}, {1.0, -0.5, 0.25, 2.0, -1.5, 0.75});
    check_gradient({2, 3}, a0, [&](const Tensor& a) { return norm2(matmul(a, b)); });

    const Tensor a = Tensor::from_data({2, 3}, a0);
    check_gradient({3, 2}, {1.0, -0.5, 0.25, 2.0, -1.5, 0.75},
                   [&](const Tensor& bb) { return norm2(matmul(a, bb)); });
    check_gradient({3}, {0.4, -1.1, 0.6},
                   [&](const Tensor& v) { return norm2(matmul(a, v)); });
    // Both operands on the tape at once.
    check_gradient({2, 3}, a0, [&](const Tensor& x) {
        return sum(matmul(x, transpose(x)));
    });
}

TEST_CASE("subgradients at kinks are zero") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::from_data({3}, {0.0, -1.0, 2.0}));
    tape.backward(sum(abs(x)));
    Tensor g = tape.grad(x);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == -1.0);
    CHECK(g[2] == 1.0);

    Tape tape2;
    Tensor y = tape2.leaf(Tensor::from_data({2}, {0.0, 3.0}));
    tape2.backward(sum(relu(y)));
    Tensor gy = tape2.grad(y);
    CHECK(gy[0] == 0.0);
    CHECK(gy[1] == 1.0);

    Tape tape3;
    Tensor z = tape3.leaf(Tensor::zeros({3}));
    tape3.backward(norm2(z));
    Tensor gz = tape3.grad(z);
    for (std::size_t i = 0; i < 3; ++i) CHECK(gz[i] == 0.0);

    // clamp_max passes gradient only below the bound.
    Tape tape4;
    Tensor w = tape4.leaf(Tensor::from_data({2}, {0.5, 2.0}));
    tape4.backward(sum(clamp_max(w, 1.0)));
    Tensor gw = tape4.grad(w);
    CHECK(gw[0] == 1.0);
    CHECK(gw[1] == 0.0);
}

TEST_CASE("composite expression gradient") {
    Rng rng(3);
    const std::vector<std::size_t> wshape{3, 4};
    std::vector<double> w0(12);
    for (double& x : w0) x = 0.4 * rng.normal();
    const Tensor xin = Tensor::from_data({4}, {0.2, -0.6, 1.1, 0.05});
    const Tensor bias = Tensor::from_data({3}, {0.1, -0.2, 0.3});
    check_gradient(wshape, w0, [&](const Tensor& w) {
        return softmax_cross_entropy(tanh(add(matmul(w, xin), bias)), 1);
    });
    const Tensor w = Tensor::from_data(wshape, w0);
    check_gradient({4}, {0.2, -0.6, 1.1, 0.05}, [&](const Tensor& x) {
        return softmax_cross_entropy(tanh(add(matmul(w, x), bias)), 1);
    });
}

TEST_CASE("tape mechanics") {
    Tape tape;
    Tensor master = Tensor::from_data({2}, {1.0, 2.0});
    Tensor leaf = tape.leaf(master);
    master[0] = 99.0;  // leaf copied the values
    CHECK(leaf[0] == 1.0);
    CHECK(leaf.taped());
    CHECK_FALSE(master.taped());

    // Untaped operands act as constants: result is taped, gradient flows
    // only into the leaf.
    Tensor y = mul(leaf, Tensor::from_data({2}, {3.0, 4.0}));
    CHECK(y.taped());
    tape.backward(sum(y));
    Tensor g = tape.grad(leaf);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 4.0);

    CHECK_THROWS_AS(tape.grad(master), std::invalid_argument);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);  // non-scalar root

    Tape fresh;
    CHECK_THROWS_AS(fresh.grad(leaf), std::logic_error);

    // A taped node never reached by backward has zero gradient.
    Tape t2;
    Tensor a2 = t2.leaf(Tensor::scalar(1.0));
    Tensor b2 = t2.leaf(Tensor::scalar(2.0));
    Tensor only_a = scale(a2, 3.0);
    t2.backward(only_a);
    CHECK(t2.grad(b2).value() == 0.0);

    // Operands recorded on different tapes are a logic error.
    Tape ta, tb;
    Tensor la = ta.leaf(Tensor::scalar(1.0));
    Tensor lb = tb.leaf(Tensor::scalar(2.0));
    CHECK_THROWS_AS(add(la, lb), std::logic_error);
}

TEST_CASE("gradients accumulate across reuse") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::scalar(1.5));
    Tensor y = add(mul(x, x), scale(x, 2.0));  // x^2 + 2x, dy/dx = 2x + 2
    tape.backward(y);
    CHECK(tape.grad(x).value() == doctest::Approx(5.0).epsilon(1e-14));
}

}  // TEST_SUITE
