#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "resp/graph.hpp"
#include "support/testutil.hpp"

using namespace resp;
using diff::Graph;
using diff::Mode;
using diff::Parameter;
using testutil::random_tensor;

TEST_CASE("dense matches the naive matmul oracle") {
    Rng rng(7);
    const Tensor x = random_tensor({4, 6}, rng);
    const Tensor w = random_tensor({6, 5}, rng);
    const Tensor b = random_tensor({5}, rng);
    Graph g;
    const int y = g.dense(g.input(x), g.input(w), g.input(b));
    CHECK(testutil::max_abs_diff(g.val(y), testutil::naive_dense(x, w, b)) < 1e-12);
}

TEST_CASE("dense identity and hand case") {
    Graph g;
    Tensor w({2, 2});
    w.at2(0, 0) = 1.0;
    w.at2(1, 1) = 2.0;
    Tensor b({2});
    b.data = {1.0, 1.0};
    Tensor x({1, 2});
    x.data = {1.0, 2.0};
    const int y = g.dense(g.input(x), g.input(w), g.input(b));
    CHECK(g.val(y).data[0] == doctest::Approx(2.0));
    CHECK(g.val(y).data[1] == doctest::Approx(5.0));

    Graph g2;
    Tensor eye({2, 2});
    eye.at2(0, 0) = eye.at2(1, 1) = 1.0;
    const int y2 = g2.dense(g2.input(x), g2.input(eye), g2.input(Tensor({2})));
    CHECK(testutil::max_abs_diff(g2.val(y2), x) == 0.0);
}

TEST_CASE("conv1d identity kernel and direct sum") {
    // K = [1], single channel/filter: output equals input
    Graph g;
    Tensor x({1, 3, 1});
    x.data = {1.0, 2.0, 3.0};
    Tensor k({1, 1, 1});
    k.data = {1.0};
    const int y = g.conv1d(g.input(x), g.input(k), g.input(Tensor({1})), 1);
    CHECK(testutil::max_abs_diff(g.val(y), x) == 0.0);

    // x = [1,2,3], K = [1,1] with left zero padding -> [1,3,5]
    Graph g2;
    Tensor k2({2, 1, 1});
    k2.data = {1.0, 1.0};
    const int y2 = g2.conv1d(g2.input(x), g2.input(k2), g2.input(Tensor({1})), 1);
    CHECK(g2.val(y2).data[0] == doctest::Approx(1.0));
    CHECK(g2.val(y2).data[1] == doctest::Approx(3.0));
    CHECK(g2.val(y2).data[2] == doctest::Approx(5.0));
}

TEST_CASE("conv1d matches the naive oracle on random data") {
    Rng rng(11);
    const Tensor x = random_tensor({3, 9, 4}, rng);
    const Tensor k = random_tensor({3, 4, 5}, rng);
    const Tensor b = random_tensor({5}, rng);
    for (int dil : {1, 2, 3}) {
        Graph g;
        const int y = g.conv1d(g.input(x), g.input(k), g.input(b), dil);
        CHECK(testutil::max_abs_diff(g.val(y), testutil::naive_conv1d(x, k, b, dil)) < 1e-12);
    }
}

TEST_CASE("dilated conv equals zero-interleaved dense conv") {
    Rng rng(13);
    const Tensor x = random_tensor({2, 12, 3}, rng);
    const Tensor k = random_tensor({3, 3, 4}, rng);
    const Tensor b = random_tensor({4}, rng);
    for (int dil : {2, 3}) {
        Graph g1, g2;
        const int y1 = g1.conv1d(g1.input(x), g1.input(k), g1.input(b), dil);
        const int y2 =
            g2.conv1d(g2.input(x), g2.input(testutil::interleave_kernel(k, dil)), g2.input(b), 1);
        CHECK(testutil::max_abs_diff(g1.val(y1), g2.val(y2)) < 1e-12);
    }
}

TEST_CASE("conv1d rejects channel mismatch") {
    Graph g;
    Rng rng(1);
    const int x = g.input(random_tensor({1, 5, 3}, rng));
    const int k = g.input(random_tensor({2, 4, 2}, rng));
    const int b = g.input(Tensor({2}));
    CHECK_THROWS_AS(g.conv1d(x, k, b, 1), ShapeError);
}

TEST_CASE("maxpool basics") {
    Graph g;
    Tensor x({1, 4, 1});
    x.data = {1.0, 3.0, 2.0, 5.0};
    const int y = g.maxpool1d(g.input(x), 2);
    CHECK(g.val(y).data[0] == doctest::Approx(3.0));
    CHECK(g.val(y).data[1] == doctest::Approx(5.0));

    Graph g2;
    const int y2 = g2.maxpool1d(g2.input(x), 1);
    CHECK(testutil::max_abs_diff(g2.val(y2), x) == 0.0);

    Graph g3;
    CHECK_THROWS_AS(g3.maxpool1d(g3.input(x), 5), ShapeError);
}

TEST_CASE("upsample basics and pool round trip on constants") {
    Graph g;
    Tensor x({1, 2, 1});
    x.data = {1.0, 2.0};
    const int y = g.upsample1d(g.input(x), 2);
    CHECK(g.val(y).data == std::vector<double>{1.0, 1.0, 2.0, 2.0});

    Graph g2;
    const int y1 = g2.upsample1d(g2.input(x), 1);
    CHECK(testutil::max_abs_diff(g2.val(y1), x) == 0.0);

    Graph g3;
    Tensor c({1, 6, 2}, 3.5);
    const int id = g3.upsample1d(g3.maxpool1d(g3.input(c), 2), 2);
    CHECK(testutil::max_abs_diff(g3.val(id), c) == 0.0);
}

TEST_CASE("batchnorm normalizes per channel in train mode") {
    Rng rng(17);
    diff::BatchNormState st;
    Parameter gamma("gamma", Tensor({3}, 1.0));
    Parameter beta("beta", Tensor({3}));
    Graph g;
    const Tensor x = random_tensor({8, 5, 3}, rng, 2.0);
    const int y = g.batchnorm(g.input(x), g.param(gamma), g.param(beta), st, Mode::train);
    const Tensor& out = g.val(y);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        const int n = 8 * 5;
        for (int b = 0; b < 8; ++b)
            for (int t = 0; t < 5; ++t) mean += out.at3(b, t, c);
        mean /= n;
        for (int b = 0; b < 8; ++b)
            for (int t = 0; t < 5; ++t) {
                const double d = out.at3(b, t, c) - mean;
                var += d * d;
            }
        var /= n;
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm on a standardized batch is near identity") {
    Rng rng(19);
    Tensor x = random_tensor({64, 1, 2}, rng);
    // standardize exactly
    for (int c = 0; c < 2; ++c) {
        double mean = 0, var = 0;
        for (int b = 0; b < 64; ++b) mean += x.at3(b, 0, c);
        mean /= 64;
        for (int b = 0; b < 64; ++b) var += (x.at3(b, 0, c) - mean) * (x.at3(b, 0, c) - mean);
        var /= 64;
        for (int b = 0; b < 64; ++b) x.at3(b, 0, c) = (x.at3(b, 0, c) - mean) / std::sqrt(var);
    }
    diff::BatchNormState st;
    Parameter gamma("gamma", Tensor({2}, 1.0));
    Parameter beta("beta", Tensor({2}));
    Graph g;
    const int y = g.batchnorm(g.input(x), g.param(gamma), g.param(beta), st, Mode::train);
    CHECK(testutil::max_abs_diff(g.val(y), x) < 1e-4);
}

TEST_CASE("batchnorm rejects batch of one in train mode") {
    diff::BatchNormState st;
    Parameter gamma("gamma", Tensor({2}, 1.0));
    Parameter beta("beta", Tensor({2}));
    Graph g;
    Rng rng(1);
    const int x = g.input(random_tensor({1, 4, 2}, rng));
    CHECK_THROWS_AS(g.batchnorm(x, g.param(gamma), g.param(beta), st, Mode::train), DataError);
}

TEST_CASE("dropout expectation and infer identity") {
    Rng rng(23);
    Tensor x({1, 1000}, 1.0);
    // p = 0 and infer mode are identities
    {
        Graph g;
        const int y = g.dropout(g.input(x), 0.0, Mode::train, rng);
        CHECK(testutil::max_abs_diff(g.val(y), x) == 0.0);
        Graph g2;
        const int y2 = g2.dropout(g2.input(x), 0.7, Mode::infer, rng);
        CHECK(testutil::max_abs_diff(g2.val(y2), x) == 0.0);
    }
    // E[output] = input within Monte-Carlo tolerance
    const double p = 0.3;
    double sum = 0.0;
    const int reps = 100;  // 100 reps x 1000 units = 1e5 masks
    for (int r = 0; r < reps; ++r) {
        Graph g;
        const int y = g.dropout(g.input(x), p, Mode::train, rng);
        for (double v : g.val(y).data) sum += v;
    }
    const double mean = sum / (reps * 1000.0);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("activation values") {
    Graph g;
    Tensor x({1, 3});
    x.data = {0.0, -1.0, 2.0};
    CHECK(g.val(g.sigmoid(g.input(x))).data[0] == doctest::Approx(0.5));
    CHECK(g.val(g.leaky_relu(g.input(x), 0.1)).data[1] == doctest::Approx(-0.1));
    CHECK(g.val(g.relu(g.input(x))).data[1] == 0.0);

    Rng rng(3);
    Graph g2;
    const int sm = g2.softmax(g2.input(testutil::random_tensor({5, 7}, rng, 3.0)));
    for (int r = 0; r < 5; ++r) {
        double s = 0.0;
        for (int c = 0; c < 7; ++c) s += g2.val(sm).at2(r, c);
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("backward of sum is all ones and double backward errors") {
    Rng rng(29);
    Parameter p("p", random_tensor({3, 4}, rng));
    Graph g;
    const int loss = g.sum_all(g.param(p));
    g.backward(loss);
    for (double v : p.grad.data) CHECK(v == doctest::Approx(1.0));
    CHECK_THROWS_AS(g.backward(loss), Error);
}

TEST_CASE("unreached parameters keep zero gradients") {
    Rng rng(31);
    Parameter used("used", random_tensor({2, 2}, rng));
    Parameter unused("unused", random_tensor({2, 2}, rng));
    used.zero_grad();
    unused.zero_grad();
    Graph g;
    const int loss = g.sum_all(g.param(used));
    g.param(unused);  // registered on the graph but not connected to the loss
    g.backward(loss);
    for (double v : unused.grad.data) CHECK(v == 0.0);
    CHECK(unused.grad_fresh);
}

namespace {

// composite conv -> batchnorm -> pool -> dense network used for the
// finite-difference sweeps
struct TinyNet {
    Parameter k{"k", Tensor()};
    Parameter kb{"kb", Tensor()};
    Parameter gamma{"gamma", Tensor()};
    Parameter beta{"beta", Tensor()};
    Parameter w{"w", Tensor()};
    Parameter b{"b", Tensor()};
    Parameter x{"x", Tensor()};
    Tensor target;
    diff::BatchNormState st;
    Mode mode = Mode::train;

    TinyNet(Rng& rng) {
        k.value = random_tensor({3, 2, 4}, rng, 0.5);
        kb.value = random_tensor({4}, rng, 0.1);
        gamma.value = Tensor({4}, 1.0);
        beta.value = Tensor({4});
        w.value = random_tensor({2 * 4, 3}, rng, 0.5);
        b.value = random_tensor({3}, rng, 0.1);
        x.value = random_tensor({4, 5, 2}, rng);
        target = random_tensor({4, 3}, rng);
        for (Parameter* p : params()) p->grad = Tensor(p->value.shape);
    }
    std::vector<Parameter*> params() { return {&k, &kb, &gamma, &beta, &w, &b, &x}; }

    double loss(bool do_backward, Rng& rng) {
        Graph g;
        int h = g.conv1d(g.param(x), g.param(k), g.param(kb), 2);
        h = g.leaky_relu(h, 0.1);
        h = g.batchnorm(h, g.param(gamma), g.param(beta), st, mode);
        h = g.dropout(h, 0.25, mode, rng);
        h = g.maxpool1d(h, 2);
        h = g.flatten(h);
        h = g.dense(h, g.param(w), g.param(b));
        h = g.tanh_act(h);
        const int l = g.se_half_mean(h, g.input(target));
        if (do_backward) g.backward(l);
        return g.scalar(l);
    }
};

}  // namespace

TEST_CASE("finite differences validate the composite network gradient") {
    Rng rng(37);
    TinyNet net(rng);
    // frozen dropout mask: reset the rng before every evaluation
    auto loss_fn = [&](bool do_backward) {
        Rng mask_rng(999);
        return net.loss(do_backward, mask_rng);
    };
    const auto rep = diff::grad_check(loss_fn, net.params());
    INFO("worst " << rep.worst_param << "[" << rep.worst_index << "] rel " << rep.max_rel_error);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("finite differences validate each op in isolation") {
    Rng rng(41);
    // softmax + cross entropy
    {
        Parameter logits("logits", random_tensor({6, 4}, rng));
        logits.zero_grad();
        auto fn = [&](bool bw) {
            Graph g;
            const int l = g.softmax_ce_mean(g.param(logits), {0, 1, 2, 3, 0, 1});
            if (bw) g.backward(l);
            return g.scalar(l);
        };
        CHECK(diff::grad_check(fn, {&logits}).max_rel_error < 1e-6);
    }
    // kl divergence node
    {
        Parameter mu("mu", random_tensor({5, 3}, rng));
        Parameter lv("lv", random_tensor({5, 3}, rng, 0.5));
        mu.zero_grad();
        lv.zero_grad();
        auto fn = [&](bool bw) {
            Graph g;
            const int l = g.kl_gauss_mean(g.param(mu), g.param(lv));
            if (bw) g.backward(l);
            return g.scalar(l);
        };
        CHECK(diff::grad_check(fn, {&mu, &lv}).max_rel_error < 1e-6);
    }
    // softplus / sigmoid / exp / mul / concat path
    {
        Parameter a("a", random_tensor({4, 3}, rng));
        Parameter b("b", random_tensor({4, 3}, rng));
        a.zero_grad();
        b.zero_grad();
        auto fn = [&](bool bw) {
            Graph g;
            const int pa = g.param(a);
            const int pb = g.param(b);
            const int h = g.concat_cols(g.mul(g.sigmoid(pa), g.exp_(g.scale(pb, 0.3))),
                                        g.softplus(g.sub(pa, pb)));
            const int l = g.mean_all(g.mul(h, h));
            if (bw) g.backward(l);
            return g.scalar(l);
        };
        CHECK(diff::grad_check(fn, {&a, &b}).max_rel_error < 1e-5);
    }
    // upsample + conv + softmax head
    {
        Parameter x("x", random_tensor({3, 4, 2}, rng));
        Parameter k("k", random_tensor({2, 2, 3}, rng));
        Parameter kb("kb", random_tensor({3}, rng, 0.1));
        for (Parameter* p : {&x, &k, &kb}) p->zero_grad();
        auto fn = [&](bool bw) {
            Graph g;
            int h = g.upsample1d(g.param(x), 2);
            h = g.conv1d(h, g.param(k), g.param(kb), 1);
            h = g.flatten(h);
            const int l = g.softmax_ce_mean(h, {1, 5, 3});
            if (bw) g.backward(l);
            return g.scalar(l);
        };
        CHECK(diff::grad_check(fn, {&x, &k, &kb}).max_rel_error < 1e-5);
    }
}

TEST_CASE("forward determinism under a fixed seed") {
    auto run = [&]() {
        Rng rng(123);
        TinyNet net(rng);
        Rng mask(5);
        return net.loss(false, mask);
    };
    CHECK(run() == run());
}

TEST_CASE("adam identity on zero gradients and first-step magnitude") {
    Rng rng(43);
    Parameter p("p", random_tensor({4}, rng));
    const Tensor before = p.value;
    p.zero_grad();
    p.grad_fresh = true;
    diff::Adam opt({&p}, 1e-2);
    opt.step();
    CHECK(testutil::max_abs_diff(p.value, before) == 0.0);

    // constant gradient: bias-corrected first step has magnitude ~ lr
    Parameter q("q", Tensor({3}, 1.0));
    q.zero_grad();
    for (double& gv : q.grad.data) gv = 0.37;
    q.grad_fresh = true;
    diff::Adam opt2({&q}, 1e-2);
    opt2.step();
    for (double v : q.value.data) CHECK(std::fabs((1.0 - v) - 1e-2) < 1e-6);
}

TEST_CASE("adam requires populated gradients") {
    Parameter p("p", Tensor({2}, 1.0));
    p.zero_grad();
    diff::Adam opt({&p}, 1e-3);
    CHECK_THROWS_AS(opt.step(), Error);
}

TEST_CASE("adam drives a quadratic bowl to zero") {
    Parameter w("w", Tensor({1}, 1.0));
    diff::Adam opt({&w}, 1e-2);
    for (int i = 0; i < 500; ++i) {
        w.zero_grad();
        Graph g;
        const int pw = g.param(w);
        const int loss = g.mean_all(g.mul(pw, pw));
        g.backward(loss);
        opt.step();
    }
    CHECK(std::fabs(w.value.data[0]) < 1e-3);
    // scalar-simulation oracle for the same trajectory
    double m = 0.0, v = 0.0, ws = 1.0;
    for (int t = 1; t <= 500; ++t) {
        const double g = 2.0 * ws;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        ws -= 1e-2 * (m / (1.0 - std::pow(0.9, t))) /
              (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(std::fabs(w.value.data[0] - ws) < 1e-12);
}

TEST_CASE("backward reports non-finite losses") {
    Parameter p("p", Tensor({1}, 1e308));
    p.zero_grad();
    Graph g;
    const int pp = g.param(p);
    const int loss = g.sum_all(g.mul(pp, pp));  // overflows to inf
    CHECK_THROWS_AS(g.backward(loss), NumericError);
}
