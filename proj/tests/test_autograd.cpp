#include <catch2/catch_amalgamated.hpp>

#include "cmbaug/conv3d.hpp"
#include "cmbaug/nn.hpp"

using namespace cmbaug;
using ad::Var;

namespace {

// central finite difference of a scalar-valued graph w.r.t. one leaf entry
double fd_grad(const std::function<double()>& eval, Var leaf, long idx, double h = 1e-5) {
    Tensor& t = leaf.mutable_value();
    const double orig = t[idx];
    t[idx] = orig + h;
    const double fp = eval();
    t[idx] = orig - h;
    const double fm = eval();
    t[idx] = orig;
    return (fp - fm) / (2.0 * h);
}

void check_grads(const std::function<Var()>& build, std::vector<Var> leaves, double tol = 1e-6) {
    Var loss = build();
    auto grads = ad::grad(loss, leaves);
    auto eval = [&]() {
        ad::NoGradGuard ng;
        return build().item();
    };
    Rng pick(7);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const long n = leaves[li].numel();
        for (int k = 0; k < std::min<long>(n, 6); ++k) {
            const long idx = pick.uniform_int(0, n - 1);
            const double a = grads[li].value()[idx];
            const double f = fd_grad(eval, leaves[li], idx);
            INFO("leaf " << li << " idx " << idx << " analytic " << a << " fd " << f);
            CHECK(std::abs(a - f) <= tol * std::max({1.0, std::abs(a), std::abs(f)}));
        }
    }
}

// independent gather-form convolution used as an oracle
Tensor conv3d_naive(const Tensor& x, const Tensor& w, long s, long p) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    const long N = xs[0], Ci = xs[1], Z = xs[2], Y = xs[3], X = xs[4];
    const long Co = ws[0], K = ws[2];
    auto ext = [&](long in) { return (in + 2 * p - K) / s + 1; };
    const long Zo = ext(Z), Yo = ext(Y), Xo = ext(X);
    Tensor out(Shape{N, Co, Zo, Yo, Xo});
    for (long n = 0; n < N; ++n)
        for (long co = 0; co < Co; ++co)
            for (long zo = 0; zo < Zo; ++zo)
                for (long yo = 0; yo < Yo; ++yo)
                    for (long xo = 0; xo < Xo; ++xo) {
                        double acc = 0.0;
                        for (long ci = 0; ci < Ci; ++ci)
                            for (long kz = 0; kz < K; ++kz)
                                for (long ky = 0; ky < K; ++ky)
                                    for (long kx = 0; kx < K; ++kx) {
                                        const long z = zo * s - p + kz;
                                        const long y = yo * s - p + ky;
                                        const long xx = xo * s - p + kx;
                                        if (z < 0 || z >= Z || y < 0 || y >= Y || xx < 0 ||
                                            xx >= X)
                                            continue;
                                        acc += x[(((n * Ci + ci) * Z + z) * Y + y) * X + xx] *
                                               w[(((co * Ci + ci) * K + kz) * K + ky) * K + kx];
                                    }
                        out[(((n * Co + co) * Zo + zo) * Yo + yo) * Xo + xo] = acc;
                    }
    return out;
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
    Rng rng(11);
    Var x = Var::leaf(Tensor::uniform(Shape{2, 1, 3, 3, 3}, rng, 0.1, 0.9), true);
    Var y = Var::leaf(Tensor::uniform(Shape{2, 1, 3, 3, 3}, rng, -0.8, 0.8), true);

    check_grads(
        [&]() {
            Var t = ad::mul(ad::tanh(x), ad::sigmoid(y));
            t = ad::add(t, ad::softplus(ad::sub(ad::scale(x, 2.0), y)));
            t = ad::add(t, ad::abs(ad::sub(x, y)));
            t = ad::add(t, ad::pow_const(ad::add_scalar(ad::mul(x, x), 0.5), 1.5));
            return ad::mean_all(t);
        },
        {x, y});
}

TEST_CASE("log/exp/leaky_relu/clamp01 gradients") {
    Rng rng(12);
    Var x = Var::leaf(Tensor::uniform(Shape{1, 2, 2, 2, 2}, rng, 0.2, 0.8), true);
    check_grads(
        [&]() {
            Var t = ad::log(ad::add_scalar(ad::exp(x), 1.0));
            t = ad::add(t, ad::leaky_relu(ad::add_scalar(x, -0.5), 0.2));
            t = ad::add(t, ad::clamp01(x));
            return ad::sum_all(t);
        },
        {x});
}

TEST_CASE("reductions and channel ops") {
    Rng rng(13);
    Var x = Var::leaf(Tensor::uniform(Shape{2, 3, 2, 2, 2}, rng, -1, 1), true);
    Var b = Var::leaf(Tensor::uniform(Shape{3}, rng, -1, 1), true);
    check_grads(
        [&]() {
            Var t = ad::bias_add(x, b);
            Var a = ad::slice_ch(t, 0, 1);
            Var c = ad::slice_ch(t, 1, 3);
            Var joined = ad::concat_ch(ad::mul(a, a), c);
            return ad::add(ad::mean_all(joined), ad::mean_all(ad::sample_mean(t)));
        },
        {x, b});

    SECTION("sample_sum values") {
        Tensor t(Shape{2, 1, 1, 1, 2});
        t[0] = 1;
        t[1] = 2;
        t[2] = 3;
        t[3] = 4;
        Var v = Var::constant(t);
        Tensor s = ad::sample_sum(v).value();
        CHECK(s[0] == 3.0);
        CHECK(s[1] == 7.0);
    }
}

TEST_CASE("conv3d forward matches naive oracle") {
    Rng rng(21);
    for (long s : {1L, 2L})
        for (long p : {0L, 1L}) {
            Var x = Var::leaf(Tensor::randn(Shape{2, 3, 5, 6, 7}, rng), false);
            Var w = Var::leaf(Tensor::randn(Shape{4, 3, 3, 3, 3}, rng), false);
            Tensor got = ad::conv3d(x, w, s, p).value();
            Tensor want = conv3d_naive(x.value(), w.value(), s, p);
            REQUIRE(got.shape() == want.shape());
            double maxdiff = 0;
            for (long i = 0; i < got.numel(); ++i)
                maxdiff = std::max(maxdiff, std::abs(got[i] - want[i]));
            INFO("stride " << s << " pad " << p);
            CHECK(maxdiff < 1e-12);
        }
}

TEST_CASE("conv3d gradients match finite differences") {
    Rng rng(22);
    for (long s : {1L, 2L}) {
        Var x = Var::leaf(Tensor::randn(Shape{2, 2, 4, 4, 4}, rng, 0.5), true);
        Var w = Var::leaf(Tensor::randn(Shape{3, 2, 3, 3, 3}, rng, 0.5), true);
        check_grads(
            [&]() {
                Var y = ad::conv3d(x, w, s, 1);
                return ad::mean_all(ad::mul(y, y));
            },
            {x, w}, 1e-5);
    }
}

TEST_CASE("transposed conv gradients match finite differences") {
    Rng rng(23);
    Var g = Var::leaf(Tensor::randn(Shape{1, 3, 2, 2, 2}, rng, 0.5), true);
    Var w = Var::leaf(Tensor::randn(Shape{3, 2, 3, 3, 3}, rng, 0.5), true);
    check_grads(
        [&]() {
            Var y = ad::conv3d_data_bwd(g, w, 2, 1, {4, 4, 4});
            return ad::mean_all(ad::mul(y, y));
        },
        {g, w}, 1e-5);
}

TEST_CASE("gradient-of-gradient through a conv net") {
    // the mechanism the gradient penalty depends on: differentiate a function
    // of an input gradient w.r.t. the weights
    Rng rng(31);
    Var w1 = Var::leaf(Tensor::randn(Shape{2, 1, 3, 3, 3}, rng, 0.4), true);
    Var w2 = Var::leaf(Tensor::randn(Shape{1, 2, 3, 3, 3}, rng, 0.4), true);
    Tensor x0 = Tensor::uniform(Shape{1, 1, 4, 4, 4}, rng, 0.1, 0.9);

    auto penalty = [&]() {
        Var x = Var::leaf(x0, true);
        Var h = ad::tanh(ad::conv3d(x, w1, 1, 1));
        Var score = ad::sum_all(ad::conv3d(h, w2, 1, 1));
        Var gx = ad::grad(score, {x}, /*create_graph=*/true)[0];
        Var norm2 = ad::sum_all(ad::mul(gx, gx));
        return ad::mean_all(ad::mul(ad::add_scalar(norm2, -1.0), ad::add_scalar(norm2, -1.0)));
    };

    Var loss = penalty();
    auto grads = ad::grad(loss, {w1, w2});
    auto eval = [&]() {
        ad::NoGradGuard outer;  // graph for grad-of-grad is still built inside
        ad::GradModeGuard gg(true);
        return penalty().item();
    };
    Rng pick(5);
    for (auto [leaf, gvar] : {std::pair{w1, grads[0]}, std::pair{w2, grads[1]}}) {
        for (int k = 0; k < 5; ++k) {
            const long idx = pick.uniform_int(0, leaf.numel() - 1);
            const double a = gvar.value()[idx];
            const double f = fd_grad(eval, leaf, idx, 1e-5);
            INFO("idx " << idx << " analytic " << a << " fd " << f);
            CHECK(std::abs(a - f) <= 1e-4 * std::max({1.0, std::abs(a), std::abs(f)}));
        }
    }
}

TEST_CASE("backward accumulates into leaves") {
    Rng rng(41);
    Var x = Var::leaf(Tensor::uniform(Shape{1, 1, 2, 2, 2}, rng, -1, 1), true);
    Var loss = ad::sum_all(ad::mul(x, x));
    ad::backward(loss);
    REQUIRE(x.grad().defined());
    for (long i = 0; i < x.numel(); ++i)
        CHECK(x.grad().value()[i] == Catch::Approx(2.0 * x.value()[i]));
    // second backward accumulates
    ad::backward(ad::sum_all(x));
    for (long i = 0; i < x.numel(); ++i)
        CHECK(x.grad().value()[i] == Catch::Approx(2.0 * x.value()[i] + 1.0));
    x.zero_grad();
    CHECK_FALSE(x.grad().defined());
}

TEST_CASE("generator identity at init and adam step") {
    Rng rng(51);
    nn::GeneratorConfig gcfg;
    gcfg.base_channels = 2;
    gcfg.num_downsamples = 1;
    gcfg.num_resblocks = 1;
    nn::Generator gen(gcfg, rng);
    Var img = Var::constant(Tensor::uniform(Shape{1, 1, 4, 4, 4}, rng, 0.0, 1.0));
    Var mask = Var::constant(Tensor::zeros(Shape{1, 1, 4, 4, 4}));
    Tensor out = gen.forward(img, mask).value();
    double dev = 0;
    for (long i = 0; i < out.numel(); ++i) dev = std::max(dev, std::abs(out[i] - img.value()[i]));
    CHECK(dev == 0.0);  // zero-initialized head makes the generator exact identity

    auto named = gen.named_params("g");
    std::vector<Var> params;
    for (auto& [n, p] : named) params.push_back(p);
    nn::Adam opt(params, {});
    Var target = Var::constant(Tensor::full(Shape{1, 1, 4, 4, 4}, 0.25));
    Var loss0 = ad::mean_all(ad::abs(ad::sub(gen.forward(img, mask), target)));
    opt.zero_grad();
    ad::backward(loss0);
    opt.step();
    Var loss1 = ad::mean_all(ad::abs(ad::sub(gen.forward(img, mask), target)));
    CHECK(loss1.item() <= loss0.item());
}
