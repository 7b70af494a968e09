#pragma once

// Shared helpers for the unit and acceptance suites: finite-difference
// gradient checking and small synthetic inputs.

#include <functional>

#include "cmbaug/synthesis.hpp"

namespace cmbaug::testutil {

inline double central_fd(const std::function<double()>& eval, ad::Var leaf, long idx,
                         double h = 1e-5) {
    Tensor& t = leaf.mutable_value();
    const double orig = t[idx];
    t[idx] = orig + h;
    const double fp = eval();
    t[idx] = orig - h;
    const double fm = eval();
    t[idx] = orig;
    return (fp - fm) / (2.0 * h);
}

struct GradCheckResult {
    long checked = 0;
    long failed = 0;
    double worst_rel = 0.0;
};

/// Compares analytic gradients of `build` (a scalar loss expression) against
/// central finite differences on `samples_per_param` random entries of every
/// parameter in `params`.
inline GradCheckResult gradcheck(const std::function<ad::Var()>& build,
                                 const nn::NamedParams& params, double rel_tol,
                                 long samples_per_param, Rng& pick) {
    GradCheckResult res;
    ad::Var loss = build();
    std::vector<ad::Var> leaves;
    for (const auto& [name, p] : params) leaves.push_back(p);
    auto grads = ad::grad(loss, leaves);
    auto eval = [&]() { return build().item(); };
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        if (!leaves[li].requires_grad()) continue;
        const long n = leaves[li].numel();
        for (long k = 0; k < std::min(samples_per_param, n); ++k) {
            const long idx = pick.uniform_int(0, n - 1);
            const double a = grads[li].value()[idx];
            const double f = central_fd(eval, leaves[li], idx);
            const double rel = std::abs(a - f) / std::max({1.0, std::abs(a), std::abs(f)});
            res.worst_rel = std::max(res.worst_rel, rel);
            ++res.checked;
            if (rel > rel_tol) ++res.failed;
        }
    }
    return res;
}

/// Random image batch in (0.1, 0.9): keeps the clamp and kink boundaries away
/// from the finite-difference probes.
inline Tensor interior_images(Shape shape, Rng& rng) {
    return Tensor::uniform(std::move(shape), rng, 0.1, 0.9);
}

/// Random blobby binary mask batch.
inline Tensor random_mask(Shape shape, Rng& rng, double fill_prob = 0.1) {
    Tensor m(shape);
    for (long i = 0; i < m.numel(); ++i) m[i] = rng.bernoulli(fill_prob) ? 1.0 : 0.0;
    return m;
}

/// Critic that computes a per-sample dot product with a fixed weight tensor;
/// its input gradient is the weight itself, making the gradient-penalty value
/// analytic: (||w||_2 - 1)^2.
inline synth::CriticFn linear_critic(const ad::Var& w) {
    return [w](const ad::Var& x) {
        return ad::sample_sum(ad::mul(x, ad::sample_broadcast(
                                             ad::sample_sum(ad::mul(x, w)), x.shape())));
    };
}

}  // namespace cmbaug::testutil
