#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cmbaug/conv3d.hpp"
#include "cmbaug/rng.hpp"

namespace cmbaug::nn {

using ad::Var;

struct Conv3d {
    Var w, b;
    long stride = 1, pad = 1;

    Conv3d() = default;

    Conv3d(long in_ch, long out_ch, long k, long stride_, long pad_, Rng& rng,
           bool zero_init = false)
        : stride(stride_), pad(pad_) {
        const double std_dev = zero_init ? 0.0 : std::sqrt(2.0 / double(in_ch * k * k * k));
        w = Var::leaf(Tensor::randn(Shape{out_ch, in_ch, k, k, k}, rng, std_dev), true);
        b = Var::leaf(Tensor::zeros(Shape{out_ch}), true);
    }

    Var operator()(const Var& x) const { return ad::bias_add(ad::conv3d(x, w, stride, pad), b); }
};

/// Transposed convolution implemented as the data-adjoint of conv3d.
/// Weight layout is (in_ch, out_ch, k, k, k).
struct ConvTranspose3d {
    Var w, b;
    long stride = 2, pad = 1;

    ConvTranspose3d() = default;

    ConvTranspose3d(long in_ch, long out_ch, long k, long stride_, long pad_, Rng& rng)
        : stride(stride_), pad(pad_) {
        const double std_dev = std::sqrt(2.0 / double(in_ch * k * k * k));
        w = Var::leaf(Tensor::randn(Shape{in_ch, out_ch, k, k, k}, rng, std_dev), true);
        b = Var::leaf(Tensor::zeros(Shape{out_ch}), true);
    }

    Var operator()(const Var& x, std::array<long, 3> out_spatial) const {
        return ad::bias_add(ad::conv3d_data_bwd(x, w, stride, pad, out_spatial), b);
    }
};

using NamedParams = std::vector<std::pair<std::string, Var>>;

inline void set_requires_grad(const NamedParams& params, bool rg) {
    for (const auto& [name, p] : params) const_cast<Var&>(p).set_requires_grad(rg);
}

struct GeneratorConfig {
    long base_channels = 8;
    long num_downsamples = 2;
    long num_resblocks = 2;
    double lrelu_slope = 0.2;
};

/// Mask-conditioned encoder/resblock/decoder generator. The input image and
/// binary mask are concatenated on the channel axis; the output is
/// clamp01(image + tanh(head)), and the head is zero-initialized so an
/// untrained generator is the identity on the image.
class Generator {
public:
    Generator() = default;

    Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
        long ch = cfg.base_channels;
        stem_ = Conv3d(2, ch, 3, 1, 1, rng);
        for (long i = 0; i < cfg.num_downsamples; ++i) {
            downs_.emplace_back(ch, ch * 2, 3, 2, 1, rng);
            ch *= 2;
        }
        for (long i = 0; i < cfg.num_resblocks; ++i)
            res_.emplace_back(Conv3d(ch, ch, 3, 1, 1, rng), Conv3d(ch, ch, 3, 1, 1, rng));
        for (long i = 0; i < cfg.num_downsamples; ++i) {
            ups_.emplace_back(ch, ch / 2, 3, 2, 1, rng);
            ch /= 2;
        }
        head_ = Conv3d(ch, 1, 3, 1, 1, rng, /*zero_init=*/true);
    }

    const GeneratorConfig& config() const { return cfg_; }

    Var forward(const Var& image, const Var& mask) const {
        const double sl = cfg_.lrelu_slope;
        Var h = ad::leaky_relu(stem_(ad::concat_ch(image, mask)), sl);
        std::vector<std::array<long, 3>> spatial;
        for (const auto& d : downs_) {
            const Shape& s = h.shape();
            spatial.push_back({s[2], s[3], s[4]});
            h = ad::leaky_relu(d(h), sl);
        }
        for (const auto& [c1, c2] : res_)
            h = ad::add(h, c2(ad::leaky_relu(c1(h), sl)));
        for (std::size_t i = 0; i < ups_.size(); ++i) {
            h = ad::leaky_relu(ups_[i](h, spatial[spatial.size() - 1 - i]), sl);
        }
        Var residual = ad::tanh(head_(h));
        return ad::clamp01(ad::add(image, residual));
    }

    NamedParams named_params(const std::string& prefix) const {
        NamedParams out;
        auto put = [&out](const std::string& n, const Var& v) { out.emplace_back(n, v); };
        put(prefix + ".stem.w", stem_.w);
        put(prefix + ".stem.b", stem_.b);
        for (std::size_t i = 0; i < downs_.size(); ++i) {
            put(prefix + ".down" + std::to_string(i) + ".w", downs_[i].w);
            put(prefix + ".down" + std::to_string(i) + ".b", downs_[i].b);
        }
        for (std::size_t i = 0; i < res_.size(); ++i) {
            put(prefix + ".res" + std::to_string(i) + ".c1.w", res_[i].first.w);
            put(prefix + ".res" + std::to_string(i) + ".c1.b", res_[i].first.b);
            put(prefix + ".res" + std::to_string(i) + ".c2.w", res_[i].second.w);
            put(prefix + ".res" + std::to_string(i) + ".c2.b", res_[i].second.b);
        }
        for (std::size_t i = 0; i < ups_.size(); ++i) {
            put(prefix + ".up" + std::to_string(i) + ".w", ups_[i].w);
            put(prefix + ".up" + std::to_string(i) + ".b", ups_[i].b);
        }
        put(prefix + ".head.w", head_.w);
        put(prefix + ".head.b", head_.b);
        return out;
    }

private:
    GeneratorConfig cfg_;
    Conv3d stem_;
    std::vector<Conv3d> downs_;
    std::vector<std::pair<Conv3d, Conv3d>> res_;
    std::vector<ConvTranspose3d> ups_;
    Conv3d head_;
};

struct DiscriminatorConfig {
    long base_channels = 8;
    long num_layers = 3;
    double lrelu_slope = 0.2;
};

/// Wasserstein critic: strided conv stack without normalization layers,
/// scalar score per sample (spatial mean of the last feature map).
class Critic {
public:
    Critic() = default;

    Critic(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
        long ch = 1;
        for (long i = 0; i < cfg.num_layers; ++i) {
            const long next = cfg.base_channels << i;
            layers_.emplace_back(ch, next, 3, 2, 1, rng);
            ch = next;
        }
        head_ = Conv3d(ch, 1, 3, 1, 1, rng);
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    /// (N,1,Z,Y,X) -> (N) critic scores.
    Var forward(const Var& image) const {
        Var h = image;
        for (const auto& l : layers_) h = ad::leaky_relu(l(h), cfg_.lrelu_slope);
        return ad::sample_mean(head_(h));
    }

    NamedParams named_params(const std::string& prefix) const {
        NamedParams out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            out.emplace_back(prefix + ".conv" + std::to_string(i) + ".w", layers_[i].w);
            out.emplace_back(prefix + ".conv" + std::to_string(i) + ".b", layers_[i].b);
        }
        out.emplace_back(prefix + ".head.w", head_.w);
        out.emplace_back(prefix + ".head.b", head_.b);
        return out;
    }

private:
    DiscriminatorConfig cfg_;
    std::vector<Conv3d> layers_;
    Conv3d head_;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;

    Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            m_.emplace_back(Tensor::zeros(p.shape()));
            v_.emplace_back(Tensor::zeros(p.shape()));
        }
    }

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return t_; }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Var g = params_[i].grad();
            if (!g.defined()) continue;
            Tensor& theta = params_[i].mutable_value();
            const Tensor& gv = g.value();
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (long j = 0; j < theta.numel(); ++j) {
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gv[j];
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gv[j] * gv[j];
                theta[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
            }
        }
    }

    // optimizer state access for checkpointing
    std::vector<Tensor>& moment1() { return m_; }
    std::vector<Tensor>& moment2() { return v_; }
    const std::vector<Tensor>& moment1() const { return m_; }
    const std::vector<Tensor>& moment2() const { return v_; }
    void set_step_count(long t) { t_ = t; }

private:
    std::vector<Var> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

}  // namespace cmbaug::nn
