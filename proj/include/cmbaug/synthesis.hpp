#pragma once

#include "cmbaug/checkpoint.hpp"
#include "cmbaug/mask_sampler.hpp"
#include "cmbaug/nn.hpp"
#include "cmbaug/serialize.hpp"

namespace cmbaug::synth {

using ad::Var;

// ---------------------------------------------------------------------------
// Dual-cycle adversarial synthesis: healthy->pathological->healthy (HPH) and
// pathological->healthy->pathological (PHP). Generators are conditioned on a
// pathology mask; critics are Wasserstein with gradient penalty.
// ---------------------------------------------------------------------------

struct LossWeights {
    double lambda_cc = 10.0;
    double lambda_id = 5.0;
    double lambda_am = 10.0;
    double lambda_gp = 10.0;
    long critic_steps_per_gen_step = 5;

    void validate() const {
        for (double w : {lambda_cc, lambda_id, lambda_am, lambda_gp})
            if (!(w >= 0.0) || !std::isfinite(w))
                throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
        if (critic_steps_per_gen_step < 1)
            throw std::invalid_argument("LossWeights: critic steps must be >= 1");
    }
};

struct SynthConfig {
    nn::GeneratorConfig generator;
    nn::DiscriminatorConfig critic;
    LossWeights weights;
    nn::AdamConfig adam;  // paper settings: lr 1e-4, beta1 0.5, beta2 0.99
    long batch_size = 4;
    LesionPrior mask_prior;
    double foreground_threshold = 0.05;
};

inline void to_json(nlohmann::json& j, const LossWeights& w) {
    j = {{"lambda_cc", w.lambda_cc},       {"lambda_id", w.lambda_id},
         {"lambda_am", w.lambda_am},       {"lambda_gp", w.lambda_gp},
         {"critic_steps", w.critic_steps_per_gen_step}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
    w.lambda_cc = j.value("lambda_cc", w.lambda_cc);
    w.lambda_id = j.value("lambda_id", w.lambda_id);
    w.lambda_am = j.value("lambda_am", w.lambda_am);
    w.lambda_gp = j.value("lambda_gp", w.lambda_gp);
    w.critic_steps_per_gen_step = j.value("critic_steps", w.critic_steps_per_gen_step);
}

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
    j = {{"generator", c.generator},
         {"critic", c.critic},
         {"loss_weights", c.weights},
         {"adam", c.adam},
         {"batch_size", c.batch_size},
         {"mask_prior", c.mask_prior},
         {"foreground_threshold", c.foreground_threshold}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
    if (j.contains("generator")) c.generator = j["generator"].get<nn::GeneratorConfig>();
    if (j.contains("critic")) c.critic = j["critic"].get<nn::DiscriminatorConfig>();
    if (j.contains("loss_weights")) c.weights = j["loss_weights"].get<LossWeights>();
    if (j.contains("adam")) c.adam = j["adam"].get<nn::AdamConfig>();
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("mask_prior")) c.mask_prior = j["mask_prior"].get<LesionPrior>();
    c.foreground_threshold = j.value("foreground_threshold", c.foreground_threshold);
}

// ------------------------- tensor <-> patch bridges -------------------------

/// Volume patch (X,Y,Z| x fastest) and NCZYX tensor slices share the same
/// memory order, so these are straight copies.
inline Tensor patch_to_tensor(const Volume& p) {
    Tensor t(Shape{1, 1, p.shape[2], p.shape[1], p.shape[0]});
    for (long i = 0; i < p.numel(); ++i) t[i] = p.data[i];
    return t;
}

inline Tensor mask_to_tensor(const PathologyMask& m) {
    Tensor t(Shape{1, 1, m.shape[2], m.shape[1], m.shape[0]});
    for (long i = 0; i < m.numel(); ++i) t[i] = m.data[i];
    return t;
}

inline Volume tensor_to_patch(const Tensor& t, std::array<double, 3> spacing) {
    const Shape& s = t.shape();
    if (s.size() != 5 || s[0] != 1 || s[1] != 1)
        throw std::invalid_argument("tensor_to_patch: expected (1,1,Z,Y,X)");
    Volume v({s[4], s[3], s[2]}, spacing);
    for (long i = 0; i < v.numel(); ++i) v.data[i] = static_cast<float>(t[i]);
    return v;
}

/// Stack single-sample tensors (1,1,Z,Y,X) into a batch (N,1,Z,Y,X).
inline Tensor stack_batch(const std::vector<Tensor>& items) {
    if (items.empty()) throw std::invalid_argument("stack_batch: empty batch");
    const Shape& s0 = items[0].shape();
    Tensor out(Shape{static_cast<long>(items.size()), s0[1], s0[2], s0[3], s0[4]});
    const long per = items[0].numel();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].shape() != s0) throw std::invalid_argument("stack_batch: ragged shapes");
        std::copy(items[i].data(), items[i].data() + per, out.data() + long(i) * per);
    }
    return out;
}

// ------------------------------- loss terms --------------------------------

/// Mean absolute difference; the shared primitive for cycle and identity loss.
inline Var l1(const Var& a, const Var& b) { return ad::mean_all(ad::abs(ad::sub(a, b))); }

inline Var cycle_loss(const Var& x, const Var& x_recon) { return l1(x, x_recon); }

inline Var identity_loss(const Var& x_h, const Var& g_ph_out) { return l1(x_h, g_ph_out); }

/// Mean absolute difference restricted to voxels outside the pathology mask;
/// 0 by convention when the mask covers everything.
inline Var abnormality_mask_loss(const Var& x_p, const Var& x_tilde_h, const Tensor& y_p) {
    check_same_shape(x_p.value(), x_tilde_h.value(), "abnormality_mask_loss");
    check_same_shape(x_p.value(), y_p, "abnormality_mask_loss");
    Tensor outside(y_p.shape());
    double count = 0.0;
    for (long i = 0; i < y_p.numel(); ++i) {
        outside[i] = y_p[i] == 0.0 ? 1.0 : 0.0;
        count += outside[i];
    }
    if (count == 0.0) return Var::constant(Tensor::scalar(0.0));
    Var masked = ad::mul(ad::abs(ad::sub(x_p, x_tilde_h)), Var::constant(std::move(outside)));
    return ad::scale(ad::sum_all(masked), 1.0 / count);
}

/// Critic evaluated on a batch: (N,1,Z,Y,X) -> (N) scores.
using CriticFn = std::function<Var(const Var&)>;

inline Var gen_adv_loss(const CriticFn& critic, const Var& fake) {
    return ad::neg(ad::mean_all(critic(fake)));
}

/// Wasserstein critic loss with gradient penalty:
///   mean(D(fake)) - mean(D(real)) + lambda_gp * mean((||grad_xhat D|| - 1)^2)
/// with xhat = eps*real + (1-eps)*fake, eps ~ U(0,1) per sample. The penalty
/// gradient w.r.t. the critic parameters flows through a recorded backward
/// pass (gradient of gradient).
inline Var critic_loss(const CriticFn& critic, const Var& real, const Var& fake,
                       double lambda_gp, Rng& rng) {
    check_same_shape(real.value(), fake.value(), "critic_loss");
    Var wass = ad::sub(ad::mean_all(critic(fake)), ad::mean_all(critic(real)));

    const Shape& sh = real.shape();
    const long n = sh[0];
    const long per = real.numel() / n;
    Tensor xhat_value(sh);
    for (long i = 0; i < n; ++i) {
        const double eps = rng.uniform01();
        for (long j = 0; j < per; ++j) {
            const long k = i * per + j;
            xhat_value[k] = eps * real.value()[k] + (1.0 - eps) * fake.value()[k];
        }
    }
    Var xhat = Var::leaf(std::move(xhat_value), /*requires_grad=*/true);
    Var scores = critic(xhat);
    Var grad_x = ad::grad(ad::sum_all(scores), {xhat}, /*create_graph=*/true)[0];
    Var norm = ad::pow_const(ad::add_scalar(ad::sample_sum(ad::mul(grad_x, grad_x)), 1e-12), 0.5);
    Var gap = ad::add_scalar(norm, -1.0);
    Var penalty = ad::mean_all(ad::mul(gap, gap));
    return ad::add(wass, ad::scale(penalty, lambda_gp));
}

// --------------------------------- model -----------------------------------

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& term, long step)
        : std::runtime_error("training diverged: loss term '" + term + "' is not finite at step " +
                             std::to_string(step)),
          term_(term), step_(step) {}
    const std::string& term() const { return term_; }
    long step() const { return step_; }

private:
    std::string term_;
    long step_;
};

class SynthModel {
public:
    SynthModel() = default;

    SynthModel(const SynthConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
        cfg_.weights.validate();
        cfg_.mask_prior.validate();
        Rng rng(seed);
        Rng r1 = rng.fork("g_hp"), r2 = rng.fork("g_ph"), r3 = rng.fork("d_p"),
            r4 = rng.fork("d_h");
        g_hp_ = nn::Generator(cfg.generator, r1);
        g_ph_ = nn::Generator(cfg.generator, r2);
        d_p_ = nn::Critic(cfg.critic, r3);
        d_h_ = nn::Critic(cfg.critic, r4);
        rebuild_optimizers();
    }

    const SynthConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    const nn::Generator& g_hp() const { return g_hp_; }
    const nn::Generator& g_ph() const { return g_ph_; }
    const nn::Critic& d_p() const { return d_p_; }
    const nn::Critic& d_h() const { return d_h_; }

    CriticFn d_p_fn() const {
        return [this](const Var& x) { return d_p_.forward(x); };
    }
    CriticFn d_h_fn() const {
        return [this](const Var& x) { return d_h_.forward(x); };
    }

    nn::NamedParams named_params() const {
        nn::NamedParams all;
        for (auto& p : g_hp_.named_params("g_hp")) all.push_back(p);
        for (auto& p : g_ph_.named_params("g_ph")) all.push_back(p);
        for (auto& p : d_p_.named_params("d_p")) all.push_back(p);
        for (auto& p : d_h_.named_params("d_h")) all.push_back(p);
        return all;
    }

    nn::Adam& opt_g() { return opt_g_; }
    nn::Adam& opt_dp() { return opt_dp_; }
    nn::Adam& opt_dh() { return opt_dh_; }

    void set_critic_grads(bool enabled) {
        nn::set_requires_grad(d_p_.named_params("d_p"), enabled);
        nn::set_requires_grad(d_h_.named_params("d_h"), enabled);
    }
    void set_generator_grads(bool enabled) {
        nn::set_requires_grad(g_hp_.named_params("g_hp"), enabled);
        nn::set_requires_grad(g_ph_.named_params("g_ph"), enabled);
    }

    void save(const std::string& path) const {
        Checkpoint ckpt;
        ckpt.meta["kind"] = "synth";
        ckpt.meta["config"] = cfg_;
        ckpt.meta["seed"] = seed_;
        ckpt.meta["adam_steps"] = {{"g", opt_g_.step_count()},
                                   {"d_p", opt_dp_.step_count()},
                                   {"d_h", opt_dh_.step_count()}};
        for (auto& [name, p] : named_params()) ckpt.tensors.emplace_back(name, p.value());
        append_adam_state(ckpt, "adam_g", opt_g_, gen_param_names());
        append_adam_state(ckpt, "adam_dp", opt_dp_, critic_param_names("d_p", d_p_));
        append_adam_state(ckpt, "adam_dh", opt_dh_, critic_param_names("d_h", d_h_));
        save_checkpoint(ckpt, path);
    }

    static SynthModel load(const std::string& path) {
        Checkpoint ckpt = load_checkpoint(path);
        if (ckpt.meta.value("kind", "") != "synth")
            throw std::runtime_error("checkpoint is not a synthesis model: " + path);
        SynthConfig cfg = ckpt.meta.at("config").get<SynthConfig>();
        SynthModel model(cfg, ckpt.meta.value("seed", std::uint64_t(0)));
        for (auto& [name, p] : model.named_params()) {
            const Tensor& t = ckpt.tensor(name);
            if (t.shape() != p.shape())
                throw std::runtime_error("checkpoint tensor shape mismatch for " + name);
            const_cast<Var&>(p).mutable_value() = t;
        }
        model.restore_adam_state(ckpt, "adam_g", model.opt_g_, model.gen_param_names());
        model.restore_adam_state(ckpt, "adam_dp", model.opt_dp_,
                                 model.critic_param_names("d_p", model.d_p_));
        model.restore_adam_state(ckpt, "adam_dh", model.opt_dh_,
                                 model.critic_param_names("d_h", model.d_h_));
        const auto steps = ckpt.meta.value("adam_steps", nlohmann::json::object());
        model.opt_g_.set_step_count(steps.value("g", 0L));
        model.opt_dp_.set_step_count(steps.value("d_p", 0L));
        model.opt_dh_.set_step_count(steps.value("d_h", 0L));
        return model;
    }

private:
    void rebuild_optimizers() {
        std::vector<Var> gen_params, dp_params, dh_params;
        for (auto& [n, p] : g_hp_.named_params("g_hp")) gen_params.push_back(p);
        for (auto& [n, p] : g_ph_.named_params("g_ph")) gen_params.push_back(p);
        for (auto& [n, p] : d_p_.named_params("d_p")) dp_params.push_back(p);
        for (auto& [n, p] : d_h_.named_params("d_h")) dh_params.push_back(p);
        opt_g_ = nn::Adam(gen_params, cfg_.adam);
        opt_dp_ = nn::Adam(dp_params, cfg_.adam);
        opt_dh_ = nn::Adam(dh_params, cfg_.adam);
    }

    std::vector<std::string> gen_param_names() const {
        std::vector<std::string> names;
        for (auto& [n, p] : g_hp_.named_params("g_hp")) names.push_back(n);
        for (auto& [n, p] : g_ph_.named_params("g_ph")) names.push_back(n);
        return names;
    }

    std::vector<std::string> critic_param_names(const std::string& prefix,
                                                const nn::Critic& c) const {
        std::vector<std::string> names;
        for (auto& [n, p] : c.named_params(prefix)) names.push_back(n);
        return names;
    }

    static void append_adam_state(Checkpoint& ckpt, const std::string& tag, const nn::Adam& opt,
                                  const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            ckpt.tensors.emplace_back(tag + ".m:" + names[i], opt.moment1()[i]);
            ckpt.tensors.emplace_back(tag + ".v:" + names[i], opt.moment2()[i]);
        }
    }

    void restore_adam_state(const Checkpoint& ckpt, const std::string& tag, nn::Adam& opt,
                            const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (!ckpt.has_tensor(tag + ".m:" + names[i])) continue;
            opt.moment1()[i] = ckpt.tensor(tag + ".m:" + names[i]);
            opt.moment2()[i] = ckpt.tensor(tag + ".v:" + names[i]);
        }
    }

    SynthConfig cfg_;
    std::uint64_t seed_ = 0;
    nn::Generator g_hp_, g_ph_;
    nn::Critic d_p_, d_h_;
    nn::Adam opt_g_, opt_dp_, opt_dh_;
};

// ------------------------------- cycle steps -------------------------------

struct LossBreakdown {
    double cycle = 0.0;
    double identity = 0.0;  // identity term (HPH) or abnormality-mask term (PHP)
    double adversarial = 0.0;
    double total = 0.0;
    Var total_var;
};

/// Healthy->pathological->healthy cycle losses for one batch. Terms are
/// reported unweighted; total = lambda_cc*cycle + lambda_id*identity + adv.
inline LossBreakdown hph_step(const SynthModel& model, const Tensor& x_h, const Tensor& y_p) {
    const LossWeights& w = model.config().weights;
    Var xh = Var::constant(x_h);
    Var yp = Var::constant(y_p);
    Var y0 = Var::constant(Tensor::zeros(y_p.shape()));
    Var fake_p = model.g_hp().forward(xh, yp);
    Var recon = model.g_ph().forward(fake_p, yp);
    Var cyc = cycle_loss(xh, recon);
    Var idn = identity_loss(xh, model.g_ph().forward(xh, y0));
    Var adv = gen_adv_loss(model.d_p_fn(), fake_p);
    LossBreakdown out;
    out.cycle = cyc.item();
    out.identity = idn.item();
    out.adversarial = adv.item();
    out.total_var = ad::add(ad::add(ad::scale(cyc, w.lambda_cc), ad::scale(idn, w.lambda_id)), adv);
    out.total = out.total_var.item();
    return out;
}

/// Pathological->healthy->pathological cycle; the identity term is replaced by
/// the abnormality-mask loss on the healthy-looking intermediate.
inline LossBreakdown php_step(const SynthModel& model, const Tensor& x_p, const Tensor& y_p) {
    const LossWeights& w = model.config().weights;
    Var xp = Var::constant(x_p);
    Var yp = Var::constant(y_p);
    Var fake_h = model.g_ph().forward(xp, yp);
    Var recon = model.g_hp().forward(fake_h, yp);
    Var cyc = cycle_loss(xp, recon);
    Var am = abnormality_mask_loss(xp, fake_h, y_p);
    Var adv = gen_adv_loss(model.d_h_fn(), fake_h);
    LossBreakdown out;
    out.cycle = cyc.item();
    out.identity = am.item();
    out.adversarial = adv.item();
    out.total_var = ad::add(ad::add(ad::scale(cyc, w.lambda_cc), ad::scale(am, w.lambda_am)), adv);
    out.total = out.total_var.item();
    return out;
}

// -------------------------------- training ---------------------------------

struct TrainPatch {
    Tensor image;          // (1,1,Z,Y,X) in [0,1]
    Tensor mask;           // (1,1,Z,Y,X) in {0,1}
    PathologyMask mask_raw;
    PathologyMask support;  // foreground for mask sampling
    std::array<double, 3> spacing{1, 1, 1};
};

using SamplePool = std::vector<TrainPatch>;

/// Cut records into training patches. Healthy records contribute image +
/// foreground support; pathological ones contribute image + real mask.
inline std::pair<SamplePool, SamplePool> build_train_pools(
    const std::vector<SampleRecord>& records, const PatchSpec& spec, double foreground_threshold) {
    SamplePool healthy, pathological;
    for (const auto& rec : records) {
        for (auto& patch : extract_patches(rec.volume, rec.mask, spec)) {
            TrainPatch tp;
            tp.image = patch_to_tensor(patch.image);
            tp.mask = mask_to_tensor(patch.mask);
            tp.mask_raw = patch.mask;
            tp.spacing = rec.volume.spacing;
            tp.support = PathologyMask(patch.image.shape);
            for (long i = 0; i < patch.image.numel(); ++i)
                tp.support.data[i] = patch.image.data[i] > foreground_threshold ? 1 : 0;
            if (rec.domain == Domain::healthy)
                healthy.push_back(std::move(tp));
            else
                pathological.push_back(std::move(tp));
        }
    }
    return {std::move(healthy), std::move(pathological)};
}

struct LossRow {
    long step;
    std::string term;
    double value;
};

using LossHistory = std::vector<LossRow>;

namespace traindetail {

inline void check_finite(double v, const char* term, long step) {
    if (!std::isfinite(v)) throw TrainingDiverged(term, step);
}

struct Batch {
    Tensor images;  // (N,1,Z,Y,X)
    Tensor masks;   // (N,1,Z,Y,X)
};

/// Healthy batch with freshly sampled pathology masks.
inline Batch draw_healthy_batch(const SamplePool& pool, long batch_size,
                                const LesionPrior& prior, Rng& rng) {
    std::vector<Tensor> images, masks;
    for (long b = 0; b < batch_size; ++b) {
        for (int attempt = 0;; ++attempt) {
            const auto& item = pool[std::size_t(rng.uniform_int(0, long(pool.size()) - 1))];
            try {
                Rng mask_rng(rng.next_u64());
                PathologyMask m = sample_pathology_mask(item.support, item.spacing, prior,
                                                        mask_rng);
                images.push_back(item.image);
                masks.push_back(mask_to_tensor(m));
                break;
            } catch (const MaskSamplerError&) {
                if (attempt >= 8) throw;
            }
        }
    }
    return {stack_batch(images), stack_batch(masks)};
}

/// Pathological batch with its real annotated masks.
inline Batch draw_pathological_batch(const SamplePool& pool, long batch_size, Rng& rng) {
    std::vector<Tensor> images, masks;
    for (long b = 0; b < batch_size; ++b) {
        const auto& item = pool[std::size_t(rng.uniform_int(0, long(pool.size()) - 1))];
        images.push_back(item.image);
        masks.push_back(item.mask);
    }
    return {stack_batch(images), stack_batch(masks)};
}

}  // namespace traindetail

/// Alternating WGAN-GP training of the dual-cycle model. Deterministic for a
/// fixed rng seed; aborts loudly (naming the term) if any loss goes non-finite.
inline LossHistory train(SynthModel& model, const SamplePool& healthy_pool,
                         const SamplePool& pathological_pool, long steps, Rng& rng) {
    if (healthy_pool.empty() || pathological_pool.empty())
        throw std::invalid_argument("train: both sample pools must be non-empty");
    const SynthConfig& cfg = model.config();
    const LossWeights& w = cfg.weights;
    LossHistory history;

    for (long step = 1; step <= steps; ++step) {
        // critic updates
        double d_p_loss = 0.0, d_h_loss = 0.0;
        for (long c = 0; c < w.critic_steps_per_gen_step; ++c) {
            auto hb = traindetail::draw_healthy_batch(healthy_pool, cfg.batch_size,
                                                      cfg.mask_prior, rng);
            auto pb = traindetail::draw_pathological_batch(pathological_pool, cfg.batch_size, rng);
            Tensor fake_p, fake_h;
            {
                ad::NoGradGuard ng;
                fake_p = model.g_hp()
                             .forward(Var::constant(hb.images), Var::constant(hb.masks))
                             .value();
                fake_h = model.g_ph()
                             .forward(Var::constant(pb.images), Var::constant(pb.masks))
                             .value();
            }
            Var dp_loss = critic_loss(model.d_p_fn(), Var::constant(pb.images),
                                      Var::constant(fake_p), w.lambda_gp, rng);
            traindetail::check_finite(dp_loss.item(), "d_p", step);
            model.opt_dp().zero_grad();
            ad::backward(dp_loss);
            model.opt_dp().step();
            Var dh_loss = critic_loss(model.d_h_fn(), Var::constant(hb.images),
                                      Var::constant(fake_h), w.lambda_gp, rng);
            traindetail::check_finite(dh_loss.item(), "d_h", step);
            model.opt_dh().zero_grad();
            ad::backward(dh_loss);
            model.opt_dh().step();
            d_p_loss = dp_loss.item();
            d_h_loss = dh_loss.item();
        }

        // generator update over both cycles
        auto hb = traindetail::draw_healthy_batch(healthy_pool, cfg.batch_size, cfg.mask_prior,
                                                  rng);
        auto pb = traindetail::draw_pathological_batch(pathological_pool, cfg.batch_size, rng);
        model.set_critic_grads(false);
        LossBreakdown hph = hph_step(model, hb.images, hb.masks);
        LossBreakdown php = php_step(model, pb.images, pb.masks);
        Var gen_total = ad::add(hph.total_var, php.total_var);
        const std::pair<const char*, double> terms[] = {
            {"d_p", d_p_loss},           {"d_h", d_h_loss},
            {"hph_cycle", hph.cycle},    {"hph_identity", hph.identity},
            {"hph_adv", hph.adversarial}, {"php_cycle", php.cycle},
            {"php_am", php.identity},    {"php_adv", php.adversarial},
            {"gen_total", gen_total.item()}};
        for (const auto& [name, value] : terms)
            traindetail::check_finite(value, name, step);
        model.opt_g().zero_grad();
        ad::backward(gen_total);
        model.opt_g().step();
        model.set_critic_grads(true);

        for (const auto& [name, value] : terms) history.push_back({step, name, value});
    }
    return history;
}

// -------------------------------- inference --------------------------------

namespace synthdetail {

inline Volume translate_volume(const nn::Generator& gen, const Volume& image,
                               const PathologyMask& mask, const PatchSpec& spec) {
    auto patches = extract_patches(image, mask, spec);
    std::vector<Volume> outputs;
    std::vector<std::array<long, 3>> origins;
    ad::NoGradGuard ng;
    for (const auto& p : patches) {
        Var out = gen.forward(Var::constant(patch_to_tensor(p.image)),
                              Var::constant(mask_to_tensor(p.mask)));
        outputs.push_back(tensor_to_patch(out.value(), image.spacing));
        origins.push_back(p.origin);
    }
    return stitch_patches(outputs, origins, image.shape);
}

}  // namespace synthdetail

/// Patch-wise healthy-to-pathological synthesis followed by stitching.
inline Volume synthesize_pathological(const SynthModel& model, const Volume& x_h,
                                      const PathologyMask& y_p, const PatchSpec& spec) {
    return synthdetail::translate_volume(model.g_hp(), x_h, y_p, spec);
}

/// Patch-wise pathological-to-healthy synthesis (lesion in-painting removal).
inline Volume synthesize_healthy(const SynthModel& model, const Volume& x_p,
                                 const PathologyMask& y_p, const PatchSpec& spec) {
    return synthdetail::translate_volume(model.g_ph(), x_p, y_p, spec);
}

}  // namespace cmbaug::synth
