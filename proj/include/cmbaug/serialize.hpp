#pragma once

#include "json.hpp"

#include "cmbaug/mask_sampler.hpp"
#include "cmbaug/nn.hpp"
#include "cmbaug/phantom.hpp"

// JSON adapters for the small config structs (checkpoint metadata and the
// experiment config file share these).

namespace cmbaug::nn {

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"base_channels", c.base_channels},
         {"num_downsamples", c.num_downsamples},
         {"num_resblocks", c.num_resblocks},
         {"lrelu_slope", c.lrelu_slope}};
}

inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.base_channels = j.value("base_channels", c.base_channels);
    c.num_downsamples = j.value("num_downsamples", c.num_downsamples);
    c.num_resblocks = j.value("num_resblocks", c.num_resblocks);
    c.lrelu_slope = j.value("lrelu_slope", c.lrelu_slope);
}

inline void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"base_channels", c.base_channels},
         {"num_layers", c.num_layers},
         {"lrelu_slope", c.lrelu_slope}};
}

inline void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.base_channels = j.value("base_channels", c.base_channels);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.lrelu_slope = j.value("lrelu_slope", c.lrelu_slope);
}

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
    j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

inline void from_json(const nlohmann::json& j, AdamConfig& c) {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
}

}  // namespace cmbaug::nn

namespace cmbaug {

inline void to_json(nlohmann::json& j, const LesionPrior& p) {
    j = {{"count", {p.count_range.first, p.count_range.second}},
         {"radius_mm", {p.radius_range_mm.first, p.radius_range_mm.second}},
         {"elongation_prob", p.elongation_prob},
         {"elongation_ratio", {p.elongation_ratio_range.first, p.elongation_ratio_range.second}},
         {"foreground_margin_vox", p.foreground_margin_vox}};
}

inline void from_json(const nlohmann::json& j, LesionPrior& p) {
    if (j.contains("count"))
        p.count_range = {j["count"].at(0).get<long>(), j["count"].at(1).get<long>()};
    if (j.contains("radius_mm"))
        p.radius_range_mm = {j["radius_mm"].at(0).get<double>(),
                             j["radius_mm"].at(1).get<double>()};
    p.elongation_prob = j.value("elongation_prob", p.elongation_prob);
    if (j.contains("elongation_ratio"))
        p.elongation_ratio_range = {j["elongation_ratio"].at(0).get<double>(),
                                    j["elongation_ratio"].at(1).get<double>()};
    p.foreground_margin_vox = j.value("foreground_margin_vox", p.foreground_margin_vox);
}

inline void to_json(nlohmann::json& j, const PatchSpec& s) {
    j = {{"shape", {s.patch_shape[0], s.patch_shape[1], s.patch_shape[2]}},
         {"z_overlap", s.z_overlap_fraction}};
}

inline void from_json(const nlohmann::json& j, PatchSpec& s) {
    if (j.contains("shape"))
        s.patch_shape = {j["shape"].at(0).get<long>(), j["shape"].at(1).get<long>(),
                         j["shape"].at(2).get<long>()};
    s.z_overlap_fraction = j.value("z_overlap", s.z_overlap_fraction);
}

inline void to_json(nlohmann::json& j, const PhantomConfig& c) {
    j = {{"shape", {c.shape[0], c.shape[1], c.shape[2]}},
         {"spacing", {c.spacing[0], c.spacing[1], c.spacing[2]}},
         {"background_level", c.background_level},
         {"tissue_texture_scale", c.tissue_texture_scale},
         {"vessel_count", {c.vessel_count.first, c.vessel_count.second}},
         {"vessel_radius_vox", {c.vessel_radius_vox.first, c.vessel_radius_vox.second}},
         {"lesion_prior", c.lesion_prior},
         {"lesion_contrast", c.lesion_contrast},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, PhantomConfig& c) {
    if (j.contains("shape"))
        c.shape = {j["shape"].at(0).get<long>(), j["shape"].at(1).get<long>(),
                   j["shape"].at(2).get<long>()};
    if (j.contains("spacing"))
        c.spacing = {j["spacing"].at(0).get<double>(), j["spacing"].at(1).get<double>(),
                     j["spacing"].at(2).get<double>()};
    c.background_level = j.value("background_level", c.background_level);
    c.tissue_texture_scale = j.value("tissue_texture_scale", c.tissue_texture_scale);
    if (j.contains("vessel_count"))
        c.vessel_count = {j["vessel_count"].at(0).get<long>(),
                          j["vessel_count"].at(1).get<long>()};
    if (j.contains("vessel_radius_vox"))
        c.vessel_radius_vox = {j["vessel_radius_vox"].at(0).get<double>(),
                               j["vessel_radius_vox"].at(1).get<double>()};
    if (j.contains("lesion_prior")) c.lesion_prior = j["lesion_prior"].get<LesionPrior>();
    c.lesion_contrast = j.value("lesion_contrast", c.lesion_contrast);
    c.seed = j.value("seed", c.seed);
}

}  // namespace cmbaug
