#pragma once

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "cmbaug/nifti.hpp"

namespace cmbaug {

/// Writes records as NIfTI pairs plus a manifest.json listing
/// (subject id, domain tag, file paths). Healthy records get an all-zero mask
/// file so every pair is complete.
inline void write_dataset(const std::vector<SampleRecord>& records, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& r : records) {
        const std::string vol_name = r.subject_id + "_volume.nii.gz";
        const std::string mask_name = r.subject_id + "_mask.nii.gz";
        save_volume(r.volume, dir + "/" + vol_name);
        save_mask(r.mask, r.volume.spacing, dir + "/" + mask_name);
        manifest.push_back({{"subject_id", r.subject_id},
                            {"domain", domain_name(r.domain)},
                            {"volume", vol_name},
                            {"mask", mask_name}});
    }
    std::ofstream f(dir + "/manifest.json");
    if (!f) throw std::runtime_error("cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

inline std::vector<SampleRecord> load_dataset(const std::string& dir) {
    const std::string manifest_path = dir + "/manifest.json";
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("no manifest.json in " + dir);
    nlohmann::json manifest;
    try {
        f >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("bad manifest in " + dir + ": " + e.what());
    }
    std::vector<SampleRecord> out;
    for (const auto& row : manifest) {
        SampleRecord r;
        r.subject_id = row.at("subject_id").get<std::string>();
        const std::string domain = row.at("domain").get<std::string>();
        if (domain == "healthy")
            r.domain = Domain::healthy;
        else if (domain == "pathological")
            r.domain = Domain::pathological;
        else
            throw std::runtime_error("unknown domain tag '" + domain + "' in " + manifest_path);
        r.volume = load_volume(dir + "/" + row.at("volume").get<std::string>());
        r.mask = load_mask(dir + "/" + row.at("mask").get<std::string>());
        if (r.mask.shape != r.volume.shape)
            throw std::runtime_error("mask/volume shape mismatch for subject " + r.subject_id);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace cmbaug
