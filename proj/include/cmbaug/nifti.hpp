#pragma once

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "cmbaug/volume.hpp"

namespace cmbaug {

/// I/O failures carry a kind so callers and tests can tell the cases apart.
class VolumeIoError : public std::runtime_error {
public:
    enum class Kind { missing_file, corrupt_header, non_3d, non_scalar, bad_data };

    VolumeIoError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

namespace niftidetail {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;    // 348
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must pack to 348 bytes");

enum : std::int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

template <typename T>
void byteswap_inplace(T& v) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
}

inline void swap_header(Nifti1Header& h) {
    byteswap_inplace(h.sizeof_hdr);
    for (auto& d : h.dim) byteswap_inplace(d);
    byteswap_inplace(h.datatype);
    byteswap_inplace(h.bitpix);
    for (auto& p : h.pixdim) byteswap_inplace(p);
    byteswap_inplace(h.vox_offset);
    byteswap_inplace(h.scl_slope);
    byteswap_inplace(h.scl_inter);
}

/// Reads a whole file, transparently inflating gzip (gzread passes plain
/// files through unchanged).
inline std::vector<unsigned char> read_file_raw(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw VolumeIoError(VolumeIoError::Kind::missing_file, "no such file: " + path);
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f)
        throw VolumeIoError(VolumeIoError::Kind::missing_file, "cannot open file: " + path);
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
    const bool bad = n < 0;
    gzclose(f);
    if (bad)
        throw VolumeIoError(VolumeIoError::Kind::bad_data, "decompression failed: " + path);
    return out;
}

template <typename T>
float load_elem(const unsigned char* p, bool swap) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if (swap) byteswap_inplace(v);
    return static_cast<float>(v);
}

}  // namespace niftidetail

inline Volume load_nifti(const std::string& path) {
    using namespace niftidetail;
    const auto bytes = read_file_raw(path);
    if (bytes.size() < sizeof(Nifti1Header))
        throw VolumeIoError(VolumeIoError::Kind::corrupt_header,
                            "file shorter than a NIfTI-1 header: " + path);
    Nifti1Header h;
    std::memcpy(&h, bytes.data(), sizeof(h));
    bool swap = false;
    if (h.sizeof_hdr != 348) {
        byteswap_inplace(h.sizeof_hdr);
        if (h.sizeof_hdr != 348)
            throw VolumeIoError(VolumeIoError::Kind::corrupt_header,
                                "bad sizeof_hdr, not a NIfTI-1 file: " + path);
        std::memcpy(&h, bytes.data(), sizeof(h));
        swap_header(h);
        swap = true;
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
        throw VolumeIoError(VolumeIoError::Kind::corrupt_header, "bad magic string: " + path);
    if (h.dim[0] < 1 || h.dim[0] > 7)
        throw VolumeIoError(VolumeIoError::Kind::corrupt_header, "bad dim[0]: " + path);
    if (h.dim[0] < 3)
        throw VolumeIoError(VolumeIoError::Kind::non_3d,
                            "non-3D payload: image has fewer than 3 dimensions: " + path);
    for (int k = 4; k <= h.dim[0]; ++k)
        if (h.dim[k] > 1)
            throw VolumeIoError(VolumeIoError::Kind::non_3d,
                                "non-3D payload: dimension " + std::to_string(k) + " has length " +
                                    std::to_string(h.dim[k]) + ": " + path);
    const long X = h.dim[1], Y = h.dim[2], Z = h.dim[3];
    if (X < 1 || Y < 1 || Z < 1)
        throw VolumeIoError(VolumeIoError::Kind::corrupt_header, "non-positive extent: " + path);

    std::size_t elem_size;
    switch (h.datatype) {
        case DT_UINT8:
        case DT_INT8: elem_size = 1; break;
        case DT_INT16:
        case DT_UINT16: elem_size = 2; break;
        case DT_INT32:
        case DT_UINT32:
        case DT_FLOAT32: elem_size = 4; break;
        case DT_FLOAT64: elem_size = 8; break;
        default:
            throw VolumeIoError(VolumeIoError::Kind::non_scalar,
                                "non-scalar or unsupported datatype " +
                                    std::to_string(h.datatype) + ": " + path);
    }

    Volume v;
    v.shape = {X, Y, Z};
    for (int a = 0; a < 3; ++a) {
        const double s = h.pixdim[a + 1];
        if (!(s > 0.0))
            throw VolumeIoError(VolumeIoError::Kind::corrupt_header,
                                "non-positive voxel size: " + path);
        v.spacing[a] = s;
    }
    const std::size_t n = static_cast<std::size_t>(X) * Y * Z;
    const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
    if (offset < 348 || bytes.size() < offset + n * elem_size)
        throw VolumeIoError(VolumeIoError::Kind::bad_data, "truncated voxel data: " + path);
    v.data.resize(n);
    const unsigned char* p = bytes.data() + offset;
    for (std::size_t i = 0; i < n; ++i, p += elem_size) {
        switch (h.datatype) {
            case DT_UINT8: v.data[i] = load_elem<std::uint8_t>(p, swap); break;
            case DT_INT8: v.data[i] = load_elem<std::int8_t>(p, swap); break;
            case DT_INT16: v.data[i] = load_elem<std::int16_t>(p, swap); break;
            case DT_UINT16: v.data[i] = load_elem<std::uint16_t>(p, swap); break;
            case DT_INT32: v.data[i] = load_elem<std::int32_t>(p, swap); break;
            case DT_UINT32: v.data[i] = load_elem<std::uint32_t>(p, swap); break;
            case DT_FLOAT32: v.data[i] = load_elem<float>(p, swap); break;
            case DT_FLOAT64: v.data[i] = load_elem<double>(p, swap); break;
        }
    }
    if (h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f))
        for (auto& x : v.data) x = x * h.scl_slope + h.scl_inter;
    return v;
}

namespace niftidetail {

inline void write_bytes(const std::string& path, const unsigned char* data, std::size_t size) {
    const bool gz = path.size() > 3 && path.substr(path.size() - 3) == ".gz";
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw VolumeIoError(VolumeIoError::Kind::missing_file, "cannot write: " + path);
        std::size_t done = 0;
        while (done < size) {
            const unsigned chunk =
                static_cast<unsigned>(std::min<std::size_t>(size - done, 1u << 30));
            if (gzwrite(f, data + done, chunk) != static_cast<int>(chunk)) {
                gzclose(f);
                throw VolumeIoError(VolumeIoError::Kind::bad_data, "write failed: " + path);
            }
            done += chunk;
        }
        gzclose(f);
    } else {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw VolumeIoError(VolumeIoError::Kind::missing_file, "cannot write: " + path);
        f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!f) throw VolumeIoError(VolumeIoError::Kind::bad_data, "write failed: " + path);
    }
}

inline Nifti1Header make_header(const Volume& v, std::int16_t datatype, std::int16_t bitpix) {
    Nifti1Header h;
    std::memset(&h, 0, sizeof(h));
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(v.shape[0]);
    h.dim[2] = static_cast<std::int16_t>(v.shape[1]);
    h.dim[3] = static_cast<std::int16_t>(v.shape[2]);
    for (int k = 4; k < 8; ++k) h.dim[k] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(v.spacing[a]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2;  // millimetres
    h.sform_code = 0;
    h.qform_code = 0;
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

}  // namespace niftidetail

inline void save_nifti(const Volume& v, const std::string& path) {
    using namespace niftidetail;
    Nifti1Header h = make_header(v, DT_FLOAT32, 32);
    std::vector<unsigned char> bytes(352 + v.data.size() * sizeof(float), 0);
    std::memcpy(bytes.data(), &h, sizeof(h));
    std::memcpy(bytes.data() + 352, v.data.data(), v.data.size() * sizeof(float));
    write_bytes(path, bytes.data(), bytes.size());
}

/// Masks are stored as 8-bit integers with values {0,1}.
inline void save_nifti_mask(const PathologyMask& m, std::array<double, 3> spacing,
                            const std::string& path) {
    using namespace niftidetail;
    Volume meta;
    meta.shape = m.shape;
    meta.spacing = spacing;
    Nifti1Header h = make_header(meta, DT_UINT8, 8);
    std::vector<unsigned char> bytes(352 + m.data.size(), 0);
    std::memcpy(bytes.data(), &h, sizeof(h));
    std::memcpy(bytes.data() + 352, m.data.data(), m.data.size());
    write_bytes(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Raw test format: little-endian float32 array (x fastest) + JSON sidecar
// ---------------------------------------------------------------------------

inline void save_raw(const Volume& v, const std::string& path) {
    niftidetail::write_bytes(path, reinterpret_cast<const unsigned char*>(v.data.data()),
                             v.data.size() * sizeof(float));
    nlohmann::json meta;
    meta["shape"] = {v.shape[0], v.shape[1], v.shape[2]};
    meta["spacing"] = {v.spacing[0], v.spacing[1], v.spacing[2]};
    std::ofstream f(path + ".json");
    if (!f) throw VolumeIoError(VolumeIoError::Kind::missing_file, "cannot write: " + path);
    f << meta.dump(2) << "\n";
}

inline Volume load_raw(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw VolumeIoError(VolumeIoError::Kind::missing_file, "no such file: " + path);
    std::ifstream mf(path + ".json");
    if (!mf)
        throw VolumeIoError(VolumeIoError::Kind::missing_file,
                            "missing sidecar metadata: " + path + ".json");
    nlohmann::json meta;
    try {
        mf >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw VolumeIoError(VolumeIoError::Kind::corrupt_header,
                            std::string("bad sidecar metadata: ") + e.what());
    }
    Volume v;
    try {
        auto sh = meta.at("shape");
        auto sp = meta.at("spacing");
        v.shape = {sh.at(0).get<long>(), sh.at(1).get<long>(), sh.at(2).get<long>()};
        v.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw VolumeIoError(VolumeIoError::Kind::corrupt_header,
                            std::string("bad sidecar metadata: ") + e.what());
    }
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    const auto size = static_cast<std::size_t>(f.tellg());
    const std::size_t n = static_cast<std::size_t>(v.numel());
    if (size != n * sizeof(float))
        throw VolumeIoError(VolumeIoError::Kind::bad_data,
                            "raw payload size does not match sidecar shape: " + path);
    f.seekg(0);
    v.data.resize(n);
    f.read(reinterpret_cast<char*>(v.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    return v;
}

// ---------------------------------------------------------------------------
// Format dispatch
// ---------------------------------------------------------------------------

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline Volume load_volume(const std::string& path) {
    if (has_suffix(path, ".raw")) return load_raw(path);
    return load_nifti(path);
}

inline void save_volume(const Volume& v, const std::string& path) {
    if (has_suffix(path, ".raw"))
        save_raw(v, path);
    else
        save_nifti(v, path);
}

inline PathologyMask load_mask(const std::string& path) {
    Volume v = load_volume(path);
    PathologyMask m(v.shape);
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const float x = v.data[i];
        if (x != 0.0f && x != 1.0f)
            throw VolumeIoError(VolumeIoError::Kind::bad_data,
                                "mask value outside {0,1}: " + path);
        m.data[i] = static_cast<std::uint8_t>(x);
    }
    return m;
}

inline void save_mask(const PathologyMask& m, std::array<double, 3> spacing,
                      const std::string& path) {
    if (has_suffix(path, ".raw")) {
        Volume v;
        v.shape = m.shape;
        v.spacing = spacing;
        v.data.assign(m.data.begin(), m.data.end());
        save_raw(v, path);
    } else {
        save_nifti_mask(m, spacing, path);
    }
}

}  // namespace cmbaug
