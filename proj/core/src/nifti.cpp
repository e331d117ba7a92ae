#include "qsm/volume.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace qsm {

namespace {

// NIfTI-1 header offsets used by the minimal reader/writer.
constexpr int kHeaderSize = 348;
constexpr int kDatatypeInt16 = 4;
constexpr int kDatatypeFloat32 = 16;

struct Header {
    char bytes[kHeaderSize];

    template <typename T>
    T get(int offset) const {
        T v;
        std::memcpy(&v, bytes + offset, sizeof(T));
        return v;
    }
    template <typename T>
    void set(int offset, T v) {
        std::memcpy(bytes + offset, &v, sizeof(T));
    }
};

} // namespace

Volume3D load_nifti(const std::string& path, Unit unit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Code::open_failed, "cannot open: " + path);

    Header h;
    in.read(h.bytes, kHeaderSize);
    if (!in) throw IoError(IoError::Code::truncated, "NIfTI header truncated");

    if (h.get<int32_t>(0) != kHeaderSize)
        throw IoError(IoError::Code::bad_header, "sizeof_hdr != 348 (byte-swapped files unsupported)");
    if (std::memcmp(h.bytes + 344, "n+1\0", 4) != 0)
        throw IoError(IoError::Code::bad_magic, "NIfTI magic mismatch (expected n+1)");

    const int16_t ndim = h.get<int16_t>(40);
    int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = h.get<int16_t>(40 + 2 * i);
    if (ndim < 1 || ndim > 7)
        throw IoError(IoError::Code::bad_header, "invalid dim[0]");
    for (int i = 4; i <= ndim; ++i)
        if (dim[i] > 1)
            throw IoError(IoError::Code::not_3d, "only single 3D frames are supported");

    Dims dims;
    dims.nx = dim[1];
    dims.ny = ndim >= 2 ? dim[2] : 1;
    dims.nz = ndim >= 3 ? dim[3] : 1;
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
        throw IoError(IoError::Code::bad_header, "nonpositive NIfTI dims");

    const int16_t datatype = h.get<int16_t>(70);
    if (datatype != kDatatypeFloat32 && datatype != kDatatypeInt16)
        throw IoError(IoError::Code::unsupported_datatype,
                      "unsupported NIfTI datatype " + std::to_string(datatype) +
                          " (float32 and int16 only)");

    VoxelSize voxel;
    voxel.dx = h.get<float>(76 + 4);
    voxel.dy = h.get<float>(76 + 8);
    voxel.dz = h.get<float>(76 + 12);
    if (!(voxel.dx > 0)) voxel.dx = 1.0;
    if (!(voxel.dy > 0)) voxel.dy = 1.0;
    if (!(voxel.dz > 0)) voxel.dz = 1.0;

    const float scl_slope = h.get<float>(112);
    const float scl_inter = h.get<float>(116);
    const auto vox_offset = static_cast<std::streamoff>(h.get<float>(108));

    // unit tag survives our own writer via the descrip field
    Unit effective_unit = unit;
    if (std::memcmp(h.bytes + 148, "qsmkit unit=", 12) == 0) {
        const char* tag = h.bytes + 160;
        if (std::strncmp(tag, "ppm", 3) == 0) effective_unit = Unit::ppm;
        else if (std::strncmp(tag, "rad", 3) == 0) effective_unit = Unit::radians;
        else if (std::strncmp(tag, "dim", 3) == 0) effective_unit = Unit::dimensionless;
        else effective_unit = Unit::arbitrary;
    }

    in.seekg(vox_offset, std::ios::beg);
    if (!in) throw IoError(IoError::Code::truncated, "NIfTI payload offset out of range");

    const std::size_t n = dims.total();
    std::vector<double> data(n);
    if (datatype == kDatatypeFloat32) {
        std::vector<float> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw IoError(IoError::Code::truncated, "NIfTI payload truncated");
        for (std::size_t i = 0; i < n; ++i) data[i] = raw[i];
    } else {
        std::vector<int16_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(n * sizeof(int16_t)));
        if (!in) throw IoError(IoError::Code::truncated, "NIfTI payload truncated");
        for (std::size_t i = 0; i < n; ++i) data[i] = raw[i];
    }
    if (scl_slope != 0.0f) {
        for (auto& v : data) v = v * scl_slope + scl_inter;
    }
    for (auto& v : data)
        if (!std::isfinite(v)) v = 0.0;
    return Volume3D(dims, voxel, effective_unit, std::move(data));
}

void save_nifti(const Volume3D& v, const std::string& path) {
    Header h;
    std::memset(h.bytes, 0, kHeaderSize);
    h.set<int32_t>(0, kHeaderSize);
    h.set<int8_t>(39, 0); // dim_info
    h.set<int16_t>(40, 3);
    h.set<int16_t>(42, static_cast<int16_t>(v.dims().nx));
    h.set<int16_t>(44, static_cast<int16_t>(v.dims().ny));
    h.set<int16_t>(46, static_cast<int16_t>(v.dims().nz));
    for (int i = 4; i < 8; ++i) h.set<int16_t>(40 + 2 * i, 1);
    h.set<int16_t>(70, kDatatypeFloat32);
    h.set<int16_t>(72, 32); // bitpix
    h.set<float>(76, 1.0f);
    h.set<float>(80, static_cast<float>(v.voxel().dx));
    h.set<float>(84, static_cast<float>(v.voxel().dy));
    h.set<float>(88, static_cast<float>(v.voxel().dz));
    h.set<float>(108, 352.0f); // vox_offset
    h.set<float>(112, 0.0f);   // scl_slope: no scaling
    h.set<float>(116, 0.0f);

    const char* tag = "arb";
    switch (v.unit()) {
        case Unit::ppm: tag = "ppm"; break;
        case Unit::radians: tag = "rad"; break;
        case Unit::dimensionless: tag = "dim"; break;
        case Unit::arbitrary: tag = "arb"; break;
    }
    char descrip[80] = {};
    std::snprintf(descrip, sizeof(descrip), "qsmkit unit=%s", tag);
    std::memcpy(h.bytes + 148, descrip, 80);
    std::memcpy(h.bytes + 344, "n+1\0", 4);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoError::Code::open_failed, "cannot open for writing: " + path);
    out.write(h.bytes, kHeaderSize);
    const char pad[4] = {0, 0, 0, 0}; // extension flag
    out.write(pad, 4);
    std::vector<float> payload(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) payload[i] = static_cast<float>(v[i]);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw IoError(IoError::Code::write_failed, "short write: " + path);
}

} // namespace qsm
