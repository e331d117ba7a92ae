#include "qsm/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace qsm {

namespace {

constexpr char kMagic[4] = {'Q', 'S', 'M', 'V'};
constexpr uint16_t kVersion = 1;
constexpr std::size_t kMaxVoxels = std::size_t{1} << 31;

void check_dims(const Dims& d) {
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
        throw std::invalid_argument("volume dims must be positive");
    if (d.total() > kMaxVoxels)
        throw IoError(IoError::Code::dim_overflow, "volume dims overflow voxel budget");
}

void check_voxel(const VoxelSize& v) {
    for (double s : {v.dx, v.dy, v.dz}) {
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("voxel sizes must be positive and finite");
    }
}

} // namespace

Volume3D::Volume3D(Dims dims, VoxelSize voxel, Unit unit, std::vector<double> data)
    : dims_(dims), voxel_(voxel), unit_(unit), data_(std::move(data)) {
    check_dims(dims_);
    check_voxel(voxel_);
    if (data_.size() != dims_.total())
        throw std::invalid_argument("volume data length does not match dims");
    for (double v : data_) {
        if (!std::isfinite(v))
            throw std::invalid_argument("volume contains non-finite values");
    }
}

Volume3D Volume3D::zeros(Dims dims, VoxelSize voxel, Unit unit) {
    check_dims(dims);
    return Volume3D(dims, voxel, unit, std::vector<double>(dims.total(), 0.0));
}

Mask::Mask(Dims dims, std::vector<uint8_t> bits) : dims_(dims), bits_(std::move(bits)) {
    check_dims(dims_);
    if (bits_.size() != dims_.total())
        throw std::invalid_argument("mask bit count does not match dims");
    for (auto& b : bits_) b = b ? 1 : 0;
}

Mask Mask::full(Dims dims) { return Mask(dims, std::vector<uint8_t>(dims.total(), 1)); }
Mask Mask::empty(Dims dims) { return Mask(dims, std::vector<uint8_t>(dims.total(), 0)); }

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (uint8_t b : bits_) n += b;
    return n;
}

// ---------------------------------------------------------------------------
// Raw format

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError(IoError::Code::truncated, "raw volume file truncated");
    return v;
}

} // namespace

void save_raw(const Volume3D& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoError::Code::open_failed, "cannot open for writing: " + path);

    out.write(kMagic, 4);
    put<uint16_t>(out, kVersion);
    put<uint16_t>(out, static_cast<uint16_t>(v.unit()));
    put<uint32_t>(out, static_cast<uint32_t>(v.dims().nx));
    put<uint32_t>(out, static_cast<uint32_t>(v.dims().ny));
    put<uint32_t>(out, static_cast<uint32_t>(v.dims().nz));
    put<float>(out, static_cast<float>(v.voxel().dx));
    put<float>(out, static_cast<float>(v.voxel().dy));
    put<float>(out, static_cast<float>(v.voxel().dz));

    std::vector<float> payload(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const float f = static_cast<float>(v[i]);
        if (!std::isfinite(f))
            throw IoError(IoError::Code::write_failed,
                          "value not representable as finite float32");
        payload[i] = f;
    }
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw IoError(IoError::Code::write_failed, "short write: " + path);
}

Volume3D load_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Code::open_failed, "cannot open: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(IoError::Code::bad_magic, "not a raw volume file: " + path);

    const auto version = take<uint16_t>(in);
    if (version != kVersion)
        throw IoError(IoError::Code::bad_header, "unsupported raw volume version");
    const auto unit_code = take<uint16_t>(in);
    if (unit_code > static_cast<uint16_t>(Unit::arbitrary))
        throw IoError(IoError::Code::bad_header, "unknown unit tag");

    Dims dims;
    dims.nx = static_cast<int>(take<uint32_t>(in));
    dims.ny = static_cast<int>(take<uint32_t>(in));
    dims.nz = static_cast<int>(take<uint32_t>(in));
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0 || dims.total() > kMaxVoxels)
        throw IoError(IoError::Code::dim_overflow, "raw volume dims out of range");

    VoxelSize voxel;
    voxel.dx = take<float>(in);
    voxel.dy = take<float>(in);
    voxel.dz = take<float>(in);

    std::vector<float> payload(dims.total());
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!in || in.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(float)))
        throw IoError(IoError::Code::truncated, "raw volume payload truncated");

    std::vector<double> data(payload.begin(), payload.end());
    return Volume3D(dims, voxel, static_cast<Unit>(unit_code), std::move(data));
}

void save_mask(const Mask& m, const std::string& path) {
    std::vector<double> data(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) data[i] = m[i] ? 1.0 : 0.0;
    save_raw(Volume3D(m.dims(), VoxelSize{}, Unit::dimensionless, std::move(data)), path);
}

Mask load_mask(const std::string& path) {
    const Volume3D v = load_raw(path);
    std::vector<uint8_t> bits(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) bits[i] = v[i] >= 0.5 ? 1 : 0;
    return Mask(v.dims(), std::move(bits));
}

// ---------------------------------------------------------------------------
// Distance transform and morphology

namespace {

// Distance (not squared) to the nearest zero in a binary row; every row of
// the padded grid has zeros at both ends so results stay finite.
void edt_row_binary(const uint8_t* inside, int n, int stride, int64_t* out) {
    int run = n; // distance to last zero seen
    for (int q = 0; q < n; ++q) {
        run = inside[q * stride] ? run + 1 : 0;
        out[q * stride] = run;
    }
    run = n;
    for (int q = n - 1; q >= 0; --q) {
        run = inside[q * stride] ? run + 1 : 0;
        if (run < out[q * stride]) out[q * stride] = run;
        out[q * stride] *= out[q * stride];
    }
}

// 1D lower envelope of parabolas (Felzenszwalb-Huttenlocher) over finite
// integer f; output stays exact because all arithmetic on the sampled grid
// is integral.
void edt_1d(const int64_t* f, int n, int stride, int64_t* out, int* vhull, double* zbreak) {
    int k = 0;
    vhull[0] = 0;
    zbreak[0] = -std::numeric_limits<double>::infinity();
    zbreak[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        const double fq = static_cast<double>(f[q * stride]);
        double s;
        while (true) {
            const int p = vhull[k];
            const double fp = static_cast<double>(f[p * stride]);
            s = (fq + static_cast<double>(q) * q - (fp + static_cast<double>(p) * p)) /
                (2.0 * (q - p));
            if (s <= zbreak[k] && k > 0) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        vhull[k] = q;
        zbreak[k] = s;
        zbreak[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (zbreak[k + 1] < q) ++k;
        const int p = vhull[k];
        const int64_t d = static_cast<int64_t>(q - p);
        out[q * stride] = f[p * stride] + d * d;
    }
}

} // namespace

std::vector<int64_t> squared_distance_to_boundary(const Mask& m) {
    // Work on a grid padded by one voxel of background so the volume border
    // counts as outside.
    const int nx = m.dims().nx + 2, ny = m.dims().ny + 2, nz = m.dims().nz + 2;
    const std::size_t total = static_cast<std::size_t>(nx) * ny * nz;
    auto pidx = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) +
                                               static_cast<std::size_t>(ny) * z);
    };
    std::vector<uint8_t> inside(total, 0);
    for (int z = 0; z < m.dims().nz; ++z)
        for (int y = 0; y < m.dims().ny; ++y)
            for (int x = 0; x < m.dims().nx; ++x)
                inside[pidx(x + 1, y + 1, z + 1)] = m.at(x, y, z) ? 1 : 0;

    const int maxn = std::max({nx, ny, nz});
    std::vector<int64_t> g(total), tmp(total);
    std::vector<int> vhull(maxn);
    std::vector<double> zbreak(maxn + 1);

    // x pass (binary rows), then parabola passes along y and z
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            edt_row_binary(&inside[pidx(0, y, z)], nx, 1, &tmp[pidx(0, y, z)]);
    for (int z = 0; z < nz; ++z)
        for (int x = 0; x < nx; ++x)
            edt_1d(&tmp[pidx(x, 0, z)], ny, nx, &g[pidx(x, 0, z)], vhull.data(), zbreak.data());
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            edt_1d(&g[pidx(x, y, 0)], nz, nx * ny, &tmp[pidx(x, y, 0)], vhull.data(),
                   zbreak.data());

    std::vector<int64_t> result(m.dims().total());
    for (int z = 0; z < m.dims().nz; ++z)
        for (int y = 0; y < m.dims().ny; ++y)
            for (int x = 0; x < m.dims().nx; ++x)
                result[static_cast<std::size_t>(x) +
                       static_cast<std::size_t>(m.dims().nx) *
                           (static_cast<std::size_t>(y) +
                            static_cast<std::size_t>(m.dims().ny) * z)] =
                    m.at(x, y, z) ? tmp[pidx(x + 1, y + 1, z + 1)] : 0;
    return result;
}

Mask erode_mask(const Mask& m, int r) {
    if (r < 0) throw std::invalid_argument("erosion radius must be >= 0");
    if (r == 0) return m;
    const auto d2 = squared_distance_to_boundary(m);
    const int64_t r2 = static_cast<int64_t>(r) * r;
    std::vector<uint8_t> bits(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) bits[i] = (m[i] && d2[i] > r2) ? 1 : 0;
    return Mask(m.dims(), std::move(bits));
}

Volume3D distance_to_boundary(const Mask& m) {
    if (m.count() == 0) throw std::invalid_argument("distance_to_boundary: empty mask");
    const auto d2 = squared_distance_to_boundary(m);
    std::vector<double> data(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        data[i] = std::sqrt(static_cast<double>(d2[i]));
    return Volume3D(m.dims(), VoxelSize{}, Unit::dimensionless, std::move(data));
}

Mask threshold_mask(const Volume3D& v, double frac) {
    if (!(frac > 0.0 && frac < 1.0))
        throw std::invalid_argument("threshold fraction must lie in (0,1)");
    double vmax = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0) throw std::invalid_argument("threshold_mask expects nonnegative input");
        vmax = std::max(vmax, v[i]);
    }
    if (vmax == 0.0) throw std::invalid_argument("threshold_mask: all-zero volume");

    const double cut = frac * vmax;
    const Dims d = v.dims();
    std::vector<uint8_t> in(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) in[i] = v[i] >= cut ? 1 : 0;

    // Largest 6-connected component.
    std::vector<int32_t> comp(v.size(), -1);
    std::vector<std::size_t> stack;
    int32_t best_label = -1, next = 0;
    std::size_t best_size = 0;
    const std::size_t sx = 1, sy = static_cast<std::size_t>(d.nx),
                      sz = static_cast<std::size_t>(d.nx) * d.ny;
    for (std::size_t seed = 0; seed < v.size(); ++seed) {
        if (!in[seed] || comp[seed] >= 0) continue;
        const int32_t label = next++;
        std::size_t count = 0;
        stack.assign(1, seed);
        comp[seed] = label;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++count;
            const int x = static_cast<int>(i % sy);
            const int y = static_cast<int>((i / sy) % d.ny);
            const int z = static_cast<int>(i / sz);
            auto visit = [&](std::size_t j) {
                if (in[j] && comp[j] < 0) {
                    comp[j] = label;
                    stack.push_back(j);
                }
            };
            if (x > 0) visit(i - sx);
            if (x + 1 < d.nx) visit(i + sx);
            if (y > 0) visit(i - sy);
            if (y + 1 < d.ny) visit(i + sy);
            if (z > 0) visit(i - sz);
            if (z + 1 < d.nz) visit(i + sz);
        }
        if (count > best_size) {
            best_size = count;
            best_label = label;
        }
    }

    std::vector<uint8_t> bits(v.size(), 0);
    for (std::size_t i = 0; i < v.size(); ++i) bits[i] = comp[i] == best_label ? 1 : 0;
    return Mask(d, std::move(bits));
}

} // namespace qsm
