#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsm {

enum class Unit : uint16_t {
    ppm = 0,
    radians = 1,
    dimensionless = 2,
    arbitrary = 3,
};

struct Dims {
    int nx = 0, ny = 0, nz = 0;

    std::size_t total() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    bool operator==(const Dims&) const = default;
};

struct VoxelSize {
    double dx = 1.0, dy = 1.0, dz = 1.0;
    bool operator==(const VoxelSize&) const = default;
};

// I/O failures carry a code so callers can tell malformed files apart.
class IoError : public std::runtime_error {
public:
    enum class Code {
        open_failed,
        bad_magic,
        bad_header,
        dim_overflow,
        truncated,
        unsupported_datatype,
        not_3d,
        write_failed,
    };

    IoError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

// Dense 3D scalar field, x-fastest layout, 64-bit storage. Construction
// validates dimensions, voxel sizes and value finiteness; instances are
// treated as immutable by every pipeline operation.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims dims, VoxelSize voxel, Unit unit, std::vector<double> data);

    // Zero-filled volume.
    static Volume3D zeros(Dims dims, VoxelSize voxel, Unit unit);

    const Dims& dims() const { return dims_; }
    const VoxelSize& voxel() const { return voxel_; }
    Unit unit() const { return unit_; }
    std::size_t size() const { return data_.size(); }

    const std::vector<double>& data() const { return data_; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims_.nx) *
                   (static_cast<std::size_t>(y) +
                    static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(z));
    }
    double at(int x, int y, int z) const { return data_[index(x, y, z)]; }

    // Same grid, different samples or unit.
    Volume3D with_data(std::vector<double> data, Unit unit) const {
        return Volume3D(dims_, voxel_, unit, std::move(data));
    }

private:
    Dims dims_;
    VoxelSize voxel_{};
    Unit unit_ = Unit::arbitrary;
    std::vector<double> data_;
};

// Binary region of support on the same grid family as Volume3D.
class Mask {
public:
    Mask() = default;
    Mask(Dims dims, std::vector<uint8_t> bits);

    static Mask full(Dims dims);
    static Mask empty(Dims dims);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return bits_.size(); }
    std::size_t count() const;

    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    bool at(int x, int y, int z) const {
        return bits_[static_cast<std::size_t>(x) +
                     static_cast<std::size_t>(dims_.nx) *
                         (static_cast<std::size_t>(y) +
                          static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(z))] != 0;
    }
    const std::vector<uint8_t>& bits() const { return bits_; }

    bool operator==(const Mask&) const = default;

private:
    Dims dims_;
    std::vector<uint8_t> bits_;
};

// Self-describing raw volume file, little-endian:
//   "QSMV" | version u16 | unit u16 | nx,ny,nz u32 | dx,dy,dz f32 | payload f32
void save_raw(const Volume3D& v, const std::string& path);
Volume3D load_raw(const std::string& path);

// Masks travel as 0/1 raw volumes.
void save_mask(const Mask& m, const std::string& path);
Mask load_mask(const std::string& path);

// Minimal NIfTI-1 interop: single 3D frame, float32 or int16, little-endian.
// scl_slope/scl_inter are applied when scl_slope is nonzero. Orientation
// matrices are ignored.
Volume3D load_nifti(const std::string& path, Unit unit = Unit::arbitrary);
void save_nifti(const Volume3D& v, const std::string& path);

// Morphology. Radii are in voxels; distances are Euclidean with the grid
// border counting as outside.
Mask erode_mask(const Mask& m, int r);
Volume3D distance_to_boundary(const Mask& m);

// Exact squared Euclidean distance to the nearest outside voxel (0 outside).
// Shared by erode_mask and distance_to_boundary so their results agree bit
// for bit.
std::vector<int64_t> squared_distance_to_boundary(const Mask& m);

// Threshold at frac * max(v), then keep the largest 6-connected component.
Mask threshold_mask(const Volume3D& v, double frac);

} // namespace qsm
