#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qsm/volume.hpp"

namespace qsm {

enum class Shape { sphere, ellipsoid, box };

// One paintable structure. Centers and semi-axes are in mm relative to the
// grid center; later list entries override earlier ones voxel by voxel.
struct Structure {
    Shape shape = Shape::sphere;
    std::array<double, 3> center_mm{};
    std::array<double, 3> semi_axes_mm{}; // radius replicated for spheres
    double chi_ppm = 0.0;
    int label = 0;
    bool background = false; // outside-brain source (skull, air, fat)
    std::string name;
};

struct PhantomSpec {
    Dims dims{64, 64, 64};
    VoxelSize voxel{3.0, 3.0, 3.0};
    double exterior_chi_ppm = 9.2; // air fills anything no structure covers
    uint64_t seed = 0;
    std::vector<Structure> structures;

    static PhantomSpec from_json_string(const std::string& text);
    static PhantomSpec from_json_file(const std::string& path);
    std::string to_json_string() const;
    void validate() const;
};

// Multi-echo gradient-echo protocol.
struct EchoTrain {
    std::vector<double> te_s;          // echo times, seconds, strictly increasing
    double b0_t = 3.0;                 // field strength, tesla
    double gamma_rad_per_s_t = 2.675e8;

    // 8 echoes, TE1 = 5.468 ms, 3 ms spacing, 3 T.
    static EchoTrain default_protocol();
    void validate() const;
    double te_sum() const;
};

struct PhantomVolumes {
    Volume3D chi;    // ppm
    Mask brain_mask; // union of non-background structures
    Volume3D labels; // final owning structure label, 0 where unowned
};

// Paint the structure list onto the grid. Errors: structure out of grid
// bounds, background overriding brain voxels, empty brain mask.
PhantomVolumes build_phantom(const PhantomSpec& spec);

// Relative field shift in ppm over the whole FOV (total field, no mask).
Volume3D forward_field(const Volume3D& chi);

struct EchoImage {
    Volume3D wrapped_phase; // radians in (-pi, pi]
    Volume3D magnitude;
};

// Wrapped multi-echo phase from a field shift. Magnitude is the support
// indicator; with an SNR, complex Gaussian noise of sigma = peak/snr is added
// before the phase is extracted. Deterministic for a fixed seed.
std::vector<EchoImage> synthesize_echoes(const Volume3D& delta_ppm, const Mask& support,
                                         const EchoTrain& e, std::optional<double> snr,
                                         uint64_t seed);

// Procedural head: fat and skull shells, CSF-filled brain envelope, white
// matter, deep structures at the published susceptibility values, a nasal
// air pocket. Geometry scales with the FOV.
PhantomSpec default_head_phantom(Dims dims, VoxelSize voxel);

// Same head with structure centers and axes jittered by the seed, for
// training-set generation.
PhantomSpec randomized_head_phantom(Dims dims, VoxelSize voxel, uint64_t seed);

double wrap_phase(double radians); // into (-pi, pi]

} // namespace qsm
