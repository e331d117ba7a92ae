#pragma once

#include <array>
#include <complex>
#include <vector>

#include "qsm/volume.hpp"

namespace qsm {

// Frequency coordinates of the DFT grid in cycles/mm, standard order
// (0, positive, ..., negative); index 0 is DC, anisotropic voxel sizes give
// per-axis spacing 1/(n*d).
struct KGrid {
    Dims dims;
    VoxelSize voxel;
    std::vector<double> kx, ky, kz;

    static KGrid make(Dims dims, VoxelSize voxel);

    double k2(int ix, int iy, int iz) const {
        const double a = kx[ix], b = ky[iy], c = kz[iz];
        return a * a + b * b + c * c;
    }
};

// Real, even spectral multiplier on the full DFT grid (dipole, Laplacian and
// sphere kernels are all real and even).
struct KSpaceKernel {
    Dims dims;
    std::vector<double> values;

    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

using cdouble = std::complex<double>;

// Unnormalized forward DFT / (1/N)-normalized inverse, x-fastest layout.
std::vector<cdouble> fft3(Dims dims, const std::vector<cdouble>& v);
std::vector<cdouble> ifft3(Dims dims, const std::vector<cdouble>& v);

// D(k) = 1/3 - (k.b0)^2/|k|^2 with D(0) = 0. b0_axis need not be normalized
// on input; a zero vector is an error.
KSpaceKernel dipole_kernel(const KGrid& g, std::array<double, 3> b0_axis = {0.0, 0.0, 1.0});

// Continuous-Fourier Laplacian, L(k) = -4 pi^2 |k|^2.
KSpaceKernel laplacian_kernel(const KGrid& g);

// real(ifft3(K .* fft3(v))); the imaginary residue of the output is discarded.
Volume3D convolve_k(const Volume3D& v, const KSpaceKernel& K);

// Same operation on a bare field, avoiding Volume3D re-validation in inner
// loops (CG, V-SHARP shells).
std::vector<double> convolve_k(Dims dims, const std::vector<double>& v, const KSpaceKernel& K);

// Pointwise multiply a spectrum by a kernel.
void apply_kernel(std::vector<cdouble>& spectrum, const KSpaceKernel& K);

} // namespace qsm
