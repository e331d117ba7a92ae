#include "qsm/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace qsm {

namespace {

// FFTW planning is not thread-safe; execution on plan-bound buffers is fine.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<cdouble> run_fft(Dims dims, const std::vector<cdouble>& v, int sign) {
    if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2)
        throw std::invalid_argument("fft3: dims must each be >= 2");
    if (v.size() != dims.total()) throw std::invalid_argument("fft3: data length mismatch");

    const std::size_t n = dims.total();
    fftw_complex* buf = fftw_alloc_complex(n);
    if (!buf) throw std::bad_alloc();
    for (std::size_t i = 0; i < n; ++i) {
        buf[i][0] = v[i].real();
        buf[i][1] = v[i].imag();
    }

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        // x-fastest layout maps to FFTW's row-major (nz, ny, nx)
        plan = fftw_plan_dft_3d(dims.nz, dims.ny, dims.nx, buf, buf, sign, FFTW_ESTIMATE);
    }
    if (!plan) {
        fftw_free(buf);
        throw std::runtime_error("fft3: planner failed");
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }

    std::vector<cdouble> out(n);
    const double scale = sign == FFTW_BACKWARD ? 1.0 / static_cast<double>(n) : 1.0;
    for (std::size_t i = 0; i < n; ++i) out[i] = cdouble(buf[i][0] * scale, buf[i][1] * scale);
    fftw_free(buf);
    return out;
}

std::vector<double> axis_freqs(int n, double d) {
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i) {
        const int f = i <= n / 2 && !(n % 2 == 0 && i == n / 2) ? i : i - n;
        k[i] = static_cast<double>(f) / (static_cast<double>(n) * d);
    }
    return k;
}

} // namespace

KGrid KGrid::make(Dims dims, VoxelSize voxel) {
    KGrid g;
    g.dims = dims;
    g.voxel = voxel;
    g.kx = axis_freqs(dims.nx, voxel.dx);
    g.ky = axis_freqs(dims.ny, voxel.dy);
    g.kz = axis_freqs(dims.nz, voxel.dz);
    return g;
}

std::vector<cdouble> fft3(Dims dims, const std::vector<cdouble>& v) {
    return run_fft(dims, v, FFTW_FORWARD);
}

std::vector<cdouble> ifft3(Dims dims, const std::vector<cdouble>& v) {
    return run_fft(dims, v, FFTW_BACKWARD);
}

KSpaceKernel dipole_kernel(const KGrid& g, std::array<double, 3> b0_axis) {
    const double norm = std::sqrt(b0_axis[0] * b0_axis[0] + b0_axis[1] * b0_axis[1] +
                                  b0_axis[2] * b0_axis[2]);
    if (!(norm > 0.0)) throw std::invalid_argument("dipole_kernel: zero b0 axis");
    const double bx = b0_axis[0] / norm, by = b0_axis[1] / norm, bz = b0_axis[2] / norm;

    KSpaceKernel K;
    K.dims = g.dims;
    K.values.resize(g.dims.total());
    std::size_t i = 0;
    for (int z = 0; z < g.dims.nz; ++z) {
        for (int y = 0; y < g.dims.ny; ++y) {
            for (int x = 0; x < g.dims.nx; ++x, ++i) {
                const double k2 = g.k2(x, y, z);
                if (k2 == 0.0) {
                    K.values[i] = 0.0; // referenced susceptibility convention
                } else {
                    const double kb = g.kx[x] * bx + g.ky[y] * by + g.kz[z] * bz;
                    K.values[i] = 1.0 / 3.0 - (kb * kb) / k2;
                }
            }
        }
    }
    return K;
}

KSpaceKernel laplacian_kernel(const KGrid& g) {
    KSpaceKernel K;
    K.dims = g.dims;
    K.values.resize(g.dims.total());
    constexpr double pi = 3.14159265358979323846;
    const double c = -4.0 * pi * pi;
    std::size_t i = 0;
    for (int z = 0; z < g.dims.nz; ++z)
        for (int y = 0; y < g.dims.ny; ++y)
            for (int x = 0; x < g.dims.nx; ++x, ++i) K.values[i] = c * g.k2(x, y, z);
    return K;
}

void apply_kernel(std::vector<cdouble>& spectrum, const KSpaceKernel& K) {
    if (spectrum.size() != K.size())
        throw std::invalid_argument("apply_kernel: size mismatch");
    for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= K.values[i];
}

std::vector<double> convolve_k(Dims dims, const std::vector<double>& v, const KSpaceKernel& K) {
    if (K.dims != dims) throw std::invalid_argument("convolve_k: kernel dims mismatch");
    std::vector<cdouble> spec(v.begin(), v.end());
    spec = fft3(dims, spec);
    apply_kernel(spec, K);
    spec = ifft3(dims, spec);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) out[i] = spec[i].real();
    return out;
}

Volume3D convolve_k(const Volume3D& v, const KSpaceKernel& K) {
    return v.with_data(convolve_k(v.dims(), v.data(), K), v.unit());
}

} // namespace qsm
