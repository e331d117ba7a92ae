#include "qsm/phantom.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "qsm/rng.hpp"
#include "qsm/spectral.hpp"

namespace qsm {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string shape_name(Shape s) {
    switch (s) {
        case Shape::sphere: return "sphere";
        case Shape::ellipsoid: return "ellipsoid";
        case Shape::box: return "box";
    }
    return "sphere";
}

Shape shape_from_name(const std::string& s) {
    if (s == "sphere") return Shape::sphere;
    if (s == "ellipsoid") return Shape::ellipsoid;
    if (s == "box") return Shape::box;
    throw std::invalid_argument("unknown shape: " + s);
}

} // namespace

double wrap_phase(double radians) {
    double r = std::remainder(radians, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

// ---------------------------------------------------------------------------
// PhantomSpec JSON

PhantomSpec PhantomSpec::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PhantomSpec spec;
    const auto d = j.at("dims");
    spec.dims = Dims{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    const auto v = j.at("voxel_size_mm");
    spec.voxel = VoxelSize{v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
    spec.exterior_chi_ppm = j.value("exterior_chi_ppm", 9.2);
    spec.seed = j.value("seed", uint64_t{0});
    for (const auto& sj : j.at("structures")) {
        Structure s;
        s.shape = shape_from_name(sj.at("shape").get<std::string>());
        const auto c = sj.at("center_mm");
        s.center_mm = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
        const auto a = sj.at("semi_axes_mm");
        s.semi_axes_mm = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        s.chi_ppm = sj.at("chi_ppm").get<double>();
        s.label = sj.at("label").get<int>();
        s.background = sj.value("background", false);
        s.name = sj.value("name", std::string{});
        spec.structures.push_back(std::move(s));
    }
    spec.validate();
    return spec;
}

PhantomSpec PhantomSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Code::open_failed, "cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

std::string PhantomSpec::to_json_string() const {
    nlohmann::json j;
    j["dims"] = {dims.nx, dims.ny, dims.nz};
    j["voxel_size_mm"] = {voxel.dx, voxel.dy, voxel.dz};
    j["exterior_chi_ppm"] = exterior_chi_ppm;
    j["seed"] = seed;
    j["structures"] = nlohmann::json::array();
    for (const auto& s : structures) {
        nlohmann::json sj;
        sj["shape"] = shape_name(s.shape);
        sj["center_mm"] = {s.center_mm[0], s.center_mm[1], s.center_mm[2]};
        sj["semi_axes_mm"] = {s.semi_axes_mm[0], s.semi_axes_mm[1], s.semi_axes_mm[2]};
        sj["chi_ppm"] = s.chi_ppm;
        sj["label"] = s.label;
        sj["background"] = s.background;
        if (!s.name.empty()) sj["name"] = s.name;
        j["structures"].push_back(std::move(sj));
    }
    return j.dump(2);
}

void PhantomSpec::validate() const {
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
        throw std::invalid_argument("phantom dims must be positive");
    std::vector<int> labels;
    for (const auto& s : structures) {
        if (s.label <= 0) throw std::invalid_argument("structure labels must be positive");
        for (int l : labels)
            if (l == s.label) throw std::invalid_argument("duplicate structure label");
        labels.push_back(s.label);
        for (double a : s.semi_axes_mm)
            if (!(a > 0.0)) throw std::invalid_argument("structure semi-axes must be positive");
    }
}

// ---------------------------------------------------------------------------
// Painting

void EchoTrain::validate() const {
    if (te_s.empty()) throw std::invalid_argument("echo train needs at least one TE");
    if (!(b0_t > 0.0)) throw std::invalid_argument("B0 must be positive");
    double prev = 0.0;
    for (double te : te_s) {
        if (!(te > prev)) throw std::invalid_argument("TEs must be positive and increasing");
        prev = te;
    }
}

double EchoTrain::te_sum() const {
    double s = 0.0;
    for (double te : te_s) s += te;
    return s;
}

EchoTrain EchoTrain::default_protocol() {
    EchoTrain e;
    for (int i = 0; i < 8; ++i) e.te_s.push_back(5.468e-3 + 3.0e-3 * i);
    e.b0_t = 3.0;
    return e;
}

namespace {

bool covers(const Structure& s, double px, double py, double pz) {
    const double rx = px - s.center_mm[0];
    const double ry = py - s.center_mm[1];
    const double rz = pz - s.center_mm[2];
    switch (s.shape) {
        case Shape::box:
            return std::abs(rx) <= s.semi_axes_mm[0] && std::abs(ry) <= s.semi_axes_mm[1] &&
                   std::abs(rz) <= s.semi_axes_mm[2];
        case Shape::sphere:
        case Shape::ellipsoid: {
            const double u = rx / s.semi_axes_mm[0];
            const double v = ry / s.semi_axes_mm[1];
            const double w = rz / s.semi_axes_mm[2];
            return u * u + v * v + w * w <= 1.0;
        }
    }
    return false;
}

} // namespace

PhantomVolumes build_phantom(const PhantomSpec& spec) {
    spec.validate();
    const Dims d = spec.dims;
    const VoxelSize vox = spec.voxel;
    const std::size_t n = d.total();

    std::vector<double> chi(n, spec.exterior_chi_ppm);
    std::vector<double> labels(n, 0.0);
    std::vector<uint8_t> owner_is_brain(n, 0);

    const double cx = 0.5 * (d.nx - 1) * vox.dx;
    const double cy = 0.5 * (d.ny - 1) * vox.dy;
    const double cz = 0.5 * (d.nz - 1) * vox.dz;

    for (const auto& s : spec.structures) {
        // bounds check in grid coordinates
        for (int axis = 0; axis < 3; ++axis) {
            const double extent_mm[3] = {d.nx * vox.dx, d.ny * vox.dy, d.nz * vox.dz};
            const double lo = s.center_mm[axis] - s.semi_axes_mm[axis] + 0.5 * extent_mm[axis];
            const double hi = s.center_mm[axis] + s.semi_axes_mm[axis] + 0.5 * extent_mm[axis];
            if (lo < -1e-9 || hi > extent_mm[axis] + 1e-9)
                throw std::invalid_argument("structure out of grid bounds: " +
                                            (s.name.empty() ? std::to_string(s.label) : s.name));
        }
        std::size_t i = 0;
        for (int z = 0; z < d.nz; ++z) {
            const double pz = z * vox.dz - cz;
            for (int y = 0; y < d.ny; ++y) {
                const double py = y * vox.dy - cy;
                for (int x = 0; x < d.nx; ++x, ++i) {
                    const double px = x * vox.dx - cx;
                    if (!covers(s, px, py, pz)) continue;
                    if (s.background && owner_is_brain[i])
                        throw std::invalid_argument(
                            "background structure overlaps brain tissue: " +
                            (s.name.empty() ? std::to_string(s.label) : s.name));
                    chi[i] = s.chi_ppm;
                    labels[i] = s.label;
                    owner_is_brain[i] = s.background ? 0 : 1;
                }
            }
        }
    }

    Mask brain(d, owner_is_brain);
    if (brain.count() == 0) throw std::invalid_argument("phantom has an empty brain mask");

    return PhantomVolumes{
        Volume3D(d, vox, Unit::ppm, std::move(chi)),
        std::move(brain),
        Volume3D(d, vox, Unit::dimensionless, std::move(labels)),
    };
}

Volume3D forward_field(const Volume3D& chi) {
    const KGrid g = KGrid::make(chi.dims(), chi.voxel());
    const KSpaceKernel D = dipole_kernel(g);
    Volume3D out = convolve_k(chi, D);
    return out.with_data(out.data(), Unit::ppm);
}

std::vector<EchoImage> synthesize_echoes(const Volume3D& delta_ppm, const Mask& support,
                                         const EchoTrain& e, std::optional<double> snr,
                                         uint64_t seed) {
    e.validate();
    if (support.dims() != delta_ppm.dims())
        throw std::invalid_argument("synthesize_echoes: mask dims mismatch");
    if (snr && !(*snr > 0.0)) throw std::invalid_argument("snr must be positive");

    const std::size_t n = delta_ppm.size();
    std::vector<EchoImage> echoes;
    echoes.reserve(e.te_s.size());
    Rng rng(seed);

    for (double te : e.te_s) {
        const double scale = e.gamma_rad_per_s_t * e.b0_t * 1e-6 * te;
        std::vector<double> phase(n), mag(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double phi = scale * delta_ppm[i];
            const double m = support[i] ? 1.0 : 0.0;
            if (snr) {
                const double sigma = 1.0 / *snr; // peak magnitude is 1
                const double re = m * std::cos(phi) + sigma * rng.next_normal();
                const double im = m * std::sin(phi) + sigma * rng.next_normal();
                phase[i] = std::atan2(im, re);
                mag[i] = std::sqrt(re * re + im * im);
            } else {
                phase[i] = wrap_phase(phi);
                mag[i] = m;
            }
        }
        echoes.push_back(EchoImage{
            Volume3D(delta_ppm.dims(), delta_ppm.voxel(), Unit::radians, std::move(phase)),
            Volume3D(delta_ppm.dims(), delta_ppm.voxel(), Unit::dimensionless, std::move(mag)),
        });
    }
    return echoes;
}

// ---------------------------------------------------------------------------
// Procedural head

namespace {

Structure make(const std::string& name, Shape shape, std::array<double, 3> center,
               std::array<double, 3> axes, double chi, int label, bool background) {
    Structure s;
    s.name = name;
    s.shape = shape;
    s.center_mm = center;
    s.semi_axes_mm = axes;
    s.chi_ppm = chi;
    s.label = label;
    s.background = background;
    return s;
}

} // namespace

PhantomSpec default_head_phantom(Dims dims, VoxelSize voxel) {
    PhantomSpec spec;
    spec.dims = dims;
    spec.voxel = voxel;

    // geometry scales with the FOV so the head fills most of the grid
    const double fx = dims.nx * voxel.dx / 192.0;
    const double fy = dims.ny * voxel.dy / 192.0;
    const double fz = dims.nz * voxel.dz / 192.0;
    auto c = [&](double x, double y, double z) {
        return std::array<double, 3>{x * fx, y * fy, z * fz};
    };
    auto a = [&](double x, double y, double z) {
        return std::array<double, 3>{x * fx, y * fy, z * fz};
    };

    auto& s = spec.structures;
    // Background shells first. The nasal air pocket is painted before the
    // brain envelope, so the envelope reclaims any overlap and the pocket
    // ends up hugging the inferior-anterior brain boundary.
    s.push_back(make("fat", Shape::ellipsoid, c(0, 0, 0), a(72, 86, 78), 0.6, 10, true));
    s.push_back(make("skull", Shape::ellipsoid, c(0, 0, 0), a(66, 80, 72), -2.1, 11, true));
    s.push_back(make("nasal_air", Shape::sphere, c(0, 60, -44), a(8, 8, 8), 9.2, 13, true));
    s.push_back(make("csf", Shape::ellipsoid, c(0, 0, 0), a(58, 72, 64), 0.0, 1, false));
    s.push_back(make("white_matter", Shape::ellipsoid, c(0, 4, 6), a(44, 54, 46), -0.03, 2, false));
    s.push_back(make("cerebellum", Shape::ellipsoid, c(0, -40, -28), a(26, 20, 16), -0.0065, 3, false));
    s.push_back(make("pons", Shape::sphere, c(0, -12, -26), a(9, 9, 9), -0.0065, 4, false));
    s.push_back(make("medulla", Shape::ellipsoid, c(0, -18, -40), a(6, 6, 12), 0.05, 5, false));
    s.push_back(make("midbrain", Shape::sphere, c(0, -8, -14), a(8, 8, 8), -0.0065, 6, false));
    s.push_back(make("thalamus", Shape::ellipsoid, c(0, -4, 2), a(16, 10, 8), -0.0065, 7, false));
    s.push_back(make("hypothalamus", Shape::sphere, c(0, 4, -8), a(5, 5, 5), 0.05, 8, false));
    s.push_back(make("hippocampus_l", Shape::ellipsoid, c(-24, -14, -6), a(8, 13, 7), 0.05, 9, false));
    s.push_back(make("hippocampus_r", Shape::ellipsoid, c(24, -14, -6), a(8, 13, 7), 0.05, 12, false));
    s.push_back(make("nasal_air", Shape::sphere, c(0, 62, -44), a(9, 9, 9), 9.2, 13, true));
    return spec;
}

PhantomSpec randomized_head_phantom(Dims dims, VoxelSize voxel, uint64_t seed) {
    PhantomSpec spec = default_head_phantom(dims, voxel);
    spec.seed = seed;
    Rng rng(seed);
    const double jitter_mm = 3.0;
    for (auto& s : spec.structures) {
        const bool envelope = s.name == "fat" || s.name == "skull" || s.name == "csf";
        for (int i = 0; i < 3; ++i) {
            if (!envelope) s.center_mm[i] += jitter_mm * (2.0 * rng.next_double() - 1.0);
            s.semi_axes_mm[i] *= 0.92 + 0.16 * rng.next_double();
        }
    }
    // envelopes must stay nested; clamp so the jittered shells keep order
    auto* fat = &spec.structures[0];
    auto* skull = &spec.structures[1];
    auto* csf = &spec.structures[2];
    for (int i = 0; i < 3; ++i) {
        skull->semi_axes_mm[i] = std::min(skull->semi_axes_mm[i], fat->semi_axes_mm[i] - 2.0);
        csf->semi_axes_mm[i] = std::min(csf->semi_axes_mm[i], skull->semi_axes_mm[i] - 2.0);
    }
    return spec;
}

} // namespace qsm
