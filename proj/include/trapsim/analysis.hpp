#pragma once

// Trapping-site search and characterization on a Landscape: local minima,
// secular modes, stability factor, micromotion, barriers along
// minimal-potential paths, global depth by watershed flooding, and the
// quartic double-well model.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "trapsim/errors.hpp"
#include "trapsim/fields.hpp"

namespace trapsim {

using Basis3 = Eigen::Matrix<double, 3, Eigen::Dynamic>;

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

struct MinimizeOptions {
    int max_iterations = 200;
    double max_step = 5e-6;                  // m
    double gradient_tolerance = 1e-4 * eV;   // J/m
    double step_tolerance = 1e-13;           // m
    bool converge_on_step = false;           // scale-free criterion: step below step_tolerance
};

struct MinimizeResult {
    Vec3 point = Vec3::Zero();
    double energy = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Damped Newton descent restricted to start + span(B) (B orthonormal
/// columns). Negative curvature directions are treated by their magnitude,
/// so the step always descends. `inside` bounds the search.
inline MinimizeResult minimize(const Landscape& land, const Vec3& start, const Basis3& B,
                               const MinimizeOptions& opt = {},
                               const std::function<bool(const Vec3&)>& inside = {}) {
    MinimizeResult res;
    Vec3 r = start;
    double u = land.energy(r);
    const int k = int(B.cols());
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it;
        const Eigen::VectorXd g = B.transpose() * land.gradient(r);
        res.gradient_norm = g.norm();
        if (res.gradient_norm < opt.gradient_tolerance) {
            res.converged = true;
            break;
        }
        const Eigen::MatrixXd H = B.transpose() * land.hessian(r) * B;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
        bool pd = true;
        Eigen::VectorXd gt = es.eigenvectors().transpose() * g;
        for (int i = 0; i < k; ++i) {
            const double l = es.eigenvalues()[i];
            if (l <= 0.0) pd = false;
            gt[i] /= std::max(std::abs(l), 1e-8 * lmax + std::numeric_limits<double>::min());
        }
        Vec3 s = -(B * (es.eigenvectors() * gt));
        if (s.norm() > opt.max_step) s *= opt.max_step / s.norm();
        if (!(s.allFinite())) break;

        double t = 1.0;
        while (!land.in_domain(r + t * s) && t > 1e-8) t *= 0.5;
        if (!land.in_domain(r + t * s)) break;
        Vec3 next = r + t * s;
        double un = land.energy(next);
        if (!(pd && s.norm() < 0.05e-6)) {
            while (un > u && t > 1e-8) {
                t *= 0.5;
                next = r + t * s;
                un = land.energy(next);
            }
            if (un > u) break;
        }
        r = next;
        u = un;
        if (inside && !inside(r)) {
            res.point = r;
            res.energy = u;
            return res;
        }
        if ((t * s).norm() < opt.step_tolerance) {
            res.gradient_norm = (B.transpose() * land.gradient(r)).norm();
            res.converged = opt.converge_on_step || res.gradient_norm < 100.0 * opt.gradient_tolerance;
            break;
        }
    }
    res.point = r;
    res.energy = u;
    return res;
}

inline MinimizeResult minimize(const Landscape& land, const Vec3& start, const MinimizeOptions& opt = {},
                               const std::function<bool(const Vec3&)>& inside = {}) {
    return minimize(land, start, Basis3(Mat3::Identity()), opt, inside);
}

/// Newton iteration on grad U = 0 (any stationary point), with a trust
/// radius. Returns nullopt if it does not converge.
inline std::optional<Vec3> refine_stationary(const Landscape& land, Vec3 r, double max_step = 2e-6,
                                             int max_iterations = 60, double gradient_tolerance = 1e-4 * eV) {
    for (int it = 0; it < max_iterations; ++it) {
        const Vec3 g = land.gradient(r);
        if (g.norm() < gradient_tolerance) return r;
        Vec3 s = -land.hessian(r).fullPivLu().solve(g);
        if (!s.allFinite()) return std::nullopt;
        if (s.norm() > max_step) s *= max_step / s.norm();
        if (!land.in_domain(r + s)) return std::nullopt;
        r += s;
    }
    return land.gradient(r).norm() < gradient_tolerance ? std::optional<Vec3>(r) : std::nullopt;
}

// ---------------------------------------------------------------------------
// sites

struct TrapSite {
    Vec3 position = Vec3::Zero();
    double d = nan_value;                                   // m
    std::array<double, 3> secular{nan_value, nan_value, nan_value};  // omega_z, omega_r1, omega_r2 (rad/s)
    std::array<Vec3, 3> modes{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};  // axial, r1, r2
    double theta_r = nan_value;                             // deg
    double theta_z = nan_value;                             // deg
    double q = nan_value;
    double U_b = nan_value, U_mw_l = nan_value, U_mw_r = nan_value, U_0 = nan_value;  // J
    double e_parallel = nan_value;                          // V/m
    double z_mm = nan_value;                                // m
    double beta = nan_value;
    double energy = nan_value;                              // J
};

struct SearchRegion {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    bool contains(const Vec3& r, double pad = 0.0) const {
        for (int a = 0; a < 3; ++a)
            if (r[a] < lo[a] - pad || r[a] > hi[a] + pad) return false;
        return true;
    }
};

/// Sorts positions by x, then z; x values within 1 um count as one column.
inline void sort_sites(std::vector<TrapSite>& sites) {
    std::sort(sites.begin(), sites.end(), [](const TrapSite& a, const TrapSite& b) {
        return a.position.x() < b.position.x();
    });
    std::vector<int> column(sites.size(), 0);
    for (std::size_t i = 1; i < sites.size(); ++i)
        column[i] = column[i - 1] + (sites[i].position.x() - sites[i - 1].position.x() > 1e-6 ? 1 : 0);
    std::vector<std::size_t> idx(sites.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (column[a] != column[b]) return column[a] < column[b];
        return sites[a].position.z() < sites[b].position.z();
    });
    std::vector<TrapSite> out;
    out.reserve(sites.size());
    for (auto i : idx) out.push_back(sites[i]);
    sites = std::move(out);
}

/// All distinct local minima of the total potential inside the region.
inline std::vector<TrapSite> find_sites(const Landscape& land, const SearchRegion& region, double seed_spacing,
                                        int threads = 1, std::vector<std::string>* diagnostics = nullptr) {
    if (!(seed_spacing > 0.0)) throw std::invalid_argument("seed spacing must be positive");
    if (!(region.lo.y() > 0.0)) throw std::invalid_argument("search region must lie above the electrode plane");
    for (int a = 0; a < 3; ++a)
        if (!(region.hi[a] > region.lo[a])) throw std::invalid_argument("search region is empty");
    std::vector<TrapSite> out;
    if (!land.has_rf() && !land.has_dc()) return out;

    std::array<int, 3> n{};
    for (int a = 0; a < 3; ++a) n[a] = std::max(3, int(std::floor((region.hi[a] - region.lo[a]) / seed_spacing)) + 1);
    auto at = [&](int a, int i) { return region.lo[a] + (region.hi[a] - region.lo[a]) * i / (n[a] - 1); };
    auto index = [&](int i, int j, int k) { return (std::size_t(k) * n[1] + j) * n[0] + i; };
    std::vector<double> u(std::size_t(n[0]) * n[1] * n[2]);
    parallel_for(u.size(), threads, [&](std::size_t m) {
        const int i = int(m % n[0]), j = int((m / n[0]) % n[1]), k = int(m / (std::size_t(n[0]) * n[1]));
        u[m] = land.energy({at(0, i), at(1, j), at(2, k)});
    });

    std::vector<Vec3> seeds;
    for (int k = 1; k + 1 < n[2]; ++k)
        for (int j = 1; j + 1 < n[1]; ++j)
            for (int i = 1; i + 1 < n[0]; ++i) {
                const std::size_t m = index(i, j, k);
                bool is_min = true;
                for (int dk = -1; dk <= 1 && is_min; ++dk)
                    for (int dj = -1; dj <= 1 && is_min; ++dj)
                        for (int di = -1; di <= 1 && is_min; ++di) {
                            if (!di && !dj && !dk) continue;
                            const std::size_t o = index(i + di, j + dj, k + dk);
                            if (u[o] < u[m] || (u[o] == u[m] && o < m)) is_min = false;
                        }
                if (is_min) seeds.push_back({at(0, i), at(1, j), at(2, k)});
            }

    std::vector<std::optional<Vec3>> refined(seeds.size());
    std::vector<std::string> notes(seeds.size());
    MinimizeOptions opt;
    opt.max_step = seed_spacing;
    parallel_for(seeds.size(), threads, [&](std::size_t s) {
        auto inside = [&](const Vec3& r) { return region.contains(r, seed_spacing); };
        const MinimizeResult m = minimize(land, seeds[s], opt, inside);
        std::ostringstream os;
        if (!m.converged || !inside(m.point)) {
            os << "seed (" << seeds[s].x() / um << ", " << seeds[s].y() / um << ", " << seeds[s].z() / um
               << ") um: refinement did not converge";
            notes[s] = os.str();
            return;
        }
        Eigen::SelfAdjointEigenSolver<Mat3> es(land.hessian(m.point));
        if (es.eigenvalues().minCoeff() <= 0.0) {
            os << "seed (" << seeds[s].x() / um << ", " << seeds[s].y() / um << ", " << seeds[s].z() / um
               << ") um: refined point is not a minimum";
            notes[s] = os.str();
            return;
        }
        refined[s] = m.point;
    });

    for (std::size_t s = 0; s < seeds.size(); ++s) {
        if (!refined[s]) {
            if (diagnostics) diagnostics->push_back(notes[s]);
            continue;
        }
        const Vec3& p = *refined[s];
        bool dup = false;
        for (const auto& t : out)
            if ((t.position - p).norm() < 1e-6) dup = true;
        if (dup) continue;
        TrapSite t;
        t.position = p;
        t.d = p.y();
        t.energy = land.energy(p);
        out.push_back(t);
    }
    sort_sites(out);
    return out;
}

/// Position of the RF null closest to `guess`, searched in the x-y plane at
/// the guess's z.
inline Vec3 find_rf_null(const Landscape& land, const Vec3& guess) {
    const Landscape rf = land.rf_only();
    Basis3 B(3, 2);
    B << 1, 0, 0, 1, 0, 0;
    MinimizeOptions opt;
    opt.max_step = 2e-6;
    opt.gradient_tolerance = 0.0;
    opt.step_tolerance = 1e-12;
    opt.converge_on_step = true;
    const MinimizeResult m = minimize(rf, guess, B, opt);
    if (!m.converged) throw NumericalError("RF null search did not converge");
    return m.point;
}

/// Radial secular frequency of the pseudopotential alone at the RF null
/// near `guess` (mean of the two radial curvatures).
inline double dc_free_radial_frequency(const Landscape& land, const Vec3& guess) {
    const Landscape rf = land.rf_only();
    const Vec3 null = find_rf_null(land, guess);
    Eigen::SelfAdjointEigenSolver<Mat3> es(rf.hessian(null));
    const double l = 0.5 * (es.eigenvalues()[1] + es.eigenvalues()[2]);
    if (!(l > 0.0)) throw NumericalError("pseudopotential is not confining at the RF null");
    return std::sqrt(l / land.species().mass);
}

inline double stability_q(const Landscape& land, const Vec3& guess) {
    return std::sqrt(8.0) * dc_free_radial_frequency(land, guess) / land.drive().rf_angular_frequency;
}

/// Secular modes, q factor and micromotion of a verified minimum.
inline TrapSite characterize_site(const Landscape& land, const Vec3& r0) {
    TrapSite t;
    t.position = r0;
    t.d = r0.y();
    t.energy = land.energy(r0);
    Eigen::SelfAdjointEigenSolver<Mat3> es(land.hessian(r0));
    const Eigen::Vector3d lam = es.eigenvalues();
    if (lam.minCoeff() <= 0.0) {
        std::ostringstream os;
        os << "Hessian at (" << r0.x() / um << ", " << r0.y() / um << ", " << r0.z() / um
           << ") um is not positive definite: saddle, not a trapping site";
        throw NumericalError(os.str());
    }
    const double M = land.species().mass;
    int axial = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(es.eigenvectors()(2, i)) > std::abs(es.eigenvectors()(2, axial))) axial = i;
    std::array<int, 2> radial{};
    for (int i = 0, n = 0; i < 3; ++i)
        if (i != axial) radial[n++] = i;  // eigenvalues ascend, so radial[0] is r1
    auto unit = [&](int i) {
        Vec3 v = es.eigenvectors().col(i);
        // deterministic sign: largest component positive
        int a = 0;
        for (int c = 1; c < 3; ++c)
            if (std::abs(v[c]) > std::abs(v[a]) + 1e-12) a = c;
        return v[a] < 0 ? Vec3(-v) : v;
    };
    t.secular = {std::sqrt(lam[axial] / M), std::sqrt(lam[radial[0]] / M), std::sqrt(lam[radial[1]] / M)};
    t.modes = {unit(axial), unit(radial[0]), unit(radial[1])};
    const Vec3& v = std::abs(t.modes[1].y()) >= std::abs(t.modes[2].y()) ? t.modes[1] : t.modes[2];
    const double deg = 180.0 / std::numbers::pi;
    t.theta_r = std::acos(std::min(1.0, std::abs(v.y()))) * deg;
    t.theta_z = std::acos(std::min(1.0, std::abs(t.modes[0].z()))) * deg;

    if (land.has_rf()) {
        t.q = stability_q(land, r0);
        const Vec3 e = land.rf_field(r0);
        t.e_parallel = std::hypot(e.x(), e.z());
        const double w = land.drive().rf_angular_frequency;
        t.z_mm = land.species().charge * t.e_parallel / (M * w * w);
        t.beta = land.species().wavenumber * t.z_mm;
    }
    return t;
}

// ---------------------------------------------------------------------------
// barriers

struct PathOptions {
    int steps = 101;
    double corridor = 100e-6;  // max transverse excursion from the straight line
};

struct PathProfile {
    std::vector<Vec3> points;
    std::vector<double> energy;  // J
};

/// Minimal-potential path from a to b: at each step along the connecting
/// line the energy is minimized in the transverse plane, starting from the
/// previous point.
inline PathProfile minimal_path(const Landscape& land, const Vec3& a, const Vec3& b, const PathOptions& o = {}) {
    if (o.steps < 3) throw std::invalid_argument("path needs at least 3 steps");
    PathProfile p;
    const Vec3 axis = b - a;
    const double len = axis.norm();
    if (len == 0.0) {
        p.points = {a};
        p.energy = {land.energy(a)};
        return p;
    }
    const Vec3 e = axis / len;
    Vec3 e1 = e.cross(Vec3::UnitY());
    if (e1.norm() < 1e-6) e1 = e.cross(Vec3::UnitX());
    e1.normalize();
    const Vec3 e2 = e.cross(e1).normalized();
    Basis3 B(3, 2);
    B.col(0) = e1;
    B.col(1) = e2;
    MinimizeOptions opt;
    opt.max_step = std::min(5e-6, 0.25 * o.corridor);
    Vec3 prev = a;
    for (int s = 0; s < o.steps; ++s) {
        const double t = double(s) / (o.steps - 1);
        const Vec3 on_line = a + t * axis;
        const Vec3 start = prev + (on_line - prev).dot(e) * e;
        auto inside = [&](const Vec3& r) {
            const Vec3 d = r - on_line;
            return (d - d.dot(e) * e).norm() <= o.corridor;
        };
        const MinimizeResult m = minimize(land, start, B, opt, inside);
        if (!inside(m.point) || !m.converged) {
            std::ostringstream os;
            os << "minimal-potential path leaves the search corridor at step " << s << " of " << o.steps;
            throw NumericalError(os.str());
        }
        p.points.push_back(m.point);
        p.energy.push_back(m.energy);
        prev = m.point;
    }
    return p;
}

/// Highest point of the minimal-potential path between two sites, relative
/// to the lower of the two site energies. Symmetric in its arguments.
inline double barrier_between(const Landscape& land, const Vec3& a, const Vec3& b, const PathOptions& o = {}) {
    if ((a - b).norm() < 1e-12) return 0.0;
    const bool swap = std::lexicographical_compare(b.data(), b.data() + 3, a.data(), a.data() + 3);
    const Vec3& p0 = swap ? b : a;
    const Vec3& p1 = swap ? a : b;
    const PathProfile path = minimal_path(land, p0, p1, o);
    const auto& u = path.energy;
    std::size_t k = std::max_element(u.begin(), u.end()) - u.begin();
    double top = u[k];
    if (k > 0 && k + 1 < u.size()) {
        // parabola through the three highest samples
        const double den = u[k - 1] - 2.0 * u[k] + u[k + 1];
        if (den < 0.0) top = u[k] - 0.125 * (u[k + 1] - u[k - 1]) * (u[k + 1] - u[k - 1]) / den;
    }
    return top - std::min(land.energy(a), land.energy(b));
}

// ---------------------------------------------------------------------------
// global depth

struct DepthOptions {
    double spacing = 2e-6;
    double lateral_pad = 100e-6;   // beyond the outermost electrodes
    double top_factor = 4.0;       // region top = top_factor * d (capped below a top plane)
    double z_half_window = 0.0;    // 0: planar flood at the site's z
    double floor = 2e-6;           // region bottom
};

struct DepthResult {
    double depth = nan_value;      // J, relative to the site
    Vec3 pass = Vec3::Zero();      // where the basin spills
    bool saddle_refined = false;
};

/// Escape depth of a site: the lowest level at which its basin reaches the
/// boundary of the flood region (lateral, top and bottom faces; z faces are
/// closed). A top ground plane only caps the region; see plane_depth for
/// the energy at the plane itself.
inline DepthResult global_depth_detail(const Landscape& land, const Vec3& site, const DepthOptions& o = {}) {
    if (!(o.spacing > 0.0)) throw std::invalid_argument("depth grid spacing must be positive");
    const BoundingBox bb = land.layout().bounds();
    const double h = o.spacing;
    const Vec3 lo(bb.x0 - o.lateral_pad, o.floor, o.z_half_window > 0 ? site.z() - o.z_half_window : site.z());
    double ytop = o.top_factor * site.y();
    if (land.layout().top_ground_height) ytop = std::min(ytop, *land.layout().top_ground_height - h);
    const Vec3 hi(bb.x1 + o.lateral_pad, ytop, o.z_half_window > 0 ? site.z() + o.z_half_window : site.z());
    std::array<int, 3> n{};
    for (int a = 0; a < 3; ++a) n[a] = hi[a] > lo[a] ? int(std::ceil((hi[a] - lo[a]) / h)) + 1 : 1;
    if (n[0] < 3 || n[1] < 3) throw NumericalError("depth region is smaller than three grid cells");
    auto coord = [&](int a, int i) { return n[a] == 1 ? lo[a] : lo[a] + (hi[a] - lo[a]) * i / (n[a] - 1); };
    const std::size_t total = std::size_t(n[0]) * n[1] * n[2];
    std::vector<double> u(total, nan_value);
    std::vector<char> seen(total, 0);
    auto id = [&](int i, int j, int k) { return (std::size_t(k) * n[1] + j) * n[0] + i; };
    auto value = [&](std::size_t m) {
        if (std::isnan(u[m])) {
            const int i = int(m % n[0]), j = int((m / n[0]) % n[1]), k = int(m / (std::size_t(n[0]) * n[1]));
            u[m] = land.energy({coord(0, i), coord(1, j), coord(2, k)});
        }
        return u[m];
    };
    auto nearest = [&](int a, double v) {
        if (n[a] == 1) return 0;
        return std::clamp(int(std::lround((v - lo[a]) / (hi[a] - lo[a]) * (n[a] - 1))), 0, n[a] - 1);
    };
    const int si = nearest(0, site.x()), sj = nearest(1, site.y()), sk = nearest(2, site.z());
    if (si == 0 || si == n[0] - 1 || sj == 0 || sj == n[1] - 1)
        throw NumericalError("site lies on the boundary of the depth region");

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    const std::size_t s0 = id(si, sj, sk);
    pq.push({value(s0), s0});
    seen[s0] = 1;
    double level = -std::numeric_limits<double>::infinity();
    std::size_t pass = s0;
    std::size_t exit = s0;
    bool escaped = false;
    while (!pq.empty()) {
        const auto [v, m] = pq.top();
        pq.pop();
        if (v > level) {
            level = v;
            pass = m;
        }
        const int i = int(m % n[0]), j = int((m / n[0]) % n[1]), k = int(m / (std::size_t(n[0]) * n[1]));
        if (i == 0 || i == n[0] - 1 || j == 0 || j == n[1] - 1) {
            escaped = true;
            exit = m;
            break;
        }
        const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& d : nb) {
            const int a = i + d[0], b = j + d[1], c = k + d[2];
            if (c < 0 || c >= n[2]) continue;
            const std::size_t q = id(a, b, c);
            if (seen[q]) continue;
            seen[q] = 1;
            pq.push({value(q), q});
        }
    }
    if (!escaped) throw NumericalError("watershed flood did not reach the region boundary");

    const double u_site = land.energy(site);
    auto point_of = [&](std::size_t m) {
        const int i = int(m % n[0]), j = int((m / n[0]) % n[1]), k = int(m / (std::size_t(n[0]) * n[1]));
        return Vec3(coord(0, i), coord(1, j), coord(2, k));
    };
    DepthResult r;
    r.pass = point_of(pass);
    if (pass == s0 || level - u_site <= 0.0) {
        std::ostringstream os;
        os << "depth grid (" << h / um << " um) does not resolve the basin; try a spacing of " << 0.5 * h / um << " um";
        throw NumericalError(os.str());
    }
    if (pass != exit) {
        // interior pass: polish it to the true saddle
        if (auto s = refine_stationary(land, r.pass, h)) {
            Eigen::SelfAdjointEigenSolver<Mat3> es(land.hessian(*s));
            const int negative = int((es.eigenvalues().array() < 0.0).count());
            if (negative == 1 && (*s - r.pass).norm() < 3.0 * h) {
                level = land.energy(*s);
                r.pass = *s;
                r.saddle_refined = true;
            }
        }
    }
    r.depth = level - u_site;
    return r;
}

struct FloodBarrierOptions {
    double spacing = 3e-6;
    double pad_x = 30e-6;      // box margin beyond the two sites
    double pad_z = 60e-6;
    double y_lo_factor = 0.5;  // box spans [y_lo_factor * min y, y_hi_factor * max y]
    double y_hi_factor = 1.6;
};

/// Barrier between two sites as the lowest level at which a watershed flood
/// from `a` reaches `b`, restricted to a box around both (box faces are
/// closed). Unlike minimal_path it finds passes away from the connecting
/// line, e.g. between wells at different z. Relative to the lower site.
inline double flood_barrier(const Landscape& land, const Vec3& a, const Vec3& b, const FloodBarrierOptions& o = {}) {
    if (!(o.spacing > 0.0)) throw std::invalid_argument("flood grid spacing must be positive");
    if ((a - b).norm() < 1e-12) return 0.0;
    const double h = o.spacing;
    const Vec3 lo(std::min(a.x(), b.x()) - o.pad_x, o.y_lo_factor * std::min(a.y(), b.y()), std::min(a.z(), b.z()) - o.pad_z);
    const Vec3 hi(std::max(a.x(), b.x()) + o.pad_x, o.y_hi_factor * std::max(a.y(), b.y()), std::max(a.z(), b.z()) + o.pad_z);
    std::array<int, 3> n{};
    for (int k = 0; k < 3; ++k) n[k] = int(std::ceil((hi[k] - lo[k]) / h)) + 1;
    auto coord = [&](int k, int i) { return lo[k] + (hi[k] - lo[k]) * i / (n[k] - 1); };
    auto nearest = [&](int k, double v) {
        return std::clamp(int(std::lround((v - lo[k]) / (hi[k] - lo[k]) * (n[k] - 1))), 0, n[k] - 1);
    };
    auto id = [&](int i, int j, int k) { return (std::size_t(k) * n[1] + j) * n[0] + i; };
    const std::size_t total = std::size_t(n[0]) * n[1] * n[2];
    std::vector<char> seen(total, 0);
    auto point_of = [&](std::size_t m) {
        const int i = int(m % n[0]), j = int((m / n[0]) % n[1]), k = int(m / (std::size_t(n[0]) * n[1]));
        return Vec3(coord(0, i), coord(1, j), coord(2, k));
    };
    const std::size_t s0 = id(nearest(0, a.x()), nearest(1, a.y()), nearest(2, a.z()));
    const std::size_t s1 = id(nearest(0, b.x()), nearest(1, b.y()), nearest(2, b.z()));

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({land.energy(point_of(s0)), s0});
    seen[s0] = 1;
    double level = -std::numeric_limits<double>::infinity();
    std::size_t pass = s0;
    bool reached = false;
    while (!pq.empty()) {
        const auto [v, m] = pq.top();
        pq.pop();
        if (v > level) {
            level = v;
            pass = m;
        }
        if (m == s1) {
            reached = true;
            break;
        }
        const int i = int(m % n[0]), j = int((m / n[0]) % n[1]), k = int(m / (std::size_t(n[0]) * n[1]));
        const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& d : nb) {
            const int p = i + d[0], q = j + d[1], r = k + d[2];
            if (p < 0 || p >= n[0] || q < 0 || q >= n[1] || r < 0 || r >= n[2]) continue;
            const std::size_t c = id(p, q, r);
            if (seen[c]) continue;
            seen[c] = 1;
            pq.push({land.energy(point_of(c)), c});
        }
    }
    if (!reached) throw NumericalError("watershed flood did not connect the two sites");
    if (pass != s0 && pass != s1) {
        const Vec3 g = point_of(pass);
        if (auto sp = refine_stationary(land, g, h)) {
            Eigen::SelfAdjointEigenSolver<Mat3> es(land.hessian(*sp));
            if ((es.eigenvalues().array() < 0.0).count() == 1 && (*sp - g).norm() < 3.0 * h) level = land.energy(*sp);
        }
    }
    return level - std::min(land.energy(a), land.energy(b));
}

inline double global_depth(const Landscape& land, const Vec3& site, const DepthOptions& o = {}) {
    return global_depth_detail(land, site, o).depth;
}

/// Energy at the top ground plane directly above the site, relative to the
/// site. The depth convention used for the lattice array.
inline double plane_depth(const Landscape& land, const Vec3& site) {
    const auto& top = land.layout().top_ground_height;
    if (!top) throw std::invalid_argument("layout has no top ground plane");
    if (!land.in_domain(site)) throw std::domain_error("site lies outside the region between the planes");
    return land.energy({site.x(), std::nextafter(*top, 0.0), site.z()}) - land.energy(site);
}

// ---------------------------------------------------------------------------
// double well

struct DoubleWellFit {
    double a = 0.0;         // J/m^4
    double b = 0.0;         // J/m^2
    double c = 0.0;         // J
    double s = 0.0;         // m, well separation
    double omega = 0.0;     // rad/s, single-well frequency
    double barrier = 0.0;   // J
    double residual = 0.0;  // J RMS
};

/// Least-squares fit of a z^4 - b z^2 + c to samples (z in m, U in J)
/// measured from the symmetric center.
inline DoubleWellFit fit_double_well(const std::vector<std::pair<double, double>>& samples, double mass) {
    if (samples.size() < 7) throw std::invalid_argument("double-well fit needs at least 7 samples");
    if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
    double zmax = 0.0;
    for (const auto& [z, u] : samples) zmax = std::max(zmax, std::abs(z));
    if (!(zmax > 0.0)) throw std::invalid_argument("samples do not span any distance");
    // scaled coordinates keep the normal matrix well conditioned
    Eigen::MatrixXd A(samples.size(), 3);
    Eigen::VectorXd y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double t = samples[i].first / zmax;
        A(i, 0) = t * t * t * t;
        A(i, 1) = -t * t;
        A(i, 2) = 1.0;
        y[i] = samples[i].second;
    }
    const Eigen::Vector3d p = A.colPivHouseholderQr().solve(y);
    DoubleWellFit f;
    f.a = p[0] / std::pow(zmax, 4);
    f.b = p[1] / (zmax * zmax);
    f.c = p[2];
    f.residual = std::sqrt((A * p - y).squaredNorm() / double(samples.size()));
    const double scale = y.cwiseAbs().maxCoeff() + std::numeric_limits<double>::min();
    if (!(p[0] > 1e-9 * scale) || !(p[1] > 1e-9 * scale))
        throw NumericalError("samples are not described by a double well (a <= 0 or b <= 0)");
    f.s = std::sqrt(2.0 * f.b / f.a);
    f.omega = std::sqrt(4.0 * f.b / mass);
    f.barrier = mass * f.omega * f.omega * f.s * f.s / 32.0;
    return f;
}

}  // namespace trapsim
