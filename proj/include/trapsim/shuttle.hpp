#pragma once

// Parameter scans: independent axial translation of the two multiwells,
// RF-ratio tuning of the lateral null spacing, the reduced axial spacing in
// the interaction zone, the static-array width sweep, and sampling of a
// path through an axial scan into a voltage waveform.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trapsim/analysis.hpp"
#include "trapsim/errors.hpp"
#include "trapsim/voltsolver.hpp"

namespace trapsim {

struct ScanPoint {
    double a = nan_value, b = nan_value;  // axis values
    bool converged = false;
    std::string error;                    // why the point failed
    std::vector<double> voltages;         // channel order of ScanResult::channels
    TrapSite left, right;
    double s_x = nan_value;               // m
    double u_rf = nan_value;              // V, static-array scans
};

struct ScanResult {
    std::string kind;
    std::string axis_a, axis_b;           // names with units
    std::vector<double> a_values, b_values;
    std::vector<std::string> channels;
    std::vector<ScanPoint> points;        // a fastest

    const ScanPoint& at(std::size_t i, std::size_t j) const { return points[j * a_values.size() + i]; }
    std::size_t converged_count() const {
        return std::size_t(std::count_if(points.begin(), points.end(), [](const ScanPoint& p) { return p.converged; }));
    }
};

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("grid needs at least one point");
    std::vector<double> v(std::size_t(n), lo);
    for (int i = 0; i < n; ++i) v[std::size_t(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

/// Minimum near `guess` that is a genuine trapping site, or an explanation.
inline std::optional<Vec3> locate_site(const Landscape& land, const Vec3& guess, double max_shift, std::string* why) {
    const MinimizeResult m = minimize(land, guess);
    if (!m.converged) {
        if (why) *why = "minimizer did not converge near the target";
        return std::nullopt;
    }
    if ((m.point - guess).norm() > max_shift) {
        if (why) {
            std::ostringstream os;
            os << "site moved " << (m.point - guess).norm() / um << " um from its target";
            *why = os.str();
        }
        return std::nullopt;
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(land.hessian(m.point));
    if (es.eigenvalues().minCoeff() <= 0.0) {
        if (why) *why = "stationary point is not a minimum";
        return std::nullopt;
    }
    return m.point;
}

// ---------------------------------------------------------------------------
// independent axial translations

struct AxialScanOptions {
    int n = 33;
    double z_lo = -153e-6, z_hi = 153e-6;
    double omega_z = angular(1.0e6);
    double period = 306e-6;       // multiwell period 3 l_DC
    Vec3 field_l = Vec3::Zero();  // compensation fields, V/m
    Vec3 field_r = Vec3::Zero();
    double max_shift = 3e-6;      // allowed distance between target and site
    DepthOptions depth;
    bool depths = true;           // barriers and U_0 per point (dominates runtime)
    int threads = 1;
};

/// Fills U_b, U_mw and U_0 of both sites of a solved twin configuration.
inline void twin_depths(const Landscape& land, TrapSite& l, TrapSite& r, double period, const DepthOptions& depth) {
    // the lateral pass may lie well away from the connecting line once the
    // wells sit at different z
    const double ub = flood_barrier(land, l.position, r.position);
    for (TrapSite* s : {&l, &r}) {
        s->U_b = ub;
        for (int side : {-1, 1}) {
            Vec3 g = s->position;
            g.z() += side * period;
            const MinimizeResult m = minimize(land, g);
            if (!m.converged) throw NumericalError("axial neighbour of a site did not converge");
            (side < 0 ? s->U_mw_l : s->U_mw_r) = barrier_between(land, s->position, m.point);
        }
        s->U_0 = global_depth(land, s->position, depth);
    }
}

/// Solves and characterizes both wells for every (z_l, z_r) pair. `rf` holds
/// the RF drive; DC voltages in it are ignored. Axis a is z_l, b is z_r.
inline ScanResult scan_axial_translation(const Landscape& rf, const ElectrodeGrouping& grouping, const Vec3& null_l,
                                         const Vec3& null_r, const AxialScanOptions& o = {}) {
    if (!(o.omega_z > 0.0)) throw std::invalid_argument("axial frequency target must be positive");
    if (!(o.z_hi >= o.z_lo)) throw std::invalid_argument("scan range is empty");
    if (o.z_hi - o.z_lo > o.period * (1.0 + 1e-9)) throw std::invalid_argument("scan range exceeds one multiwell period");
    grouping.validate(rf.layout());
    ScanResult res;
    res.kind = "axial";
    res.axis_a = "z_l_m";
    res.axis_b = "z_r_m";
    res.a_values = linspace(o.z_lo, o.z_hi, o.n);
    res.b_values = res.a_values;
    res.channels = grouping.names();
    res.points.resize(res.a_values.size() * res.b_values.size());
    const Landscape base = rf.rf_only();
    parallel_for(res.points.size(), o.threads, [&](std::size_t k) {
        ScanPoint& p = res.points[k];
        p.a = res.a_values[k % res.a_values.size()];
        p.b = res.b_values[k / res.a_values.size()];
        const Vec3 tl(null_l.x(), null_l.y(), p.a), tr(null_r.x(), null_r.y(), p.b);
        try {
            const ConstraintSystem cs =
                solve_voltages(base.model(), grouping, base.species(), {{tl, o.field_l, o.omega_z}, {tr, o.field_r, o.omega_z}});
            p.voltages.assign(cs.x.data(), cs.x.data() + cs.x.size());
            DriveConfig d = base.drive();
            d.dc_voltages = grouping.expand(cs.x);
            const Landscape land(base.model_ptr(), d, base.species());
            std::string why;
            const auto sl = locate_site(land, tl, o.max_shift, &why);
            const auto sr = sl ? locate_site(land, tr, o.max_shift, &why) : std::nullopt;
            if (!sl || !sr) {
                p.error = why;
                return;
            }
            p.left = characterize_site(land, *sl);
            p.right = characterize_site(land, *sr);
            p.s_x = sr->x() - sl->x();
            if (o.depths) twin_depths(land, p.left, p.right, o.period, o.depth);
            p.converged = true;
        } catch (const std::exception& e) {
            p.error = e.what();
        }
    });
    return res;
}

// ---------------------------------------------------------------------------
// RF tuning of the lateral spacing

struct RfSpacingOptions {
    double u_max = 400.0;  // V
    double q_target = 0.4;
    double omega = angular(23e6);
};

struct RfSpacingResult {
    SpacingResult spacing;
    double attenuation = nan_value;  // 1 - ratio
    double u_outer = nan_value;      // V, unattenuated rails
    double u_inner = nan_value;      // V, attenuated rails
    DriveConfig drive;
    TrapSite left, right;            // pseudopotential sites, no DC
    double barrier = nan_value;      // J, between the two nulls
};

/// Attenuates one RF group until the flanking nulls are `req.target` apart,
/// then scales the drive so the left null has q = q_target, limited by U_max.
inline RfSpacingResult tune_rf_spacing(std::shared_ptr<const FieldModel> model, const IonSpecies& species,
                                       const SpacingRequest& req, const RfSpacingOptions& o = {}) {
    if (!(o.u_max > 0.0)) throw std::invalid_argument("U_max must be positive");
    if (!(o.q_target > 0.0 && o.q_target < 0.9)) throw std::invalid_argument("q target must lie in (0, 0.9)");
    RfSpacingResult r;
    r.spacing = tune_null_spacing(model, species, req);
    r.attenuation = 1.0 - r.spacing.ratio;
    auto w = req.weights;
    w[req.attenuated_group] *= r.spacing.ratio;
    const double u = bisect_rf_amplitude(model, species, w, o.omega, o.q_target, r.spacing.left);
    r.u_outer = std::min(u, o.u_max);
    r.u_inner = r.spacing.ratio * r.u_outer;
    r.drive.rf_angular_frequency = o.omega;
    r.drive.rf_amplitudes = scaled_amplitudes(w, r.u_outer);
    const Landscape land(model, r.drive, species);
    r.left.position = r.spacing.left;
    r.left.d = r.spacing.left.y();
    r.left.q = stability_q(land, r.spacing.left);
    r.right.position = r.spacing.right;
    r.right.d = r.spacing.right.y();
    r.right.q = stability_q(land, r.spacing.right);
    r.barrier = barrier_between(land, r.spacing.left, r.spacing.right);
    return r;
}

/// Null spacing and drive as a function of the attenuation ratio. Axis a is
/// the ratio; points past the merge of the two nulls are flagged.
inline ScanResult scan_rf_ratio(std::shared_ptr<const FieldModel> model, const IonSpecies& species,
                                const SpacingRequest& req, const std::vector<double>& ratios,
                                const RfSpacingOptions& o = {}, int threads = 1) {
    if (!req.weights.count(req.attenuated_group))
        throw std::invalid_argument("attenuated group '" + req.attenuated_group + "' is not among the RF groups");
    ScanResult res;
    res.kind = "rf-spacing";
    res.axis_a = "ratio";
    res.a_values = ratios;
    res.b_values = {0.0};
    res.points.resize(ratios.size());
    parallel_for(ratios.size(), threads, [&](std::size_t k) {
        ScanPoint& p = res.points[k];
        p.a = ratios[k];
        p.b = 0.0;
        try {
            if (!(p.a > 0.0 && p.a <= 1.0)) throw std::invalid_argument("ratio must lie in (0, 1]");
            auto w = req.weights;
            w[req.attenuated_group] *= p.a;
            DriveConfig d;
            d.rf_angular_frequency = o.omega;
            d.rf_amplitudes = w;
            const Landscape unit(model, d, species);
            const Vec3 l = find_rf_null(unit, req.left_guess), r = find_rf_null(unit, req.right_guess);
            p.s_x = r.x() - l.x();
            if (!(p.s_x > 1e-6)) throw NumericalError("RF nulls merged");
            p.u_rf = std::min(bisect_rf_amplitude(model, species, w, o.omega, o.q_target, l), o.u_max);
            d.rf_amplitudes = scaled_amplitudes(w, p.u_rf);
            const Landscape land(model, d, species);
            p.left.position = l;
            p.left.d = l.y();
            p.left.q = stability_q(land, l);
            p.right.position = r;
            p.right.d = r.y();
            p.right.q = stability_q(land, r);
            p.converged = true;
        } catch (const std::exception& e) {
            p.error = e.what();
        }
    });
    return res;
}

// ---------------------------------------------------------------------------
// interaction zone

struct InteractionZoneOptions {
    double s_z = 50e-6;            // central axial spacing
    double z_outer = 459e-6;       // first outer site
    double omega_central = angular(1.0e6);
    double omega_outer = angular(1.0e6);
    double period = 306e-6;
};

struct InteractionZoneResult {
    ConstraintSystem system;
    DriveConfig drive;
    TrapSite central, partner, outer;  // left trap: z > 0 central site, its mirror, first outer site
    double barrier = nan_value;        // J, axial double-well barrier
    double s_z = nan_value;            // m, realised spacing
    std::vector<TrapSite> outer_sites; // further outer sites of the left trap, z > 0
};

/// Central pair at +-s_z/2 and periodic outer wells from one solve with the
/// mirror-symmetric interaction grouping. `rf` carries the RF drive and
/// `null_l` the left RF null.
inline InteractionZoneResult interaction_zone_config(const Landscape& rf, const ElectrodeGrouping& grouping,
                                                     const Vec3& null_l, const InteractionZoneOptions& o = {},
                                                     int outer_count = 4) {
    if (!(o.s_z > 2e-6)) throw std::invalid_argument("axial spacing target is below the minimizer resolution");
    if (!(o.z_outer > 0.5 * o.s_z)) throw std::invalid_argument("outer site must lie beyond the central pair");
    const Landscape base = rf.rf_only();
    InteractionZoneResult r;
    const Vec3 tc(null_l.x(), null_l.y(), 0.5 * o.s_z), to(null_l.x(), null_l.y(), o.z_outer);
    r.system = solve_voltages(base.model(), grouping, base.species(),
                              {{tc, Vec3::Zero(), o.omega_central}, {to, Vec3::Zero(), o.omega_outer}});
    r.drive = base.drive();
    r.drive.dc_voltages = grouping.expand(r.system.x);
    const Landscape land(base.model_ptr(), r.drive, base.species());
    std::string why;
    const double shift = std::max(3e-6, 0.25 * o.s_z);
    auto c = locate_site(land, tc, shift, &why);
    if (!c) throw NumericalError("central site: " + why);
    Vec3 mg = *c;
    mg.z() = -mg.z();
    auto p = locate_site(land, mg, shift, &why);
    if (!p) throw NumericalError("central partner: " + why);
    auto out = locate_site(land, to, 3e-6, &why);
    if (!out) throw NumericalError("outer site: " + why);
    r.central = characterize_site(land, *c);
    r.partner = characterize_site(land, *p);
    r.outer = characterize_site(land, *out);
    r.s_z = std::abs(c->z() - p->z());
    r.barrier = barrier_between(land, *c, *p);
    for (int k = 1; k <= outer_count; ++k) {
        Vec3 g = *out;
        g.z() += k * o.period;
        if (auto s = locate_site(land, g, 10e-6, &why)) r.outer_sites.push_back(characterize_site(land, *s));
    }
    return r;
}

// ---------------------------------------------------------------------------
// static array

struct StaticScanOptions {
    double pitch = 40e-6;
    double q_target = 0.4;
    double omega = angular(30e6);
    int rails = 15;
    double depth_spacing = 0.5e-6;
    int threads = 1;
};

/// Ion height, drive amplitude for q_target and escape depth of the RF null
/// nearest the array centre for each RF rail width. Axis a is w_RF.
inline ScanResult static_array_scan(const IonSpecies& species, const std::vector<double>& widths,
                                    const StaticScanOptions& o = {}) {
    species.validate();
    if (!(o.pitch > 0.0)) throw std::invalid_argument("pitch must be positive");
    for (double w : widths)
        if (!(w > 0.0 && w < o.pitch)) throw std::invalid_argument("every w_RF must lie in (0, s_x)");
    ScanResult res;
    res.kind = "static-array";
    res.axis_a = "w_rf_m";
    res.a_values = widths;
    res.b_values = {0.0};
    res.points.resize(widths.size());
    parallel_for(widths.size(), o.threads, [&](std::size_t k) {
        ScanPoint& p = res.points[k];
        p.a = widths[k];
        p.b = 0.0;
        try {
            LayoutParams lp = LayoutParams::static_array(o.pitch, p.a);
            lp.static_rf_rails = o.rails;
            const auto model = std::make_shared<const FieldModel>(build_layout(lp));
            const std::map<std::string, double> w{{"RF", 1.0}};
            DriveConfig d;
            d.rf_angular_frequency = o.omega;
            d.rf_amplitudes = w;
            const Landscape unit(model, d, species);
            const double x0 = o.rails % 2 ? 0.5 * o.pitch : 0.0;
            const Vec3 n = find_rf_null(unit, {x0, 0.5 * o.pitch, 0.0});
            p.u_rf = bisect_rf_amplitude(model, species, w, o.omega, o.q_target, n);
            d.rf_amplitudes = scaled_amplitudes(w, p.u_rf);
            const Landscape land(model, d, species);
            DepthOptions dopt;
            dopt.spacing = o.depth_spacing;
            dopt.lateral_pad = 0.5 * o.pitch;
            dopt.floor = std::min(dopt.floor, 0.1 * n.y());
            p.left.position = n;
            p.left.d = n.y();
            p.left.q = stability_q(land, n);
            p.left.U_0 = global_depth(land, n, dopt);
            p.converged = true;
        } catch (const std::exception& e) {
            p.error = e.what();
        }
    });
    return res;
}

// ---------------------------------------------------------------------------
// waveform

struct Waveform {
    std::vector<std::string> channels;
    std::vector<double> times;                // s
    std::vector<std::vector<double>> volts;   // per time, per channel
};

/// Channel voltages along a piecewise-linear path through an axial scan,
/// sampled uniformly in time and interpolated bilinearly between grid points.
inline Waveform path_to_waveform(const ScanResult& scan, const std::vector<std::pair<double, double>>& path,
                                 double duration, int samples) {
    if (scan.kind != "axial") throw std::invalid_argument("waveforms need an axial scan");
    if (path.empty()) throw std::invalid_argument("path is empty");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
    if (samples < 2) throw std::invalid_argument("need at least two samples");
    const auto& za = scan.a_values;
    const auto& zb = scan.b_values;
    auto locate = [](const std::vector<double>& g, double v, const char* axis) {
        const double tol = 1e-12 + 1e-9 * std::abs(g.back() - g.front());
        if (v < g.front() - tol || v > g.back() + tol) {
            std::ostringstream os;
            os << "path leaves the scanned region along " << axis << " at " << v / um << " um";
            throw std::invalid_argument(os.str());
        }
        if (g.size() == 1) return std::pair<std::size_t, double>{0, 0.0};
        std::size_t i = std::size_t(std::upper_bound(g.begin(), g.end(), v) - g.begin());
        i = std::clamp<std::size_t>(i, 1, g.size() - 1) - 1;
        return std::pair<std::size_t, double>{i, std::clamp((v - g[i]) / (g[i + 1] - g[i]), 0.0, 1.0)};
    };
    // cumulative path length parametrises time
    std::vector<double> s(path.size(), 0.0);
    for (std::size_t i = 1; i < path.size(); ++i)
        s[i] = s[i - 1] + std::hypot(path[i].first - path[i - 1].first, path[i].second - path[i - 1].second);
    Waveform w;
    w.channels = scan.channels;
    const std::size_t nc = scan.channels.size();
    for (int k = 0; k < samples; ++k) {
        const double f = double(k) / (samples - 1);
        double a = path.front().first, b = path.front().second;
        if (s.back() > 0.0) {
            const double target = f * s.back();
            std::size_t i = std::size_t(std::lower_bound(s.begin(), s.end(), target) - s.begin());
            i = std::clamp<std::size_t>(i, 1, s.size() - 1);
            const double seg = s[i] - s[i - 1];
            const double t = seg > 0.0 ? (target - s[i - 1]) / seg : 0.0;
            a = path[i - 1].first + t * (path[i].first - path[i - 1].first);
            b = path[i - 1].second + t * (path[i].second - path[i - 1].second);
        }
        const auto [i, ta] = locate(za, a, "z_l");
        const auto [j, tb] = locate(zb, b, "z_r");
        const std::size_t i1 = std::min(i + 1, za.size() - 1), j1 = std::min(j + 1, zb.size() - 1);
        std::vector<double> v(nc, 0.0);
        const std::pair<std::size_t, std::size_t> corner[4] = {{i, j}, {i1, j}, {i, j1}, {i1, j1}};
        const double wt[4] = {(1 - ta) * (1 - tb), ta * (1 - tb), (1 - ta) * tb, ta * tb};
        for (int c = 0; c < 4; ++c) {
            if (wt[c] == 0.0) continue;
            const ScanPoint& p = scan.at(corner[c].first, corner[c].second);
            if (!p.converged || p.voltages.size() != nc) {
                std::ostringstream os;
                os << "path crosses a failed scan point at (" << p.a / um << ", " << p.b / um << ") um";
                throw NumericalError(os.str());
            }
            for (std::size_t q = 0; q < nc; ++q) v[q] += wt[c] * p.voltages[q];
        }
        w.times.push_back(f * duration);
        w.volts.push_back(std::move(v));
    }
    return w;
}

}  // namespace trapsim
