#pragma once

// End-to-end site reports for the twin trap and the lattice array: RF drive,
// RF nulls, DC voltage solve, site search, characterization, barriers and
// depths. Every stage rethrows failures prefixed with its name.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trapsim/shuttle.hpp"

namespace trapsim {

enum class LayoutFamily { Twin, Array, Static };

inline LayoutFamily detect_family(const TrapLayout& layout) {
    if (layout.has_group("RFi") && layout.has_group("RFo")) return LayoutFamily::Twin;
    if (layout.has_group("RFe") && layout.has_group("RFo")) return LayoutFamily::Array;
    if (layout.has_group("RF")) return LayoutFamily::Static;
    throw std::invalid_argument("layout has no recognised RF groups (RFi/RFo, RFe/RFo or RF)");
}

inline const char* to_string(LayoutFamily f) {
    switch (f) {
        case LayoutFamily::Twin: return "twin";
        case LayoutFamily::Array: return "array";
        case LayoutFamily::Static: return "static";
    }
    return "?";
}

template <class F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(name + ": " + e.what());
    } catch (const std::domain_error& e) {
        throw std::domain_error(name + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(name + ": " + e.what());
    }
}

/// RF nulls in the x-y plane at height z: local minima of |E_rf|^2 on a
/// coarse grid, refined and de-duplicated, sorted by x.
inline std::vector<Vec3> rf_nulls_in_plane(const Landscape& land, double x_lo, double x_hi, double y_lo, double y_hi,
                                           double z, double step) {
    const Landscape rf = land.rf_only();
    const int nx = std::max(3, int((x_hi - x_lo) / step) + 1), ny = std::max(3, int((y_hi - y_lo) / step) + 1);
    auto px = [&](int i) { return x_lo + (x_hi - x_lo) * i / (nx - 1); };
    auto py = [&](int j) { return y_lo + (y_hi - y_lo) * j / (ny - 1); };
    std::vector<double> u(std::size_t(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) u[std::size_t(j) * nx + i] = rf.rf_field({px(i), py(j), z}).squaredNorm();
    const double umax = *std::max_element(u.begin(), u.end());
    std::vector<Vec3> out;
    for (int j = 1; j + 1 < ny; ++j)
        for (int i = 1; i + 1 < nx; ++i) {
            const double c = u[std::size_t(j) * nx + i];
            bool is_min = true;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if ((di || dj) && u[std::size_t(j + dj) * nx + i + di] < c) is_min = false;
            if (!is_min) continue;
            Vec3 n;
            try {
                n = find_rf_null(rf, {px(i), py(j), z});
            } catch (const NumericalError&) {
                continue;
            }
            if (!land.in_domain(n) || rf.rf_field(n).squaredNorm() > 1e-8 * umax) continue;
            if (std::none_of(out.begin(), out.end(), [&](const Vec3& o) { return (o - n).norm() < 1e-6; })) out.push_back(n);
        }
    std::sort(out.begin(), out.end(), [](const Vec3& a, const Vec3& b) { return a.x() < b.x(); });
    return out;
}

/// The two nulls flanking the rail of `group` closest to x = 0 (ties go to
/// the rail at positive x).
inline std::pair<Vec3, Vec3> nulls_flanking(const TrapLayout& layout, const std::string& group,
                                            const std::vector<Vec3>& nulls) {
    std::optional<double> best;
    for (const auto& e : layout.electrodes) {
        if (e.group != group) continue;
        double x0 = 1e300, x1 = -1e300;
        for (const auto& p : e.polygons)
            for (const auto& v : p) {
                x0 = std::min(x0, v.x);
                x1 = std::max(x1, v.x);
            }
        const double c = 0.5 * (x0 + x1);
        if (!best || std::abs(c) < std::abs(*best) - 1e-9 || (std::abs(std::abs(c) - std::abs(*best)) <= 1e-9 && c > *best))
            best = c;
    }
    if (!best) throw std::invalid_argument("no electrodes in group '" + group + "'");
    const Vec3* l = nullptr;
    const Vec3* r = nullptr;
    for (const auto& n : nulls) {
        if (n.x() < *best && (!l || n.x() > l->x())) l = &n;
        if (n.x() > *best && (!r || n.x() < r->x())) r = &n;
    }
    if (!l || !r) throw NumericalError("could not find RF nulls on both sides of rail group '" + group + "'");
    return {*l, *r};
}

/// Nulls nearest x = 0 on either side.
inline std::pair<Vec3, Vec3> central_null_pair(const std::vector<Vec3>& nulls) {
    const Vec3* l = nullptr;
    const Vec3* r = nullptr;
    for (const auto& n : nulls) {
        if (n.x() < 0.0 && (!l || n.x() > l->x())) l = &n;
        if (n.x() > 0.0 && (!r || n.x() < r->x())) r = &n;
    }
    if (!l || !r) throw NumericalError("no RF null pair straddling x = 0");
    return {*l, *r};
}

struct RfSetup {
    DriveConfig drive;
    std::vector<Vec3> nulls;
    Vec3 left = Vec3::Zero(), right = Vec3::Zero();
};

/// Equal amplitudes on `weights` at `omega`, scaled for q_target at the
/// central left null; nulls are searched in the x-y plane at height z.
inline RfSetup rf_setup(std::shared_ptr<const FieldModel> model, const IonSpecies& sp,
                        const std::map<std::string, double>& weights, double omega, double q_target, double z = 0.0) {
    RfSetup s;
    s.drive.rf_angular_frequency = omega;
    s.drive.rf_amplitudes = weights;
    const Landscape unit(model, s.drive, sp);
    s.nulls = rf_nulls_in_plane(unit, -300e-6, 300e-6, 20e-6, 300e-6, z, 4e-6);
    std::tie(s.left, s.right) = central_null_pair(s.nulls);
    s.drive.rf_amplitudes = scaled_amplitudes(weights, bisect_rf_amplitude(model, sp, weights, omega, q_target, s.left));
    return s;
}

struct ReportOptions {
    std::string config = "default";          // default | reduced-rf | interaction-zone
    IonSpecies species = IonSpecies::calcium40();
    std::optional<double> rf_frequency;      // rad/s; 23 MHz twin, 30 MHz array
    double u_max = 400.0;                    // V
    double q_target = 0.4;
    double omega_z = angular(1.0e6);
    double s_x = 40e-6;                      // reduced-rf target
    double s_z = 50e-6;                      // interaction-zone target
    std::string attenuate;                   // reduced-rf group; RFi twin, RFe array
    bool drive_rule = true;                  // evaluate the frequency-selection rule
    bool find_all_sites = true;
    int threads = 1;
};

struct SiteReport {
    LayoutFamily family = LayoutFamily::Twin;
    std::string config;
    DriveConfig drive;
    std::optional<RfDriveChoice> rule;
    ConstraintSystem system;
    std::vector<TrapSite> sites;
    Vec3 reference = Vec3::Zero();                             // site the summary and grid refer to
    std::vector<std::pair<std::string, double>> summary;       // keys carry units
};

namespace detail {

inline double family_frequency(LayoutFamily f) { return angular(f == LayoutFamily::Array ? 30e6 : 23e6); }
inline double family_site_z(LayoutFamily f, const TrapLayout& layout) {
    if (f != LayoutFamily::Array) return 0.0;
    // centre of the first segment phase-1 well below z = 0: 1.5 segment lengths
    for (const auto& e : layout.electrodes)
        if (e.group == "DC1" && !e.polygons.empty()) {
            double z0 = 1e300, z1 = -1e300;
            for (const auto& v : e.polygons.front()) {
                z0 = std::min(z0, v.z);
                z1 = std::max(z1, v.z);
            }
            return -1.5 * (z1 - z0);
        }
    throw std::invalid_argument("array layout has no DC1 segments");
}

inline SearchRegion family_region(LayoutFamily f, const TrapLayout& layout, const std::vector<Vec3>& nulls, double d) {
    const double xl = nulls.front().x(), xr = nulls.back().x();
    if (f == LayoutFamily::Array) {
        const BoundingBox b = layout.bounds();
        return {{b.x0, 0.6 * d, -1.6e-3}, {b.x1, 1.5 * d, 1.6e-3}};
    }
    return {{xl - 100e-6, 0.5 * d, -1.75e-3}, {xr + 100e-6, 1.65 * d, 1.75e-3}};
}

inline double family_seed(LayoutFamily f) { return f == LayoutFamily::Array ? 15e-6 : 10e-6; }

inline Landscape rf_landscape(std::shared_ptr<const FieldModel> model, const IonSpecies& sp,
                              const std::map<std::string, double>& amps, double omega) {
    DriveConfig d;
    d.rf_angular_frequency = omega;
    d.rf_amplitudes = amps;
    return Landscape(std::move(model), d, sp);
}

// Site nearest p, or nullptr.
inline const TrapSite* nearest(const std::vector<TrapSite>& s, const Vec3& p, double within) {
    const TrapSite* b = nullptr;
    for (const auto& t : s)
        if ((t.position - p).norm() < within && (!b || (t.position - p).norm() < (b->position - p).norm())) b = &t;
    return b;
}

// Distinct values with a clustering tolerance.
inline std::vector<double> clusters(std::vector<double> v, double tol) {
    std::sort(v.begin(), v.end());
    std::vector<double> c;
    for (double x : v)
        if (c.empty() || x - c.back() > tol) c.push_back(x);
    return c;
}

inline void put(SiteReport& r, const std::string& k, double v) { r.summary.emplace_back(k, v); }

inline void put_site(SiteReport& r, const std::string& prefix, const TrapSite& s) {
    put(r, prefix + "x_um", s.position.x() / um);
    put(r, prefix + "d_um", s.d / um);
    put(r, prefix + "z_um", s.position.z() / um);
    put(r, prefix + "f_z_MHz", to_hz(s.secular[0]) / MHz);
    put(r, prefix + "f_r1_MHz", to_hz(s.secular[1]) / MHz);
    put(r, prefix + "f_r2_MHz", to_hz(s.secular[2]) / MHz);
    put(r, prefix + "theta_r_deg", s.theta_r);
    put(r, prefix + "theta_z_deg", s.theta_z);
    put(r, prefix + "q", s.q);
}

// Frequency-selection rule: the frequency gives q_target at U_max with the
// rail attenuated for s_x, then the default amplitude gives q_target.
inline RfDriveChoice drive_rule(std::shared_ptr<const FieldModel> model, const ReportOptions& o, const std::string& group,
                                const std::map<std::string, double>& weights, const std::vector<Vec3>& nulls,
                                const Vec3& reference) {
    SpacingRequest rq;
    rq.weights = weights;
    rq.attenuated_group = group;
    std::tie(rq.left_guess, rq.right_guess) = nulls_flanking(model->layout(), group, nulls);
    rq.target = o.s_x;
    const SpacingResult s = tune_null_spacing(model, o.species, rq);
    RfDriveRequest dr;
    dr.u_max = o.u_max;
    dr.q_target = o.q_target;
    dr.default_weights = weights;
    dr.reduced_weights = weights;
    dr.reduced_weights[group] = s.ratio;
    dr.default_null_guess = reference;
    dr.reduced_null_guess = s.left;
    return choose_rf_drive(model, o.species, dr);
}

}  // namespace detail

/// Runs the named configuration on a twin-trap or lattice-array layout.
inline SiteReport run_report(std::shared_ptr<const FieldModel> model, const ReportOptions& o) {
    const TrapLayout& layout = model->layout();
    SiteReport rep;
    rep.config = o.config;
    rep.family = run_stage("layout", [&] {
        const auto f = detect_family(layout);
        if (f == LayoutFamily::Static) throw std::invalid_argument("site reports need a twin-trap or lattice-array layout");
        if (o.config != "default" && o.config != "reduced-rf" && o.config != "interaction-zone")
            throw std::invalid_argument("unknown config '" + o.config + "' (default, reduced-rf, interaction-zone)");
        if (o.config == "interaction-zone" && f != LayoutFamily::Twin)
            throw std::invalid_argument("the interaction-zone config needs a twin-trap layout");
        return f;
    });
    const bool twin = rep.family == LayoutFamily::Twin;
    const std::map<std::string, double> weights =
        twin ? std::map<std::string, double>{{"RFi", 1.0}, {"RFo", 1.0}} : std::map<std::string, double>{{"RFe", 1.0}, {"RFo", 1.0}};
    const std::string att = o.attenuate.empty() ? (twin ? "RFi" : "RFe") : o.attenuate;
    if (!weights.count(att)) throw std::invalid_argument("attenuated group '" + att + "' is not an RF group of this layout");
    const double omega = o.rf_frequency.value_or(detail::family_frequency(rep.family));
    const double site_z = detail::family_site_z(rep.family, layout);

    // RF nulls at unit drive and the reference pair around x = 0
    const auto nulls = run_stage("rf-null", [&] {
        const Landscape unit = detail::rf_landscape(model, o.species, weights, omega);
        auto n = rf_nulls_in_plane(unit, -300e-6, 300e-6, 20e-6, 300e-6, site_z, 4e-6);
        if (n.size() < 2) throw NumericalError("fewer than two RF nulls found near the centre");
        return n;
    });
    const auto [null_l, null_r] = run_stage("rf-null", [&] { return central_null_pair(nulls); });

    if (o.drive_rule)
        rep.rule = run_stage("rf-drive", [&] { return detail::drive_rule(model, o, att, weights, nulls, null_l); });

    const ElectrodeGrouping grouping = twin ? (o.config == "interaction-zone" ? ElectrodeGrouping::twin_interaction()
                                                                             : ElectrodeGrouping::twin_periodic())
                                            : ElectrodeGrouping::lattice_array();
    const Gauge gauge = twin ? Gauge::MinimumNorm : Gauge::ZeroSum;
    std::vector<SiteTarget> targets;
    Vec3 pair_l = null_l, pair_r = null_r;

    if (o.config == "reduced-rf") {
        const RfSpacingResult rs = run_stage("rf-spacing", [&] {
            SpacingRequest rq;
            rq.weights = weights;
            rq.attenuated_group = att;
            std::tie(rq.left_guess, rq.right_guess) = nulls_flanking(layout, att, nulls);
            rq.target = o.s_x;
            RfSpacingOptions so;
            so.u_max = o.u_max;
            so.q_target = o.q_target;
            so.omega = omega;
            return tune_rf_spacing(model, o.species, rq, so);
        });
        rep.drive = rs.drive;
        pair_l = rs.spacing.left;
        pair_r = rs.spacing.right;
        detail::put(rep, "attenuation", rs.attenuation);
        detail::put(rep, "u_rf_outer_V", rs.u_outer);
        detail::put(rep, "u_rf_inner_V", rs.u_inner);
        detail::put(rep, "null_spacing_um", rs.spacing.spacing / um);
    } else {
        run_stage("rf-drive", [&] {
            const double u = bisect_rf_amplitude(model, o.species, weights, omega, o.q_target, null_l);
            rep.drive.rf_angular_frequency = omega;
            rep.drive.rf_amplitudes = scaled_amplitudes(weights, u);
            return 0;
        });
    }
    const Landscape rf(model, rep.drive, o.species);

    std::optional<InteractionZoneResult> iz;
    if (o.config == "interaction-zone") {
        iz = run_stage("voltage-solve", [&] {
            InteractionZoneOptions io;
            io.s_z = o.s_z;
            io.omega_outer = o.omega_z;
            return interaction_zone_config(rf, grouping, find_rf_null(rf, {null_l.x(), null_l.y(), 0.5 * o.s_z}), io);
        });
        rep.system = iz->system;
        rep.drive = iz->drive;
    } else {
        rep.system = run_stage("voltage-solve", [&] {
            if (twin)
                targets = {{pair_l, Vec3::Zero(), o.omega_z}, {pair_r, Vec3::Zero(), o.omega_z}};
            else
                targets = {{pair_l, Vec3::Zero(), o.omega_z}};
            return solve_voltages(*model, grouping, o.species, targets, gauge);
        });
        rep.drive.dc_voltages = grouping.expand(rep.system.x);
    }
    const Landscape land(model, rep.drive, o.species);

    // site search and characterization
    rep.sites = run_stage("site-search", [&] {
        std::vector<TrapSite> s;
        if (o.find_all_sites) {
            s = find_sites(land, detail::family_region(rep.family, layout, nulls, null_l.y()), detail::family_seed(rep.family),
                           o.threads);
        } else {
            for (const Vec3& g : {pair_l, pair_r}) {
                std::string why;
                if (auto p = locate_site(land, g, 10e-6, &why)) s.push_back(TrapSite{*p});
            }
            sort_sites(s);
        }
        if (s.empty()) throw NumericalError("no trapping sites found");
        return s;
    });
    run_stage("characterize", [&] {
        std::vector<std::string> err(rep.sites.size());
        parallel_for(rep.sites.size(), o.threads, [&](std::size_t i) {
            try {
                rep.sites[i] = characterize_site(land, rep.sites[i].position);
            } catch (const std::exception& e) {
                err[i] = e.what();
            }
        });
        for (const auto& e : err)
            if (!e.empty()) throw NumericalError(e);
        return 0;
    });

    const Vec3 ref_target = iz ? iz->central.position : pair_l;
    const TrapSite* found = detail::nearest(rep.sites, ref_target, 10e-6);
    if (!found) throw NumericalError("site-search: no site at the reference position");
    TrapSite* ref = &rep.sites[std::size_t(found - rep.sites.data())];
    rep.reference = ref->position;
    const TrapSite* partner = iz ? detail::nearest(rep.sites, iz->partner.position, 10e-6)
                                 : detail::nearest(rep.sites, {pair_r.x(), ref->position.y(), ref->position.z()}, 20e-6);

    // barriers and depths
    const double period = [&] {
        if (twin) return 306e-6;
        return -2.0 * site_z;  // 3 segment lengths
    }();
    run_stage("depths", [&] {
        if (twin && o.config == "default") {
            // every site: lateral partner, axial neighbours, watershed depth
            parallel_for(rep.sites.size(), o.threads, [&](std::size_t i) {
                TrapSite& s = rep.sites[i];
                const double mid = 0.5 * (null_l.x() + null_r.x());
                const double px = 2.0 * mid - s.position.x();
                if (const TrapSite* p = detail::nearest(rep.sites, {px, s.position.y(), s.position.z()}, 0.5 * period))
                    s.U_b = barrier_between(land, s.position, p->position);
                for (int side : {-1, 1})
                    if (const TrapSite* n = detail::nearest(
                            rep.sites, {s.position.x(), s.position.y(), s.position.z() + side * period}, 0.3 * period))
                        (side < 0 ? s.U_mw_l : s.U_mw_r) = barrier_between(land, s.position, n->position);
                s.U_0 = global_depth(land, s.position);
            });
            return 0;
        }
        TrapSite& s = *ref;
        if (partner) s.U_b = barrier_between(land, s.position, partner->position);
        if (!iz) {
            for (int side : {-1, 1}) {
                Vec3 g = s.position;
                g.z() += side * period;
                std::string why;
                if (auto n = locate_site(land, g, 0.2 * period, &why))
                    (side < 0 ? s.U_mw_l : s.U_mw_r) = barrier_between(land, s.position, *n);
            }
        }
        s.U_0 = twin ? global_depth(land, s.position) : plane_depth(land, s.position);
        return 0;
    });

    // summary
    const TrapSite& c = *ref;
    detail::put(rep, "site_count", double(rep.sites.size()));
    detail::put(rep, "rf_frequency_MHz", to_hz(rep.drive.rf_angular_frequency) / MHz);
    for (const auto& [g, v] : rep.drive.rf_amplitudes) detail::put(rep, "u_rf_" + g + "_V", v);
    if (rep.rule) {
        detail::put(rep, "rule_rf_frequency_MHz", to_hz(rep.rule->drive.rf_angular_frequency) / MHz);
        detail::put(rep, "rule_u_rf_V", rep.rule->u_default);
    }
    detail::put(rep, "max_abs_dc_V", rep.system.x.size() ? rep.system.x.cwiseAbs().maxCoeff() : 0.0);
    detail::put_site(rep, "", c);
    if (partner && !iz) detail::put(rep, "s_x_um", std::abs(partner->position.x() - c.position.x()) / um);
    detail::put(rep, "U_b_meV", c.U_b / meV);
    if (!iz) detail::put(rep, "U_mw_meV", std::fmin(c.U_mw_l, c.U_mw_r) / meV);
    detail::put(rep, "U_0_meV", c.U_0 / meV);

    if (o.config == "default") {
        // axial spacing to the next site in the same trap
        if (const TrapSite* n = detail::nearest(rep.sites, {c.position.x(), c.position.y(), c.position.z() + period},
                                                0.3 * period))
            detail::put(rep, "s_z_um", std::abs(n->position.z() - c.position.z()) / um);
        if (twin) {
            double bmax = 0.0, emax = 0.0;
            double ub = 1e300, umw = 1e300, u0 = 1e300;
            for (const auto& s : rep.sites) {
                if (s.beta > bmax) {
                    bmax = s.beta;
                    emax = s.e_parallel;
                }
                ub = std::fmin(ub, s.U_b);
                umw = std::fmin(umw, std::fmin(s.U_mw_l, s.U_mw_r));
                u0 = std::fmin(u0, s.U_0);
            }
            detail::put(rep, "max_beta", bmax);
            detail::put(rep, "max_beta_E_parallel_V_per_m", emax);
            detail::put(rep, "min_U_b_meV", ub / meV);
            detail::put(rep, "min_U_mw_meV", umw / meV);
            detail::put(rep, "min_U_0_meV", u0 / meV);
        } else {
            // inner register: drop two columns at each side and one row at each end
            std::vector<double> xs, zs;
            for (const auto& s : rep.sites) {
                xs.push_back(s.position.x());
                zs.push_back(s.position.z());
            }
            const auto cx = detail::clusters(xs, 10e-6), cz = detail::clusters(zs, 10e-6);
            detail::put(rep, "columns", double(cx.size()));
            detail::put(rep, "rows", double(cz.size()));
            if (cx.size() > 4 && cz.size() > 2) {
                const double x0 = cx[1] + 10e-6, x1 = cx[cx.size() - 2] - 10e-6;
                const double z0 = cz.front() + 10e-6, z1 = cz.back() - 10e-6;
                double fl = 1e300, fh = 0.0, dl = 1e300, dh = 0.0;
                int n = 0;
                for (const auto& s : rep.sites) {
                    const auto& p = s.position;
                    if (p.x() < x0 || p.x() > x1 || p.z() < z0 || p.z() > z1) continue;
                    ++n;
                    fl = std::min(fl, s.secular[0]);
                    fh = std::max(fh, s.secular[0]);
                    dl = std::min(dl, s.d);
                    dh = std::max(dh, s.d);
                }
                detail::put(rep, "inner_site_count", n);
                if (n > 0) {
                    detail::put(rep, "inner_f_z_spread_kHz", to_hz(fh - fl) / kHz);
                    detail::put(rep, "inner_d_spread_um", (dh - dl) / um);
                }
            }
        }
    }
    if (o.config == "reduced-rf" && partner) {
        const auto fit = run_stage("double-well-fit", [&] {
            const PathProfile p = minimal_path(land, c.position, partner->position);
            const Vec3 mid = 0.5 * (c.position + partner->position);
            const Vec3 e = (partner->position - c.position).normalized();
            std::vector<std::pair<double, double>> smp;
            for (std::size_t i = 0; i < p.points.size(); ++i) smp.push_back({(p.points[i] - mid).dot(e), p.energy[i]});
            return fit_double_well(smp, o.species.mass);
        });
        detail::put(rep, "U_b_fit_meV", fit.barrier / meV);
        detail::put(rep, "fit_s_um", fit.s / um);
        detail::put(rep, "fit_f_MHz", to_hz(fit.omega) / MHz);
    }
    if (iz) {
        detail::put(rep, "s_z_um", iz->s_z / um);
        detail::put(rep, "axial_barrier_meV", iz->barrier / meV);
        detail::put_site(rep, "outer_", iz->outer);
    }
    return rep;
}

}  // namespace trapsim
