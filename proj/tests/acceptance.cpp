// Acceptance run: one PASS/FAIL line per criterion, followed by the measured
// quantities. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "trapsim/noise_coupling.hpp"
#include "trapsim/pipeline.hpp"

using namespace trapsim;

namespace {

struct Check {
    std::string what;
    double value, target, tol;  // tol: relative if rel, else absolute
    bool rel;
    bool pass;
};

struct Criterion {
    std::vector<Check> checks;
    std::vector<std::string> notes;

    // |value - target| <= tol * |target|
    void rel(const std::string& w, double v, double target, double tol) {
        checks.push_back({w, v, target, tol, true, std::abs(v - target) <= tol * std::abs(target)});
    }
    void abs(const std::string& w, double v, double target, double tol) {
        checks.push_back({w, v, target, tol, false, std::abs(v - target) <= tol});
    }
    void at_least(const std::string& w, double v, double bound) {
        checks.push_back({w + " >=", v, bound, 0.0, false, v >= bound});
    }
    void at_most(const std::string& w, double v, double bound) {
        checks.push_back({w + " <=", v, bound, 0.0, false, v <= bound});
    }
    void truth(const std::string& w, bool ok) { checks.push_back({w, ok ? 1.0 : 0.0, 1.0, 0.0, false, ok}); }
    void note(const std::string& s) { notes.push_back(s); }
};

double summary(const SiteReport& r, const std::string& key) {
    for (const auto& [k, v] : r.summary)
        if (k == key) return v;
    throw std::runtime_error("report has no '" + key + "'");
}

int failures = 0;

void run(int id, const std::string& title, double max_seconds, const std::function<void(Criterion&)>& body) {
    Criterion c;
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
        body(c);
    } catch (const std::exception& e) {
        error = e.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = error.empty() && !c.checks.empty();
    for (const auto& k : c.checks) ok = ok && k.pass;
    const bool in_time = max_seconds <= 0.0 || dt <= max_seconds;
    ok = ok && in_time;
    if (!ok) ++failures;
    std::printf("[%s] criterion %d: %s (%.3f s)\n", ok ? "PASS" : "FAIL", id, title.c_str(), dt);
    for (const auto& k : c.checks) {
        if (k.what.size() > 3 && (k.what.ends_with(">=") || k.what.ends_with("<=")))
            std::printf("    %-4s %s %.6g (bound %.6g)\n", k.pass ? "ok" : "MISS", k.what.c_str(), k.value, k.target);
        else if (k.rel)
            std::printf("    %-4s %s = %.6g (target %.6g +- %.3g%%, off by %+.2f%%)\n", k.pass ? "ok" : "MISS", k.what.c_str(),
                        k.value, k.target, 100 * k.tol, 100 * (k.value / k.target - 1));
        else
            std::printf("    %-4s %s = %.6g (target %.6g +- %.3g)\n", k.pass ? "ok" : "MISS", k.what.c_str(), k.value,
                        k.target, k.tol);
    }
    for (const auto& n : c.notes) std::printf("    note %s\n", n.c_str());
    if (!error.empty()) std::printf("    error: %s\n", error.c_str());
    if (!in_time) std::printf("    MISS runtime %.3f s exceeds %.3g s\n", dt, max_seconds);
    std::fflush(stdout);
}

const double MHz_ = 1e6;

std::shared_ptr<const FieldModel> twin_model() {
    static const auto m = std::make_shared<const FieldModel>(build_layout(LayoutParams::twin_trap()));
    return m;
}
std::shared_ptr<const FieldModel> array_model() {
    static const auto m = std::make_shared<const FieldModel>(build_layout(LayoutParams::lattice_array()));
    return m;
}

}  // namespace

int main() {
    const IonSpecies ca;

    run(1, "motional coupling rate", 1e-3, [&](Criterion& c) {
        c.rel("Omega_c/2pi x, 1 MHz, 40 um [Hz]", to_hz(coupling_rate(ca, angular(1e6), 40e-6, CouplingAxis::X)), 1.4e3, 0.03);
        c.rel("Omega_c/2pi z, 0.91 MHz, 50 um [Hz]", to_hz(coupling_rate(ca, angular(0.91e6), 50e-6, CouplingAxis::Z)), 1.5e3,
              0.03);
    });

    run(2, "Johnson noise and RF pickup chain", 1e-3, [&](Criterion& c) {
        CircuitModel k;
        k.r_lead = lead_resistance(2.58e-9, 3.56e-3, 20e-6, 1000e-9);
        const JohnsonHeating h = johnson_heating(ca, k, 2.19e-3, angular(1e6));
        c.rel("R_lead [ohm]", k.r_lead, 0.46, 0.02);
        c.rel("S_E [V^2/m^2/Hz]", h.s_e, 1.06e-16, 0.02);
        c.rel("Gamma_h [quanta/s]", h.rate, 0.015, 0.03);
        c.rel("|eps_p|", std::abs(rf_pickup(k, angular(25e6))), 7.2e-7, 0.02);
    });

    ReportOptions base;
    base.threads = default_threads();

    run(3, "default twin-trap configuration", 300, [&](Criterion& c) {
        ReportOptions o = base;
        const SiteReport r = run_report(twin_model(), o);
        c.abs("site count", double(r.sites.size()), 18, 0);
        c.abs("s_x [um]", summary(r, "s_x_um"), 105, 5);
        c.abs("s_z [um]", summary(r, "s_z_um"), 306, 3);
        c.abs("d [um]", summary(r, "d_um"), 121, 6);
        c.rel("omega_z/2pi [MHz]", summary(r, "f_z_MHz"), 1.0, 0.05);
        c.rel("omega_r1/2pi [MHz]", summary(r, "f_r1_MHz"), 3.1, 0.05);
        c.rel("omega_r2/2pi [MHz]", summary(r, "f_r2_MHz"), 3.3, 0.05);
        c.abs("theta_r [deg]", summary(r, "theta_r_deg"), 41.2, 3);
        c.rel("U_b [meV]", summary(r, "U_b_meV"), 48, 0.10);
        c.rel("U_mw [meV]", summary(r, "U_mw_meV"), 59, 0.10);
        c.rel("U_0 [meV]", summary(r, "U_0_meV"), 102, 0.10);
        c.rel("outermost beta", summary(r, "max_beta"), 0.73, 0.15);
        c.note("smallest U_0 over all 18 sites " + std::to_string(summary(r, "min_U_0_meV")) + " meV");
    });

    run(4, "RF drive selection", 0, [&](Criterion& c) {
        ReportOptions o = base;
        o.find_all_sites = false;
        const SiteReport t = run_report(twin_model(), o);
        c.rel("twin Omega_RF/2pi [MHz]", summary(t, "rule_rf_frequency_MHz"), 23, 0.10);
        c.rel("twin U_RF [V]", summary(t, "rule_u_rf_V"), 142, 0.10);
        const SiteReport a = run_report(array_model(), o);
        c.rel("array Omega_RF/2pi [MHz]", summary(a, "rule_rf_frequency_MHz"), 30, 0.10);
        c.rel("array U_RF [V]", summary(a, "rule_u_rf_V"), 172, 0.10);
        c.note("array U_RF for q = 0.4 at a fixed 30 MHz drive: " + std::to_string(summary(a, "u_rf_RFe_V")) + " V");
    });

    run(5, "reduced-RF twin configuration", 300, [&](Criterion& c) {
        ReportOptions o = base;
        o.config = "reduced-rf";
        o.drive_rule = false;
        const SiteReport r = run_report(twin_model(), o);
        c.abs("s_x [um]", summary(r, "s_x_um"), 40, 0.5);
        c.rel("U_RF inner [V]", summary(r, "u_rf_inner_V"), 296, 0.10);
        c.rel("U_RF outer [V]", summary(r, "u_rf_outer_V"), 372, 0.10);
        c.rel("double-well barrier [meV]", summary(r, "U_b_meV"), 8.5, 0.15);
        c.rel("fitted barrier vs direct [meV]", summary(r, "U_b_fit_meV"), summary(r, "U_b_meV"), 0.10);
        c.rel("U_0 [meV]", summary(r, "U_0_meV"), 702, 0.10);
    });

    run(6, "interaction zone", 0, [&](Criterion& c) {
        ReportOptions o = base;
        o.config = "interaction-zone";
        o.drive_rule = false;
        const SiteReport r = run_report(twin_model(), o);
        c.abs("s_z [um]", summary(r, "s_z_um"), 50, 1);
        c.rel("omega_z/2pi [MHz]", summary(r, "f_z_MHz"), 0.91, 0.05);
        c.rel("axial barrier [meV]", summary(r, "axial_barrier_meV"), 1.1, 0.20);
        c.abs("theta_z [deg]", summary(r, "theta_z_deg"), 8.0, 2.0);
        c.rel("max |V_DC| [V]", summary(r, "max_abs_dc_V"), 34, 0.20);
    });

    run(7, "independent axial translation, 17 x 17", 1800, [&](Criterion& c) {
        const RfSetup s = rf_setup(twin_model(), ca, {{"RFi", 1.0}, {"RFo", 1.0}}, angular(23e6), 0.4);
        AxialScanOptions o;
        o.n = 17;
        o.threads = base.threads;
        const ScanResult scan =
            scan_axial_translation(Landscape(twin_model(), s.drive, ca), ElectrodeGrouping::twin_periodic(), s.left, s.right, o);
        const double conv = double(scan.converged_count()) / double(scan.points.size());
        c.at_least("converged fraction", conv, 0.95);
        double fz_dev = 0.0, u0 = 1e300, ub = 1e300, umw = 1e300;
        double r_lo[2] = {1e300, 1e300}, r_hi[2] = {0, 0}, r_sum[2] = {0, 0};
        int n = 0;
        for (const auto& p : scan.points) {
            if (!p.converged) continue;
            for (const TrapSite* t : {&p.left, &p.right}) {
                fz_dev = std::max(fz_dev, std::abs(to_hz(t->secular[0]) / 1e6 - 1.0));
                for (int m = 0; m < 2; ++m) {
                    r_lo[m] = std::min(r_lo[m], t->secular[m + 1]);
                    r_hi[m] = std::max(r_hi[m], t->secular[m + 1]);
                    r_sum[m] += t->secular[m + 1];
                }
                ++n;
                u0 = std::min(u0, t->U_0);
                ub = std::min(ub, t->U_b);
                umw = std::min({umw, t->U_mw_l, t->U_mw_r});
            }
        }
        double spread = 0.0;
        for (int m = 0; m < 2; ++m) spread = std::max(spread, (r_hi[m] - r_lo[m]) / (r_sum[m] / n));
        c.at_most("max |omega_z/2pi - 1 MHz| / 1 MHz", fz_dev, 0.01);
        c.at_least("radial spread (max-min)/mean", spread, 0.05);
        c.at_most("radial spread (max-min)/mean", spread, 0.15);
        c.at_least("min U_0 [meV]", u0 / meV, 98);
        c.at_least("min U_b [meV]", ub / meV, 48);
        c.at_least("min U_mw [meV]", umw / meV, 48);
    });

    run(8, "10 x 10 lattice array", 900, [&](Criterion& c) {
        ReportOptions o = base;
        o.drive_rule = false;
        const SiteReport r = run_report(array_model(), o);
        c.rel("omega_r1/2pi [MHz]", summary(r, "f_r1_MHz"), 4.0, 0.05);
        c.rel("omega_r2/2pi [MHz]", summary(r, "f_r2_MHz"), 4.4, 0.05);
        c.rel("U_mw [meV]", summary(r, "U_mw_meV"), 45, 0.10);
        c.rel("U_b [meV]", summary(r, "U_b_meV"), 116, 0.10);
        c.rel("U_0 [meV]", summary(r, "U_0_meV"), 330, 0.10);
        c.abs("d [um]", summary(r, "d_um"), 102, 5);
        c.at_most("inner omega_z/2pi spread [kHz]", summary(r, "inner_f_z_spread_kHz"), 10);
        c.note(std::to_string(int(summary(r, "site_count"))) + " sites in " + std::to_string(int(summary(r, "columns"))) +
               " columns x " + std::to_string(int(summary(r, "rows"))) + " rows");

        const double z = detail::family_site_z(LayoutFamily::Array, array_model()->layout());
        DriveConfig unit;
        unit.rf_angular_frequency = angular(30e6);
        unit.rf_amplitudes = {{"RFe", 1.0}, {"RFo", 1.0}};
        const auto nulls = rf_nulls_in_plane(Landscape(array_model(), unit, ca), -300e-6, 300e-6, 20e-6, 300e-6, z, 4e-6);
        for (const auto& [group, target] : {std::pair<std::string, double>{"RFe", 59.4}, {"RFo", 41.4}}) {
            SpacingRequest rq;
            rq.weights = unit.rf_amplitudes;
            rq.attenuated_group = group;
            std::tie(rq.left_guess, rq.right_guess) = nulls_flanking(array_model()->layout(), group, nulls);
            const SpacingResult s = tune_null_spacing(array_model(), ca, rq);
            c.abs(group + " attenuation for s_x = 40 um [%]", 100 * (1 - s.ratio), target, 3);
        }
    });

    run(9, "static-array trade-off", 0, [&](Criterion& c) {
        StaticScanOptions o;
        o.threads = base.threads;
        std::vector<double> widths{1e-6, 2e-6};
        for (int k = 4; k <= 30; k += 2) widths.push_back(k * 1e-6);
        const ScanResult s = static_array_scan(ca, widths, o);
        double dmax = 0.0, umax = 0.0;
        for (const auto& p : s.points)
            if (p.converged) {
                dmax = std::max(dmax, p.left.d);
                umax = std::max(umax, p.left.U_0);
            }
        c.truth("all widths converged", s.converged_count() == s.points.size());
        c.rel("d_max [um]", dmax / 1e-6, 30, 0.15);
        c.rel("U_0,max [meV]", umax / meV, 6, 0.30);
        const auto& p = s.points;
        c.truth("U_RF rises over the three narrowest rails",
                p[0].u_rf > p[1].u_rf && p[1].u_rf > p[2].u_rf);
    });

    run(10, "property suites", 0, [&](Criterion& c) {
        // field basis: harmonic, additive, partition of unity
        const auto rect = [](double x0, double x1, double z0, double z1) {
            return rect_electrode("e", ElectrodeRole::DC, "e", x0, x1, z0, z1);
        };
        const Vec3 probes[] = {{3e-5, 7e-5, -2e-5}, {-1.2e-4, 4e-5, 5e-5}, {2e-6, 2e-4, 1e-4}};
        double harm = 0.0, add = 0.0, unity = 0.0;
        // superposition is exact for a common image-series truncation
        const ImageSeries k8 = ImageSeries::fixed(8);
        const ElectrodeBasis whole(rect(-1e-4, 2e-4, -3e-4, 1e-4), 1e-3, k8), a(rect(-1e-4, 5e-5, -3e-4, 1e-4), 1e-3, k8),
            b(rect(5e-5, 2e-4, -3e-4, 1e-4), 1e-3, k8);
        const double L = 1e3;
        const ElectrodeBasis q[4] = {{rect(0, L, 0, L), std::nullopt}, {rect(-L, 0, 0, L), std::nullopt},
                                     {rect(-L, 0, -L, 0), std::nullopt}, {rect(0, L, -L, 0), std::nullopt}};
        for (const Vec3& r : probes) {
            harm = std::max(harm, std::abs(whole.hessian(r).trace()) / whole.hessian(r).norm());
            add = std::max(add, std::abs(whole.potential(r) - a.potential(r) - b.potential(r)));
            double s = 0.0;
            for (const auto& e : q) s += e.potential(r);
            unity = std::max(unity, std::abs(s - 1.0));
        }
        c.at_most("basis |trace H| / |H|", harm, 1e-6);
        c.at_most("basis superposition error", add, 1e-12);
        c.at_most("basis partition-of-unity error", unity, 1e-6);

        // Newton vs grid on the default twin well
        const RfSetup s = rf_setup(twin_model(), ca, {{"RFi", 1.0}, {"RFo", 1.0}}, angular(23e6), 0.4);
        const auto g = ElectrodeGrouping::twin_periodic();
        const std::vector<SiteTarget> targets{{s.left + Vec3(0, 0, 30e-6), Vec3(40.0, -20.0, 0.0), angular(0.9e6)},
                                              {s.right, Vec3::Zero(), angular(1.1e6)}};
        const ConstraintSystem cs = solve_voltages(*twin_model(), g, ca, targets);
        double rt = 0.0;
        for (const auto& t : targets) {
            Vec3 grad = Vec3::Zero();
            double curv = 0.0;
            for (const auto& [grp, v] : g.expand(cs.x)) {
                grad += v * twin_model()->group_gradient(grp, t.position);
                curv += v * twin_model()->group_hessian(grp, t.position)(2, 2);
            }
            const double want = ca.mass * t.omega_z * t.omega_z / ca.charge;
            rt = std::max({rt, std::abs(curv - want) / want, (-grad - t.field).norm() / std::max(1.0, t.field.norm())});
        }
        c.at_most("voltage round trip relative error", rt, 1e-3);

        DriveConfig d = s.drive;
        d.dc_voltages = g.expand(cs.x);
        const Landscape land(twin_model(), d, ca);
        const MinimizeResult m = minimize(land, s.right + Vec3(3e-6, 2e-6, -4e-6));
        const double h = 0.25e-6;
        Vec3 best = m.point;
        double eb = land.energy(best);
        for (int i = -10; i <= 10; ++i)
            for (int j = -10; j <= 10; ++j)
                for (int k = -10; k <= 10; ++k) {
                    const Vec3 r = m.point + h * Vec3(i, j, k);
                    if (land.energy(r) < eb) {
                        eb = land.energy(r);
                        best = r;
                    }
                }
        c.at_most("Newton vs grid minimum distance [um]", (best - m.point).norm() / 1e-6, 1.5 * h / 1e-6);

        // detuning pattern, brute force
        const DetuningPattern p =
            detuning_pattern(10, 10, angular(1e6), angular(1e3), {5, 5 * std::sqrt(2.0), 10, 10 * std::sqrt(2.0)}, 10, 4);
        const PatternCheck pc = verify_pattern(p);
        c.truth("pattern pairs equal and suppressed orders detuned", pc.ok);
        c.abs("pattern distinct frequencies", double(p.distinct()), 16, 0);
        double dmax = 0.0;
        for (double f : p.frequency) dmax = std::max(dmax, std::abs(to_hz(f - p.omega_z)));
        c.at_most("pattern max detuning [Hz]", dmax, 1e3);
    });

    std::printf("%d criterion(s) failed\n", failures);
    return failures ? 1 : 0;
}
