// trapsim: layouts, site reports, scans, noise estimates, detuning patterns
// and waveforms from the command line.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trapsim/io.hpp"

using namespace trapsim;

namespace {

struct Range {
    double lo = 0.0, hi = 0.0;
    int n = 1;
};

// "lo:hi:n" or a single value
Range parse_range(const std::string& s, const char* what) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    Range r;
    try {
        if (parts.size() == 1) {
            r.lo = r.hi = parse_number(parts[0]);
        } else if (parts.size() == 3) {
            r.lo = parse_number(parts[0]);
            r.hi = parse_number(parts[1]);
            r.n = int(parse_number(parts[2]));
        } else {
            throw std::invalid_argument("");
        }
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument(std::string(what) + " must be 'value' or 'lo:hi:n', got '" + s + "'");
    }
    if (r.n < 1) throw std::invalid_argument(std::string(what) + ": point count must be positive");
    if (r.n == 1) r.hi = r.lo;
    return r;
}

std::vector<double> parse_list(const std::string& s, char sep = ',') {
    std::vector<double> v;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, sep);) v.push_back(parse_number(p));
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, sep);)
        if (!p.empty()) v.push_back(p);
    return v;
}

std::string stem(const std::string& path) {
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
    return path.substr(0, dot);
}

// Options the user actually set, excluding ones that cannot change results.
RunManifest manifest_for(const CLI::App& sub, std::vector<std::string> inputs) {
    RunManifest m;
    m.command = sub.get_name();
    m.inputs = std::move(inputs);
    for (const CLI::Option* o : sub.get_options()) {
        if (o->count() == 0 || o->get_positional()) continue;
        const std::string name = o->get_name(false, true);
        if (name == "--out" || name == "--threads" || name == "--help" || name == "-h") continue;
        std::string v;
        for (const auto& r : o->results()) v += (v.empty() ? "" : ",") + r;
        m.overrides.emplace_back(name, v);
    }
    for (const CLI::App* p = sub.get_parent(); p; p = p->get_parent())
        if (p->get_parent()) m.command = p->get_name() + " " + m.command;
    m.seal();
    return m;
}

IonSpecies species_from(double mass_amu, double charge_e) {
    IonSpecies s;
    s.mass = mass_amu * constants::atomic_mass;
    s.charge = charge_e * constants::elementary_charge;
    s.validate();
    return s;
}

void write_json(const std::string& path, ojson body, const RunManifest& m) {
    ojson j;
    j["manifest"] = m.to_json();
    for (auto& [k, v] : body.items()) j[k] = v;
    write_file(path, dump(j));
}

struct Common {
    int threads = 0;
    double mass_amu = 40.0;
    double charge_e = 1.0;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surface-electrode ion trap lattices: layouts, site reports, scans and noise estimates"};
    app.require_subcommand(1);
    app.fallthrough();  // --threads may follow the subcommand
    Common common;
    app.add_option("--threads", common.threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    auto add_species = [&](CLI::App* s) {
        s->add_option("--mass-amu", common.mass_amu, "ion mass in atomic mass units (default 40)");
        s->add_option("--charge-e", common.charge_e, "ion charge in elementary charges (default 1)");
    };

    // ---------------------------------------------------------------- layout
    auto* lay = app.add_subcommand("layout", "write a layout JSON for a twin trap, lattice array or static array");
    std::string variant, lay_out;
    bool defaults = false;
    LayoutParams lp;
    lay->add_option("variant", variant, "twin | array | static")->required()->check(CLI::IsMember({"twin", "array", "static"}));
    lay->add_flag("--defaults", defaults, "use the default dimensions (overrides still apply)");
    lay->add_option("--out", lay_out, "output path (default <variant>.json)");
    lay->add_option("--wo", lp.w_outer_rf, "twin: outer RF rail width, m");
    lay->add_option("--wi", lp.w_inner_rf, "twin: inner RF rail width, m");
    lay->add_option("--wdc", lp.w_dc, "twin: segmented DC rail width, m");
    lay->add_option("--ldc", lp.l_dc, "twin: DC segment length, m");
    lay->add_option("--wdc-outer", lp.w_dc_outer, "twin: outer DC rail width, m");
    lay->add_option("--ldc-center", lp.l_dc_center, "twin: central outer DC piece length, m");
    lay->add_option("--segments", lp.segments_per_quadrant, "twin: DC segments per quadrant");
    lay->add_option("--rail-length", lp.l_rail, "twin: RF rail length, m");
    lay->add_option("--we", lp.w_even_rf, "array: even RF rail width, m");
    lay->add_option("--wodd", lp.w_odd_rf, "array: odd RF rail width, m");
    lay->add_option("--wedge", lp.w_edge_rf, "array: outermost RF rail width, m");
    lay->add_option("--wlane", lp.w_lane, "array: DC lane width, m");
    lay->add_option("--lseg", lp.l_segment, "array: DC segment length, m");
    lay->add_option("--array-rails", lp.rf_rails, "array: number of RF rails");
    lay->add_option("--array-segments", lp.segments_per_half_lane, "array: DC segments per half lane");
    lay->add_option("--array-rail-length", lp.array_rail_length, "array: RF rail length, m");
    lay->add_option("--pitch", lp.pitch, "static: rail pitch s_x, m");
    lay->add_option("--wrf", lp.w_rf, "static: RF rail width, m");
    lay->add_option("--static-rails", lp.static_rf_rails, "static: number of RF rails");
    lay->add_option("--static-rail-length", lp.static_rail_length, "static: rail length, m");
    lay->add_option("--top", lp.top_ground_height, "arrays: height of the top ground plane, m");

    // ---------------------------------------------------------------- report
    auto* rep = app.add_subcommand("report", "site report and potential grid for a twin-trap or lattice-array layout");
    add_species(rep);
    std::string rep_layout, rep_out = "report.json", grid_out, volt_out;
    ReportOptions ro;
    double rf_hz = 0.0, fz_hz = 1e6;
    bool no_rule = false, pair_only = false;
    std::string grid_x, grid_y, grid_z;
    rep->add_option("layout", rep_layout, "layout JSON")->required();
    rep->add_option("--config", ro.config, "default | reduced-rf | interaction-zone")
        ->check(CLI::IsMember({"default", "reduced-rf", "interaction-zone"}));
    rep->add_option("--out", rep_out, "site-report JSON path");
    rep->add_option("--grid-out", grid_out, "grid CSV path (default <out stem>.grid.csv)");
    rep->add_option("--voltages-out", volt_out, "voltage-set JSON path (default <out stem>.voltages.json)");
    rep->add_option("--sx", ro.s_x, "reduced-rf: target lateral spacing, m");
    rep->add_option("--sz", ro.s_z, "interaction-zone: target axial spacing, m");
    rep->add_option("--rf-frequency", rf_hz, "RF drive frequency, Hz (default 23e6 twin, 30e6 array)");
    rep->add_option("--u-max", ro.u_max, "largest RF amplitude, V");
    rep->add_option("--q", ro.q_target, "stability factor target");
    rep->add_option("--fz", fz_hz, "axial frequency target, Hz");
    rep->add_option("--attenuate", ro.attenuate, "RF group attenuated for reduced-rf (RFi twin; RFe or RFo array)");
    rep->add_flag("--no-rule", no_rule, "skip the RF frequency-selection rule");
    rep->add_flag("--pair-only", pair_only, "characterize only the reference pair instead of searching all sites");
    rep->add_option("--grid-x", grid_x, "grid x range lo:hi:n in m (default reference x +-150 um, 61 points)");
    rep->add_option("--grid-y", grid_y, "grid y range lo:hi:n in m (default 20 um to d + 130 um, 56 points)");
    rep->add_option("--grid-z", grid_z, "grid z range lo:hi:n in m (default reference z)");

    // ---------------------------------------------------------------- scan
    auto* scan = app.add_subcommand("scan", "parameter scans");
    scan->require_subcommand(1);
    std::string scan_out = "scan.csv";

    auto* ax = scan->add_subcommand("axial", "independent axial translation of the two twin-trap multiwells");
    add_species(ax);
    std::string ax_layout;
    AxialScanOptions ao;
    ao.n = 33;
    double ax_fz = 1e6, ax_rf = 23e6;
    bool no_depths = false;
    ax->add_option("layout", ax_layout, "twin-trap layout JSON")->required();
    ax->add_option("--n", ao.n, "grid points per axis")->check(CLI::PositiveNumber);
    ax->add_option("--z-lo", ao.z_lo, "lowest z_0, m");
    ax->add_option("--z-hi", ao.z_hi, "highest z_0, m");
    ax->add_option("--fz", ax_fz, "axial frequency target, Hz");
    ax->add_option("--rf-frequency", ax_rf, "RF drive frequency, Hz");
    ax->add_flag("--no-depths", no_depths, "skip barriers and trap depth (much faster)");
    ax->add_option("--out", scan_out, "scan CSV path");

    auto* rs = scan->add_subcommand("rf-spacing", "RF null spacing versus attenuation ratio");
    add_species(rs);
    std::string rs_layout, rs_ratios = "0.5:1:11", rs_group;
    double rs_rf = 0.0, rs_umax = 400.0, rs_q = 0.4;
    rs->add_option("layout", rs_layout, "twin-trap or lattice-array layout JSON")->required();
    rs->add_option("--ratios", rs_ratios, "attenuation ratios lo:hi:n");
    rs->add_option("--attenuate", rs_group, "attenuated RF group (default RFi twin, RFe array)");
    rs->add_option("--rf-frequency", rs_rf, "RF drive frequency, Hz");
    rs->add_option("--u-max", rs_umax, "largest RF amplitude, V");
    rs->add_option("--q", rs_q, "stability factor target");
    rs->add_option("--out", scan_out, "scan CSV path");

    auto* st = scan->add_subcommand("static-array", "ion height, drive amplitude and depth versus RF rail width");
    add_species(st);
    std::string st_widths = "2e-6:30e-6:15";
    StaticScanOptions so;
    double st_rf = 30e6;
    st->add_option("--widths", st_widths, "RF rail widths lo:hi:n, m");
    st->add_option("--pitch", so.pitch, "rail pitch s_x, m");
    st->add_option("--rails", so.rails, "number of RF rails");
    st->add_option("--rf-frequency", st_rf, "RF drive frequency, Hz");
    st->add_option("--q", so.q_target, "stability factor target");
    st->add_option("--out", scan_out, "scan CSV path");

    // ---------------------------------------------------------------- noise
    auto* noi = app.add_subcommand("noise", "Johnson heating, RF pickup and motional coupling estimates");
    add_species(noi);
    std::string circuit, noise_out = "noise.json", cd_layout, cd_groups, cd_site, cd_dir = "z", cd_zr;
    double mode_hz = 0.0, noise_rf = 0.0, delta = 0.0, s_ion = 0.0;
    std::string axis = "x";
    noi->add_option("circuit", circuit, "circuit JSON")->required();
    noi->add_option("--out", noise_out, "noise JSON path");
    noi->add_option("--mode-frequency", mode_hz, "ion mode frequency, Hz (overrides the file)");
    noi->add_option("--rf-frequency", noise_rf, "RF drive frequency, Hz (overrides the file)");
    noi->add_option("--delta", delta, "characteristic distance, m (overrides the file)");
    noi->add_option("--layout", cd_layout, "layout JSON for a characteristic-distance calculation");
    noi->add_option("--groups", cd_groups, "comma-separated electrode groups driven together");
    noi->add_option("--site", cd_site, "site x,y,z in m");
    noi->add_option("--direction", cd_dir, "field direction x | y | z")->check(CLI::IsMember({"x", "y", "z"}));
    noi->add_option("--z-range", cd_zr, "worst case over the site's z in lo:hi:n, m");
    noi->add_option("--s", s_ion, "ion distance for the coupling rate, m");
    noi->add_option("--axis", axis, "coupling direction x | z")->check(CLI::IsMember({"x", "z"}));

    // ---------------------------------------------------------------- pattern
    auto* pat = app.add_subcommand("pattern", "detuning pattern suppressing parasitic couplings in a paired lattice");
    int rows = 10, cols = 10, order = 4;
    double pat_fz = 1e6, coupling_hz = 1e3, margin = 10.0;
    std::string ratios = "5,7.0710678118654755,10,14.142135623730951", pat_out = "pattern.csv";
    pat->add_option("--rows", rows, "ion rows");
    pat->add_option("--cols", cols, "ion columns (pairs along x, even)");
    pat->add_option("--order", order, "highest suppressed order, 0..4");
    pat->add_option("--fz", pat_fz, "resonant axial frequency, Hz");
    pat->add_option("--coupling", coupling_hz, "nearest-pair coupling rate Omega_c/2pi, Hz");
    pat->add_option("--ratios", ratios, "spacing ratios s_i/s_0 for orders 1.., comma-separated");
    pat->add_option("--margin", margin, "required detuning in units of the parasitic coupling");
    pat->add_option("--out", pat_out, "pattern CSV path");

    // ---------------------------------------------------------------- waveform
    auto* wav = app.add_subcommand("waveform", "sample channel voltages along a path through an axial scan");
    std::string wav_scan, path_s, wav_out = "waveform.csv";
    double duration = 1e-4;
    int samples = 101;
    wav->add_option("scan", wav_scan, "axial scan CSV")->required();
    wav->add_option("--path", path_s, "z_l,z_r pairs in m separated by ';'")->required();
    wav->add_option("--duration", duration, "duration, s");
    wav->add_option("--samples", samples, "time samples");
    wav->add_option("--out", wav_out, "waveform CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const int threads = common.threads > 0 ? common.threads : default_threads();

    try {
        if (*lay) {
            lp.variant = variant == "twin" ? LayoutVariant::TwinTrap
                         : variant == "array" ? LayoutVariant::LatticeArray
                                              : LayoutVariant::StaticArray;
            const TrapLayout layout = build_layout(lp);
            const auto v = validate_layout(layout);
            std::cout << "layout " << variant << ": " << layout.electrodes.size() << " electrodes, "
                      << layout.groups().size() << " groups, " << v.size() << " violations\n";
            for (const auto& x : v) std::cout << "  " << x.kind << ": " << x.message << "\n";
            if (!v.empty()) return 2;
            const std::string out = lay_out.empty() ? variant + ".json" : lay_out;
            ojson j = layout_to_json(layout);
            j["manifest"] = manifest_for(*lay, {}).to_json();
            write_file(out, dump(j));
            std::cout << "wrote " << out << "\n";
            return 0;
        }

        if (*rep) {
            ro.species = species_from(common.mass_amu, common.charge_e);
            ro.threads = threads;
            ro.omega_z = angular(fz_hz);
            if (rf_hz > 0.0) ro.rf_frequency = angular(rf_hz);
            ro.drive_rule = !no_rule;
            ro.find_all_sites = !pair_only;
            const RunManifest m = manifest_for(*rep, {rep_layout});
            const auto model = std::make_shared<const FieldModel>(read_layout(rep_layout));
            const SiteReport r = run_report(model, ro);

            const Landscape land(model, r.drive, ro.species);
            GridSpec g;
            const Vec3& c = r.reference;
            const Range gx = grid_x.empty() ? Range{c.x() - 150e-6, c.x() + 150e-6, 61} : parse_range(grid_x, "--grid-x");
            const Range gy = grid_y.empty() ? Range{20e-6, c.y() + 130e-6, 56} : parse_range(grid_y, "--grid-y");
            const Range gz = grid_z.empty() ? Range{c.z(), c.z(), 1} : parse_range(grid_z, "--grid-z");
            g.lo = {gx.lo, gy.lo, gz.lo};
            g.hi = {gx.hi, gy.hi, gz.hi};
            g.count = {gx.n, gy.n, gz.n};
            const auto samples_v = run_stage("grid", [&] { return sample_grid(land, g, threads); });

            const ElectrodeGrouping grouping = r.family == LayoutFamily::Twin
                                                   ? (ro.config == "interaction-zone" ? ElectrodeGrouping::twin_interaction()
                                                                                     : ElectrodeGrouping::twin_periodic())
                                                   : ElectrodeGrouping::lattice_array();
            const std::string gpath = grid_out.empty() ? stem(rep_out) + ".grid.csv" : grid_out;
            const std::string vpath = volt_out.empty() ? stem(rep_out) + ".voltages.json" : volt_out;
            write_json(rep_out, report_to_json(r, ro.species), m);
            write_json(vpath, voltage_set_json(r.system, grouping), m);
            write_csv(gpath, grid_csv(samples_v), m);
            std::cout << "report " << ro.config << ": " << r.sites.size() << " sites\n";
            for (const auto& [k, v] : r.summary) std::cout << "  " << k << " = " << format_number(v) << "\n";
            std::cout << "wrote " << rep_out << ", " << vpath << ", " << gpath << "\n";
            return 0;
        }

        if (*scan) {
            ScanResult res;
            RunManifest m;
            if (*ax) {
                const IonSpecies sp = species_from(common.mass_amu, common.charge_e);
                m = manifest_for(*ax, {ax_layout});
                const auto model = std::make_shared<const FieldModel>(read_layout(ax_layout));
                if (detect_family(model->layout()) != LayoutFamily::Twin)
                    throw std::invalid_argument("axial scans need a twin-trap layout");
                const RfSetup s = run_stage("rf-drive", [&] {
                    return rf_setup(model, sp, {{"RFi", 1.0}, {"RFo", 1.0}}, angular(ax_rf), 0.4);
                });
                ao.omega_z = angular(ax_fz);
                ao.depths = !no_depths;
                ao.threads = threads;
                res = scan_axial_translation(Landscape(model, s.drive, sp), ElectrodeGrouping::twin_periodic(), s.left,
                                             s.right, ao);
            } else if (*rs) {
                const IonSpecies sp = species_from(common.mass_amu, common.charge_e);
                m = manifest_for(*rs, {rs_layout});
                const auto model = std::make_shared<const FieldModel>(read_layout(rs_layout));
                const auto fam = detect_family(model->layout());
                if (fam == LayoutFamily::Static) throw std::invalid_argument("rf-spacing scans need RF groups to attenuate");
                const bool twin = fam == LayoutFamily::Twin;
                SpacingRequest rq;
                rq.weights = twin ? std::map<std::string, double>{{"RFi", 1.0}, {"RFo", 1.0}}
                                  : std::map<std::string, double>{{"RFe", 1.0}, {"RFo", 1.0}};
                rq.attenuated_group = rs_group.empty() ? (twin ? "RFi" : "RFe") : rs_group;
                RfSpacingOptions opt;
                opt.omega = angular(rs_rf > 0.0 ? rs_rf : (twin ? 23e6 : 30e6));
                opt.u_max = rs_umax;
                opt.q_target = rs_q;
                const double z = twin ? 0.0 : detail::family_site_z(fam, model->layout());
                const auto nulls = run_stage("rf-null", [&] {
                    DriveConfig d;
                    d.rf_angular_frequency = opt.omega;
                    d.rf_amplitudes = rq.weights;
                    return rf_nulls_in_plane(Landscape(model, d, sp), -300e-6, 300e-6, 20e-6, 300e-6, z, 4e-6);
                });
                std::tie(rq.left_guess, rq.right_guess) = nulls_flanking(model->layout(), rq.attenuated_group, nulls);
                const Range r = parse_range(rs_ratios, "--ratios");
                res = scan_rf_ratio(model, sp, rq, linspace(r.lo, r.hi, r.n), opt, threads);
            } else {
                const IonSpecies sp = species_from(common.mass_amu, common.charge_e);
                m = manifest_for(*st, {});
                const Range r = parse_range(st_widths, "--widths");
                so.omega = angular(st_rf);
                so.threads = threads;
                res = static_array_scan(sp, linspace(r.lo, r.hi, r.n), so);
            }
            write_csv(scan_out, scan_csv(res), m);
            std::cout << "scan " << res.kind << ": " << res.converged_count() << "/" << res.points.size()
                      << " points converged\nwrote " << scan_out << "\n";
            return 0;
        }

        if (*noi) {
            const IonSpecies sp = species_from(common.mass_amu, common.charge_e);
            std::vector<std::string> inputs{circuit};
            if (!cd_layout.empty()) inputs.push_back(cd_layout);
            const RunManifest m = manifest_for(*noi, inputs);
            ojson in;
            try {
                in = ojson::parse(read_file(circuit));
            } catch (const ojson::parse_error& e) {
                throw std::invalid_argument("'" + circuit + "' is not valid JSON: " + e.what());
            }
            if (!in.is_object()) throw std::invalid_argument("circuit JSON must be an object");
            static const std::set<std::string> known{"R_lead_ohm", "rho_ohm_m", "lead_length_m", "lead_width_m",
                                                     "lead_thickness_m", "L_lead_H", "C_p_F", "C_f_F", "T_K",
                                                     "delta_c_m", "mode_frequency_Hz", "rf_frequency_Hz"};
            for (const auto& [k, v] : in.items()) {
                if (!known.count(k)) throw std::invalid_argument("circuit JSON: unknown key '" + k + "'");
                if (!v.is_number()) throw std::invalid_argument("circuit JSON: '" + k + "' must be a number");
            }
            ojson sources;
            auto get = [&](const char* k, double def) {
                sources[k] = in.contains(k) ? "file" : "default";
                return in.contains(k) ? in[k].get<double>() : def;
            };
            CircuitModel c;
            const bool from_dims = in.contains("rho_ohm_m");
            if (from_dims) {
                const double rho = get("rho_ohm_m", 0), len = get("lead_length_m", 0);
                const double wid = get("lead_width_m", 0), thk = get("lead_thickness_m", 0);
                c.r_lead = lead_resistance(rho, len, wid, thk);
            } else {
                c.r_lead = get("R_lead_ohm", c.r_lead);
            }
            c.l_lead = get("L_lead_H", c.l_lead);
            c.c_p = get("C_p_F", c.c_p);
            c.c_f = get("C_f_F", c.c_f);
            c.temperature = get("T_K", c.temperature);
            c.validate();
            const double f_mode = mode_hz > 0.0 ? mode_hz : get("mode_frequency_Hz", 1e6);
            const double f_rf = noise_rf > 0.0 ? noise_rf : get("rf_frequency_Hz", 25e6);
            const double w_used = angular(f_mode), wrf_used = angular(f_rf);
            if (mode_hz > 0.0) sources["mode_frequency_Hz"] = "flag";
            if (noise_rf > 0.0) sources["rf_frequency_Hz"] = "flag";

            ojson out;
            double dc = get("delta_c_m", 0.0);
            if (delta > 0.0) {
                dc = delta;
                sources["delta_c_m"] = "flag";
            }
            if (!cd_layout.empty()) {
                const auto model = std::make_shared<const FieldModel>(read_layout(cd_layout));
                // channel names of the family's standard grouping expand to their groups
                std::vector<std::string> groups;
                const auto fam = detect_family(model->layout());
                const std::optional<ElectrodeGrouping> std_grouping =
                    fam == LayoutFamily::Twin    ? std::optional(ElectrodeGrouping::twin_periodic())
                    : fam == LayoutFamily::Array ? std::optional(ElectrodeGrouping::lattice_array())
                                                 : std::nullopt;
                for (const auto& name : split(cd_groups, ',')) {
                    const Channel* ch = nullptr;
                    if (std_grouping)
                        for (const auto& c : std_grouping->channels)
                            if (c.name == name) ch = &c;
                    if (ch)
                        groups.insert(groups.end(), ch->groups.begin(), ch->groups.end());
                    else
                        groups.push_back(name);
                }
                const auto site = parse_list(cd_site);
                if (site.size() != 3) throw std::invalid_argument("--site needs x,y,z");
                const Vec3 r(site[0], site[1], site[2]);
                const Vec3 dir = cd_dir == "x" ? Vec3::UnitX() : cd_dir == "y" ? Vec3::UnitY() : Vec3::UnitZ();
                if (cd_zr.empty()) {
                    dc = characteristic_distance(*model, groups, r, dir);
                } else {
                    const Range zr = parse_range(cd_zr, "--z-range");
                    dc = worst_case_characteristic_distance(*model, groups, r, dir, zr.lo, zr.hi, std::max(2, zr.n));
                }
                sources["delta_c_m"] = "layout";
            }
            if (!(dc > 0.0)) throw std::invalid_argument("need a characteristic distance (delta_c_m, --delta or --layout)");
            if (from_dims) sources["R_lead_ohm"] = "rho_ohm_m * lead_length_m / (lead_width_m * lead_thickness_m)";
            const JohnsonHeating h = johnson_heating(sp, c, dc, w_used);
            const auto eps = rf_pickup(c, wrf_used);
            out["circuit"] = {{"R_lead_ohm", c.r_lead}, {"L_lead_H", c.l_lead}, {"C_p_F", c.c_p},
                              {"C_f_F", c.c_f},         {"T_K", c.temperature}};
            out["mode_frequency_Hz"] = f_mode;
            out["rf_frequency_Hz"] = f_rf;
            out["delta_c_m"] = dc;
            out["S_E_V2_per_m2_per_Hz"] = h.s_e;
            out["heating_rate_quanta_per_s"] = h.rate;
            out["rf_pickup_ratio_abs"] = std::abs(eps);
            out["rf_pickup_ratio_phase_rad"] = std::arg(eps);
            if (s_ion > 0.0)
                out["coupling_rate_Hz"] =
                    to_hz(coupling_rate(sp, w_used, s_ion, axis == "z" ? CouplingAxis::Z : CouplingAxis::X));
            out["input_sources"] = sources;
            write_json(noise_out, out, m);
            std::cout << "heating rate " << format_number(h.rate) << " quanta/s, |eps_p| " << format_number(std::abs(eps))
                      << "\nwrote " << noise_out << "\n";
            return 0;
        }

        if (*pat) {
            const RunManifest m = manifest_for(*pat, {});
            const DetuningPattern p =
                detuning_pattern(rows, cols, angular(pat_fz), angular(coupling_hz), parse_list(ratios), margin, order);
            const PatternCheck chk = verify_pattern(p);
            if (!chk.ok) throw NumericalError("pattern check failed: " + chk.message);
            write_csv(pat_out, pattern_csv(p), m);
            std::cout << "pattern: " << p.distinct() << " distinct frequencies\nwrote " << pat_out << "\n";
            return 0;
        }

        if (*wav) {
            const RunManifest m = manifest_for(*wav, {wav_scan});
            const ScanResult s = read_axial_scan_csv(read_file(wav_scan));
            std::vector<std::pair<double, double>> path;
            for (const auto& p : split(path_s, ';')) {
                const auto v = parse_list(p);
                if (v.size() != 2) throw std::invalid_argument("path points must be 'z_l,z_r'");
                path.push_back({v[0], v[1]});
            }
            const Waveform w = path_to_waveform(s, path, duration, samples);
            write_csv(wav_out, waveform_csv(w), m);
            std::cout << "waveform: " << w.times.size() << " samples\nwrote " << wav_out << "\n";
            return 0;
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
