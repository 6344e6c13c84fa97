#pragma once

// File formats: layout JSON, CSV tables, site reports, voltage sets and the
// run manifest that accompanies every output. Numbers are written with
// std::to_chars, so output never depends on the locale.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trapsim/noise_coupling.hpp"
#include "trapsim/pipeline.hpp"

namespace trapsim {

using ojson = nlohmann::ordered_json;

inline constexpr const char* version = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Writes through a temporary file so a failed run leaves no partial output.
inline void write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::invalid_argument("cannot write '" + path + "'");
        out << content;
        if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_number(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ') ++b;
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

// ---------------------------------------------------------------------------
// manifest

struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;                          // file paths
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string tool_version = version;
    std::string content_hash;                                 // FNV-1a 64 of inputs and overrides

    /// Hashes input file contents (not their paths) together with the
    /// command and overrides.
    void seal() {
        std::uint64_t h = fnv1a64(command);
        for (const auto& p : inputs) h = fnv1a64(read_file(p), fnv1a64("\x1f", h));
        for (const auto& [k, v] : overrides) h = fnv1a64(k + "=" + v, fnv1a64("\x1e", h));
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        content_hash = buf;
    }

    ojson to_json() const {
        ojson j;
        j["command"] = command;
        j["inputs"] = inputs;
        ojson o = ojson::object();
        for (const auto& [k, v] : overrides) o[k] = v;
        j["overrides"] = o;
        j["version"] = tool_version;
        j["content_hash"] = content_hash;
        return j;
    }
};

inline std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".manifest.json"; }

inline void write_csv(const std::string& path, const std::string& csv, const RunManifest& m) {
    write_file(path, csv);
    write_file(sidecar_path(path), dump(m.to_json()));
}

// ---------------------------------------------------------------------------
// CSV

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) {
        for (const auto& h : header) cell(h);
        end_row();
    }
    CsvWriter& cell(double v) { return raw(format_number(v)); }
    CsvWriter& cell(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return raw(s);
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
        return raw(q + "\"");
    }
    CsvWriter& cell(const char* s) { return cell(std::string(s)); }
    void end_row() {
        if (n_ != columns_) throw std::logic_error("CSV row has the wrong number of cells");
        out_ += '\n';
        n_ = 0;
    }
    const std::string& str() const { return out_; }

private:
    CsvWriter& raw(const std::string& s) {
        if (n_++) out_ += ',';
        out_ += s;
        return *this;
    }
    std::size_t columns_;
    std::size_t n_ = 0;
    std::string out_;
};

/// Splits CSV text into rows of cells (quoted cells may contain commas).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(cell);
            cell.clear();
        } else if (c == '\n') {
            row.push_back(cell);
            cell.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    if (!cell.empty() || !row.empty()) {
        row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// layout JSON

inline ojson layout_to_json(const TrapLayout& layout) {
    ojson j;
    j["top_ground_height_m"] = layout.top_ground_height ? ojson(*layout.top_ground_height) : ojson(nullptr);
    ojson es = ojson::array();
    for (const auto& e : layout.electrodes) {
        ojson je;
        je["name"] = e.name;
        je["role"] = to_string(e.role);
        je["group"] = e.group;
        ojson ps = ojson::array();
        for (const auto& p : e.polygons) {
            ojson jp = ojson::array();
            for (const auto& v : p) jp.push_back({v.x, v.z});
            ps.push_back(jp);
        }
        je["polygons"] = ps;
        es.push_back(je);
    }
    j["electrodes"] = es;
    return j;
}

inline TrapLayout layout_from_json(const ojson& j) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("layout JSON: " + m); };
    if (!j.is_object()) fail("top level must be an object");
    TrapLayout l;
    if (!j.contains("electrodes") || !j["electrodes"].is_array()) fail("missing 'electrodes' array");
    if (j.contains("top_ground_height_m") && !j["top_ground_height_m"].is_null()) {
        if (!j["top_ground_height_m"].is_number()) fail("'top_ground_height_m' must be a number or null");
        l.top_ground_height = j["top_ground_height_m"].get<double>();
    }
    for (const auto& je : j["electrodes"]) {
        PolygonElectrode e;
        for (const char* k : {"name", "role", "group"})
            if (!je.contains(k) || !je[k].is_string()) fail(std::string("electrode field '") + k + "' must be a string");
        e.name = je["name"].get<std::string>();
        e.role = role_from_string(je["role"].get<std::string>());
        e.group = je["group"].get<std::string>();
        if (!je.contains("polygons") || !je["polygons"].is_array()) fail("electrode '" + e.name + "' has no polygons");
        for (const auto& jp : je["polygons"]) {
            Polygon p;
            if (!jp.is_array()) fail("electrode '" + e.name + "': polygon must be an array");
            for (const auto& v : jp) {
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                    fail("electrode '" + e.name + "': vertices must be [x_m, z_m]");
                p.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            e.polygons.push_back(std::move(p));
        }
        l.electrodes.push_back(std::move(e));
    }
    return l;
}

/// Reads and validates a layout file.
inline TrapLayout read_layout(const std::string& path) {
    ojson j;
    try {
        j = ojson::parse(read_file(path));
    } catch (const ojson::parse_error& e) {
        throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
    }
    TrapLayout l = layout_from_json(j);
    const auto v = validate_layout(l);
    if (!v.empty()) throw std::invalid_argument("layout '" + path + "' is invalid: " + v.front().message);
    return l;
}

// ---------------------------------------------------------------------------
// reports

inline ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson site_to_json(const TrapSite& s) {
    ojson j;
    j["x_um"] = number(s.position.x() / um);
    j["y_um"] = number(s.position.y() / um);
    j["z_um"] = number(s.position.z() / um);
    j["f_z_Hz"] = number(to_hz(s.secular[0]));
    j["f_r1_Hz"] = number(to_hz(s.secular[1]));
    j["f_r2_Hz"] = number(to_hz(s.secular[2]));
    j["theta_r_deg"] = number(s.theta_r);
    j["theta_z_deg"] = number(s.theta_z);
    j["q"] = number(s.q);
    j["E_parallel_V_per_m"] = number(s.e_parallel);
    j["micromotion_amplitude_m"] = number(s.z_mm);
    j["beta"] = number(s.beta);
    j["U_b_meV"] = number(s.U_b / meV);
    j["U_mw_l_meV"] = number(s.U_mw_l / meV);
    j["U_mw_r_meV"] = number(s.U_mw_r / meV);
    j["U_0_meV"] = number(s.U_0 / meV);
    return j;
}

inline ojson voltage_set_json(const ConstraintSystem& cs, const ElectrodeGrouping& g) {
    ojson j;
    ojson sites = ojson::array(), targets = ojson::array(), volts = ojson::array();
    for (const auto& t : cs.sites) {
        sites.push_back({{"x_um", t.position.x() / um}, {"y_um", t.position.y() / um}, {"z_um", t.position.z() / um}});
        targets.push_back({{"E_x_V_per_m", t.field.x()},
                           {"E_y_V_per_m", t.field.y()},
                           {"E_z_V_per_m", t.field.z()},
                           {"f_z_Hz", to_hz(t.omega_z)}});
    }
    for (std::size_t i = 0; i < g.channels.size(); ++i)
        volts.push_back({{"channel", g.channels[i].name}, {"groups", g.channels[i].groups}, {"V", cs.x[Eigen::Index(i)]}});
    j["sites"] = sites;
    j["targets"] = targets;
    j["voltages"] = volts;
    j["residual"] = cs.residual;
    return j;
}

inline ojson report_to_json(const SiteReport& r, const IonSpecies& sp) {
    ojson j;
    j["family"] = to_string(r.family);
    j["config"] = r.config;
    j["species"] = {{"mass_kg", sp.mass}, {"charge_C", sp.charge}};
    ojson amps = ojson::object();
    for (const auto& [g, v] : r.drive.rf_amplitudes) amps[g] = v;
    j["drive"] = {{"rf_frequency_Hz", to_hz(r.drive.rf_angular_frequency)}, {"rf_amplitudes_V", amps}};
    if (r.rule)
        j["rf_rule"] = {{"rf_frequency_Hz", to_hz(r.rule->drive.rf_angular_frequency)}, {"u_rf_V", r.rule->u_default}};
    else
        j["rf_rule"] = nullptr;
    ojson v = ojson::object();
    for (std::size_t i = 0; i < r.system.channels.size(); ++i) v[r.system.channels[i]] = r.system.x[Eigen::Index(i)];
    j["voltages_V"] = v;
    j["solver"] = {{"residual", r.system.residual}, {"rank", r.system.rank}};
    ojson s = ojson::object();
    for (const auto& [k, x] : r.summary) s[k] = number(x);
    j["summary"] = s;
    ojson sites = ojson::array();
    for (const auto& t : r.sites) sites.push_back(site_to_json(t));
    j["sites"] = sites;
    return j;
}

inline std::string grid_csv(const std::vector<FieldSample>& samples) {
    CsvWriter w({"x_um", "y_um", "z_um", "phi_dc_V", "pseudo_meV", "total_meV"});
    for (const auto& s : samples) {
        w.cell(s.point.x() / um).cell(s.point.y() / um).cell(s.point.z() / um);
        w.cell(s.phi_dc).cell(s.pseudo / meV).cell(s.total / meV);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// scans

inline std::string scan_csv(const ScanResult& s) {
    std::vector<std::string> h;
    if (s.kind == "axial") {
        h = {"z_l_um", "z_r_um", "converged", "error"};
        for (const auto& c : s.channels) h.push_back("V_" + c + "_V");
        for (const char* side : {"l", "r"})
            for (const char* k : {"x_um", "y_um", "z_um", "f_z_Hz", "f_r1_Hz", "f_r2_Hz", "theta_r_deg", "theta_z_deg",
                                  "U_b_meV", "U_mw_l_meV", "U_mw_r_meV", "U_0_meV"})
                h.push_back(std::string(k).insert(0, std::string(side) + "_"));
        h.push_back("s_x_um");
    } else if (s.kind == "rf-spacing") {
        h = {"ratio", "converged", "error", "s_x_um", "u_rf_V", "l_x_um", "l_y_um", "r_x_um", "r_y_um", "q"};
    } else if (s.kind == "static-array") {
        h = {"w_rf_um", "converged", "error", "x_um", "d_um", "u_rf_V", "q", "U_0_meV"};
    } else {
        throw std::invalid_argument("unknown scan kind '" + s.kind + "'");
    }
    CsvWriter w(h);
    for (const auto& p : s.points) {
        if (s.kind == "axial") {
            w.cell(p.a / um).cell(p.b / um).cell(p.converged ? "1" : "0").cell(p.error);
            for (std::size_t c = 0; c < s.channels.size(); ++c)
                w.cell(c < p.voltages.size() ? p.voltages[c] : nan_value);
            for (const TrapSite* t : {&p.left, &p.right}) {
                const bool ok = p.converged;
                auto val = [&](double v) { return ok ? v : nan_value; };
                w.cell(val(t->position.x() / um)).cell(val(t->position.y() / um)).cell(val(t->position.z() / um));
                w.cell(to_hz(t->secular[0])).cell(to_hz(t->secular[1])).cell(to_hz(t->secular[2]));
                w.cell(t->theta_r).cell(t->theta_z);
                w.cell(t->U_b / meV).cell(t->U_mw_l / meV).cell(t->U_mw_r / meV).cell(t->U_0 / meV);
            }
            w.cell(p.s_x / um);
        } else if (s.kind == "rf-spacing") {
            const bool ok = p.converged;
            w.cell(p.a).cell(ok ? "1" : "0").cell(p.error).cell(p.s_x / um).cell(p.u_rf);
            w.cell(ok ? p.left.position.x() / um : nan_value).cell(ok ? p.left.position.y() / um : nan_value);
            w.cell(ok ? p.right.position.x() / um : nan_value).cell(ok ? p.right.position.y() / um : nan_value);
            w.cell(p.left.q);
        } else {
            const bool ok = p.converged;
            w.cell(p.a / um).cell(ok ? "1" : "0").cell(p.error);
            w.cell(ok ? p.left.position.x() / um : nan_value).cell(p.left.d / um).cell(p.u_rf).cell(p.left.q);
            w.cell(p.left.U_0 / meV);
        }
        w.end_row();
    }
    return w.str();
}

/// Reads the grid, channel voltages and convergence flags back from an
/// axial scan CSV (enough to sample waveforms).
inline ScanResult read_axial_scan_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.size() < 2) throw std::invalid_argument("scan CSV has no data rows");
    const auto& h = rows.front();
    if (h.size() < 4 || h[0] != "z_l_um" || h[1] != "z_r_um" || h[2] != "converged")
        throw std::invalid_argument("not an axial scan CSV (expected z_l_um, z_r_um, converged, ...)");
    ScanResult s;
    s.kind = "axial";
    s.axis_a = "z_l_m";
    s.axis_b = "z_r_m";
    std::vector<std::size_t> vcol;
    for (std::size_t c = 4; c < h.size(); ++c)
        if (h[c].size() > 4 && h[c].rfind("V_", 0) == 0 && h[c].compare(h[c].size() - 2, 2, "_V") == 0) {
            s.channels.push_back(h[c].substr(2, h[c].size() - 4));
            vcol.push_back(c);
        }
    if (s.channels.empty()) throw std::invalid_argument("scan CSV has no voltage columns");
    std::vector<ScanPoint> pts;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != h.size()) throw std::invalid_argument("scan CSV row " + std::to_string(r) + " has the wrong width");
        ScanPoint p;
        p.a = parse_number(row[0]) * um;
        p.b = parse_number(row[1]) * um;
        p.converged = row[2] == "1";
        p.error = row[3];
        if (p.converged)
            for (auto c : vcol) p.voltages.push_back(parse_number(row[c]));
        pts.push_back(std::move(p));
    }
    auto axis = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), v.end());
        return v;
    };
    std::vector<double> a, b;
    for (const auto& p : pts) {
        a.push_back(p.a);
        b.push_back(p.b);
    }
    s.a_values = axis(a);
    s.b_values = axis(b);
    if (s.a_values.size() * s.b_values.size() != pts.size()) throw std::invalid_argument("scan CSV is not a full grid");
    s.points.resize(pts.size());
    auto find = [](const std::vector<double>& g, double v) {
        return std::size_t(std::lower_bound(g.begin(), g.end(), v - 1e-12) - g.begin());
    };
    for (auto& p : pts) {
        const std::size_t i = find(s.a_values, p.a), j = find(s.b_values, p.b);
        s.points[j * s.a_values.size() + i] = std::move(p);
    }
    return s;
}

inline std::string waveform_csv(const Waveform& w) {
    std::vector<std::string> h{"t_s"};
    for (const auto& c : w.channels) h.push_back(c + "_V");
    CsvWriter out(h);
    for (std::size_t k = 0; k < w.times.size(); ++k) {
        out.cell(w.times[k]);
        for (double v : w.volts[k]) out.cell(v);
        out.end_row();
    }
    return out.str();
}

inline std::string pattern_csv(const DetuningPattern& p) {
    CsvWriter w({"row", "col", "frequency_Hz"});
    for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < p.cols; ++c) {
            w.cell(double(r)).cell(double(c)).cell(to_hz(p.at(r, c)));
            w.end_row();
        }
    return w.str();
}

}  // namespace trapsim
