#pragma once

// Planar electrode layouts. All electrodes live in the y = 0 plane; a polygon
// vertex is stored as (x, z). Lengths are meters.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trapsim {

struct PlanePoint {
    double x = 0.0;
    double z = 0.0;
};

using Polygon = std::vector<PlanePoint>;

enum class ElectrodeRole { RF, DC, Ground };

inline const char* to_string(ElectrodeRole r) {
    switch (r) {
        case ElectrodeRole::RF: return "RF";
        case ElectrodeRole::DC: return "DC";
        case ElectrodeRole::Ground: return "GROUND";
    }
    return "?";
}

inline ElectrodeRole role_from_string(const std::string& s) {
    if (s == "RF") return ElectrodeRole::RF;
    if (s == "DC") return ElectrodeRole::DC;
    if (s == "GROUND") return ElectrodeRole::Ground;
    throw std::invalid_argument("unknown electrode role '" + s + "'");
}

/// Twice the signed area, positive for counterclockwise (x, z) order.
inline double signed_area(const Polygon& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& u = p[i];
        const auto& v = p[(i + 1) % p.size()];
        a += u.x * v.z - v.x * u.z;
    }
    return 0.5 * a;
}

inline Polygon rectangle(double x0, double x1, double z0, double z1) {
    return {{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}};
}

struct PolygonElectrode {
    std::string name;
    ElectrodeRole role = ElectrodeRole::DC;
    std::vector<Polygon> polygons;
    std::string group;

    double area() const {
        double a = 0.0;
        for (const auto& p : polygons) a += std::abs(signed_area(p));
        return a;
    }
};

struct BoundingBox {
    double x0 = 0, x1 = 0, z0 = 0, z1 = 0;
};

struct TrapLayout {
    std::vector<PolygonElectrode> electrodes;
    std::optional<double> top_ground_height;

    std::set<std::string> groups() const {
        std::set<std::string> g;
        for (const auto& e : electrodes) g.insert(e.group);
        return g;
    }

    bool has_group(const std::string& g) const {
        return std::any_of(electrodes.begin(), electrodes.end(), [&](const auto& e) { return e.group == g; });
    }

    const PolygonElectrode* find(const std::string& name) const {
        for (const auto& e : electrodes)
            if (e.name == name) return &e;
        return nullptr;
    }

    BoundingBox bounds() const {
        BoundingBox b{1e300, -1e300, 1e300, -1e300};
        for (const auto& e : electrodes)
            for (const auto& p : e.polygons)
                for (const auto& v : p) {
                    b.x0 = std::min(b.x0, v.x);
                    b.x1 = std::max(b.x1, v.x);
                    b.z0 = std::min(b.z0, v.z);
                    b.z1 = std::max(b.z1, v.z);
                }
        return b;
    }
};

enum class LayoutVariant { TwinTrap, LatticeArray, StaticArray };

/// Dimensions for the three layout families. Only the fields belonging to
/// the selected variant are read.
struct LayoutParams {
    LayoutVariant variant = LayoutVariant::TwinTrap;

    // twin trap
    double w_outer_rf = 252e-6;
    double w_inner_rf = 73e-6;
    double w_dc = 102e-6;
    double l_dc = 102e-6;
    double w_dc_outer = 202e-6;
    double l_dc_center = 306e-6;  // independent central piece of the outer DC rails
    double l_rail = 6e-3;
    double l_dc_outer = 6e-3;     // total length of the unsegmented outer DC rails
    int segments_per_quadrant = 16;

    // lattice array (l_dc and w_dc above are replaced by the array values)
    double w_even_rf = 88e-6;
    double w_odd_rf = 70.4e-6;
    double w_edge_rf = 228.8e-6;
    double w_lane = 79.2e-6;
    double l_segment = 74.8e-6;
    int rf_rails = 15;
    int segments_per_half_lane = 20;
    double array_rail_length = 6.0e-3;

    // static array
    double pitch = 40e-6;
    double w_rf = 20e-6;
    int static_rf_rails = 15;
    double static_rail_length = 6e-3;

    double top_ground_height = 1.0e-3;  // arrays only

    static LayoutParams twin_trap() { return {}; }
    static LayoutParams lattice_array() {
        LayoutParams p;
        p.variant = LayoutVariant::LatticeArray;
        return p;
    }
    static LayoutParams static_array(double pitch, double w_rf) {
        LayoutParams p;
        p.variant = LayoutVariant::StaticArray;
        p.pitch = pitch;
        p.w_rf = w_rf;
        return p;
    }
};

/// Single-rectangle electrode.
inline PolygonElectrode rect_electrode(std::string name, ElectrodeRole role, std::string group, double x0, double x1,
                                       double z0, double z1) {
    return {std::move(name), role, {rectangle(x0, x1, z0, z1)}, std::move(group)};
}

namespace detail {

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << "layout parameter " << what << " must be positive (got " << v << ")";
        throw std::invalid_argument(os.str());
    }
}

inline int mod3(int k) { return ((k % 3) + 3) % 3; }

}  // namespace detail

/// Phase label (1..3) of periodic segment k >= 1 counted away from the
/// trap center within its quadrant.
inline int twin_segment_phase(int k) { return detail::mod3(k - 1) + 1; }

/// Linear twin trap: three RF rails, two segmented DC rails, two outer DC
/// rails. Group labels are per quadrant (N = +z, S = -z, W = -x, E = +x):
///   DC{1,2,3}-{NW,NE,SW,SE}  periodic segments, phase counted from the center
///   DCA-{NW,...}             first segment next to the interaction zone (phase 1),
///                            wired on its own
///   DCE-{NW,...}             outer DC rails
///   DCZ{1,2,3}-{W,E}         interaction zone thirds, ordered along +z
///   DCD-{W,E}                independent central piece of the outer rail
///   RFi, RFo                 inner and outer RF rails
inline TrapLayout build_twin_trap_layout(const LayoutParams& p) {
    using detail::require_positive;
    if (p.variant != LayoutVariant::TwinTrap) throw std::invalid_argument("build_twin_trap_layout: wrong variant");
    require_positive(p.w_outer_rf, "w_o");
    require_positive(p.w_inner_rf, "w_i");
    require_positive(p.w_dc, "w_DC");
    require_positive(p.l_dc, "l_DC");
    require_positive(p.w_dc_outer, "w_DCo");
    require_positive(p.l_dc_center, "l_DC,D");
    require_positive(p.l_rail, "l_r");
    if (p.segments_per_quadrant < 1) throw std::invalid_argument("segments_per_quadrant must be >= 1");

    const int n = p.segments_per_quadrant;
    const double half_dc = (n + 0.5) * p.l_dc;
    if (2.0 * half_dc > p.l_rail + 1e-12)
        throw std::invalid_argument("segmented DC rails are longer than the RF rails");
    require_positive(p.l_dc_outer, "outer DC rail length");
    if (p.l_dc_center > p.l_dc_outer) throw std::invalid_argument("central outer-DC piece is longer than the outer DC rails");
    if (p.l_dc_outer > p.l_rail + 1e-12) throw std::invalid_argument("outer DC rails are longer than the RF rails");

    const double xi = 0.5 * p.w_inner_rf;
    const double xd = xi + p.w_dc;
    const double xo = xd + p.w_outer_rf;
    const double xe = xo + p.w_dc_outer;
    const double zr = 0.5 * p.l_rail;

    TrapLayout L;
    L.electrodes.push_back(rect_electrode("RFi", ElectrodeRole::RF, "RFi", -xi, xi, -zr, zr));
    L.electrodes.push_back(rect_electrode("RFo-W", ElectrodeRole::RF, "RFo", -xo, -xd, -zr, zr));
    L.electrodes.push_back(rect_electrode("RFo-E", ElectrodeRole::RF, "RFo", xd, xo, -zr, zr));

    for (const char* side : {"W", "E"}) {
        const bool west = side[0] == 'W';
        const double a = west ? -xd : xi;
        const double b = west ? -xi : xd;
        const double ao = west ? -xe : xo;
        const double bo = west ? -xo : xe;
        const std::string s(side);

        const double third = p.l_dc / 3.0;
        for (int j = 0; j < 3; ++j) {
            const double z0 = -0.5 * p.l_dc + j * third;
            const std::string name = "DCZ" + std::to_string(j + 1) + "-" + s;
            L.electrodes.push_back(rect_electrode(name, ElectrodeRole::DC, name, a, b, z0, z0 + third));
        }
        for (int k = 1; k <= n; ++k) {
            const std::string ph = std::to_string(twin_segment_phase(k));
            const double z0 = (k - 0.5) * p.l_dc;
            const double z1 = (k + 0.5) * p.l_dc;
            const std::string gn = k == 1 ? "DCA-N" + s : "DC" + ph + "-N" + s;
            const std::string gs = k == 1 ? "DCA-S" + s : "DC" + ph + "-S" + s;
            L.electrodes.push_back(rect_electrode("DC" + ph + "-N" + s + "." + std::to_string(k), ElectrodeRole::DC,
                                                  gn, a, b, z0, z1));
            L.electrodes.push_back(rect_electrode("DC" + ph + "-S" + s + "." + std::to_string(k), ElectrodeRole::DC,
                                                  gs, a, b, -z1, -z0));
        }
        const double hc = 0.5 * p.l_dc_center;
        L.electrodes.push_back(rect_electrode("DCD-" + s, ElectrodeRole::DC, "DCD-" + s, ao, bo, -hc, hc));
        const double he = 0.5 * p.l_dc_outer;
        L.electrodes.push_back(rect_electrode("DCE-N" + s, ElectrodeRole::DC, "DCE-N" + s, ao, bo, hc, he));
        L.electrodes.push_back(rect_electrode("DCE-S" + s, ElectrodeRole::DC, "DCE-S" + s, ao, bo, -he, -hc));
    }
    return L;
}

/// Lattice array: rf_rails parallel RF rails (index 0 .. n-1, even indices
/// wide, odd narrow, the two outermost at w_edge) separated by segmented DC
/// lanes. Every third segment of every lane shares one of the groups DC1..DC3;
/// the segment [k l, (k+1) l] carries phase k mod 3. RF groups: RFe, RFo.
///
/// Static array: alternating RF rails (group RF) and ground rails at pitch
/// s_x, centered on a ground rail. Ground rails are implicit.
inline TrapLayout build_array_layout(const LayoutParams& p) {
    using detail::require_positive;
    TrapLayout L;
    if (p.variant == LayoutVariant::LatticeArray) {
        require_positive(p.w_even_rf, "w_e");
        require_positive(p.w_odd_rf, "w_o");
        require_positive(p.w_edge_rf, "w_edge");
        require_positive(p.w_lane, "w_DC");
        require_positive(p.l_segment, "l_DC");
        require_positive(p.array_rail_length, "rail length");
        require_positive(p.top_ground_height, "top ground height");
        if (p.rf_rails < 3 || p.rf_rails % 2 == 0)
            throw std::invalid_argument("lattice array needs an odd number (>= 3) of RF rails");
        if (p.segments_per_half_lane < 1) throw std::invalid_argument("segments_per_half_lane must be >= 1");
        const double half_lane = p.segments_per_half_lane * p.l_segment;
        if (2.0 * half_lane > p.array_rail_length + 1e-12)
            throw std::invalid_argument("segmented DC lanes are longer than the RF rails");

        const int n = p.rf_rails;
        auto width = [&](int i) {
            if (i == 0 || i == n - 1) return p.w_edge_rf;
            return i % 2 == 0 ? p.w_even_rf : p.w_odd_rf;
        };
        // Rail n/2 is centered on x = 0; walk outwards.
        std::vector<double> left(n), right(n);
        const int c = n / 2;
        left[c] = -0.5 * width(c);
        right[c] = 0.5 * width(c);
        for (int i = c + 1; i < n; ++i) {
            left[i] = right[i - 1] + p.w_lane;
            right[i] = left[i] + width(i);
        }
        for (int i = c - 1; i >= 0; --i) {
            right[i] = left[i + 1] - p.w_lane;
            left[i] = right[i] - width(i);
        }
        const double zr = 0.5 * p.array_rail_length;
        for (int i = 0; i < n; ++i) {
            L.electrodes.push_back(rect_electrode("RF" + std::to_string(i), ElectrodeRole::RF,
                                                  i % 2 == 0 ? "RFe" : "RFo", left[i], right[i], -zr, zr));
        }
        for (int lane = 0; lane + 1 < n; ++lane) {
            const double a = right[lane];
            const double b = left[lane + 1];
            for (int k = -p.segments_per_half_lane; k < p.segments_per_half_lane; ++k) {
                const std::string g = "DC" + std::to_string(detail::mod3(k) + 1);
                L.electrodes.push_back(rect_electrode("L" + std::to_string(lane) + "." + std::to_string(k),
                                                      ElectrodeRole::DC, g, a, b, k * p.l_segment,
                                                      (k + 1) * p.l_segment));
            }
        }
        L.top_ground_height = p.top_ground_height;
        return L;
    }
    if (p.variant == LayoutVariant::StaticArray) {
        require_positive(p.pitch, "s_x");
        require_positive(p.w_rf, "w_RF");
        require_positive(p.static_rail_length, "rail length");
        require_positive(p.top_ground_height, "top ground height");
        if (p.w_rf >= p.pitch) throw std::invalid_argument("static array needs 0 < w_RF < s_x");
        if (p.static_rf_rails < 2) throw std::invalid_argument("static array needs at least two RF rails");
        const double zr = 0.5 * p.static_rail_length;
        const int n = p.static_rf_rails;
        for (int k = 0; k < n; ++k) {
            const double xc = (k - 0.5 * (n - 1)) * p.pitch;
            L.electrodes.push_back(rect_electrode("RF" + std::to_string(k), ElectrodeRole::RF, "RF",
                                                  xc - 0.5 * p.w_rf, xc + 0.5 * p.w_rf, -zr, zr));
        }
        L.top_ground_height = p.top_ground_height;
        return L;
    }
    throw std::invalid_argument("build_array_layout: variant must be LatticeArray or StaticArray");
}

inline TrapLayout build_layout(const LayoutParams& p) {
    return p.variant == LayoutVariant::TwinTrap ? build_twin_trap_layout(p) : build_array_layout(p);
}

// ---------------------------------------------------------------------------
// validation

struct LayoutViolation {
    std::string kind;  // "polygon", "overlap", "group", "top_ground"
    std::vector<std::string> electrodes;
    std::string message;
};

namespace detail {

inline double cross(const PlanePoint& o, const PlanePoint& a, const PlanePoint& b) {
    return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

inline bool segments_cross(const PlanePoint& a, const PlanePoint& b, const PlanePoint& c, const PlanePoint& d) {
    const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

inline bool is_simple(const Polygon& p) {
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return false;
        }
    return true;
}

inline bool point_in_polygon(const PlanePoint& q, const Polygon& p) {
    bool inside = false;
    for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) {
        if ((p[i].z > q.z) != (p[j].z > q.z)) {
            const double xint = p[j].x + (q.z - p[j].z) * (p[i].x - p[j].x) / (p[i].z - p[j].z);
            if (q.x < xint) inside = !inside;
        }
    }
    return inside;
}

// Two simple polygons have intersecting interiors if an edge pair crosses
// properly, or a vertex/centroid of one lies strictly inside the other, or
// they coincide.
inline bool interiors_overlap(const Polygon& a, const Polygon& b) {
    auto box = [](const Polygon& p) {
        BoundingBox bb{1e300, -1e300, 1e300, -1e300};
        for (const auto& v : p) {
            bb.x0 = std::min(bb.x0, v.x);
            bb.x1 = std::max(bb.x1, v.x);
            bb.z0 = std::min(bb.z0, v.z);
            bb.z1 = std::max(bb.z1, v.z);
        }
        return bb;
    };
    const auto ba = box(a), bb = box(b);
    const double tol = 1e-12;
    if (ba.x1 <= bb.x0 + tol || bb.x1 <= ba.x0 + tol || ba.z1 <= bb.z0 + tol || bb.z1 <= ba.z0 + tol) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            if (segments_cross(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) return true;
    auto probe_inside = [&](const Polygon& p, const Polygon& q) {
        // sample points just inside p near each vertex, plus its centroid
        PlanePoint c{0, 0};
        for (const auto& v : p) c.x += v.x / p.size(), c.z += v.z / p.size();
        if (point_in_polygon(c, p) && point_in_polygon(c, q)) return true;
        for (const auto& v : p) {
            PlanePoint s{v.x + 1e-6 * (c.x - v.x), v.z + 1e-6 * (c.z - v.z)};
            if (point_in_polygon(s, p) && point_in_polygon(s, q)) return true;
        }
        return false;
    };
    return probe_inside(a, b) || probe_inside(b, a);
}

}  // namespace detail

/// Group-to-volts map used by drive configurations; declared here so that
/// layout validation can check references.
using GroupVoltages = std::map<std::string, double>;

inline std::vector<LayoutViolation> validate_layout(const TrapLayout& layout,
                                                    const std::vector<std::string>& referenced_groups = {}) {
    std::vector<LayoutViolation> out;
    for (const auto& e : layout.electrodes) {
        if (e.polygons.empty()) out.push_back({"polygon", {e.name}, "electrode has no polygons"});
        if (e.group.empty()) out.push_back({"group", {e.name}, "electrode has no group label"});
        for (const auto& p : e.polygons) {
            if (p.size() < 3) {
                out.push_back({"polygon", {e.name}, "polygon with fewer than 3 vertices"});
                continue;
            }
            if (!detail::is_simple(p)) out.push_back({"polygon", {e.name}, "self-intersecting polygon"});
            if (std::abs(signed_area(p)) <= 0.0) out.push_back({"polygon", {e.name}, "degenerate polygon"});
        }
    }
    // Overlaps, with a bounding-box prefilter sorted along x.
    struct Item {
        std::size_t electrode;
        const Polygon* poly;
        double x0, x1;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < layout.electrodes.size(); ++i)
        for (const auto& p : layout.electrodes[i].polygons) {
            if (p.size() < 3) continue;
            double x0 = 1e300, x1 = -1e300;
            for (const auto& v : p) x0 = std::min(x0, v.x), x1 = std::max(x1, v.x);
            items.push_back({i, &p, x0, x1});
        }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.x0 < b.x0; });
    std::set<std::pair<std::size_t, std::size_t>> reported;
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size() && items[j].x0 < items[i].x1; ++j) {
            if (items[i].electrode == items[j].electrode) continue;
            if (!detail::interiors_overlap(*items[i].poly, *items[j].poly)) continue;
            auto key = std::minmax(items[i].electrode, items[j].electrode);
            if (!reported.insert(key).second) continue;
            const auto& a = layout.electrodes[key.first];
            const auto& b = layout.electrodes[key.second];
            out.push_back({"overlap", {a.name, b.name}, "electrodes " + a.name + " and " + b.name + " overlap"});
        }
    // RF and DC electrodes never share a group.
    std::map<std::string, std::set<ElectrodeRole>> roles;
    std::map<std::string, std::vector<std::string>> members;
    for (const auto& e : layout.electrodes) {
        roles[e.group].insert(e.role);
        members[e.group].push_back(e.name);
    }
    for (const auto& [g, r] : roles)
        if (r.size() > 1) out.push_back({"group", members[g], "group " + g + " mixes electrode roles"});
    for (const auto& g : referenced_groups)
        if (!layout.has_group(g)) out.push_back({"group", {}, "unknown group '" + g + "' referenced by drive"});
    if (layout.top_ground_height && !(*layout.top_ground_height > 0.0))
        out.push_back({"top_ground", {}, "top ground height must be positive"});
    return out;
}

}  // namespace trapsim
