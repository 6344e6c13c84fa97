#pragma once

// Closed-form estimators: motional coupling between neighbouring wells,
// Johnson-noise heating through the DC leads, RF pickup on DC electrodes,
// and detuning patterns that suppress parasitic couplings in a lattice of
// coupled pairs.

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trapsim/errors.hpp"
#include "trapsim/fields.hpp"
#include "trapsim/species.hpp"

namespace trapsim {

enum class CouplingAxis { X, Z };

/// Omega_c = varsigma Q^2 / (2 pi eps0 M) / (omega_z s^3); varsigma = 1 along
/// the trap axis, 1/2 across it.
inline double coupling_rate(const IonSpecies& species, double omega_z, double s, CouplingAxis axis) {
    species.validate();
    if (!(omega_z > 0.0)) throw std::invalid_argument("axial frequency must be positive");
    if (!(s > 0.0)) throw std::invalid_argument("ion distance must be positive");
    const double varsigma = axis == CouplingAxis::Z ? 1.0 : 0.5;
    const double q = species.charge;
    return varsigma * q * q / (constants::two_pi * constants::epsilon0 * species.mass) / (omega_z * s * s * s);
}

inline double lead_resistance(double rho, double length, double width, double thickness) {
    if (!(rho > 0.0) || !(width > 0.0) || !(thickness > 0.0)) throw std::invalid_argument("resistivity and lead cross-section must be positive");
    if (!(length >= 0.0)) throw std::invalid_argument("lead length must be non-negative");
    return length * rho / (width * thickness);
}

/// Distance delta such that one volt on the groups produces a field of
/// 1/delta along `direction` at the site.
inline double characteristic_distance(const FieldModel& model, const std::vector<std::string>& groups, const Vec3& site,
                                      const Vec3& direction) {
    if (!(site.y() > 0.0)) throw std::invalid_argument("site must lie above the electrode plane");
    if (!(direction.norm() > 0.0)) throw std::invalid_argument("direction must be non-zero");
    if (groups.empty()) throw std::invalid_argument("no electrode groups given");
    Vec3 g = Vec3::Zero();
    for (const auto& name : groups) g += model.group_gradient(name, site);
    const double e = std::abs(g.dot(direction.normalized()));
    if (!(e > 1e-12)) throw NumericalError("the electrodes produce no field along this direction: characteristic distance is infinite");
    return 1.0 / e;
}

/// Smallest characteristic distance (strongest coupling) as the site moves
/// along z over [z_lo, z_hi]; positions where the field vanishes are skipped.
inline double worst_case_characteristic_distance(const FieldModel& model, const std::vector<std::string>& groups,
                                                 const Vec3& site, const Vec3& direction, double z_lo, double z_hi,
                                                 int samples = 103) {
    if (samples < 2 || !(z_hi > z_lo)) throw std::invalid_argument("need an axial range and at least two samples");
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        Vec3 r = site;
        r.z() = z_lo + (z_hi - z_lo) * k / (samples - 1);
        try {
            best = std::min(best, characteristic_distance(model, groups, r, direction));
        } catch (const NumericalError&) {
        }
    }
    if (std::isinf(best)) throw NumericalError("the electrodes produce no field along this direction anywhere in the range");
    return best;
}

struct CircuitModel {
    double r_lead = 0.46;       // ohm
    double l_lead = 0.2e-9;     // H
    double c_p = 0.01e-12;      // F, parasitic coupling to the RF rail
    double c_f = 330e-9;        // F, filter capacitor to ground
    double temperature = 20.0;  // K

    void validate() const {
        for (double v : {r_lead, l_lead, c_f, temperature})
            if (!(v >= 0.0) || std::isnan(v)) throw std::invalid_argument("circuit values must be non-negative");
        if (!(c_p > 0.0)) throw std::invalid_argument("parasitic capacitance must be positive");
    }
};

struct JohnsonHeating {
    double s_e = 0.0;      // V^2 m^-2 Hz^-1
    double rate = 0.0;     // quanta / s
};

/// S_E = 4 k_B T R / delta^2 and Gamma = Q^2 S_E / (4 M hbar omega).
inline JohnsonHeating johnson_heating(const IonSpecies& species, const CircuitModel& c, double delta, double omega) {
    species.validate();
    if (!(c.temperature >= 0.0) || !(c.r_lead >= 0.0)) throw std::invalid_argument("temperature and resistance must be non-negative");
    if (!(delta > 0.0)) throw std::invalid_argument("characteristic distance must be positive");
    if (!(omega > 0.0)) throw std::invalid_argument("mode frequency must be positive");
    JohnsonHeating h;
    h.s_e = 4.0 * constants::boltzmann * c.temperature * c.r_lead / (delta * delta);
    h.rate = species.charge * species.charge * h.s_e / (4.0 * species.mass * constants::hbar * omega);
    return h;
}

/// Capacitive divider from the RF rail through C_p onto the lead and filter:
/// (Z_lead + Z_Cf) / (Z_Cp + Z_lead + Z_Cf). An infinite C_f is a short.
inline std::complex<double> rf_pickup(const CircuitModel& c, double omega_rf) {
    c.validate();
    if (!(omega_rf > 0.0)) throw std::invalid_argument("RF frequency must be positive");
    using cd = std::complex<double>;
    const cd i(0.0, 1.0);
    auto z_cap = [&](double cap) { return std::isinf(cap) ? cd(0.0) : -i / (omega_rf * cap); };
    const cd z_lead = c.r_lead + i * omega_rf * c.l_lead;
    const cd lower = z_lead + (c.c_f > 0.0 ? z_cap(c.c_f) : cd(std::numeric_limits<double>::infinity()));
    if (c.c_f == 0.0) return 1.0;  // floating electrode follows the rail
    return lower / (z_cap(c.c_p) + lower);
}

// ---------------------------------------------------------------------------
// detuning patterns

/// Ions are paired along x: columns 2k and 2k+1 of a row form one cell that
/// shares a frequency. Cells form a square lattice; parasitic orders are the
/// cell offsets (0,1), (1,1), (0,2), (2,2) and their mirrors.
struct DetuningPattern {
    int rows = 0, cols = 0;  // ion sites
    int order = 0;
    double omega_z = 0.0;                 // rad/s
    std::vector<double> delta;            // required detuning per order 1..order, rad/s
    std::vector<double> amplitude;        // applied amplitude per order (after inflation), rad/s
    std::vector<double> frequency;        // per ion, row-major, rad/s

    double at(int r, int c) const { return frequency[std::size_t(r) * cols + c]; }
    std::size_t distinct() const {
        std::set<long long> s;
        for (double f : frequency) s.insert(std::llround(f * 1e6));
        return s.size();
    }
};

inline int detail_floor_div2(int v) { return v >= 0 ? v / 2 : -((1 - v) / 2); }

/// Sign of each order's pattern on cell (r, c): checkerboard, row stripes,
/// 2x2-block checkerboard, doubled row stripes.
inline int detuning_sign(int order, int r, int c) {
    switch (order) {
        case 1: return (r + c) % 2 ? -1 : 1;
        case 2: return r % 2 ? -1 : 1;
        case 3: return (detail_floor_div2(r) + detail_floor_div2(c)) % 2 ? -1 : 1;
        case 4: return detail_floor_div2(r) % 2 ? -1 : 1;
        default: throw std::invalid_argument("detuning order must be 1..4");
    }
}

/// Cell offsets belonging to a parasitic order.
inline std::vector<std::pair<int, int>> order_offsets(int order) {
    switch (order) {
        case 1: return {{0, 1}, {1, 0}};
        case 2: return {{1, 1}, {1, -1}};
        case 3: return {{0, 2}, {2, 0}};
        case 4: return {{2, 2}, {2, -2}};
        default: throw std::invalid_argument("detuning order must be 1..4");
    }
}

/// `ratios[i-1]` is s_i / s_0. Required detunings delta_i = margin
/// Omega_c0 (s_0/s_i)^3; amplitudes are inflated from the highest order
/// down so that cancellation by higher orders never eats into delta_i.
inline DetuningPattern detuning_pattern(int rows, int cols, double omega_z, double omega_c0,
                                        const std::vector<double>& ratios, double margin, int max_order) {
    if (rows <= 0 || cols <= 0 || rows % 2 || cols % 2) throw std::invalid_argument("lattice dimensions must be positive and even");
    if (max_order < 0 || max_order > 4) throw std::invalid_argument("order must lie in 0..4");
    if (!(omega_z > 0.0) || !(omega_c0 > 0.0)) throw std::invalid_argument("frequencies must be positive");
    if (!(margin >= 1.0)) throw std::invalid_argument("margin must be at least 1");
    if (int(ratios.size()) < max_order) throw std::invalid_argument("need one spacing ratio per order");
    for (int i = 0; i < max_order; ++i)
        if (!(ratios[std::size_t(i)] > 1.0)) throw std::invalid_argument("spacing ratios s_i/s_0 must exceed 1");
    DetuningPattern p;
    p.rows = rows;
    p.cols = cols;
    p.order = max_order;
    p.omega_z = omega_z;
    for (int i = 0; i < max_order; ++i) p.delta.push_back(margin * omega_c0 / std::pow(ratios[std::size_t(i)], 3));
    p.amplitude.assign(std::size_t(max_order), 0.0);
    double above = 0.0;
    for (int i = max_order - 1; i >= 0; --i) {
        p.amplitude[std::size_t(i)] = p.delta[std::size_t(i)] + above;
        above += p.amplitude[std::size_t(i)];
    }
    p.frequency.resize(std::size_t(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double f = omega_z;
            for (int i = 1; i <= max_order; ++i) f += detuning_sign(i, r, c / 2) * p.amplitude[std::size_t(i - 1)];
            p.frequency[std::size_t(r) * cols + c] = f;
        }
    return p;
}

struct PatternCheck {
    bool ok = true;
    std::vector<double> min_difference;  // per order, rad/s (inf if no such pair)
    std::string message;
};

/// Brute-force check over all cell pairs: paired ions share a frequency and
/// every pair at a suppressed order differs by at least delta_i.
inline PatternCheck verify_pattern(const DetuningPattern& p) {
    PatternCheck out;
    const int cell_cols = p.cols / 2;
    auto cell = [&](int r, int c) { return p.at(r, 2 * c); };
    for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < cell_cols; ++c)
            if (p.at(r, 2 * c) != p.at(r, 2 * c + 1)) {
                out.ok = false;
                out.message = "paired ions differ in frequency";
            }
    for (int i = 1; i <= p.order; ++i) {
        double mn = std::numeric_limits<double>::infinity();
        for (auto [dr, dc] : order_offsets(i))
            for (int r = 0; r < p.rows; ++r)
                for (int c = 0; c < cell_cols; ++c) {
                    const int r2 = r + dr, c2 = c + dc;
                    if (r2 < 0 || r2 >= p.rows || c2 < 0 || c2 >= cell_cols) continue;
                    mn = std::min(mn, std::abs(cell(r, c) - cell(r2, c2)));
                }
        out.min_difference.push_back(mn);
        if (mn < p.delta[std::size_t(i - 1)] * (1.0 - 1e-12)) {
            out.ok = false;
            std::ostringstream os;
            os << "order " << i << " pairs differ by only " << to_hz(mn) << " Hz";
            out.message = os.str();
        }
    }
    return out;
}

}  // namespace trapsim
