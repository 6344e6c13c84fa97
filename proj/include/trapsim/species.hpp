#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace trapsim {

namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double epsilon0 = 8.8541878128e-12;          // F/m
inline constexpr double hbar = 1.054571817e-34;               // J s
inline constexpr double boltzmann = 1.380649e-23;             // J/K
inline constexpr double atomic_mass = 1.66053906660e-27;      // kg
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

// Unit helpers for the human-facing side. Everything internal is SI.
inline constexpr double um = 1e-6;
inline constexpr double mm = 1e-3;
inline constexpr double MHz = 1e6;
inline constexpr double kHz = 1e3;
inline constexpr double meV = 1e-3 * constants::elementary_charge;  // J
inline constexpr double eV = constants::elementary_charge;          // J

inline constexpr double angular(double hz) { return constants::two_pi * hz; }
inline constexpr double to_hz(double rad_per_s) { return rad_per_s / constants::two_pi; }

/// A singly trapped ion: mass, charge and the wavenumber of the laser that
/// probes its micromotion.
struct IonSpecies {
    double mass = 40.0 * constants::atomic_mass;
    double charge = constants::elementary_charge;
    double wavenumber = constants::two_pi / 729e-9;

    static IonSpecies calcium40() { return {}; }

    void validate() const {
        if (!(mass > 0.0)) throw std::invalid_argument("ion mass must be positive");
        if (charge == 0.0 || !std::isfinite(charge)) throw std::invalid_argument("ion charge must be nonzero");
        if (!(wavenumber > 0.0)) throw std::invalid_argument("laser wavenumber must be positive");
    }
};

}  // namespace trapsim
