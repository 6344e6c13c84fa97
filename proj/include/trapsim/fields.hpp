#pragma once

// Superposed DC and RF fields of a layout, the pseudopotential and the total
// potential energy of one ion, with analytic first, second and third
// derivatives where the analysis needs them.

#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "trapsim/basis.hpp"
#include "trapsim/geometry.hpp"
#include "trapsim/parallel.hpp"
#include "trapsim/species.hpp"

namespace trapsim {

/// Unit-voltage potential of one electrode (no top plane).
inline double basis_potential(const PolygonElectrode& e, const Vec3& r) { return ElectrodeBasis(e, {}).potential(r); }

/// Gradient (1/m) and Hessian (1/m^2) of basis_potential.
inline std::pair<Vec3, Mat3> basis_derivatives(const PolygonElectrode& e, const Vec3& r) {
    Vec3 g;
    Mat3 h;
    ElectrodeBasis(e, {}).gradient_hessian(r, g, h);
    return {g, h};
}

struct DriveConfig {
    std::map<std::string, double> rf_amplitudes;  // V, per RF group
    double rf_angular_frequency = 0.0;             // rad/s
    std::map<std::string, double> dc_voltages;     // V, per group

    std::set<std::string> referenced_groups() const {
        std::set<std::string> s;
        for (const auto& [g, v] : rf_amplitudes) s.insert(g);
        for (const auto& [g, v] : dc_voltages) s.insert(g);
        return s;
    }

    void validate(const TrapLayout& layout) const {
        if (!(rf_angular_frequency > 0.0) || !std::isfinite(rf_angular_frequency))
            throw std::invalid_argument("RF angular frequency must be positive");
        for (const auto& [g, v] : rf_amplitudes) {
            if (!std::isfinite(v)) throw std::invalid_argument("RF amplitude for '" + g + "' is not finite");
            if (!layout.has_group(g)) throw std::invalid_argument("unknown RF group '" + g + "'");
        }
        for (const auto& [g, v] : dc_voltages) {
            if (!std::isfinite(v)) throw std::invalid_argument("DC voltage for '" + g + "' is not finite");
            if (!layout.has_group(g)) throw std::invalid_argument("unknown DC group '" + g + "'");
        }
    }
};

struct FieldSample {
    Vec3 point = Vec3::Zero();
    double phi_dc = 0.0;            // V
    Vec3 e_dc = Vec3::Zero();       // V/m
    double phi_rf_unit = 0.0;       // V per volt of the largest RF amplitude
    Vec3 e_rf = Vec3::Zero();       // V/m, amplitude
    Mat3 hessian_dc = Mat3::Zero(); // V/m^2
    double pseudo = 0.0;            // J
    double total = 0.0;             // J
};

/// Basis functions of every electrode in a layout, built once and shared.
class FieldModel {
public:
    explicit FieldModel(TrapLayout layout, ImageSeries images = {}) : layout_(std::move(layout)), images_(images) {
        if (images.terms < 0 && !(images.tolerance > 0.0)) throw std::invalid_argument("image tolerance must be positive");
        for (std::size_t i = 0; i < layout_.electrodes.size(); ++i) {
            const auto& e = layout_.electrodes[i];
            basis_.emplace_back(e, layout_.top_ground_height, images);
            group_members_[e.group].push_back(i);
        }
    }

    const TrapLayout& layout() const { return layout_; }
    const ImageSeries& images() const { return images_; }
    const ElectrodeBasis& basis(std::size_t i) const { return basis_[i]; }
    std::size_t size() const { return basis_.size(); }

    const std::vector<std::size_t>& members(const std::string& group) const {
        auto it = group_members_.find(group);
        if (it == group_members_.end()) throw std::invalid_argument("unknown group '" + group + "'");
        return it->second;
    }

    double group_potential(const std::string& group, const Vec3& r) const {
        double s = 0.0;
        for (auto i : members(group)) s += basis_[i].potential(r);
        return s;
    }
    Vec3 group_gradient(const std::string& group, const Vec3& r) const {
        Vec3 s = Vec3::Zero();
        for (auto i : members(group)) s += basis_[i].gradient(r);
        return s;
    }
    Mat3 group_hessian(const std::string& group, const Vec3& r) const {
        Mat3 s = Mat3::Zero();
        for (auto i : members(group)) s += basis_[i].hessian(r);
        return s;
    }

private:
    TrapLayout layout_;
    ImageSeries images_;
    std::vector<ElectrodeBasis> basis_;
    std::map<std::string, std::vector<std::size_t>> group_members_;
};

/// Total potential energy of one ion for a fixed drive:
///   U = Q phi_dc + c |E_rf|^2,   c = Q^2 / (4 M Omega^2).
class Landscape {
public:
    Landscape(std::shared_ptr<const FieldModel> model, DriveConfig drive, IonSpecies species = IonSpecies::calcium40())
        : model_(std::move(model)), drive_(std::move(drive)), species_(species) {
        species_.validate();
        drive_.validate(model_->layout());
        for (const auto& [g, v] : drive_.rf_amplitudes) {
            if (v == 0.0) continue;
            for (auto i : model_->members(g)) rf_.push_back({i, v});
            rf_max_ = std::max(rf_max_, std::abs(v));
        }
        for (const auto& [g, v] : drive_.dc_voltages) {
            if (v == 0.0) continue;
            for (auto i : model_->members(g)) dc_.push_back({i, v});
        }
        const double w = drive_.rf_angular_frequency;
        c_ = species_.charge * species_.charge / (4.0 * species_.mass * w * w);
    }

    const FieldModel& model() const { return *model_; }
    std::shared_ptr<const FieldModel> model_ptr() const { return model_; }
    const DriveConfig& drive() const { return drive_; }
    const IonSpecies& species() const { return species_; }
    const TrapLayout& layout() const { return model_->layout(); }
    double pseudo_coefficient() const { return c_; }
    bool has_rf() const { return !rf_.empty(); }
    bool has_dc() const { return !dc_.empty(); }

    /// Same layout and RF drive with the DC voltages removed.
    Landscape rf_only() const {
        DriveConfig d = drive_;
        d.dc_voltages.clear();
        return Landscape(model_, d, species_);
    }

    /// Between the electrode plane and the top ground plane (if any).
    bool in_domain(const Vec3& r) const {
        const auto& top = model_->layout().top_ground_height;
        return r.y() > 0.0 && (!top || r.y() < *top);
    }

    double dc_potential(const Vec3& r) const {
        double s = 0.0;
        for (const auto& t : dc_) s += t.volts * model_->basis(t.index).potential(r);
        return s;
    }

    /// RF field amplitude, V/m.
    Vec3 rf_field(const Vec3& r) const {
        Vec3 g = Vec3::Zero();
        for (const auto& t : rf_) g += t.volts * model_->basis(t.index).gradient(r);
        return -g;
    }

    double pseudo(const Vec3& r) const { return c_ * rf_field(r).squaredNorm(); }

    double energy(const Vec3& r) const { return species_.charge * dc_potential(r) + pseudo(r); }

    Vec3 gradient(const Vec3& r) const {
        Vec3 g = Vec3::Zero();
        for (const auto& t : dc_) g += t.volts * model_->basis(t.index).gradient(r);
        g *= species_.charge;
        if (rf_.empty()) return g;
        Vec3 e = Vec3::Zero();
        Mat3 j = Mat3::Zero();
        rf_jacobian(r, e, j);
        return g + 2.0 * c_ * j.transpose() * e;
    }

    Mat3 hessian(const Vec3& r) const {
        Mat3 h = Mat3::Zero();
        for (const auto& t : dc_) h += t.volts * model_->basis(t.index).hessian(r);
        h *= species_.charge;
        if (rf_.empty()) return h;
        Vec3 e = Vec3::Zero();
        Mat3 j = Mat3::Zero();
        Tensor3 t3{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
        for (const auto& t : rf_) {
            Vec3 g;
            Mat3 hh;
            Tensor3 tt;
            model_->basis(t.index).derivatives3(r, g, hh, tt);
            e += t.volts * g;
            j += t.volts * hh;
            for (int k = 0; k < 3; ++k) t3[k] += t.volts * tt[k];
        }
        // d2|E|^2 / dk dl = 2 (J^T J + sum_i E_i d_k d_l E_i)
        Mat3 m = j.transpose() * j;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) m(k, l) += e[i] * t3[l](i, k);
        Mat3 out = h + 2.0 * c_ * m;
        return 0.5 * (out + out.transpose());
    }

    FieldSample sample(const Vec3& r) const {
        FieldSample s;
        s.point = r;
        Vec3 g = Vec3::Zero();
        Mat3 h = Mat3::Zero();
        for (const auto& t : dc_) {
            Vec3 gi;
            Mat3 hi;
            model_->basis(t.index).gradient_hessian(r, gi, hi);
            s.phi_dc += t.volts * model_->basis(t.index).potential(r);
            g += t.volts * gi;
            h += t.volts * hi;
        }
        s.e_dc = -g;
        s.hessian_dc = h;
        for (const auto& t : rf_) s.phi_rf_unit += t.volts / rf_max_ * model_->basis(t.index).potential(r);
        s.e_rf = rf_field(r);
        s.pseudo = c_ * s.e_rf.squaredNorm();
        s.total = species_.charge * s.phi_dc + s.pseudo;
        return s;
    }

private:
    struct Term {
        std::size_t index;
        double volts;
    };

    // Gradient sum and its Jacobian for the RF electrodes (sign irrelevant
    // for |E|^2 and its derivatives).
    void rf_jacobian(const Vec3& r, Vec3& e, Mat3& j) const {
        for (const auto& t : rf_) {
            Vec3 g;
            Mat3 h;
            model_->basis(t.index).gradient_hessian(r, g, h);
            e += t.volts * g;
            j += t.volts * h;
        }
    }

    std::shared_ptr<const FieldModel> model_;
    DriveConfig drive_;
    IonSpecies species_;
    std::vector<Term> rf_, dc_;
    double rf_max_ = 0.0;
    double c_ = 0.0;
};

/// Axis-aligned sampling grid, inclusive of both ends.
struct GridSpec {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    std::array<int, 3> count{1, 1, 1};

    Vec3 point(int i, int j, int k) const {
        auto at = [&](int axis, int n) {
            return count[axis] <= 1 ? lo[axis] : lo[axis] + (hi[axis] - lo[axis]) * n / (count[axis] - 1);
        };
        return {at(0, i), at(1, j), at(2, k)};
    }
    std::size_t size() const { return std::size_t(count[0]) * count[1] * count[2]; }
};

/// Samples the landscape on a grid in x-fastest order.
inline std::vector<FieldSample> sample_grid(const Landscape& land, const GridSpec& grid, int threads = 1) {
    for (int a = 0; a < 3; ++a)
        if (grid.count[a] < 1) throw std::invalid_argument("grid counts must be positive");
    if (!(grid.lo.y() > 0.0) || !(grid.hi.y() > 0.0)) throw std::invalid_argument("grid must lie above the electrode plane");
    std::vector<FieldSample> out(grid.size());
    const int nx = grid.count[0], ny = grid.count[1];
    parallel_for(out.size(), threads, [&](std::size_t n) {
        const int i = int(n % nx), j = int((n / nx) % ny), k = int(n / (std::size_t(nx) * ny));
        out[n] = land.sample(grid.point(i, j, k));
    });
    return out;
}

}  // namespace trapsim
