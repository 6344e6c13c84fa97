#pragma once

// DC voltage sets from field targets: per site the three DC field
// components and the axial curvature are linear in the channel voltages,
// b = A x. Also the RF drive choice (frequency and amplitude for a target
// stability factor) and RF-null spacing control by attenuating one rail set.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trapsim/analysis.hpp"
#include "trapsim/errors.hpp"
#include "trapsim/fields.hpp"

namespace trapsim {

/// One independently controlled voltage: every listed layout group is
/// driven at the channel voltage.
struct Channel {
    std::string name;
    std::vector<std::string> groups;
};

struct ElectrodeGrouping {
    std::vector<Channel> channels;

    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& c : channels) n.push_back(c.name);
        return n;
    }

    void validate(const TrapLayout& layout) const {
        std::set<std::string> seen_names, seen_groups;
        for (const auto& c : channels) {
            if (c.groups.empty()) throw std::invalid_argument("channel '" + c.name + "' has no groups");
            if (!seen_names.insert(c.name).second) throw std::invalid_argument("duplicate channel '" + c.name + "'");
            for (const auto& g : c.groups) {
                if (!layout.has_group(g)) throw std::invalid_argument("channel '" + c.name + "' references unknown group '" + g + "'");
                if (!seen_groups.insert(g).second) throw std::invalid_argument("group '" + g + "' is in more than one channel");
            }
        }
    }

    /// Group voltages for channel voltages x.
    std::map<std::string, double> expand(const Eigen::VectorXd& x) const {
        if (x.size() != Eigen::Index(channels.size())) throw std::invalid_argument("voltage vector size mismatch");
        std::map<std::string, double> v;
        for (std::size_t i = 0; i < channels.size(); ++i)
            for (const auto& g : channels[i].groups) v[g] = x[Eigen::Index(i)];
        return v;
    }

    /// Twin trap, periodic multiwells: per side the three segment phases
    /// (counted globally along z so the period-3 pattern continues through
    /// the center) and the outer DC rail.
    static ElectrodeGrouping twin_periodic() {
        ElectrodeGrouping g;
        for (const auto& [side, s] : {std::pair{"W", "l"}, std::pair{"E", "r"}}) {
            const std::string S(side), t(s);
            g.channels.push_back({"DC1" + t, {"DC1-N" + S, "DCA-N" + S, "DC2-S" + S}});
            g.channels.push_back({"DC2" + t, {"DC2-N" + S, "DC1-S" + S, "DCA-S" + S}});
            g.channels.push_back({"DC3" + t, {"DC3-N" + S, "DC3-S" + S, "DCZ1-" + S, "DCZ2-" + S, "DCZ3-" + S}});
            g.channels.push_back({"DCE" + t, {"DCE-N" + S, "DCE-S" + S, "DCD-" + S}});
        }
        return g;
    }

    /// Twin trap, interaction zone: voltages mirror-symmetric about the
    /// central RF rail and about z = 0, so one central and one outer site
    /// fix the whole lattice.
    static ElectrodeGrouping twin_interaction() {
        ElectrodeGrouping g;
        for (const char* p : {"DC1", "DC2", "DC3", "DCA", "DCE"}) {
            const std::string P(p);
            g.channels.push_back({P, {P + "-NW", P + "-SW", P + "-NE", P + "-SE"}});
        }
        g.channels.push_back({"DCZ13", {"DCZ1-W", "DCZ3-W", "DCZ1-E", "DCZ3-E"}});
        g.channels.push_back({"DCZ2", {"DCZ2-W", "DCZ2-E"}});
        g.channels.push_back({"DCD", {"DCD-W", "DCD-E"}});
        return g;
    }

    /// Lattice array: the three shared segment phases plus DC offsets on
    /// the even and odd RF rails.
    static ElectrodeGrouping lattice_array() {
        ElectrodeGrouping g;
        for (const char* p : {"DC1", "DC2", "DC3", "RFe", "RFo"}) g.channels.push_back({p, {p}});
        return g;
    }
};

struct SiteTarget {
    Vec3 position = Vec3::Zero();
    Vec3 field = Vec3::Zero();  // V/m, DC field wanted at the site
    double omega_z = 0.0;       // rad/s
};

struct ConstraintSystem {
    Eigen::MatrixXd A;  // 4 rows per site: E_x, E_y, E_z, d2phi/dz2
    Eigen::VectorXd b;
    Eigen::VectorXd x;  // channel voltages
    double residual = 0.0;
    int rank = 0;
    std::vector<std::string> channels;
    std::vector<SiteTarget> sites;
};

inline constexpr int rows_per_site = 4;

/// Per-volt contributions of every channel to the fields at each site.
inline Eigen::MatrixXd build_constraint_matrix(const FieldModel& model, const ElectrodeGrouping& grouping,
                                               const std::vector<Vec3>& sites) {
    grouping.validate(model.layout());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows_per_site * Eigen::Index(sites.size()),
                                              Eigen::Index(grouping.channels.size()));
    for (std::size_t s = 0; s < sites.size(); ++s) {
        if (!(sites[s].y() > 0.0)) throw std::invalid_argument("constraint sites must lie above the electrode plane");
        for (std::size_t c = 0; c < grouping.channels.size(); ++c) {
            Vec3 g = Vec3::Zero();
            Mat3 h = Mat3::Zero();
            for (const auto& group : grouping.channels[c].groups)
                for (auto i : model.members(group)) {
                    Vec3 gi;
                    Mat3 hi;
                    model.basis(i).gradient_hessian(sites[s], gi, hi);
                    g += gi;
                    h += hi;
                }
            const Eigen::Index r = rows_per_site * Eigen::Index(s);
            A(r + 0, Eigen::Index(c)) = -g.x();
            A(r + 1, Eigen::Index(c)) = -g.y();
            A(r + 2, Eigen::Index(c)) = -g.z();
            A(r + 3, Eigen::Index(c)) = h(2, 2);
        }
    }
    return A;
}

/// How the free directions of an underdetermined system are fixed.
enum class Gauge {
    MinimumNorm,  // smallest |x|
    ZeroSum,      // smallest |x| among sets whose channel voltages sum to zero
};

/// Exact solution for square systems, minimum-norm otherwise; singular
/// values below 1e-10 of the largest are truncated. Throws if the rows are
/// not independent. The result is checked against a fresh field evaluation.
inline ConstraintSystem solve_voltages(const FieldModel& model, const ElectrodeGrouping& grouping,
                                       const IonSpecies& species, const std::vector<SiteTarget>& targets,
                                       Gauge gauge = Gauge::MinimumNorm) {
    species.validate();
    if (targets.empty()) throw std::invalid_argument("no target sites");
    ConstraintSystem cs;
    cs.channels = grouping.names();
    cs.sites = targets;
    std::vector<Vec3> pos;
    for (const auto& t : targets) {
        if (!(t.omega_z >= 0.0) || !std::isfinite(t.omega_z)) throw std::invalid_argument("axial frequency target must be non-negative");
        pos.push_back(t.position);
    }
    cs.A = build_constraint_matrix(model, grouping, pos);
    const Eigen::Index m = cs.A.rows(), n = cs.A.cols();
    cs.b.resize(m);
    for (std::size_t s = 0; s < targets.size(); ++s) {
        const Eigen::Index r = rows_per_site * Eigen::Index(s);
        cs.b.segment<3>(r) = targets[s].field;
        cs.b[r + 3] = species.mass * targets[s].omega_z * targets[s].omega_z / species.charge;
    }
    // Row scaling only conditions the rank test; the minimum-norm solution
    // of a consistent full-row-rank system does not depend on it.
    Eigen::VectorXd scale(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double nrm = cs.A.row(i).norm();
        scale[i] = nrm > 0.0 ? 1.0 / nrm : 1.0;
    }
    Eigen::MatrixXd As = scale.asDiagonal() * cs.A;
    Eigen::VectorXd bs = scale.asDiagonal() * cs.b;
    Eigen::Index rows = m;
    if (gauge == Gauge::ZeroSum && n > m) {
        As.conservativeResize(m + 1, n);
        bs.conservativeResize(m + 1);
        As.row(m).setConstant(1.0 / std::sqrt(double(n)));
        bs[m] = 0.0;
        rows = m + 1;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-10 * (sv.size() ? sv[0] : 0.0);
    cs.rank = int((sv.array() > cutoff).count());
    if (cs.rank < rows) {
        if (rows > m && cs.rank == m)
            throw NumericalError("zero-sum gauge is not independent of the field constraints for this grouping");
        std::ostringstream os;
        os << "constraint matrix is rank deficient (rank " << cs.rank << " of " << m << " rows, " << n
           << " channels); the grouping cannot control these sites independently";
        throw NumericalError(os.str());
    }
    if (rows > m) cs.rank = int(m);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
    cs.x = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * bs;
    cs.residual = (cs.A * cs.x - cs.b).norm();

    // independent re-evaluation, electrode by electrode
    DriveConfig d;
    d.rf_angular_frequency = 1.0;
    d.dc_voltages = grouping.expand(cs.x);
    const auto shared = std::shared_ptr<const FieldModel>(&model, [](const FieldModel*) {});
    const Landscape land(shared, d, species);
    const double curv_ref = cs.b.size() ? std::max(1.0, cs.b.cwiseAbs().maxCoeff()) : 1.0;
    for (std::size_t s = 0; s < targets.size(); ++s) {
        const FieldSample f = land.sample(targets[s].position);
        const Eigen::Index r = rows_per_site * Eigen::Index(s);
        const double sim[4] = {f.e_dc.x(), f.e_dc.y(), f.e_dc.z(), f.hessian_dc(2, 2)};
        for (int k = 0; k < 4; ++k) {
            const double want = cs.b[r + k];
            const double ref = k < 3 ? 1.0 : 1e-6 * curv_ref;
            if (std::abs(sim[k] - want) > 1e-3 * std::max(std::abs(want), ref)) {
                std::ostringstream os;
                os << "voltage set fails verification at site " << s << " row " << k << ": wanted " << want
                   << ", got " << sim[k];
                throw NumericalError(os.str());
            }
        }
    }
    return cs;
}

// ---------------------------------------------------------------------------
// RF drive

/// RF amplitudes as weights times a common amplitude U.
inline std::map<std::string, double> scaled_amplitudes(const std::map<std::string, double>& weights, double u) {
    std::map<std::string, double> a;
    for (const auto& [g, w] : weights) a[g] = w * u;
    return a;
}

inline double q_for_amplitude(std::shared_ptr<const FieldModel> model, const IonSpecies& species,
                              const std::map<std::string, double>& weights, double u, double omega,
                              const Vec3& null_guess) {
    DriveConfig d;
    d.rf_angular_frequency = omega;
    d.rf_amplitudes = scaled_amplitudes(weights, u);
    return stability_q(Landscape(std::move(model), d, species), null_guess);
}

/// Common amplitude U for which q = q_target at fixed omega (bisection).
inline double bisect_rf_amplitude(std::shared_ptr<const FieldModel> model, const IonSpecies& species,
                                  const std::map<std::string, double>& weights, double omega, double q_target,
                                  const Vec3& null_guess) {
    if (!(q_target > 0.0 && q_target < 0.9)) throw std::invalid_argument("q target must lie in (0, 0.9)");
    if (!(omega > 0.0)) throw std::invalid_argument("RF angular frequency must be positive");
    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (q_for_amplitude(model, species, weights, hi, omega, null_guess) < q_target) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 40) throw NumericalError("RF amplitude bisection failed to bracket the q target");
    }
    for (int it = 0; it < 100 && hi - lo > 1e-10 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (q_for_amplitude(model, species, weights, mid, omega, null_guess) < q_target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct RfDriveRequest {
    double u_max = 400.0;
    double q_target = 0.4;
    std::map<std::string, double> default_weights;  // all 1 normally
    std::map<std::string, double> reduced_weights;  // least efficient configuration, largest weight 1
    Vec3 default_null_guess = Vec3::Zero();
    Vec3 reduced_null_guess = Vec3::Zero();
    std::optional<double> fixed_omega;               // skip the frequency choice
};

struct RfDriveChoice {
    DriveConfig drive;  // RF part, default configuration
    double u_default = 0.0;
};

/// Omega is fixed by q = q_target at u_max in the reduced configuration;
/// then the default amplitude is bisected for q = q_target at that omega.
inline RfDriveChoice choose_rf_drive(std::shared_ptr<const FieldModel> model, const IonSpecies& species,
                                     const RfDriveRequest& req) {
    species.validate();
    if (!(req.u_max > 0.0)) throw std::invalid_argument("maximum RF amplitude must be positive");
    if (!(req.q_target > 0.0 && req.q_target < 0.9)) throw std::invalid_argument("q target must lie in (0, 0.9)");
    double omega;
    if (req.fixed_omega) {
        omega = *req.fixed_omega;
    } else {
        // q scales as U / omega^2
        const double ref = angular(10e6);
        const double q = q_for_amplitude(model, species, req.reduced_weights, req.u_max, ref, req.reduced_null_guess);
        omega = ref * std::sqrt(q / req.q_target);
    }
    RfDriveChoice c;
    c.u_default = bisect_rf_amplitude(model, species, req.default_weights, omega, req.q_target, req.default_null_guess);
    c.drive.rf_angular_frequency = omega;
    c.drive.rf_amplitudes = scaled_amplitudes(req.default_weights, c.u_default);
    return c;
}

// ---------------------------------------------------------------------------
// RF null spacing

struct SpacingRequest {
    std::map<std::string, double> weights;  // RF groups at ratio 1
    std::string attenuated_group;
    Vec3 left_guess = Vec3::Zero();         // the two nulls flanking the attenuated rail at ratio 1
    Vec3 right_guess = Vec3::Zero();
    double target = 40e-6;
    double tolerance = 0.2e-6;
    double ratio_step = 0.05;
};

struct SpacingResult {
    double ratio = 1.0;  // amplitude on the attenuated group relative to the others
    double spacing = 0.0;
    Vec3 left = Vec3::Zero(), right = Vec3::Zero();
};

/// Bisection on the attenuation ratio until the two RF nulls flanking the
/// attenuated rail are `target` apart. The null positions depend only on the
/// ratio, not on amplitude or frequency.
inline SpacingResult tune_null_spacing(std::shared_ptr<const FieldModel> model, const IonSpecies& species,
                                       const SpacingRequest& req) {
    if (!req.weights.count(req.attenuated_group))
        throw std::invalid_argument("attenuated group '" + req.attenuated_group + "' is not among the RF groups");
    if (!(req.target > 0.0)) throw std::invalid_argument("spacing target must be positive");
    auto nulls_at = [&](double ratio, const Vec3& gl, const Vec3& gr) {
        auto w = req.weights;
        w[req.attenuated_group] *= ratio;
        DriveConfig d;
        d.rf_angular_frequency = 1.0;
        d.rf_amplitudes = w;
        const Landscape land(model, d, species);
        SpacingResult s;
        s.ratio = ratio;
        s.left = find_rf_null(land, gl);
        s.right = find_rf_null(land, gr);
        s.spacing = s.right.x() - s.left.x();
        return s;
    };
    SpacingResult hi = nulls_at(1.0, req.left_guess, req.right_guess);
    if (!(hi.spacing > 0.0)) throw NumericalError("RF nulls are not separated at full amplitude");
    if (hi.spacing <= req.target) throw std::invalid_argument("spacing target is not smaller than the default spacing");
    SpacingResult lo = hi;
    double best = hi.spacing;
    // walk down in ratio, tracking both nulls, until the target is crossed
    for (double r = 1.0 - req.ratio_step;; r -= req.ratio_step) {
        if (r <= 0.0) r = 0.0;
        SpacingResult s;
        try {
            s = nulls_at(r, hi.left, hi.right);
        } catch (const NumericalError&) {
            s.spacing = 0.0;
        }
        if (s.spacing <= 1e-6 || s.spacing > hi.spacing + 1e-6) {
            // nulls merged or lost: refine the bracket before giving up
            double a = hi.ratio, b = r;
            bool crossed = false;
            for (int it = 0; it < 40 && !crossed; ++it) {
                const double mid = 0.5 * (a + b);
                SpacingResult t;
                bool ok = true;
                try {
                    t = nulls_at(mid, hi.left, hi.right);
                } catch (const NumericalError&) {
                    ok = false;
                }
                if (ok && t.spacing > 1e-6 && t.spacing <= hi.spacing + 1e-6) {
                    best = std::min(best, t.spacing);
                    if (t.spacing <= req.target) {
                        s = t;
                        crossed = true;
                    } else {
                        hi = t;
                        a = mid;
                    }
                } else {
                    b = mid;
                }
            }
            if (!crossed) {
                std::ostringstream os;
                os << "spacing target " << req.target / um << " um is unreachable: nulls merge below "
                   << best / um << " um";
                throw NumericalError(os.str());
            }
        }
        if (s.spacing <= req.target) {
            lo = s;
            break;
        }
        hi = s;
        best = std::min(best, s.spacing);
        if (r == 0.0) {
            std::ostringstream os;
            os << "spacing target " << req.target / um << " um is unreachable: minimum spacing " << best / um << " um";
            throw NumericalError(os.str());
        }
    }
    // bisection between hi (spacing above target) and lo (below)
    SpacingResult mid = lo;
    for (int it = 0; it < 60; ++it) {
        if (std::abs(lo.spacing - req.target) <= 0.1 * req.tolerance) return lo;
        if (std::abs(hi.spacing - req.target) <= 0.1 * req.tolerance) return hi;
        mid = nulls_at(0.5 * (lo.ratio + hi.ratio), hi.left, hi.right);
        if (std::abs(mid.spacing - req.target) <= 0.1 * req.tolerance) return mid;
        (mid.spacing > req.target ? hi : lo) = mid;
        if (hi.ratio - lo.ratio < 1e-12) break;
    }
    if (std::abs(mid.spacing - req.target) > req.tolerance)
        throw NumericalError("spacing bisection did not reach the tolerance");
    return mid;
}

}  // namespace trapsim
