#pragma once

// Unit-voltage potential of a planar electrode in the gapless-plane
// approximation: the electrode is a patch at 1 V in an otherwise grounded
// y = 0 plane. The potential is the subtended solid angle over 2 pi, its
// gradient an edge (line-integral) sum, and higher derivatives come from
// forward-mode differentiation of the edge sum.
//
// An optional grounded plane at y = H is represented by the image series
//   phi(y) = sum_{n=0..K} phi0(y + 2nH) - sum_{n=1..K+1} phi0(2nH - y)
// which vanishes exactly at y = H for every K. K = 0 is the bare mirror in
// the top plane; K = 1 adds the reflection of that mirror back in the chip
// plane, the smallest set that grounds both planes to first order. Larger K
// converges to the exact infinite parallel plane.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "trapsim/dual.hpp"
#include "trapsim/geometry.hpp"

namespace trapsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Third derivatives: t[k](i, j) = d^3 phi / dx_i dx_j dx_k.
using Tensor3 = std::array<Mat3, 3>;

template <class T>
using V3 = std::array<T, 3>;

template <class T, int N>
Dual<T, N> operator-(double s, const Dual<T, N>& a) { return Dual<T, N>(s) - a; }

namespace detail {

constexpr double inv_two_pi = 0.5 / std::numbers::pi;

/// Signed solid angle of triangle (a, b, c) seen from the origin.
inline double triangle_solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    return 2.0 * std::atan2(num, den);
}

/// Solid angle of polygon p over 2 pi, odd in y, orientation independent.
inline double polygon_fraction(const Polygon& poly, double orient, double x, double y, double z) {
    const Vec3 v0(poly[0].x - x, -y, poly[0].z - z);
    double omega = 0.0;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        const Vec3 v1(poly[i].x - x, -y, poly[i].z - z);
        const Vec3 v2(poly[i + 1].x - x, -y, poly[i + 1].z - z);
        omega += triangle_solid_angle(v0, v1, v2);
    }
    return orient * omega * inv_two_pi;
}

/// Gradient of polygon_fraction via the edge sum. Works for double and Dual.
template <class T>
void polygon_gradient_accumulate(const Polygon& poly, double orient, const V3<T>& p, V3<T>& g) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const PlanePoint& A = poly[i];
        const PlanePoint& B = poly[(i + 1) % n];
        const double ex = B.x - A.x, ez = B.z - A.z;
        const double len = std::sqrt(ex * ex + ez * ez);
        if (len == 0.0) continue;
        const double ux = ex / len, uz = ez / len;
        const T ax = A.x - p[0], ay = 0.0 - p[1], az = A.z - p[2];
        const T bx = B.x - p[0], by = 0.0 - p[1], bz = B.z - p[2];
        using std::sqrt;
        const T la = sqrt(ax * ax + ay * ay + az * az);
        const T lb = sqrt(bx * bx + by * by + bz * bz);
        // c = u x a with u = (ux, 0, uz)
        const T cx = 0.0 - ay * uz;
        const T cy = ax * uz - az * ux;
        const T cz = ay * ux;
        const T d2 = cx * cx + cy * cy + cz * cz;
        const T ka = (ax * ux + az * uz) / la;
        const T kb = (bx * ux + bz * uz) / lb;
        const T f = (ka - kb) / d2 * (orient * inv_two_pi);
        g[0] += cx * f;
        g[1] += cy * f;
        g[2] += cz * f;
    }
}

}  // namespace detail

/// Basis function of one electrode (all its polygons) with the optional
/// top ground plane.
/// Truncation of the top-plane image series.
struct ImageSeries {
    int terms = -1;           // K; negative: choose K from `tolerance`
    double tolerance = 1e-4;  // residual at the electrode plane, volts per volt
    int max_terms = 32;

    static ImageSeries converged(double tolerance = 1e-4) { return {-1, tolerance, 32}; }
    static ImageSeries fixed(int k) { return {k, 0.0, k}; }
};

class ElectrodeBasis {
public:
    ElectrodeBasis() = default;
    ElectrodeBasis(const PolygonElectrode& e, std::optional<double> top_height, ImageSeries images = {})
        : polygons_(e.polygons), top_(top_height.value_or(0.0)), has_top_(top_height.has_value()) {
        for (const auto& p : polygons_) orient_.push_back(signed_area(p) >= 0 ? 1.0 : -1.0);
        if (has_top_ && images.terms >= 0) {
            images_ = images.terms;
        } else if (has_top_) {
            // Residual of the truncated series at the electrode plane is about
            // A / (2 pi (2 (K+1) H)^2); grow K until it is below tolerance.
            const double a = e.area();
            images_ = 0;
            while (images_ < images.max_terms &&
                   a / (2.0 * std::numbers::pi * std::pow(2.0 * (images_ + 1) * top_, 2)) > images.tolerance)
                ++images_;
        }
    }

    int image_terms() const { return images_; }

    double potential(const Vec3& r) const {
        check(r);
        if (!has_top_) return direct(r.x(), r.y(), r.z());
        double s = 0.0;
        for (int n = 0; n <= images_; ++n) s += direct(r.x(), r.y() + 2 * n * top_, r.z());
        for (int n = 1; n <= images_ + 1; ++n) s -= direct(r.x(), 2 * n * top_ - r.y(), r.z());
        return s;
    }

    Vec3 gradient(const Vec3& r) const {
        check(r);
        V3<double> p{r.x(), r.y(), r.z()};
        V3<double> g = sum_gradient(p);
        return {g[0], g[1], g[2]};
    }

    Mat3 hessian(const Vec3& r) const {
        check(r);
        using D = Dual<double, 3>;
        V3<D> p{D::variable(r.x(), 0), D::variable(r.y(), 1), D::variable(r.z(), 2)};
        V3<D> g = sum_gradient(p);
        Mat3 h;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h(i, j) = g[i].d[j];
        return 0.5 * (h + h.transpose());
    }

    /// Gradient and Hessian together (one differentiated pass).
    void gradient_hessian(const Vec3& r, Vec3& grad, Mat3& hess) const {
        check(r);
        using D = Dual<double, 3>;
        V3<D> p{D::variable(r.x(), 0), D::variable(r.y(), 1), D::variable(r.z(), 2)};
        V3<D> g = sum_gradient(p);
        for (int i = 0; i < 3; ++i) {
            grad[i] = g[i].v;
            for (int j = 0; j < 3; ++j) hess(i, j) = g[i].d[j];
        }
        hess = 0.5 * (hess + hess.transpose());
    }

    /// Gradient, Hessian and third-derivative tensor.
    void derivatives3(const Vec3& r, Vec3& grad, Mat3& hess, Tensor3& third) const {
        check(r);
        using D1 = Dual<double, 3>;
        using D2 = Dual<D1, 3>;
        V3<D2> p;
        for (int i = 0; i < 3; ++i) {
            D1 inner = D1::variable(r[i], i);
            p[i] = D2::variable(inner, i);
        }
        V3<D2> g = sum_gradient(p);
        for (int i = 0; i < 3; ++i) {
            grad[i] = g[i].v.v;
            for (int j = 0; j < 3; ++j) {
                hess(i, j) = g[i].d[j].v;
                for (int k = 0; k < 3; ++k) third[k](i, j) = g[i].d[j].d[k];
            }
        }
    }

private:
    void check(const Vec3& r) const {
        if (!(r.y() > 0.0)) throw std::domain_error("basis functions are defined only above the electrode plane (y > 0)");
        if (has_top_ && !(r.y() < top_)) throw std::domain_error("point lies at or above the top ground plane");
    }

    double direct(double x, double y, double z) const {
        double s = 0.0;
        for (std::size_t i = 0; i < polygons_.size(); ++i)
            s += detail::polygon_fraction(polygons_[i], orient_[i], x, y, z);
        return s;
    }

    template <class T>
    void direct_gradient(const V3<T>& p, V3<T>& g) const {
        for (std::size_t i = 0; i < polygons_.size(); ++i)
            detail::polygon_gradient_accumulate(polygons_[i], orient_[i], p, g);
    }

    template <class T>
    V3<T> sum_gradient(const V3<T>& p) const {
        V3<T> g{T(0.0), T(0.0), T(0.0)};
        direct_gradient(p, g);
        if (!has_top_) return g;
        for (int n = 1; n <= images_; ++n) direct_gradient(V3<T>{p[0], p[1] + 2.0 * n * top_, p[2]}, g);
        // d/dy of -phi0(2nH - y) is +phi0_y at the mirrored point; the
        // x and z components carry the minus sign.
        for (int n = 1; n <= images_ + 1; ++n) {
            V3<T> m{p[0], (2.0 * n * top_) - p[1], p[2]};
            V3<T> gm{T(0.0), T(0.0), T(0.0)};
            direct_gradient(m, gm);
            g[0] -= gm[0];
            g[1] += gm[1];
            g[2] -= gm[2];
        }
        return g;
    }

    std::vector<Polygon> polygons_;
    std::vector<double> orient_;
    double top_ = 0.0;
    bool has_top_ = false;
    int images_ = 0;
};

}  // namespace trapsim
