#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace boltzgap {

constexpr double pi = std::numbers::pi;

// Velocities are stored with three slots; for N = 2 the last one stays 0.
using Vec = std::array<double, 3>;

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot deliver a trustworthy result.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), field(std::move(path)) {}
    std::string field;
};

inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }
inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }

// |S^{k}| = 2 pi^{(k+1)/2} / Gamma((k+1)/2)
inline double sphere_area(int k) {
    if (k < 0) throw DomainError("sphere_area: negative dimension");
    if (k == 0) return 2.0;
    double h = 0.5 * (k + 1);
    return 2.0 * std::pow(pi, h) / std::tgamma(h);
}

inline double japanese(double r) { return std::sqrt(1.0 + r * r); }

// Orthonormal frame whose last axis is e (unit vector), N = 3.
inline void frame_from_axis(const Vec& e, Vec& e1, Vec& e2) {
    Vec a = std::abs(e[0]) < 0.9 ? Vec{1, 0, 0} : Vec{0, 1, 0};
    double d = dot(a, e);
    e1 = a - d * e;
    e1 = (1.0 / norm(e1)) * e1;
    e2 = {e[1] * e1[2] - e[2] * e1[1], e[2] * e1[0] - e[0] * e1[2], e[0] * e1[1] - e[1] * e1[0]};
}

}  // namespace boltzgap
