#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dwave {

inline constexpr double pi = 3.14159265358979323846;

// Error taxonomy shared by every module. Messages carry "module/stage: what".
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MeshMismatch : public Error {
public:
    explicit MeshMismatch(const std::string& w) : Error("mesh-mismatch: " + w) {}
};

class InvalidParameter : public Error {
public:
    explicit InvalidParameter(const std::string& w) : Error("invalid-parameter: " + w) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& w) : Error("precondition: " + w) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& w) : Error("domain: " + w) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& w) : Error("divergence: " + w) {}
};

class InadmissibleParameter : public Error {
public:
    explicit InadmissibleParameter(const std::string& w) : Error("inadmissible-parameter: " + w) {}
};

class ConstructionError : public Error {
public:
    explicit ConstructionError(const std::string& w) : Error("construction: " + w) {}
};

class SolverError : public Error {
public:
    explicit SolverError(const std::string& w) : Error("solver: " + w) {}
};

class StagnationError : public Error {
public:
    explicit StagnationError(const std::string& w) : Error("stagnation: " + w) {}
};

// Compensated (Kahan-Neumaier) accumulator. Identity tests at 1e-12 need sums
// that do not drift with the summation order.
struct Accumulator {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

inline double sq(double x) { return x * x; }

// Quintic smoothstep: C^2 ramp with zero first and second derivatives at both ends.
inline double smoothstep5(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
inline double smoothstep5_d1(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 30.0 * u * u * sq(1.0 - u);
}
inline double smoothstep5_d2(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
}

// Even C^2 time cutoff: 1 on |t| <= plateau, 0 on |t| >= support.
struct PlateauCutoff {
    double plateau = 0.0;
    double support = 1.0;

    double operator()(double t) const {
        return smoothstep5((support - std::abs(t)) / (support - plateau));
    }
    double d1(double t) const {
        double w = support - plateau;
        double s = (t >= 0.0) ? -1.0 : 1.0;
        return s * smoothstep5_d1((support - std::abs(t)) / w) / w;
    }
    double d2(double t) const {
        double w = support - plateau;
        return smoothstep5_d2((support - std::abs(t)) / w) / (w * w);
    }
};

} // namespace dwave
