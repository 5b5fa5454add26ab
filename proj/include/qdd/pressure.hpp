#pragma once

#include <string>

namespace qdd {

struct PressureValues {
    double p;
    double dp;
    double d2p;
};

/// Pressure law p(rho) = coeff * rho^gamma with p'(rho) > 0 for rho > 0.
class PressureLaw {
public:
    enum class Kind { power };

    static PressureLaw power(double gamma, double coeff = 1.0);

    Kind kind() const noexcept { return kind_; }
    double gamma() const noexcept { return gamma_; }
    double coeff() const noexcept { return coeff_; }

    /// (p, p', p'') at rho; throws domain-error for rho <= 0.
    PressureValues eval(double rho) const;

    double p(double rho) const { return eval(rho).p; }
    double dp(double rho) const { return eval(rho).dp; }

    /// (p(m+q) - p(m-q)) / 2 and (p'(m+q) - p'(m-q)) / 2 without cancellation.
    /// Both are odd in q bit-for-bit: half_difference(m, -q) == -half_difference(m, q).
    PressureValues half_difference(double mean, double half_gap) const;

    std::string describe() const;

private:
    PressureLaw(Kind kind, double gamma, double coeff) : kind_(kind), gamma_(gamma), coeff_(coeff) {}

    Kind kind_;
    double gamma_;
    double coeff_;
};

PressureValues pressure_eval(const PressureLaw& law, double rho);

}  // namespace qdd
