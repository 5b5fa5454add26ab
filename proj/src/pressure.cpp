#include "qdd/pressure.hpp"

#include <cmath>
#include <sstream>

#include "qdd/error.hpp"

namespace qdd {

namespace {

// ((1+u)^e - (1-u)^e) / 2, accurate for small |u| and exactly odd in u.
double half_power_gap(double e, double u) {
    if (e == 0.0) return 0.0;
    return 0.5 * (std::expm1(e * std::log1p(u)) - std::expm1(e * std::log1p(-u)));
}

}  // namespace

PressureLaw PressureLaw::power(double gamma, double coeff) {
    if (!(gamma >= 1.0) || !std::isfinite(gamma))
        fail(ErrorKind::invalid_argument, "pressure exponent gamma must be >= 1");
    if (!(coeff > 0.0) || !std::isfinite(coeff))
        fail(ErrorKind::invalid_argument, "pressure coefficient must be positive");
    return PressureLaw(Kind::power, gamma, coeff);
}

PressureValues PressureLaw::eval(double rho) const {
    if (!(rho > 0.0)) fail(ErrorKind::domain_error, "pressure evaluated at non-positive density " + std::to_string(rho));
    const double g = gamma_;
    const double p = coeff_ * std::pow(rho, g);
    const double dp = coeff_ * g * std::pow(rho, g - 1.0);
    const double d2p = (g == 1.0) ? 0.0 : coeff_ * g * (g - 1.0) * std::pow(rho, g - 2.0);
    return {p, dp, d2p};
}

PressureValues PressureLaw::half_difference(double mean, double half_gap) const {
    if (!(mean > 0.0) || !(mean - std::abs(half_gap) > 0.0))
        fail(ErrorKind::domain_error, "pressure evaluated at non-positive density");
    const double u = half_gap / mean;
    const double g = gamma_;
    const double p = coeff_ * std::pow(mean, g) * half_power_gap(g, u);
    const double dp = coeff_ * g * std::pow(mean, g - 1.0) * half_power_gap(g - 1.0, u);
    const double d2p =
        (g == 1.0) ? 0.0 : coeff_ * g * (g - 1.0) * std::pow(mean, g - 2.0) * half_power_gap(g - 2.0, u);
    return {p, dp, d2p};
}

std::string PressureLaw::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "power(gamma=" << gamma_ << ", coeff=" << coeff_ << ")";
    return os.str();
}

PressureValues pressure_eval(const PressureLaw& law, double rho) { return law.eval(rho); }

}  // namespace qdd
