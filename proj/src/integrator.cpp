#include "qdd/integrator.hpp"

namespace qdd {

std::string to_string(TimeScheme scheme) {
    switch (scheme) {
        case TimeScheme::euler: return "euler";
        case TimeScheme::euler_extrapolated: return "euler_extrapolated";
        case TimeScheme::bdf2: return "bdf2";
    }
    return "unknown";
}

std::string to_string(JacobianMode mode) {
    return mode == JacobianMode::analytic ? "analytic" : "finite_difference";
}

TimeScheme time_scheme_from_string(const std::string& name) {
    if (name == "euler") return TimeScheme::euler;
    if (name == "euler_extrapolated") return TimeScheme::euler_extrapolated;
    if (name == "bdf2") return TimeScheme::bdf2;
    fail(ErrorKind::invalid_argument, "unknown time scheme '" + name + "'");
}

JacobianMode jacobian_mode_from_string(const std::string& name) {
    if (name == "analytic") return JacobianMode::analytic;
    if (name == "finite_difference") return JacobianMode::finite_difference;
    fail(ErrorKind::invalid_argument, "unknown jacobian mode '" + name + "'");
}

}  // namespace qdd
