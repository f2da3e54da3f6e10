#include "cdfagg/rng.hpp"

#include <boost/math/distributions/normal.hpp>

namespace cdfagg {

double Rng::normal() {
    static const boost::math::normal_distribution<double> unit{};
    return boost::math::quantile(unit, uniform01());
}

} // namespace cdfagg
