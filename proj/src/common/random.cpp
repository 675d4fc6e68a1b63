#include "ipop/common/random.hpp"

#include <cmath>

namespace ipop {

double Rng::normal(double mean, double stddev)
{
    // Box-Muller; one variate per call keeps the draw count fixed.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
}

} // namespace ipop
