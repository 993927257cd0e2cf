#ifndef AFFDIM_TESTS_STATS_HPP
#define AFFDIM_TESTS_STATS_HPP

#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace stats {

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

// goodness of fit of samples >= 1 against Geometric(p) on {1, 2, ...};
// cells are merged from the tail until every expected count is >= 5
inline ChiSquare geometric_fit(const std::vector<int>& samples, double p)
{
    const double n = double(samples.size());
    std::vector<double> expected, observed;
    double tail = 1.0;
    for (int j = 1;; ++j) {
        const double prob = p * std::pow(1.0 - p, j - 1);
        if (n * (tail - prob) < 5.0)
            break;
        expected.push_back(n * prob);
        tail -= prob;
    }
    expected.push_back(n * tail);
    observed.assign(expected.size(), 0.0);
    for (int g : samples) {
        const std::size_t cell = std::min<std::size_t>(std::size_t(g - 1), expected.size() - 1);
        observed[cell] += 1.0;
    }
    ChiSquare out;
    for (std::size_t i = 0; i < expected.size(); ++i)
        out.statistic += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    out.dof = int(expected.size()) - 1;
    out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.dof), out.statistic));
    return out;
}

}  // namespace stats

#endif  // AFFDIM_TESTS_STATS_HPP
