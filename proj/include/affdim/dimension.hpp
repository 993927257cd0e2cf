#ifndef AFFDIM_DIMENSION_HPP
#define AFFDIM_DIMENSION_HPP

//
// Finite-k pressure p_k(s) = log S(k,s) / k, its zero s0 (the affinity
// dimension estimate), and a box-counting cross-check of min{s0, d} on
// enumerated attractor points.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <affdim/code_tree.hpp>
#include <affdim/common.hpp>

namespace affdim {

struct PressureCurve {
    std::vector<double> s;
    std::vector<double> p;
    std::vector<double> diagnostic;  // |p_k(s) - p_{k/2}(s)|, NaN for k = 1
    std::vector<double> std_error;   // 0 for exact enumeration
    int k = 0;
};

inline double pressure_at(const CodeTree& tree, int k, double s, const EnumerationOptions& opt = {},
                          double* std_error = nullptr)
{
    require(k >= 1, "pressure: k must be >= 1");
    const auto sum = partition_sum(tree, k, s, opt);
    if (std_error)
        *std_error = sum.exact ? 0.0 : sum.std_error / (sum.value * double(k));
    return std::log(sum.value) / double(k);
}

// finite-k pressure on a grid, checked to be strictly decreasing
inline PressureCurve pressure_curve(const CodeTree& tree, const std::vector<double>& s_grid, int k,
                                    const EnumerationOptions& opt = {})
{
    require(k >= 1 && k <= tree.depth(), "pressure_curve: k must lie in [1, depth]");
    require(!s_grid.empty(), "pressure_curve: empty s grid");
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        require(s_grid[i] >= 0.0, "pressure_curve: s must be >= 0");
        require(i == 0 || s_grid[i - 1] < s_grid[i], "pressure_curve: s grid must be ascending");
    }
    PressureCurve c;
    c.k = k;
    c.s = s_grid;
    for (double s : s_grid) {
        double se = 0.0;
        c.p.push_back(pressure_at(tree, k, s, opt, &se));
        c.std_error.push_back(se);
        c.diagnostic.push_back(k >= 2 ? std::abs(c.p.back() - pressure_at(tree, k / 2, s, opt))
                                      : std::numeric_limits<double>::quiet_NaN());
    }
    for (std::size_t i = 1; i < c.p.size(); ++i)
        if (!(c.p[i] < c.p[i - 1] + 1e-10))
            throw std::logic_error("pressure_curve: finite-k pressure is not decreasing at s = " + std::to_string(c.s[i]));
    return c;
}

struct PressureZero {
    double s0 = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double p_at_s0 = 0.0;
    int iterations = 0;
    bool nonpositive_at_zero = false;  // p(0) <= 0, s0 = 0 returned
    bool capped = false;               // p > 0 on the whole search range
    int k = 0;
};

//
// Bisection on the strictly decreasing finite-k pressure. The bracket is
// found by doubling from s = 1 (capped at s = 64).
//
inline PressureZero pressure_zero(const CodeTree& tree, int k, double tol = 1e-6, const EnumerationOptions& opt = {})
{
    require(tol > 0.0, "pressure_zero: tol must be positive");
    require(k >= 1 && k <= tree.depth(), "pressure_zero: k must lie in [1, depth]");
    PressureZero z;
    z.k = k;
    auto p = [&](double s) { return pressure_at(tree, k, s, opt); };

    const double p0 = p(0.0);
    if (p0 <= 0.0) {
        z.nonpositive_at_zero = true;
        z.p_at_s0 = p0;
        return z;
    }

    constexpr double s_cap = 64.0;
    double lo = 0.0, hi = 1.0;
    while (p(hi) > 0.0) {
        lo = hi;
        if (hi >= s_cap) {
            z.capped = true;
            z.s0 = z.bracket_lo = z.bracket_hi = s_cap;
            z.p_at_s0 = p(s_cap);
            return z;
        }
        hi *= 2.0;
    }

    constexpr int max_iterations = 60;
    double mid = 0.5 * (lo + hi);
    double pm = p(mid);
    for (int it = 0; it < max_iterations; ++it) {
        z.iterations = it + 1;
        if (pm > 0.0)
            lo = mid;
        else
            hi = mid;
        mid = 0.5 * (lo + hi);
        pm = p(mid);
        if (hi - lo <= tol && std::abs(pm) <= tol)
            break;
    }
    z.s0 = mid;
    z.bracket_lo = lo;
    z.bracket_hi = hi;
    z.p_at_s0 = pm;
    return z;
}

//
// box counting
//
struct BoxFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;    // RMS residual of the log-log fit
    double std_error = 0.0;   // standard error of the slope
    int j_min = 0;
    int j_max = 0;
    std::vector<std::size_t> counts;  // occupied boxes per j in [j_min, j_max]
};

namespace detail {

inline std::size_t occupied_boxes(const std::vector<Vector>& pts, const Vector& origin, double extent, int j)
{
    const double cells = std::ldexp(1.0, j);
    const auto d = origin.size();
    auto cell = [&](const Vector& x, Eigen::Index i) {
        const auto c = std::int64_t(std::floor((x[i] - origin[i]) / extent * cells));
        return std::clamp<std::int64_t>(c, 0, std::int64_t(cells) - 1);
    };
    if (d * j <= 64) {
        // all cell coordinates fit in one 64-bit key
        std::vector<std::uint64_t> keys;
        keys.reserve(pts.size());
        for (const auto& x : pts) {
            std::uint64_t key = 0;
            for (Eigen::Index i = 0; i < d; ++i)
                key = (key << j) | std::uint64_t(cell(x, i));
            keys.push_back(key);
        }
        std::sort(keys.begin(), keys.end());
        return std::size_t(std::unique(keys.begin(), keys.end()) - keys.begin());
    }
    std::vector<std::vector<std::int64_t>> keys;
    keys.reserve(pts.size());
    for (const auto& x : pts) {
        std::vector<std::int64_t> key(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i)
            key[std::size_t(i)] = cell(x, i);
        keys.push_back(std::move(key));
    }
    std::sort(keys.begin(), keys.end());
    return std::size_t(std::unique(keys.begin(), keys.end()) - keys.begin());
}

}  // namespace detail

//
// Least-squares slope of log N(2^-j) against j log 2 for j in [j_min, j_max],
// where N counts occupied dyadic boxes of the cloud rescaled to its
// bounding cube.
//
inline BoxFit box_dimension(const std::vector<Vector>& points, int j_min, int j_max)
{
    require(points.size() >= 1000, "box_dimension: at least 1000 points are required");
    require(j_min >= 1 && j_max > j_min, "box_dimension: need j_max > j_min >= 1");
    require(j_max <= 30, "box_dimension: j_max must be <= 30");
    const auto d = points.front().size();
    Vector lo = points.front(), hi = points.front();
    for (const auto& x : points) {
        require(x.size() == d, "box_dimension: points of different dimension");
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    const double extent = (hi - lo).maxCoeff();
    require(extent > 0.0, "box_dimension: degenerate point cloud (all points identical)");

    BoxFit fit;
    fit.j_min = j_min;
    fit.j_max = j_max;
    std::vector<double> xs, ys;
    for (int j = j_min; j <= j_max; ++j) {
        const auto n = detail::occupied_boxes(points, lo, extent, j);
        fit.counts.push_back(n);
        xs.push_back(double(j) * std::log(2.0));
        ys.push_back(std::log(double(n)));
    }
    const double n = double(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    fit.std_error = n > 2 ? std::sqrt(ss / (n - 2.0) / sxx) : 0.0;
    return fit;
}

struct DimensionReport {
    int d = 0;
    double s0 = 0.0;
    double min_s0_d = 0.0;
    PressureZero zero;
    double box_estimate = 0.0;
    double box_band = 0.0;  // two standard errors of the slope
    BoxFit box;
    std::size_t point_count = 0;
    int depth = 0;
    double sigma_hi = 0.0;
    double agreement_tol = 0.0;
    bool agrees = false;
    std::string note;
};

struct DimensionOptions {
    double zero_tol = 1e-6;
    double agreement_tol = 0.15;
    EnumerationOptions enumeration{};
};

// box-count window: j with 2^-j above the composition resolution sigma_hi^depth
// and with enough points per scale to resolve the count
inline std::pair<int, int> box_window(double sigma_hi, int depth, std::size_t point_count)
{
    const double resolution_j = double(depth) * std::log2(1.0 / sigma_hi);
    const double saturation_j = std::log2(double(point_count)) / 2.0 + 1.0;
    int j_max = int(std::floor(std::min(resolution_j - 1.0, saturation_j + 2.0)));
    j_max = std::max(j_max, 3);
    const int j_min = std::max(2, j_max - 6);
    return {j_min, j_max};
}

// window for a bare point cloud: j_max where 2^(j d) reaches the point count
inline std::pair<int, int> cloud_window(std::size_t point_count, int d)
{
    const int j_max = std::max(3, int(std::floor(std::log2(double(point_count)) / double(std::max(d, 1)))));
    return {std::max(2, j_max - 4), j_max};
}

//
// s0 from the pressure at level k, box dimension of the level-`depth`
// attractor points; requires 0 < sigma_lo <= sigma_hi < 1/2 for the maps.
//
inline DimensionReport dimension_report(const CodeTree& tree, int k, int depth, const DimensionOptions& opt = {})
{
    const auto [lo, hi] = tree.sigma_range();
    if (!(hi < 0.5))
        throw invalid_input("dimension: the dimension formula requires 0 < sigma_lo <= sigma_hi < 1/2, but sigma_hi = "
                            + std::to_string(hi));
    require(lo > 0.0, "dimension: sigma_lo must be positive");
    require(depth >= 1 && depth <= tree.depth(), "dimension: depth outside the realized tree");

    DimensionReport rep;
    rep.d = tree.dim();
    rep.depth = depth;
    rep.sigma_hi = hi;
    rep.zero = pressure_zero(tree, k, opt.zero_tol, opt.enumeration);
    rep.s0 = rep.zero.s0;
    rep.min_s0_d = std::min(rep.s0, double(rep.d));

    const auto wp = attractor_points(tree, depth, std::nullopt, opt.enumeration);
    std::vector<Vector> pts;
    pts.reserve(wp.size());
    for (const auto& p : wp)
        pts.push_back(p.point);
    rep.point_count = pts.size();
    const auto [j_min, j_max] = box_window(hi, depth, pts.size());
    rep.box = box_dimension(pts, j_min, j_max);
    rep.box_estimate = std::clamp(rep.box.slope, 0.0, double(rep.d));
    rep.box_band = 2.0 * rep.box.std_error;
    rep.agreement_tol = opt.agreement_tol;
    rep.agrees = std::abs(rep.box_estimate - rep.min_s0_d) <= opt.agreement_tol;
    rep.note = rep.agrees ? "box-count estimate agrees with min(s0, d)"
                          : "box-count estimate disagrees with min(s0, d): possibly non-generic translation assignment";
    return rep;
}

}  // namespace affdim

#endif  // AFFDIM_DIMENSION_HPP
