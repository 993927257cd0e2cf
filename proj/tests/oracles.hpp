#ifndef AFFDIM_TESTS_ORACLES_HPP
#define AFFDIM_TESTS_ORACLES_HPP

// Reference implementations used only by the tests. They share no code with
// the library: determinants by the Leibniz formula, index sets from bit
// masks, singular values from the symmetric eigenproblem of T^T T.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline int permutation_sign(const std::vector<int>& p)
{
    int inversions = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            if (p[i] > p[j])
                ++inversions;
    return inversions % 2 ? -1 : 1;
}

inline double leibniz_det(const Matrix& a)
{
    const int n = int(a.rows());
    if (n == 0)
        return 1.0;
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    double total = 0.0;
    do {
        double term = permutation_sign(p);
        for (int i = 0; i < n; ++i)
            term *= a(i, p[std::size_t(i)]);
        total += term;
    } while (std::next_permutation(p.begin(), p.end()));
    return total;
}

// all m-subsets of {0..d-1} in lexicographic order
inline std::vector<std::vector<int>> subsets(int d, int m)
{
    std::vector<std::vector<int>> out;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        if (__builtin_popcount(mask) != m)
            continue;
        std::vector<int> s;
        for (int i = 0; i < d; ++i)
            if (mask & (1u << i))
                s.push_back(i);
        out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline double minor_of(const Matrix& a, const std::vector<int>& rows, const std::vector<int>& cols)
{
    Matrix sub(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            sub(Eigen::Index(i), Eigen::Index(j)) = a(rows[i], cols[j]);
    return leibniz_det(sub);
}

inline Matrix compound(const Matrix& a, int m)
{
    const auto idx = subsets(int(a.rows()), m);
    Matrix c(idx.size(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j)
        for (std::size_t i = 0; i < idx.size(); ++i)
            c(Eigen::Index(j), Eigen::Index(i)) = minor_of(a, idx[j], idx[i]);
    return c;
}

// Pluecker coordinates of the span of the columns (d x m)
inline Vector plucker(const Matrix& columns)
{
    const int d = int(columns.rows());
    const int m = int(columns.cols());
    const auto idx = subsets(d, m);
    std::vector<int> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    Vector p(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j)
        p[Eigen::Index(j)] = minor_of(columns, idx[j], all);
    return p;
}

// descending singular values
inline Vector singular_values(const Matrix& t)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(t.transpose() * t);
    Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<double>());
    return ev;
}

// Phi^s from a descending spectrum, written out case by case
inline double phi(const Vector& sigma, double s)
{
    const int d = int(sigma.size());
    if (s <= 0.0)
        return 1.0;
    if (s >= d) {
        double p = 1.0;
        for (int i = 0; i < d - 1; ++i)
            p *= sigma[i];
        return p * std::pow(sigma[d - 1], s - d + 1);
    }
    const int m = int(std::ceil(s));
    double p = 1.0;
    for (int i = 0; i < m - 1; ++i)
        p *= sigma[i];
    return p * std::pow(sigma[m - 1], s - m + 1);
}

// sum over all words of length k of Phi^s of the product, by recursion
inline double partition_sum(const std::vector<Matrix>& maps, int k, double s, const Matrix& prefix)
{
    if (k == 0)
        return phi(singular_values(prefix), s);
    double total = 0.0;
    for (const auto& t : maps)
        total += partition_sum(maps, k - 1, s, prefix * t);
    return total;
}

}  // namespace oracle

#endif  // AFFDIM_TESTS_ORACLES_HPP
