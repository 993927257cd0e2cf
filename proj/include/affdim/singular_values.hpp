#ifndef AFFDIM_SINGULAR_VALUES_HPP
#define AFFDIM_SINGULAR_VALUES_HPP

#include <cmath>
#include <string>
#include <vector>

#include <affdim/common.hpp>

namespace affdim {

// sigma_1 >= ... >= sigma_d > 0
class SingularSpectrum {
public:
    explicit SingularSpectrum(Vector sigma)
        : sigma_(std::move(sigma))
    {
        require(sigma_.size() >= 1, "empty singular spectrum");
        for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
            require(sigma_[i] > 0.0, "singular values must be strictly positive");
            require(i == 0 || sigma_[i - 1] >= sigma_[i], "singular values must be descending");
        }
    }

    int dim() const { return int(sigma_.size()); }
    const Vector& values() const { return sigma_; }
    double operator[](int i) const { return sigma_[i]; }
    double largest() const { return sigma_[0]; }
    double smallest() const { return sigma_[sigma_.size() - 1]; }
    double condition() const { return largest() / smallest(); }

    // log of the singular value function, see phi()
    double log_phi(double s) const
    {
        require(s >= 0.0, "singular value function needs s >= 0");
        const int d = dim();
        if (s == 0.0)
            return 0.0;
        // full factors sigma_1..sigma_{m-1}, fractional exponent on sigma_m;
        // integer s = m takes the left limit sigma_1 ... sigma_m
        int m = int(std::ceil(s));
        if (m > d)
            m = d;
        double acc = 0.0;
        for (int i = 0; i < m - 1; ++i)
            acc += std::log(sigma_[i]);
        return acc + (s - double(m - 1)) * std::log(sigma_[m - 1]);
    }

    double phi(double s) const { return std::exp(log_phi(s)); }

private:
    Vector sigma_;
};

namespace detail {

// relative threshold below which |det T| counts as singular
inline constexpr double singular_det_tol = 1e-14;
// condition number envelope for the checked spectrum routine
inline constexpr double max_condition = 1e8;

// singular values via two-sided Jacobi; only nonsingularity is enforced
inline SingularSpectrum spectrum_unchecked(const Matrix& t)
{
    require_square(t, "singular_values: map");
    Eigen::JacobiSVD<Matrix> svd(t);
    const Vector sv = svd.singularValues();
    const double top = sv[0];
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        log_det += std::log(sv[i]);
    if (!(top > 0.0) || !std::isfinite(log_det)
        || log_det <= std::log(singular_det_tol) + double(sv.size()) * std::log(top))
        throw singular_map("map is singular (|det T| <= 1e-14 * |T|^d); a non-singular linear map is required");
    return SingularSpectrum(sv);
}

}  // namespace detail

//
// Singular values of a nonsingular d x d map, descending. Rejects singular
// input and input whose condition number exceeds 1e8, outside which the
// 1e-10 relative accuracy contract is not guaranteed.
//
inline SingularSpectrum singular_values(const Matrix& t)
{
    auto sp = detail::spectrum_unchecked(t);
    if (sp.condition() > detail::max_condition)
        throw singular_map("condition number " + std::to_string(sp.condition())
                           + " exceeds the supported envelope 1e8");
    return sp;
}

//
// singular value function
//   Phi^s(T) = sigma_1 ... sigma_{m-1} sigma_m^{s-m+1},  m-1 <= s < m <= d
//   Phi^s(T) = sigma_1 ... sigma_{d-1} sigma_d^{s-d+1},  s > d
//
inline double phi(const Matrix& t, double s)
{
    require(s >= 0.0, "singular value function needs s >= 0");
    return detail::spectrum_unchecked(t).phi(s);
}

}  // namespace affdim

#endif  // AFFDIM_SINGULAR_VALUES_HPP
