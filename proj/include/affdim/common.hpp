#ifndef AFFDIM_COMMON_HPP
#define AFFDIM_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace affdim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Largest ambient dimension accepted anywhere in the library. binom(12,6)=924
// keeps every compound matrix below a million entries.
inline constexpr int max_dimension = 12;

//
// error types
//

// Input violates a documented precondition (bad sizes, ranges, schema).
class invalid_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A map that must be nonsingular (or well conditioned) is not.
class singular_map : public invalid_input {
public:
    using invalid_input::invalid_input;
};

// The input is valid but outside what an algorithm handles
// (e.g. complex eigenvalues in the two-map criterion).
class unsupported : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An enumeration would exceed its configured size cap.
class cap_exceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
        throw invalid_input(what);
}

inline void require_dimension(int d)
{
    require(d >= 1 && d <= max_dimension,
            "dimension " + std::to_string(d) + " outside [1, " + std::to_string(max_dimension) + "]");
}

inline void require_square(const Matrix& a, const char* name)
{
    require(a.rows() == a.cols() && a.rows() >= 1,
            std::string(name) + " must be a nonempty square matrix");
    require_dimension(int(a.rows()));
}

// binomial coefficient for the small arguments used here (exact in uint64)
inline std::uint64_t binom(int n, int k)
{
    if (k < 0 || k > n)
        return 0;
    if (k > n - k)
        k = n - k;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * std::uint64_t(n - k + i) / std::uint64_t(i);
    return r;
}

// n0 = max_m binom(d, m)
inline std::uint64_t max_binom(int d)
{
    return binom(d, d / 2);
}

}  // namespace affdim

#endif  // AFFDIM_COMMON_HPP
