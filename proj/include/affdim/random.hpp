#ifndef AFFDIM_RANDOM_HPP
#define AFFDIM_RANDOM_HPP

//
// Seeded random streams. Every randomized routine derives one independent
// engine per sample index from (seed, index), so results do not depend on
// how the samples are split across workers.
//

#include <cstdint>
#include <random>

#include <affdim/common.hpp>

namespace affdim {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// engine for sample `index` of the stream named by `seed`
inline Engine stream(std::uint64_t seed, std::uint64_t index)
{
    return Engine(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ull)));
}

inline Vector gaussian_vector(Engine& rng, int d)
{
    std::normal_distribution<double> n01;
    Vector v(d);
    for (int i = 0; i < d; ++i)
        v[i] = n01(rng);
    return v;
}

inline Matrix gaussian_matrix(Engine& rng, int rows, int cols)
{
    std::normal_distribution<double> n01;
    Matrix a(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            a(i, j) = n01(rng);
    return a;
}

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed)
inline Matrix random_orthogonal(Engine& rng, int d)
{
    const Matrix g = gaussian_matrix(rng, d, d);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i)
        if (r(i, i) < 0.0)
            q.col(i) *= -1.0;
    return q;
}

inline Vector uniform_vector(Engine& rng, int d, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(d);
    for (int i = 0; i < d; ++i)
        v[i] = u(rng);
    return v;
}

}  // namespace affdim

#endif  // AFFDIM_RANDOM_HPP
