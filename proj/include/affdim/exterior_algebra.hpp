#ifndef AFFDIM_EXTERIOR_ALGEBRA_HPP
#define AFFDIM_EXTERIOR_ALGEBRA_HPP

//
// Exterior powers Lambda^m(R^d) in coordinates.
//
// Every grade-m object is expressed in the basis of blades
// e_{i_1} ^ ... ^ e_{i_m}, i_1 < ... < i_m, enumerated in lexicographic
// order of the index tuple. Indices are 0-based. Compound matrices use the
// same order for rows and columns, so coordinate vectors and the induced
// maps on Lambda^m always agree.
//

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <affdim/common.hpp>

namespace affdim {

class MultiIndex {
public:
    MultiIndex(int d, std::vector<int> entries)
        : d_(d), entries_(std::move(entries))
    {
        require_dimension(d_);
        require(int(entries_.size()) <= d_, "multi-index longer than the dimension");
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            require(entries_[k] >= 0 && entries_[k] < d_, "multi-index entry out of range");
            require(k == 0 || entries_[k - 1] < entries_[k], "multi-index entries must be strictly ascending");
        }
    }

    static MultiIndex from_mask(int d, std::uint32_t mask)
    {
        std::vector<int> e;
        for (int i = 0; i < d; ++i)
            if (mask & (1u << i))
                e.push_back(i);
        return MultiIndex(d, std::move(e));
    }

    int dim() const { return d_; }
    int grade() const { return int(entries_.size()); }
    const std::vector<int>& entries() const { return entries_; }
    int operator[](std::size_t k) const { return entries_[k]; }

    std::uint32_t mask() const
    {
        std::uint32_t m = 0;
        for (int i : entries_)
            m |= 1u << i;
        return m;
    }

    // ascending complement {j} with {i} u {j} = {0..d-1}
    MultiIndex complement() const
    {
        const std::uint32_t full = (d_ == 32) ? ~0u : ((1u << d_) - 1u);
        return from_mask(d_, full & ~mask());
    }

    // position of this index among all grade-m indices in lexicographic order
    std::size_t position() const;

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

private:
    int d_;
    std::vector<int> entries_;
};

namespace detail {

struct blade_table {
    std::vector<MultiIndex> by_position;
    std::vector<std::int32_t> position_of_mask;  // indexed by mask, -1 for other grades
};

inline void enumerate_lex(int d, int m, int start, std::vector<int>& cur, std::vector<MultiIndex>& out)
{
    if (int(cur.size()) == m) {
        out.emplace_back(d, cur);
        return;
    }
    for (int i = start; i <= d - (m - int(cur.size())); ++i) {
        cur.push_back(i);
        enumerate_lex(d, m, i + 1, cur, out);
        cur.pop_back();
    }
}

inline const blade_table& blades_for(int d, int m)
{
    // one table per (d, m), built once on first use
    static const auto tables = [] {
        std::vector<std::vector<blade_table>> t(max_dimension + 1);
        for (int dd = 1; dd <= max_dimension; ++dd) {
            t[dd].resize(dd + 1);
            for (int mm = 0; mm <= dd; ++mm) {
                auto& tab = t[dd][mm];
                std::vector<int> cur;
                enumerate_lex(dd, mm, 0, cur, tab.by_position);
                tab.position_of_mask.assign(std::size_t(1) << dd, -1);
                for (std::size_t p = 0; p < tab.by_position.size(); ++p)
                    tab.position_of_mask[tab.by_position[p].mask()] = std::int32_t(p);
            }
        }
        return t;
    }();
    require_dimension(d);
    require(m >= 0 && m <= d, "grade " + std::to_string(m) + " outside [0, " + std::to_string(d) + "]");
    return tables[d][m];
}

// sign of the permutation that sorts the concatenation (I, K) of two
// disjoint ascending index sets
inline int merge_sign(std::uint32_t i_mask, std::uint32_t k_mask)
{
    int inversions = 0;
    for (std::uint32_t k = k_mask; k; k &= k - 1) {
        const int kbit = std::countr_zero(k);
        // elements of I greater than this element of K
        inversions += std::popcount(i_mask >> (kbit + 1));
    }
    return (inversions & 1) ? -1 : 1;
}

// determinant of the square submatrix of a with the given rows and columns
template <typename Derived>
double minor(const Eigen::MatrixBase<Derived>& a, std::span<const int> rows, std::span<const int> cols)
{
    const auto m = rows.size();
    if (m == 0)
        return 1.0;
    if (m == 1)
        return a(rows[0], cols[0]);
    if (m == 2)
        return a(rows[0], cols[0]) * a(rows[1], cols[1]) - a(rows[0], cols[1]) * a(rows[1], cols[0]);
    if (m == 3) {
        auto e = [&](int r, int c) { return a(rows[r], cols[c]); };
        return e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
             - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
             + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
    }
    Matrix sub(m, m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c)
            sub(r, c) = a(rows[r], cols[c]);
    return sub.partialPivLu().determinant();
}

}  // namespace detail

// all grade-m blades of R^d in lexicographic order
inline const std::vector<MultiIndex>& blades(int d, int m)
{
    return detail::blades_for(d, m).by_position;
}

inline std::size_t blade_count(int d, int m)
{
    return std::size_t(binom(d, m));
}

inline std::size_t MultiIndex::position() const
{
    return std::size_t(detail::blades_for(d_, grade()).position_of_mask[mask()]);
}

//
// element of Lambda^m(R^d) as its binom(d,m) blade coordinates
//
class ExteriorVector {
public:
    ExteriorVector(int d, int m, Vector coords)
        : d_(d), m_(m), coords_(std::move(coords))
    {
        detail::blades_for(d_, m_);  // validates d and m
        require(std::size_t(coords_.size()) == blade_count(d_, m_),
                "exterior vector needs binom(d,m) coordinates");
    }

    static ExteriorVector zero(int d, int m)
    {
        return ExteriorVector(d, m, Vector::Zero(Eigen::Index(blade_count(d, m))));
    }

    static ExteriorVector blade(const MultiIndex& idx)
    {
        auto v = zero(idx.dim(), idx.grade());
        v.coords_[Eigen::Index(idx.position())] = 1.0;
        return v;
    }

    static ExteriorVector scalar(int d, double value)
    {
        return ExteriorVector(d, 0, Vector::Constant(1, value));
    }

    int dim() const { return d_; }
    int grade() const { return m_; }
    const Vector& coords() const { return coords_; }
    double operator[](std::size_t k) const { return coords_[Eigen::Index(k)]; }
    double operator[](const MultiIndex& idx) const { return coords_[Eigen::Index(idx.position())]; }

    double norm() const { return coords_.norm(); }

    ExteriorVector normalized() const
    {
        const double n = norm();
        require(n > 0.0, "cannot normalize the zero exterior vector");
        return ExteriorVector(d_, m_, coords_ / n);
    }

    ExteriorVector& operator+=(const ExteriorVector& o)
    {
        check_compatible(o);
        coords_ += o.coords_;
        return *this;
    }
    ExteriorVector& operator-=(const ExteriorVector& o)
    {
        check_compatible(o);
        coords_ -= o.coords_;
        return *this;
    }
    ExteriorVector& operator*=(double a)
    {
        coords_ *= a;
        return *this;
    }

    friend ExteriorVector operator+(ExteriorVector a, const ExteriorVector& b) { return a += b; }
    friend ExteriorVector operator-(ExteriorVector a, const ExteriorVector& b) { return a -= b; }
    friend ExteriorVector operator*(double s, ExteriorVector a) { return a *= s; }
    friend ExteriorVector operator*(ExteriorVector a, double s) { return a *= s; }
    friend ExteriorVector operator-(ExteriorVector a) { return a *= -1.0; }

    friend bool operator==(const ExteriorVector& a, const ExteriorVector& b)
    {
        return a.d_ == b.d_ && a.m_ == b.m_ && a.coords_ == b.coords_;
    }

    void check_compatible(const ExteriorVector& o) const
    {
        require(d_ == o.d_ && m_ == o.m_, "exterior vectors of different dimension or grade");
    }

private:
    int d_;
    int m_;
    Vector coords_;
};

//
// induced map Lambda^m S, entry (J, I) = minor of S with rows J, columns I
//
struct CompoundMatrix {
    int d = 0;
    int m = 0;
    Matrix entries;

    ExteriorVector operator*(const ExteriorVector& v) const
    {
        require(v.dim() == d && v.grade() == m, "compound matrix and exterior vector do not match");
        return ExteriorVector(d, m, entries * v.coords());
    }

    CompoundMatrix operator*(const CompoundMatrix& o) const
    {
        require(d == o.d && m == o.m, "compound matrices do not match");
        return {d, m, entries * o.entries};
    }
};

inline CompoundMatrix compound_matrix(const Matrix& s, int m)
{
    require_square(s, "compound_matrix: map");
    const int d = int(s.rows());
    const auto& bl = blades(d, m);
    const auto n = Eigen::Index(bl.size());
    CompoundMatrix c{d, m, Matrix(n, n)};
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            c.entries(j, i) = detail::minor(s, bl[std::size_t(j)].entries(), bl[std::size_t(i)].entries());
    return c;
}

//
// wedge of the columns of a d x m matrix: coordinate J is the minor with rows J
//
inline ExteriorVector wedge(const Matrix& columns)
{
    const int d = int(columns.rows());
    const int m = int(columns.cols());
    require_dimension(d);
    require(m <= d, "wedge of more vectors than the dimension");
    if (m == 0)
        return ExteriorVector::scalar(d, 1.0);
    const auto& bl = blades(d, m);
    std::vector<int> all_cols(static_cast<std::size_t>(m));
    std::iota(all_cols.begin(), all_cols.end(), 0);
    Vector c(Eigen::Index(bl.size()));
    for (std::size_t j = 0; j < bl.size(); ++j)
        c[Eigen::Index(j)] = detail::minor(columns, bl[j].entries(), all_cols);
    return ExteriorVector(d, m, std::move(c));
}

inline ExteriorVector wedge(std::span<const Vector> vectors)
{
    require(!vectors.empty(), "wedge needs at least one vector");
    const auto d = vectors.front().size();
    Matrix cols(d, Eigen::Index(vectors.size()));
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        require(vectors[k].size() == d, "wedge: vectors of different dimension");
        cols.col(Eigen::Index(k)) = vectors[k];
    }
    return wedge(cols);
}

inline ExteriorVector wedge(std::initializer_list<Vector> vectors)
{
    return wedge(std::span<const Vector>(vectors.begin(), vectors.size()));
}

// a vector of R^d as a grade-1 element
inline ExteriorVector as_exterior(const Vector& v)
{
    return ExteriorVector(int(v.size()), 1, v);
}

//
// general exterior product of a grade-p and a grade-q element (p + q <= d)
//
inline ExteriorVector exterior_product(const ExteriorVector& a, const ExteriorVector& b)
{
    require(a.dim() == b.dim(), "exterior_product: dimension mismatch");
    const int d = a.dim();
    const int g = a.grade() + b.grade();
    require(g <= d, "exterior_product: grade exceeds dimension");
    const auto& ba = blades(d, a.grade());
    const auto& bb = blades(d, b.grade());
    const auto& pos = detail::blades_for(d, g).position_of_mask;
    auto out = ExteriorVector::zero(d, g);
    Vector c = out.coords();
    for (std::size_t i = 0; i < ba.size(); ++i) {
        const double ai = a[i];
        if (ai == 0.0)
            continue;
        const auto mi = ba[i].mask();
        for (std::size_t k = 0; k < bb.size(); ++k) {
            const auto mk = bb[k].mask();
            if (mi & mk)
                continue;
            c[pos[mi | mk]] += detail::merge_sign(mi, mk) * ai * b[k];
        }
    }
    return ExteriorVector(d, g, std::move(c));
}

//
// Hodge star, signed convention: *(e_I) = sgn(I, J) e_J with J the ascending
// complement of I and sgn the sign of the permutation (I, J) of (0..d-1).
//
inline ExteriorVector hodge_star(const ExteriorVector& v)
{
    const int d = v.dim();
    const int m = v.grade();
    const auto& bl = blades(d, m);
    auto out = ExteriorVector::zero(d, d - m);
    Vector c = out.coords();
    for (std::size_t i = 0; i < bl.size(); ++i) {
        const auto comp = bl[i].complement();
        c[Eigen::Index(comp.position())] = detail::merge_sign(bl[i].mask(), comp.mask()) * v[i];
    }
    return ExteriorVector(d, d - m, std::move(c));
}

inline double exterior_inner(const ExteriorVector& v, const ExteriorVector& w)
{
    v.check_compatible(w);
    return v.coords().dot(w.coords());
}

// <v|w> read off as the volume-form coefficient of v ^ *w
inline double exterior_inner_via_star(const ExteriorVector& v, const ExteriorVector& w)
{
    v.check_compatible(w);
    return exterior_product(v, hodge_star(w))[0];
}

inline ExteriorVector apply_map(const Matrix& s, const ExteriorVector& v)
{
    require_square(s, "apply_map: map");
    require(int(s.rows()) == v.dim(), "apply_map: dimension mismatch");
    return compound_matrix(s, v.grade()) * v;
}

}  // namespace affdim

#endif  // AFFDIM_EXTERIOR_ALGEBRA_HPP
