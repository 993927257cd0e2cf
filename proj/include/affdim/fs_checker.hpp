#ifndef AFFDIM_FS_CHECKER_HPP
#define AFFDIM_FS_CHECKER_HPP

//
// Decide, falsify or certify the Falconer-Sloan condition C(s) for a finite
// family of nonsingular linear maps.
//
//  - check_cm / check_cs sample decomposable m-vectors. They can refute the
//    condition (Fail, with a witness or a rank certificate) but a pass is only
//    empirical.
//  - criterion_cscm is the two-map eigenvalue/minor criterion. When it passes,
//    the compositions of F and G up to depth 2 n0^2 satisfy C(s) for every s.
//  - estimate_fullness samples the (c,s)-fullness ratio, giving an upper
//    bound on the best constant c.
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <affdim/common.hpp>
#include <affdim/exterior_algebra.hpp>
#include <affdim/parallel.hpp>
#include <affdim/random.hpp>
#include <affdim/singular_values.hpp>

namespace affdim {

//
// finite family {S_i} of nonsingular d x d maps
//
class LinearFamily {
public:
    LinearFamily(int d, std::vector<Matrix> maps)
        : d_(d), maps_(std::move(maps))
    {
        validate();
    }

    explicit LinearFamily(std::vector<Matrix> maps)
        : d_(maps.empty() ? 0 : int(maps.front().rows())), maps_(std::move(maps))
    {
        validate();
    }

    int dim() const { return d_; }
    std::size_t size() const { return maps_.size(); }
    const std::vector<Matrix>& maps() const { return maps_; }
    const Matrix& operator[](std::size_t i) const { return maps_[i]; }

private:
    void validate() const
    {
        require(!maps_.empty(), "linear family must be nonempty");
        require_dimension(d_);
        for (std::size_t i = 0; i < maps_.size(); ++i) {
            require(maps_[i].rows() == d_ && maps_[i].cols() == d_,
                    "map " + std::to_string(i) + " is not " + std::to_string(d_) + "x" + std::to_string(d_));
            try {
                detail::spectrum_unchecked(maps_[i]);
            } catch (const singular_map&) {
                throw singular_map("map " + std::to_string(i) + " of the family is singular");
            }
        }
    }

    int d_;
    std::vector<Matrix> maps_;
};

//
// all compositions S_{i_1} ... S_{i_j}, 1 <= j <= depth, words in
// lexicographic order within each length; duplicates are kept
//
inline LinearFamily iterate_closure(const LinearFamily& fam, int depth, std::size_t cap = 1'000'000)
{
    require(depth >= 1, "iterate_closure: depth must be >= 1");
    const std::size_t n = fam.size();
    std::size_t total = 0;
    std::size_t level = 1;
    for (int j = 1; j <= depth; ++j) {
        if (level > cap / n + 1)
            throw cap_exceeded("iterate_closure: closure exceeds the cap of " + std::to_string(cap) + " maps");
        level *= n;
        total += level;
        if (total > cap)
            throw cap_exceeded("iterate_closure: closure exceeds the cap of " + std::to_string(cap) + " maps");
    }

    std::vector<Matrix> out;
    out.reserve(total);
    std::vector<Matrix> prev = fam.maps();
    out.insert(out.end(), prev.begin(), prev.end());
    for (int j = 2; j <= depth; ++j) {
        std::vector<Matrix> cur;
        cur.reserve(prev.size() * n);
        for (const auto& head : fam.maps())
            for (const auto& tail : prev)
                cur.push_back(head * tail);
        out.insert(out.end(), cur.begin(), cur.end());
        prev = std::move(cur);
    }
    return LinearFamily(fam.dim(), std::move(out));
}

enum class VerdictKind { certified_pass, empirical_pass, fail };

inline const char* to_string(VerdictKind k)
{
    switch (k) {
    case VerdictKind::certified_pass: return "CertifiedPass";
    case VerdictKind::empirical_pass: return "EmpiricalPass";
    case VerdictKind::fail: return "Fail";
    }
    return "?";
}

// Decomposable v, w with <S_i v|w> ~ 0 for every i. For non-integer s the
// grade-(m+1) extensions v^x, w^y are attached when the failure is at the
// quadruple stage.
struct Witness {
    ExteriorVector v;
    ExteriorVector w;
    std::optional<ExteriorVector> v_ext;
    std::optional<ExteriorVector> w_ext;
    double max_pairing = 0.0;  // largest normalized pairing over the family
    int grade() const { return v.grade(); }
};

// {Lambda^m S_i v} does not span Lambda^m
struct RankCertificate {
    ExteriorVector v;
    int rank = 0;
    std::size_t required = 0;  // binom(d, m)
    double ratio = 0.0;        // sigma_min / sigma_max of the normalized stack
};

struct Verdict {
    VerdictKind kind = VerdictKind::empirical_pass;
    int grade = 0;           // grade at which the decision was made
    std::string reason;
    std::size_t samples = 0;
    double margin = 0.0;     // minimal normalized margin over everything tested
    bool cardinality_fail = false;
    std::size_t family_size = 0;
    std::size_t required_size = 0;
    std::optional<Witness> witness;
    std::optional<RankCertificate> certificate;

    bool passed() const { return kind != VerdictKind::fail; }
};

struct CheckOptions {
    std::size_t samples = 1000;
    double tol = 1e-9;
    std::uint64_t seed = 0;
    int threads = 1;
};

namespace detail {

inline std::vector<Vector> real_eigenvectors(const Matrix& s)
{
    std::vector<Vector> out;
    Eigen::EigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success)
        return out;
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();
    const double scale = vals.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < vals.size(); ++k) {
        if (std::abs(vals[k].imag()) > 1e-12 * scale)
            continue;
        Vector v = vecs.col(k).real();
        const double n = v.norm();
        if (n > 0.0)
            out.push_back(v / n);
    }
    return out;
}

// combinations of `m` items from `n`, visited in lexicographic order
template <typename Fn>
void for_each_combination(int n, int m, Fn&& fn)
{
    if (m > n)
        return;
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k)
        idx[std::size_t(k)] = k;
    for (;;) {
        fn(idx);
        int k = m - 1;
        while (k >= 0 && idx[std::size_t(k)] == n - m + k)
            --k;
        if (k < 0)
            return;
        ++idx[std::size_t(k)];
        for (int j = k + 1; j < m; ++j)
            idx[std::size_t(j)] = idx[std::size_t(j - 1)] + 1;
    }
}

// nonzero, normalized wedges of m vectors chosen from `pool`
inline std::vector<ExteriorVector> blade_candidates(const std::vector<Vector>& pool, int d, int m)
{
    std::vector<ExteriorVector> out;
    for_each_combination(int(pool.size()), m, [&](const std::vector<int>& idx) {
        Matrix cols(d, m);
        for (int k = 0; k < m; ++k)
            cols.col(k) = pool[std::size_t(idx[std::size_t(k)])];
        auto v = wedge(cols);
        if (v.norm() > 1e-8)
            out.push_back(v.normalized());
    });
    return out;
}

inline ExteriorVector random_decomposable(Engine& rng, int d, int m)
{
    if (m == 0)
        return ExteriorVector::scalar(d, 1.0);
    for (;;) {
        auto v = wedge(Matrix(gaussian_matrix(rng, d, m)));
        if (v.norm() > 1e-12)
            return v.normalized();
    }
}

// Lambda^m S_i and their operator norms (product of the top m singular values)
struct GradeAction {
    int d = 0;
    int m = 0;
    std::vector<Matrix> compound;
    std::vector<double> norm;

    GradeAction(const LinearFamily& fam, int grade)
        : d(fam.dim()), m(grade)
    {
        for (const auto& s : fam.maps()) {
            compound.push_back(compound_matrix(s, m).entries);
            const auto sp = spectrum_unchecked(s);
            double nrm = 1.0;
            for (int k = 0; k < m; ++k)
                nrm *= sp[k];
            norm.push_back(nrm);
        }
    }

    std::size_t size() const { return compound.size(); }

    // |<Lambda^m S_i v | w>| / (|Lambda^m S_i| |v| |w|)
    double pairing(std::size_t i, const Vector& v, const Vector& w) const
    {
        return std::abs(w.dot(compound[i] * v)) / (norm[i] * v.norm() * w.norm());
    }

    double max_pairing(const Vector& v, const Vector& w) const
    {
        double best = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            best = std::max(best, pairing(i, v, w));
        return best;
    }

    // columns Lambda^m S_i v / |.|
    Matrix stack(const Vector& v) const
    {
        Matrix st(v.size(), Eigen::Index(size()));
        for (std::size_t i = 0; i < size(); ++i) {
            Vector u = compound[i] * v;
            st.col(Eigen::Index(i)) = u / u.norm();
        }
        return st;
    }

    // sigma_n / sigma_1 of the normalized stack, 0 when fewer than n columns
    double span_ratio(const Vector& v) const
    {
        const auto n = v.size();
        if (Eigen::Index(size()) < n)
            return 0.0;
        Eigen::JacobiSVD<Matrix> svd(stack(v));
        const Vector sv = svd.singularValues();
        return sv[n - 1] / sv[0];
    }
};

// Search a decomposable w of grade m orthogonal to the columns of `span`
// (orthonormal basis). Alternating minimization over the factors of
// w = w_1 ^ ... ^ w_m, with deterministic restarts.
inline std::optional<ExteriorVector> decomposable_in_complement(const Matrix& span, int d, int m,
                                                                double tol, std::uint64_t seed)
{
    constexpr int restarts = 24;
    constexpr int sweeps = 200;
    for (int r = 0; r < restarts; ++r) {
        auto rng = stream(seed ^ 0x5eedull, std::uint64_t(r));
        Matrix f = gaussian_matrix(rng, d, m);
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            for (int j = 0; j < m; ++j) {
                // projector onto the complement of the other factors
                Matrix others(d, m - 1);
                for (int k = 0, c = 0; k < m; ++k)
                    if (k != j)
                        others.col(c++) = f.col(k);
                Matrix proj = Matrix::Identity(d, d);
                if (m > 1) {
                    Eigen::HouseholderQR<Matrix> qr(others);
                    const Matrix q = Matrix(qr.householderQ()).leftCols(m - 1);
                    proj -= q * q.transpose();
                }
                // w is linear in factor j: w = L x
                Matrix lin(Eigen::Index(blade_count(d, m)), d);
                for (int k = 0; k < d; ++k) {
                    Matrix cols = f;
                    cols.col(j) = Vector::Unit(d, k);
                    lin.col(k) = wedge(cols).coords();
                }
                const Matrix objective = span.transpose() * lin * proj;
                Eigen::JacobiSVD<Matrix> svd(objective, Eigen::ComputeFullV);
                Vector x = proj * svd.matrixV().col(d - 1);
                if (x.norm() < 1e-12)
                    continue;
                f.col(j) = x / x.norm();
            }
            const auto w = wedge(f);
            if (w.norm() < 1e-10)
                break;
            const double residual = (span.transpose() * w.coords()).norm() / w.norm();
            if (residual <= 1e-3 * tol)
                return w.normalized();
        }
        const auto w = wedge(f);
        if (w.norm() > 1e-10 && (span.transpose() * w.coords()).norm() / w.norm() <= tol)
            return w.normalized();
    }
    return std::nullopt;
}

// Given v whose images do not span Lambda^m, construct a decomposable w
// orthogonal to all of them.
inline std::optional<ExteriorVector> find_witness_w(const GradeAction& act, const LinearFamily& fam,
                                                    const ExteriorVector& v, double tol,
                                                    std::uint64_t seed)
{
    const int d = act.d;
    const int m = act.m;
    auto accept = [&](const ExteriorVector& w) { return act.max_pairing(v.coords(), w.coords()) <= tol; };

    // coordinate blades first, then wedges of left eigenvectors
    for (const auto& b : blades(d, m)) {
        auto w = ExteriorVector::blade(b);
        if (accept(w))
            return w;
    }
    std::vector<Vector> left;
    for (const auto& s : fam.maps())
        for (auto& e : real_eigenvectors(s.transpose()))
            left.push_back(std::move(e));
    if (left.size() <= 24)
        for (const auto& w : blade_candidates(left, d, m))
            if (accept(w))
                return w;

    // orthonormal basis of span{Lambda^m S_i v}
    const Matrix st = act.stack(v.coords());
    Eigen::JacobiSVD<Matrix> svd(st, Eigen::ComputeFullU);
    const Vector sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > tol * sv[0])
        ++rank;
    const Matrix basis = svd.matrixU().leftCols(rank);
    const auto n = st.rows();

    if (m == 1 || m == d - 1) {
        // every element of Lambda^1 and Lambda^{d-1} is decomposable
        ExteriorVector w(d, m, svd.matrixU().col(n - 1));
        if (accept(w))
            return w;
    }
    if (auto w = decomposable_in_complement(basis, d, m, tol, seed); w && accept(*w))
        return w;
    return std::nullopt;
}

inline Verdict fail_for(const GradeAction& act, const LinearFamily& fam, const ExteriorVector& v,
                        double ratio, double tol, std::uint64_t seed, std::string reason)
{
    Verdict out;
    out.kind = VerdictKind::fail;
    out.grade = act.m;
    out.margin = ratio;
    out.family_size = fam.size();
    out.required_size = blade_count(act.d, act.m);
    if (auto w = find_witness_w(act, fam, v, tol, seed)) {
        out.witness = Witness{v, *w, std::nullopt, std::nullopt, act.max_pairing(v.coords(), w->coords())};
        out.reason = std::move(reason) + "; decomposable witness found";
    } else {
        Eigen::JacobiSVD<Matrix> svd(act.stack(v.coords()));
        const Vector sv = svd.singularValues();
        int rank = 0;
        while (rank < sv.size() && sv[rank] > tol * sv[0])
            ++rank;
        out.certificate = RankCertificate{v, rank, blade_count(act.d, act.m), ratio};
        out.reason = std::move(reason) + "; rank-deficiency certificate (no decomposable witness constructed)";
    }
    return out;
}

// Scan sample indices [0, count) in fixed-size chunks; `eval(i)` returns a
// margin. Returns the first index with margin <= tol (if any) and the
// minimum margin over what was scanned.
template <typename Eval>
std::pair<std::optional<std::size_t>, double> scan_samples(std::size_t count, int threads, double tol, Eval&& eval)
{
    constexpr std::size_t chunk = 2048;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> margins;
    for (std::size_t begin = 0; begin < count; begin += chunk) {
        const std::size_t len = std::min(chunk, count - begin);
        margins.assign(len, 0.0);
        parallel_for(len, threads, [&](std::size_t k) { margins[k] = eval(begin + k); });
        for (std::size_t k = 0; k < len; ++k) {
            if (margins[k] <= tol)
                return {begin + k, std::min(best, margins[k])};
            best = std::min(best, margins[k]);
        }
    }
    return {std::nullopt, best};
}

}  // namespace detail

//
// condition C(m): for every decomposable v != 0 the images Lambda^m S_i v span
// Lambda^m. Deterministic candidates (coordinate blades, eigen-blades) are
// tried before random decomposable samples.
//
inline Verdict check_cm(const LinearFamily& fam, int m, const CheckOptions& opt = {})
{
    const int d = fam.dim();
    require(m >= 0 && m <= d, "check_cm: grade " + std::to_string(m) + " outside [0, d]");
    require(opt.samples >= 1, "check_cm: samples must be >= 1");

    Verdict out;
    out.grade = m;
    out.family_size = fam.size();
    out.required_size = blade_count(d, m);
    if (m == 0 || m == d) {
        out.kind = VerdictKind::certified_pass;
        out.reason = "grade 0 and grade d are satisfied by every nonsingular family";
        out.margin = 1.0;
        return out;
    }

    const detail::GradeAction act(fam, m);
    const bool too_small = fam.size() < out.required_size;
    const std::string card_reason = "family has " + std::to_string(fam.size()) + " maps but C("
                                  + std::to_string(m) + ") needs at least binom(" + std::to_string(d)
                                  + "," + std::to_string(m) + ") = " + std::to_string(out.required_size);

    // deterministic candidates
    std::vector<ExteriorVector> cands;
    for (const auto& b : blades(d, m))
        cands.push_back(ExteriorVector::blade(b));
    std::vector<Vector> eig;
    for (const auto& s : fam.maps())
        for (auto& e : detail::real_eigenvectors(s))
            eig.push_back(std::move(e));
    if (eig.size() <= 24)
        for (auto& c : detail::blade_candidates(eig, d, m))
            cands.push_back(std::move(c));

    for (const auto& v : cands) {
        const double ratio = act.span_ratio(v.coords());
        if (ratio <= opt.tol) {
            auto f = detail::fail_for(act, fam, v, ratio, opt.tol, opt.seed,
                                      too_small ? card_reason : "images of a candidate blade do not span");
            f.cardinality_fail = too_small;
            if (too_small && !f.witness) {
                f.certificate.reset();
                f.reason = card_reason;
            }
            return f;
        }
    }
    if (too_small) {
        out.kind = VerdictKind::fail;
        out.cardinality_fail = true;
        out.reason = card_reason;
        out.margin = 0.0;
        return out;
    }

    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : cands)
        best = std::min(best, act.span_ratio(v.coords()));

    auto [hit, sampled_best] = detail::scan_samples(opt.samples, opt.threads, opt.tol, [&](std::size_t i) {
        auto rng = stream(opt.seed, i);
        return act.span_ratio(detail::random_decomposable(rng, d, m).coords());
    });
    if (hit) {
        auto rng = stream(opt.seed, *hit);
        const auto v = detail::random_decomposable(rng, d, m);
        auto f = detail::fail_for(act, fam, v, act.span_ratio(v.coords()), opt.tol, opt.seed,
                                  "images of a sampled decomposable vector do not span");
        f.samples = *hit + 1;
        return f;
    }
    out.kind = VerdictKind::empirical_pass;
    out.samples = opt.samples;
    out.margin = std::min(best, sampled_best);
    out.reason = "no spanning failure among " + std::to_string(cands.size()) + " candidates and "
               + std::to_string(opt.samples) + " samples (not a certificate)";
    return out;
}

//
// condition C(s) for non-integer s in (0, d), m = floor(s)
//
inline Verdict check_cs(const LinearFamily& fam, double s, const CheckOptions& opt = {})
{
    const int d = fam.dim();
    require(s > 0.0 && s < double(d), "check_cs: s must lie in (0, d)");
    require(std::floor(s) != s, "check_cs: s must be non-integer (use check_cm for integer s)");
    require(opt.samples >= 1, "check_cs: samples must be >= 1");
    const int m = int(std::floor(s));

    // C(s) implies C(m) and C(m+1)
    for (int g : {m, m + 1}) {
        auto pre = check_cm(fam, g, opt);
        if (pre.kind == VerdictKind::fail) {
            pre.reason = "necessary condition C(" + std::to_string(g) + ") fails: " + pre.reason;
            return pre;
        }
    }

    const detail::GradeAction low(fam, m);
    const detail::GradeAction high(fam, m + 1);

    struct Quad {
        ExteriorVector v, w, vx, wy;
    };
    // one index i must make both pairings nonzero
    auto quad_margin = [&](const Quad& q) {
        double best = 0.0;
        for (std::size_t i = 0; i < fam.size(); ++i)
            best = std::max(best, std::min(low.pairing(i, q.v.coords(), q.w.coords()),
                                           high.pairing(i, q.vx.coords(), q.wy.coords())));
        return best;
    };

    // coordinate-blade quadruples (v = e_I, v^x = e_I ^ e_k), capped
    std::vector<Quad> cands;
    constexpr std::size_t max_blade_quads = 4096;
    std::vector<std::pair<ExteriorVector, ExteriorVector>> ext;
    for (const auto& b : blades(d, m)) {
        const auto v = ExteriorVector::blade(b);
        for (int k = 0; k < d; ++k) {
            if (b.mask() & (1u << k))
                continue;
            ext.emplace_back(v, exterior_product(v, as_exterior(Vector::Unit(d, k))).normalized());
        }
    }
    for (const auto& a : ext)
        for (const auto& b : ext) {
            if (cands.size() >= max_blade_quads)
                break;
            cands.push_back({a.first, b.first, a.second, b.second});
        }

    auto witness_from = [&](const Quad& q, double margin, std::size_t used) {
        Verdict f;
        f.kind = VerdictKind::fail;
        f.grade = m;
        f.family_size = fam.size();
        f.required_size = blade_count(d, m + 1);
        f.samples = used;
        f.margin = margin;
        f.reason = "no single map pairs both v,w and v^x,w^y non-orthogonally";
        f.witness = Witness{q.v, q.w, q.vx, q.wy, margin};
        return f;
    };

    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : cands) {
        const double mg = quad_margin(q);
        if (mg <= opt.tol)
            return witness_from(q, mg, 0);
        best = std::min(best, mg);
    }

    auto sample_quad = [&](std::size_t i) {
        auto rng = stream(opt.seed ^ 0xc5ull, i);
        Quad q{detail::random_decomposable(rng, d, m), detail::random_decomposable(rng, d, m),
               ExteriorVector::zero(d, m + 1), ExteriorVector::zero(d, m + 1)};
        for (;;) {
            auto vx = exterior_product(q.v, as_exterior(gaussian_vector(rng, d)));
            auto wy = exterior_product(q.w, as_exterior(gaussian_vector(rng, d)));
            if (vx.norm() > 1e-12 && wy.norm() > 1e-12) {
                q.vx = vx.normalized();
                q.wy = wy.normalized();
                return q;
            }
        }
    };
    auto [hit, sampled_best] = detail::scan_samples(opt.samples, opt.threads, opt.tol,
                                                    [&](std::size_t i) { return quad_margin(sample_quad(i)); });
    if (hit) {
        const auto q = sample_quad(*hit);
        return witness_from(q, quad_margin(q), *hit + 1);
    }

    Verdict out;
    out.kind = VerdictKind::empirical_pass;
    out.grade = m;
    out.family_size = fam.size();
    out.required_size = blade_count(d, m + 1);
    out.samples = opt.samples;
    out.margin = std::min(best, sampled_best);
    out.reason = "C(" + std::to_string(m) + "), C(" + std::to_string(m + 1) + ") and "
               + std::to_string(opt.samples) + " sampled quadruples passed (not a certificate)";
    return out;
}

// integer s routes to check_cm, non-integer s to check_cs
inline Verdict check_condition(const LinearFamily& fam, double s, const CheckOptions& opt = {})
{
    require(s >= 0.0 && s <= double(fam.dim()), "s must lie in [0, d]");
    if (std::floor(s) == s)
        return check_cm(fam, int(s), opt);
    return check_cs(fam, s, opt);
}

//
// two-map criterion
//
struct CriterionReport {
    int d = 0;
    Vector eigenvalues_f;  // descending
    Vector eigenvalues_g;
    Matrix eigenbasis_f;   // unit columns, matching eigenvalues_f
    Matrix eigenbasis_g;
    // per k = 1..d: min over pairs of distinct ascending k-tuples of
    // |prod_I - prod_J| / max(|prod_I|, |prod_J|) (1 when only one tuple exists)
    std::vector<double> product_margin_f;
    std::vector<double> product_margin_g;
    Matrix change_of_basis;              // A with e_hat_i = sum_j A_ji e_tilde_j
    std::vector<double> min_minor;       // per size k = 1..d, relative to the largest k-minor
    double smallest_minor = 0.0;         // min over all sizes
    std::uint64_t n0 = 0;
    std::uint64_t certified_depth = 0;   // 2 n0^2
    bool pass = false;
    std::string failed_stage;            // empty when pass
};

namespace detail {

inline std::vector<double> product_margins(const Vector& lambda)
{
    const int d = int(lambda.size());
    std::vector<double> out;
    for (int k = 1; k <= d; ++k) {
        std::vector<double> prods;
        for_each_combination(d, k, [&](const std::vector<int>& idx) {
            double p = 1.0;
            for (int i : idx)
                p *= lambda[i];
            prods.push_back(p);
        });
        double best = 1.0;
        for (std::size_t a = 0; a < prods.size(); ++a)
            for (std::size_t b = a + 1; b < prods.size(); ++b) {
                const double scale = std::max(std::abs(prods[a]), std::abs(prods[b]));
                best = std::min(best, std::abs(prods[a] - prods[b]) / scale);
            }
        out.push_back(best);
    }
    return out;
}

// eigenvalues descending with unit eigenvectors (largest |component| positive)
inline std::pair<Vector, Matrix> real_eigensystem(const Matrix& s, const char* name)
{
    const int d = int(s.rows());
    Eigen::EigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success)
        throw unsupported(std::string(name) + ": eigendecomposition failed");
    const auto vals = es.eigenvalues();
    const auto vecs = es.eigenvectors();
    const double scale = vals.cwiseAbs().maxCoeff();
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        order[std::size_t(i)] = i;
        if (std::abs(vals[i].imag()) > 1e-10 * scale)
            throw unsupported(std::string(name) + " has complex eigenvalues; only real spectra are supported");
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a].real() > vals[b].real(); });
    Vector lam(d);
    Matrix basis(d, d);
    for (int k = 0; k < d; ++k) {
        const int i = order[std::size_t(k)];
        lam[k] = vals[i].real();
        Vector v = vecs.col(i).real();
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0)
            v = -v;
        basis.col(k) = v / v.norm();
    }
    for (int k = 1; k < d; ++k)
        if (std::abs(lam[k - 1] - lam[k]) <= 1e-12 * scale)
            throw unsupported(std::string(name) + " has a repeated eigenvalue; d distinct real eigenvalues are required");
    return {lam, basis};
}

}  // namespace detail

//
// Evaluate the criterion from given eigenvalues and eigenvector bases of F
// and G. Columns are rescaled to unit length first, so the verdict does not
// depend on eigenvector normalization.
//
inline CriterionReport criterion_from_eigenbases(const Vector& lambda, const Matrix& basis_f, const Vector& t,
                                                 const Matrix& basis_g, double tol = 1e-9)
{
    const int d = int(lambda.size());
    require_dimension(d);
    require(t.size() == d && basis_f.rows() == d && basis_f.cols() == d && basis_g.rows() == d
                && basis_g.cols() == d,
            "criterion: eigen data of inconsistent size");

    CriterionReport rep;
    rep.d = d;
    rep.eigenvalues_f = lambda;
    rep.eigenvalues_g = t;
    rep.eigenbasis_f = basis_f.colwise().normalized();
    rep.eigenbasis_g = basis_g.colwise().normalized();
    rep.n0 = max_binom(d);
    rep.certified_depth = 2 * rep.n0 * rep.n0;

    rep.product_margin_f = detail::product_margins(lambda);
    rep.product_margin_g = detail::product_margins(t);

    Eigen::FullPivLU<Matrix> lu(rep.eigenbasis_g);
    require(lu.isInvertible(), "criterion: eigenvectors of G are not a basis");
    rep.change_of_basis = lu.solve(rep.eigenbasis_f);

    rep.smallest_minor = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= d; ++k) {
        const Matrix c = compound_matrix(rep.change_of_basis, k).entries;
        const double scale = c.cwiseAbs().maxCoeff();
        const double rel = scale > 0.0 ? c.cwiseAbs().minCoeff() / scale : 0.0;
        rep.min_minor.push_back(rel);
        rep.smallest_minor = std::min(rep.smallest_minor, rel);
    }

    auto all_above = [&](const std::vector<double>& xs) {
        return std::all_of(xs.begin(), xs.end(), [&](double x) { return x > tol; });
    };
    if (!all_above(rep.product_margin_f))
        rep.failed_stage = "eigenvalue products of F are not distinct";
    else if (!all_above(rep.product_margin_g))
        rep.failed_stage = "eigenvalue products of G are not distinct";
    else if (!all_above(rep.min_minor))
        rep.failed_stage = "change-of-basis matrix has a vanishing minor";
    rep.pass = rep.failed_stage.empty();
    return rep;
}

//
// Two-map criterion for C(s), 0 <= s <= d. Requires d distinct real
// eigenvalues for both maps (throws unsupported otherwise). On pass, the
// compositions of F and G up to depth 2 n0^2 satisfy C(s) for every s.
//
inline CriterionReport criterion_cscm(const Matrix& f, const Matrix& g, double tol = 1e-9)
{
    require_square(f, "criterion: F");
    require_square(g, "criterion: G");
    require(f.rows() == g.rows(), "criterion: F and G differ in dimension");
    detail::spectrum_unchecked(f);
    detail::spectrum_unchecked(g);
    auto [lambda, ef] = detail::real_eigensystem(f, "F");
    auto [t, eg] = detail::real_eigensystem(g, "G");
    return criterion_from_eigenbases(lambda, ef, t, eg, tol);
}

//
// Indices i in [1, count] for which some coordinate of (Lambda^m F)^i v with
// respect to the wedges of G's eigenvectors vanishes (|c_J| <= tol |c|).
//
inline std::vector<int> zero_coordinate_indices(const Matrix& f, const Matrix& g, const ExteriorVector& v, int count,
                                                double tol = 1e-9)
{
    require_square(f, "zero_coordinate_indices: F");
    require(f.rows() == g.rows() && f.cols() == g.cols(), "zero_coordinate_indices: F and G differ in dimension");
    require(v.dim() == f.rows(), "zero_coordinate_indices: vector of the wrong dimension");
    require(v.norm() > 0.0, "zero_coordinate_indices: v must be nonzero");
    require(count >= 0, "zero_coordinate_indices: count must be >= 0");
    const int m = v.grade();
    const auto eg = detail::real_eigensystem(g, "G").second;
    const Matrix to_b2 = compound_matrix(eg, m).entries;
    Eigen::PartialPivLU<Matrix> lu(to_b2);
    const Matrix fm = compound_matrix(f, m).entries;
    std::vector<int> out;
    Vector x = v.coords();
    for (int i = 1; i <= count; ++i) {
        x = fm * x;
        x /= x.norm();
        const Vector c = lu.solve(x);
        if (c.cwiseAbs().minCoeff() <= tol * c.norm())
            out.push_back(i);
    }
    return out;
}

//
// (c,s)-fullness: sum_j Phi^s(U S_j V) >= c Phi^s(U) Phi^s(V) for all U, V
//
struct FullnessEstimate {
    double c_hat = std::numeric_limits<double>::infinity();
    Matrix worst_u;
    Matrix worst_v;
    std::size_t samples = 0;
};

namespace detail {

inline std::vector<double> adversarial_ratios() { return {1e-1, 1e-2, 1e-3, 1e-4}; }

inline std::size_t adversarial_count(int d)
{
    return adversarial_ratios().size() * std::size_t(d - 1) * 2;
}

// sample `index` of the (U, V) sequence; the first adversarial_count(d)
// entries are deterministic diagonal pairs with extreme ratios
inline std::pair<Matrix, Matrix> fullness_pair(int d, std::uint64_t seed, std::size_t index)
{
    const auto eps = adversarial_ratios();
    const std::size_t det_count = adversarial_count(d);
    if (index < det_count) {
        const std::size_t e = index / (std::size_t(d - 1) * 2);
        const std::size_t rest = index % (std::size_t(d - 1) * 2);
        const int split = int(rest / 2) + 1;
        Vector u = Vector::Ones(d);
        Vector v = Vector::Ones(d);
        for (int i = split; i < d; ++i)
            u[i] = eps[e];
        for (int i = 0; i < split; ++i)
            v[i] = eps[e];
        if (rest % 2)
            std::swap(u, v);
        return {Matrix(u.asDiagonal()), Matrix(v.asDiagonal())};
    }
    auto rng = stream(seed, index);
    if (index % 2 == 0) {
        for (;;) {
            Matrix u = gaussian_matrix(rng, d, d);
            Matrix v = gaussian_matrix(rng, d, d);
            if (std::abs(u.determinant()) > 1e-6 && std::abs(v.determinant()) > 1e-6)
                return {u, v};
        }
    }
    // rotated extreme diagonals
    std::uniform_real_distribution<double> expo(0.0, 4.0);
    Vector u(d), v(d);
    for (int i = 0; i < d; ++i) {
        u[i] = std::pow(10.0, -expo(rng));
        v[i] = std::pow(10.0, -expo(rng));
    }
    const Matrix r1 = random_orthogonal(rng, d), r2 = random_orthogonal(rng, d);
    const Matrix r3 = random_orthogonal(rng, d), r4 = random_orthogonal(rng, d);
    return {r1 * u.asDiagonal() * r2, r3 * v.asDiagonal() * r4};
}

}  // namespace detail

//
// c_hat = min over sampled (U, V) of sum_j Phi^s(U S_j V) / (Phi^s(U) Phi^s(V)).
// An upper bound on the best fullness constant; sample i depends only on
// (seed, i), so c_hat is nonincreasing in sample_count.
//
inline FullnessEstimate estimate_fullness(const LinearFamily& fam, double s, std::size_t sample_count,
                                          std::uint64_t seed, int threads = 1)
{
    require(sample_count >= 1, "estimate_fullness: sample_count must be >= 1");
    require(s >= 0.0, "estimate_fullness: s must be >= 0");
    const int d = fam.dim();
    std::vector<double> ratio(sample_count);
    parallel_for(sample_count, threads, [&](std::size_t i) {
        const auto [u, v] = detail::fullness_pair(d, seed, i);
        const double denom_log = detail::spectrum_unchecked(u).log_phi(s) + detail::spectrum_unchecked(v).log_phi(s);
        double sum = 0.0;
        for (const auto& sj : fam.maps())
            sum += std::exp(detail::spectrum_unchecked(u * sj * v).log_phi(s) - denom_log);
        ratio[i] = sum;
    });
    FullnessEstimate est;
    est.samples = sample_count;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < sample_count; ++i)
        if (ratio[i] < est.c_hat) {
            est.c_hat = ratio[i];
            worst = i;
        }
    std::tie(est.worst_u, est.worst_v) = detail::fullness_pair(d, seed, worst);
    return est;
}

}  // namespace affdim

#endif  // AFFDIM_FS_CHECKER_HPP
