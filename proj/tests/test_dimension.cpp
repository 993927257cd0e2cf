#include <gtest/gtest.h>

#include <affdim/dimension.hpp>

using namespace affdim;

namespace {

Matrix diag2(double a, double b)
{
    Matrix t = Matrix::Zero(2, 2);
    t(0, 0) = a;
    t(1, 1) = b;
    return t;
}

IfsFamily family(const std::vector<Matrix>& maps, const std::vector<Vector>& shifts)
{
    IfsFamily f;
    for (std::size_t i = 0; i < maps.size(); ++i)
        f.maps.push_back({maps[i], int(i) + 1, shifts[i]});
    return f;
}

IfsFamily random_translations(const std::vector<Matrix>& maps, std::uint64_t seed)
{
    Engine rng(seed);
    std::vector<Vector> shifts;
    for (const auto& m : maps)
        shifts.push_back(uniform_vector(rng, int(m.rows()), 0.0, 1.0));
    return family(maps, shifts);
}

CodeTree cantor(int depth)
{
    return deterministic_tree(family({Matrix::Constant(1, 1, 1.0 / 3.0), Matrix::Constant(1, 1, 1.0 / 3.0)},
                                     {Vector::Zero(1), Vector::Constant(1, 2.0 / 3.0)}),
                              depth);
}

CodeTree diagonal(int depth, std::uint64_t seed = 7)
{
    return deterministic_tree(random_translations(std::vector<Matrix>(3, diag2(0.4, 0.2)), seed), depth);
}

CodeTree similarity045(int depth)
{
    Vector a = Vector::Zero(2), b(2), c(2);
    b << 0.55, 0;
    c << 0, 0.55;
    return deterministic_tree(family(std::vector<Matrix>(3, 0.45 * Matrix::Identity(2, 2)), {a, b, c}), depth);
}

}  // namespace

TEST(Pressure, SimilarityClosedForm)
{
    const auto t = cantor(4);
    for (int k = 1; k <= 4; ++k)
        for (double s : {0.0, 0.25, 0.6, 1.0, 1.5})
            EXPECT_NEAR(pressure_at(t, k, s), std::log(2.0) + s * std::log(1.0 / 3.0), 1e-14);
}

TEST(Pressure, DiagonalClosedForm)
{
    const auto t = diagonal(4);
    for (double s = 0.0; s <= 2.0 + 1e-12; s += 0.125) {
        const double ref = s <= 1.0 ? std::log(3.0) + s * std::log(0.4)
                                    : std::log(3.0) + std::log(0.4) + (s - 1.0) * std::log(0.2);
        EXPECT_NEAR(pressure_at(t, 4, s), ref, 1e-13) << s;
    }
}

TEST(Pressure, CurveIsDecreasingWithDiagnostics)
{
    const auto t = diagonal(4);
    const auto c = pressure_curve(t, {0.0, 0.5, 1.0, 1.5, 2.0}, 4);
    ASSERT_EQ(c.p.size(), 5u);
    for (std::size_t i = 1; i < c.p.size(); ++i)
        EXPECT_LT(c.p[i], c.p[i - 1]);
    for (double x : c.diagnostic)
        EXPECT_LE(x, 1e-13);
    EXPECT_NEAR(c.p[0], std::log(3.0), 1e-14);
    EXPECT_TRUE(std::isnan(pressure_curve(t, {0.5}, 1).diagnostic[0]));
    EXPECT_THROW(pressure_curve(t, {1.0, 0.5}, 2), invalid_input);
    EXPECT_THROW(pressure_curve(t, {0.5}, 5), invalid_input);
}

TEST(Pressure, FeketeAlongDoublings)
{
    Engine rng(3);
    std::vector<Matrix> maps;
    for (int i = 0; i < 2; ++i) {
        Matrix m = gaussian_matrix(rng, 2, 2);
        maps.push_back(0.45 * m / Eigen::JacobiSVD<Matrix>(m).singularValues()[0]);
    }
    const auto t = deterministic_tree(random_translations(maps, 1), 8);
    for (double s : {0.5, 1.0, 1.5})
        for (int k : {1, 2})
            EXPECT_LE(pressure_at(t, 2 * k, s), pressure_at(t, k, s) + 1e-12);
    for (double s : {0.5, 1.0, 1.5})
        EXPECT_LE(pressure_at(t, 8, s), pressure_at(t, 4, s) + 1e-12);
}

TEST(PressureZero, SimilarityDimension)
{
    for (int k = 1; k <= 4; ++k) {
        const auto z = pressure_zero(cantor(4), k);
        EXPECT_NEAR(z.s0, std::log(2.0) / std::log(3.0), 1e-6) << k;
        EXPECT_LE(z.bracket_hi - z.bracket_lo, 1e-6);
    }
    EXPECT_NEAR(pressure_zero(cantor(4), 4).s0, 0.6309297536, 1e-6);
}

TEST(PressureZero, DiagonalAffinityDimension)
{
    const auto z = pressure_zero(diagonal(6), 6);
    EXPECT_NEAR(z.s0, 1.0 + std::log(1.2) / std::log(5.0), 1e-5);
    EXPECT_NEAR(z.s0, 1.113283, 1e-5);
}

TEST(PressureZero, SingleMapGivesZero)
{
    const auto t = deterministic_tree(family({Matrix::Constant(1, 1, 0.3)}, {Vector::Zero(1)}), 3);
    const auto z = pressure_zero(t, 3);
    EXPECT_TRUE(z.nonpositive_at_zero);
    EXPECT_EQ(z.s0, 0.0);
}

TEST(PressureZero, IndependentOfNeckThinning)
{
    const Matrix a = diag2(0.4, 0.25), b = diag2(0.3, 0.2);
    const auto shift = [](double x) { return Vector::Constant(2, x); };
    LabeledGraph neck{{{0, 0, {a, 1, shift(0)}}, {0, 0, {b, 2, shift(0.5)}}, {1, 0, {a, 1, shift(0)}}, {1, 0, {b, 2, shift(0.5)}}}};
    LabeledGraph other{{{0, 1, {b, 3, shift(0.1)}}, {0, 0, {a, 4, shift(0.6)}}, {1, 1, {b, 3, shift(0.1)}}, {1, 0, {a, 4, shift(0.6)}}}};
    const GraphSystem gs(2, 2, 0, {neck, other}, {0.3, 0.7});
    const auto g = sample_graph_sequence(gs, 1, 12);
    const auto z1 = pressure_zero(build_code_tree(gs, g, 0, 12, 1), 12);
    const auto z3 = pressure_zero(build_code_tree(gs, g, 0, 12, 3), 12);
    EXPECT_NEAR(z1.s0, z3.s0, 1e-6);
}

TEST(BoxDimension, UnitSquareGrid)
{
    std::vector<Vector> pts;
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j)
            pts.push_back(Eigen::Vector2d((i + 0.5) / 100.0, (j + 0.5) / 100.0));
    const auto [lo, hi] = cloud_window(pts.size(), 2);
    EXPECT_NEAR(box_dimension(pts, lo, hi).slope, 2.0, 0.1);
}

TEST(BoxDimension, Segment)
{
    std::vector<Vector> pts;
    for (int i = 0; i < 10000; ++i)
        pts.push_back(Eigen::Vector2d(i / 9999.0, 0.5 * i / 9999.0));
    EXPECT_NEAR(box_dimension(pts, 5, 11).slope, 1.0, 0.05);
    const auto [lo, hi] = cloud_window(pts.size(), 2);
    EXPECT_EQ(lo, 2);
    EXPECT_EQ(hi, 6);
    EXPECT_NEAR(box_dimension(pts, lo, hi).slope, 1.0, 0.1);
}

TEST(BoxDimension, SimilarityAttractor)
{
    const auto t = similarity045(10);
    std::vector<Vector> pts;
    for (const auto& p : attractor_points(t, 10))
        pts.push_back(p.point);
    const auto [lo, hi] = box_window(0.45, 10, pts.size());
    EXPECT_NEAR(box_dimension(pts, lo, hi).slope, std::log(3.0) / std::log(1 / 0.45), 0.1);
}

TEST(BoxDimension, StaysWithinAmbientDimension)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Engine rng(seed);
        const int d = 1 + int(seed % 3);
        std::vector<Vector> pts;
        for (int i = 0; i < 4000; ++i)
            pts.push_back(uniform_vector(rng, d, 0.0, 1.0));
        for (int lo = 1; lo <= 3; ++lo)
            for (int hi = lo + 1; hi <= 10; hi += 3) {
                const auto fit = box_dimension(pts, lo, hi);
                EXPECT_LE(fit.slope, d + 0.05);
                EXPECT_GE(fit.slope, 0.0);
            }
    }
}

TEST(BoxDimension, Validation)
{
    std::vector<Vector> few(999, Vector::Zero(2));
    EXPECT_THROW(box_dimension(few, 1, 4), invalid_input);
    std::vector<Vector> same(2000, Vector::Ones(2));
    EXPECT_THROW(box_dimension(same, 1, 4), invalid_input);
    std::vector<Vector> ok;
    for (int i = 0; i < 1000; ++i)
        ok.push_back(Vector::Constant(2, i));
    EXPECT_THROW(box_dimension(ok, 3, 3), invalid_input);
    EXPECT_THROW(box_dimension(ok, 0, 3), invalid_input);
}

TEST(DimensionReport, SimilarityAgrees)
{
    const auto rep = dimension_report(similarity045(10), 4, 10);
    EXPECT_NEAR(rep.s0, std::log(3.0) / std::log(1 / 0.45), 1e-6);
    EXPECT_EQ(rep.point_count, 59049u);
    EXPECT_LE(std::abs(rep.box_estimate - rep.min_s0_d), 0.1);
    EXPECT_TRUE(rep.agrees);
}

TEST(DimensionReport, DiagonalWithRandomTranslations)
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto rep = dimension_report(diagonal(12, seed), 6, 12);
        EXPECT_LE(std::abs(rep.box_estimate - 1.1133), 0.15) << seed;
    }
}

TEST(DimensionReport, RejectsLargeContractions)
{
    const auto t = deterministic_tree(random_translations(std::vector<Matrix>(2, diag2(0.6, 0.3)), 1), 4);
    try {
        dimension_report(t, 2, 4);
        FAIL() << "expected rejection";
    } catch (const invalid_input& e) {
        EXPECT_NE(std::string(e.what()).find("sigma_hi < 1/2"), std::string::npos);
    }
}
