#include <gtest/gtest.h>

#include <map>

#include <affdim/code_tree.hpp>

#include "oracles.hpp"
#include "stats.hpp"

using namespace affdim;

namespace {

Matrix diag2(double a, double b)
{
    Matrix t = Matrix::Zero(2, 2);
    t(0, 0) = a;
    t(1, 1) = b;
    return t;
}

IfsFamily family(const std::vector<Matrix>& maps, std::uint64_t seed = 1)
{
    IfsFamily f;
    Engine rng(seed);
    for (std::size_t i = 0; i < maps.size(); ++i)
        f.maps.push_back({maps[i], int(i) + 1, uniform_vector(rng, int(maps[i].rows()), 0.0, 1.0)});
    return f;
}

IfsFamily similarities(int count, double r, int d = 1)
{
    return family(std::vector<Matrix>(std::size_t(count), r * Matrix::Identity(d, d)));
}

// two vertices, v0 = 0; label 0 is the neck graph, label 1 sends vertex 0 to 1
GraphSystem two_vertex_system(double neck_prob)
{
    const Matrix a = diag2(0.4, 0.25), b = diag2(0.3, 0.2);
    auto map = [](const Matrix& t, int cls, double shift) {
        return AffineMap{t, cls, Vector::Constant(2, shift)};
    };
    LabeledGraph neck{{{0, 0, map(a, 1, 0.0)}, {0, 0, map(b, 2, 0.5)}, {1, 0, map(a, 1, 0.0)}, {1, 0, map(b, 2, 0.5)}}};
    LabeledGraph other{{{0, 1, map(b, 3, 0.1)}, {0, 0, map(a, 4, 0.6)}, {1, 1, map(b, 3, 0.1)}, {1, 0, map(a, 4, 0.6)}}};
    return GraphSystem(2, 2, 0, {neck, other}, {neck_prob, 1.0 - neck_prob});
}

}  // namespace

TEST(Validation, RejectsBadMapsAndFamilies)
{
    EXPECT_THROW(deterministic_tree(family({Matrix::Identity(2, 2)}), 2), invalid_input);  // not a contraction
    IfsFamily dup = similarities(2, 0.3);
    dup.maps[1].translation_class = dup.maps[0].translation_class;
    EXPECT_THROW(deterministic_tree(dup, 2), invalid_input);
    EXPECT_THROW(deterministic_tree(similarities(2, 0.3), 0), invalid_input);
    EXPECT_THROW(deterministic_tree(similarities(2, 0.3), 2, {0.0, 0.25}), invalid_input);
}

TEST(Validation, GraphSystemInvariants)
{
    EXPECT_THROW(two_vertex_system(0.0), invalid_input);  // no neck mass
    const auto a = AffineMap{diag2(0.3, 0.3), 1, Vector::Zero(2)};
    // vertex 1 has no outgoing edge
    EXPECT_THROW(GraphSystem(2, 2, 0, {LabeledGraph{{{0, 0, a}}}}, {1.0}), invalid_input);
    // probabilities do not sum to one
    EXPECT_THROW(GraphSystem(2, 1, 0, {LabeledGraph{{{0, 0, a}}}, LabeledGraph{{{0, 0, a}}}}, {0.5, 0.6}),
                 invalid_input);
}

TEST(DeterministicTree, WordCounts)
{
    const auto t = deterministic_tree(similarities(2, 0.3), 3);
    EXPECT_EQ(t.word_count(1) + t.word_count(2) + t.word_count(3), 2.0 + 4.0 + 8.0);
    EXPECT_EQ(deterministic_tree(similarities(3, 0.3), 4).word_count(4), 81.0);
    const auto single = deterministic_tree(similarities(1, 0.3), 5);
    EXPECT_EQ(single.word_count(5), 1.0);
    EXPECT_EQ(single.necks(), (std::vector<int>{1, 2, 3, 4, 5}));
}

TEST(DeterministicTree, LabelsAreConstant)
{
    auto fam = similarities(2, 0.3);
    fam.label = 7;
    const auto t = deterministic_tree(fam, 4);
    for (const std::vector<int>& w : {std::vector<int>{}, {0}, {1, 0}, {1, 1, 0}})
        EXPECT_EQ(t.label_at(w), 7);
    EXPECT_THROW(t.kind_of(std::vector<int>{2}), invalid_input);
}

TEST(GraphSequence, PointMassAndDeterminism)
{
    const auto gs = two_vertex_system(0.3);
    EXPECT_EQ(sample_graph_sequence(gs, 5, 100), sample_graph_sequence(gs, 5, 100));
    EXPECT_NE(sample_graph_sequence(gs, 5, 100), sample_graph_sequence(gs, 6, 100));
    const auto a = AffineMap{diag2(0.3, 0.3), 1, Vector::Zero(2)};
    const GraphSystem point(2, 1, 0, {LabeledGraph{{{0, 0, a}}}, LabeledGraph{{{0, 0, a}}}}, {0.0, 1.0});
    EXPECT_EQ(sample_graph_sequence(point, 1, 5), std::vector<int>(5, 1));
}

TEST(GraphSequence, FrequenciesMatchMu)
{
    const auto gs = two_vertex_system(0.3);
    const auto g = sample_graph_sequence(gs, 42, 10000);
    const double freq = double(std::count(g.begin(), g.end(), 0)) / 1e4;
    EXPECT_LE(std::abs(freq - 0.3), 3.0 * std::sqrt(0.3 * 0.7 / 1e4));
}

TEST(Necks, FormulaExamples)
{
    const auto gs = two_vertex_system(0.3);
    const std::vector<int> g{1, 1, 0, 1, 1, 1, 0, 1};
    EXPECT_EQ(detect_necks(g, gs, 1), (std::vector<int>{3, 7}));
    EXPECT_EQ(detect_necks(g, gs, 2), (std::vector<int>{7}));
    EXPECT_TRUE(detect_necks(std::vector<int>(10, 1), gs, 1).empty());
    EXPECT_EQ(neck_gaps({3, 7, 9}), (std::vector<int>{3, 4, 2}));
}

TEST(Necks, RawGapsAreGeometric)
{
    const auto gs = two_vertex_system(0.3);
    const auto g = sample_graph_sequence(gs, 2024, 10000);
    const auto gaps = neck_gaps(detect_necks(g, gs, 1));
    double mean = 0.0;
    for (int x : gaps)
        mean += x;
    mean /= double(gaps.size());
    EXPECT_LE(std::abs(mean - 1.0 / 0.3), 0.05 / 0.3);
    EXPECT_GT(stats::geometric_fit(gaps, 0.3).p_value, 1e-3);
}

TEST(BuildCodeTree, ChildCountsFollowTheWalk)
{
    const auto gs = two_vertex_system(0.3);
    const std::vector<int> g{1, 1, 0, 1, 1, 1, 0, 1, 0, 1};
    const auto t = build_code_tree(gs, g, 0, 10);
    EXPECT_EQ(t.necks(), (std::vector<int>{3, 7, 9}));
    // level 0 walks vertex 0 under graph 1: label 1 * V + 0
    EXPECT_EQ(t.label_at(std::vector<int>{}), 2);
    EXPECT_EQ(t.label_at(std::vector<int>{0}), 3);  // edge 0 of vertex 0 goes to vertex 1
    EXPECT_EQ(t.label_at(std::vector<int>{1}), 2);
    for (int n : t.necks())
        EXPECT_TRUE(is_neck_level(t, n));
    EXPECT_FALSE(is_neck_level(t, 1));
    EXPECT_THROW(build_code_tree(gs, g, 0, 11), invalid_input);
}

TEST(BuildCodeTree, AlternatingLabels)
{
    const auto a = AffineMap{diag2(0.3, 0.3), 1, Vector::Zero(2)};
    const auto b = AffineMap{diag2(0.3, 0.3), 2, Vector::Ones(2)};
    const LabeledGraph neck{{{0, 0, a}, {1, 0, a}}};
    const LabeledGraph swap{{{0, 1, a}, {0, 1, b}, {1, 0, a}, {1, 0, b}}};
    const GraphSystem gs(2, 2, 0, {neck, swap}, {0.1, 0.9});
    const auto t = build_code_tree(gs, std::vector<int>(6, 1), 0, 6);
    std::vector<int> word;
    for (int level = 0; level < 6; ++level) {
        EXPECT_EQ(t.label_at(word), 2 + level % 2);
        word.push_back(level % 2);
    }
    EXPECT_TRUE(t.necks().empty());
}

TEST(BuildCodeTree, SingleLoopGraphGivesConstantTree)
{
    const auto fam = similarities(2, 0.3, 2);
    const LabeledGraph loop{{{0, 0, fam.maps[0]}, {0, 0, fam.maps[1]}}};
    const GraphSystem gs(2, 1, 0, {loop}, {1.0});
    const auto t = build_code_tree(gs, std::vector<int>(5, 0), 0, 5);
    EXPECT_EQ(t.necks(), (std::vector<int>{1, 2, 3, 4, 5}));
    for (const auto& lvl : t.levels())
        EXPECT_EQ(lvl.size(), 1u);
}

TEST(BuildCodeTree, Determinism)
{
    const auto gs = two_vertex_system(0.4);
    const auto g1 = sample_graph_sequence(gs, 9, 40), g2 = sample_graph_sequence(gs, 9, 40);
    EXPECT_TRUE(build_code_tree(gs, g1, 0, 40) == build_code_tree(gs, g2, 0, 40));
}

TEST(Shift, RebasesNecks)
{
    const auto gs = two_vertex_system(0.3);
    const std::vector<int> g{1, 1, 0, 1, 1, 1, 0, 1, 0, 1};
    const auto t = build_code_tree(gs, g, 0, 10);
    const auto s1 = shift_first_neck(t);
    EXPECT_EQ(s1.necks(), (std::vector<int>{4, 6}));
    EXPECT_EQ(s1.depth(), 7);
    // shifting twice equals building directly from the second neck
    const auto s2 = shift_first_neck(s1);
    const auto direct = build_code_tree(gs, std::span<const int>(g).subspan(7), 0, 3);
    EXPECT_TRUE(s2 == direct);
    EXPECT_THROW(shift_first_neck(s2), invalid_input);
}

TEST(Shift, ConstantTreeLosesOneLevel)
{
    const auto t = deterministic_tree(similarities(2, 0.3), 5);
    const auto s = shift_first_neck(t);
    EXPECT_EQ(s.depth(), 4);
    EXPECT_TRUE(s == deterministic_tree(similarities(2, 0.3), 4));
}

TEST(Compose, EmptyWordAndRotations)
{
    const double r = 0.4, th = 0.3;
    Matrix rot(2, 2);
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const auto t = deterministic_tree(family({r * rot}), 6);
    const auto [id, origin] = compose(t, std::vector<int>{});
    EXPECT_EQ(id, Matrix::Identity(2, 2));
    EXPECT_EQ(origin, Vector::Zero(2));
    Matrix rk(2, 2);
    rk << std::cos(5 * th), -std::sin(5 * th), std::sin(5 * th), std::cos(5 * th);
    EXPECT_LE((compose(t, std::vector<int>(5, 0)).first - std::pow(r, 5) * rk).norm(), 1e-14);
}

TEST(Compose, MatchesFoldLeft)
{
    const auto gs = two_vertex_system(0.4);
    const auto g = sample_graph_sequence(gs, 3, 8);
    const auto t = build_code_tree(gs, g, 0, 8);
    Engine rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> w;
        Matrix ref_t = Matrix::Identity(2, 2);
        Vector ref_p = Vector::Zero(2);
        std::vector<AffineMap> maps;
        for (int l = 0; l < 8; ++l) {
            const auto& fam = t.family_of(l, t.kind_of(w));
            const int i = std::uniform_int_distribution<int>(0, int(fam.size()) - 1)(rng);
            w.push_back(i);
            maps.push_back(fam.maps[std::size_t(i)]);
        }
        for (const auto& f : maps)
            ref_t = ref_t * f.linear;
        for (auto it = maps.rbegin(); it != maps.rend(); ++it)
            ref_p = (*it)(ref_p);
        const auto [tw, pw] = compose(t, w);
        EXPECT_LE((tw - ref_t).norm(), 1e-15);
        EXPECT_LE((pw - ref_p).norm(), 1e-14);
        const auto sv = singular_values(tw);
        EXPECT_LE(sv.largest(), std::pow(0.4, 8) * (1 + 1e-12));
        EXPECT_GE(sv.smallest(), std::pow(0.2, 8) * (1 - 1e-12));
    }
}

TEST(PartitionSum, ClosedForms)
{
    const auto cantor = deterministic_tree(similarities(2, 1.0 / 3.0), 4);
    EXPECT_NEAR(partition_sum(cantor, 4, 1.0).value, 16.0 / 81.0, 1e-15);
    EXPECT_EQ(partition_sum(cantor, 0, 0.7).value, 1.0);
    const auto diag = deterministic_tree(family(std::vector<Matrix>(3, diag2(0.4, 0.2))), 2);
    EXPECT_NEAR(partition_sum(diag, 2, 1.5).value, std::pow(3 * 0.4 * std::sqrt(0.2), 2), 1e-14);
    EXPECT_NEAR(partition_sum(diag, 2, 1.5).value, 0.288, 1e-14);
    EXPECT_EQ(partition_sum(diag, 2, 0.0).value, 9.0);
}

TEST(PartitionSum, MatchesRecursiveOracle)
{
    Engine rng(8);
    std::vector<Matrix> maps;
    for (int i = 0; i < 3; ++i) {
        Matrix m = gaussian_matrix(rng, 3, 3);
        maps.push_back(0.4 * m / Eigen::JacobiSVD<Matrix>(m).singularValues()[0]);
    }
    const auto t = deterministic_tree(family(maps), 5);
    for (double s : {0.0, 0.5, 1.0, 1.7, 2.4, 3.0, 3.5}) {
        const double ref = oracle::partition_sum(maps, 5, s, Matrix::Identity(3, 3));
        EXPECT_NEAR(partition_sum(t, 5, s).value, ref, 1e-12 * ref) << s;
    }
}

TEST(PartitionSum, GraphTreeWordCount)
{
    const auto gs = two_vertex_system(0.3);
    const auto g = sample_graph_sequence(gs, 1, 12);
    const auto t = build_code_tree(gs, g, 0, 12);
    EXPECT_EQ(partition_sum(t, 12, 0.0).value, t.word_count(12));
    EXPECT_EQ(t.word_count(12), std::pow(2.0, 12));
}

TEST(PartitionSum, SubmultiplicativeOnConstantTrees)
{
    Engine rng(9);
    std::vector<Matrix> maps;
    for (int i = 0; i < 3; ++i) {
        Matrix m = gaussian_matrix(rng, 2, 2);
        maps.push_back(0.45 * m / Eigen::JacobiSVD<Matrix>(m).singularValues()[0]);
    }
    const auto t = deterministic_tree(family(maps), 8);
    for (double s : {0.5, 1.0, 1.5, 2.0})
        for (int k = 1; k <= 4; ++k)
            for (int l = 1; k + l <= 8; ++l)
                EXPECT_LE(partition_sum(t, k + l, s).value,
                          partition_sum(t, k, s).value * partition_sum(t, l, s).value * (1 + 1e-12));
}

TEST(PartitionSum, MonteCarloAgreesWithExact)
{
    const auto gs = two_vertex_system(0.3);
    const auto t = build_code_tree(gs, sample_graph_sequence(gs, 5, 14), 0, 14);
    const double exact = partition_sum(t, 14, 1.3).value;
    EnumerationOptions opt;
    opt.cap = 100;
    opt.mc_samples = 20000;
    const auto mc = partition_sum(t, 14, 1.3, opt);
    EXPECT_FALSE(mc.exact);
    EXPECT_LE(std::abs(mc.value - exact), 4.0 * mc.std_error);
    opt.allow_monte_carlo = false;
    EXPECT_THROW(partition_sum(t, 14, 1.3, opt), cap_exceeded);
}

TEST(PartitionSum, DeterministicAcrossThreads)
{
    const auto t = deterministic_tree(family(std::vector<Matrix>(3, diag2(0.4, 0.2))), 9);
    EnumerationOptions one, four;
    four.threads = 4;
    EXPECT_EQ(partition_sum(t, 9, 1.2, one).value, partition_sum(t, 9, 1.2, four).value);
    one.cap = four.cap = 10;
    EXPECT_EQ(partition_sum(t, 9, 1.2, one).value, partition_sum(t, 9, 1.2, four).value);
}

TEST(MeasurePoints, WeightsAndUniformity)
{
    const auto t = deterministic_tree(family({0.3 * Matrix::Identity(2, 2), 0.3 * Matrix::Identity(2, 2)}), 4);
    const auto pts = attractor_points(t, 4, 1.2);
    ASSERT_EQ(pts.size(), 16u);
    double total = 0.0;
    for (const auto& p : pts) {
        EXPECT_NEAR(p.weight, 1.0 / 16.0, 1e-15);
        total += p.weight;
    }
    EXPECT_NEAR(total, 1.0, 1e-14);
    const auto drawn = sample_measure_points(t, 2, 1.2, 1000, 3);
    EXPECT_EQ(drawn.size(), 1000u);
    EXPECT_NEAR(drawn.front().weight, 1e-3, 1e-18);
}

TEST(MeasurePoints, FrequenciesFollowPhiWeights)
{
    const auto t = deterministic_tree(family({diag2(0.4, 0.2), diag2(0.3, 0.25), diag2(0.2, 0.1)}), 3);
    const double s = 1.4;
    const auto cyl = attractor_points(t, 2, s);
    std::map<std::pair<double, double>, std::size_t> index;
    for (std::size_t i = 0; i < cyl.size(); ++i)
        index[{cyl[i].point[0], cyl[i].point[1]}] = i;
    ASSERT_EQ(index.size(), 9u);
    const std::size_t n = 100000;
    const auto drawn = sample_measure_points(t, 2, s, n, 11);
    std::vector<double> counts(9, 0.0);
    for (const auto& p : drawn)
        counts[index.at({p.point[0], p.point[1]})] += 1.0;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        const double expected = cyl[i].weight * double(n);
        chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
    }
    EXPECT_GT(boost::math::cdf(boost::math::complement(boost::math::chi_squared(8.0), chi2)), 1e-3) << chi2;
}

TEST(FullBlocks, CertifiedClosureCountsEveryBlock)
{
    Matrix f(2, 2), h(2, 2);
    f << 0.4, 0, 0, 0.3;
    h << 1, 1, 1, -1;
    const Matrix g = h * Vector(Eigen::Vector2d(0.45, 0.2)).asDiagonal() * h.inverse();
    const auto closure = iterate_closure(LinearFamily({f, g}), 5);
    const auto t = deterministic_tree(family(closure.maps()), 3);
    EXPECT_EQ(count_full_blocks(t, 1.5, 1e-4, 0, 2, 64, 1), 2);
    EXPECT_EQ(count_full_blocks(t, 1.5, 1e6, 0, 2, 64, 1), 0);
    EXPECT_EQ(count_full_blocks(t, 1.5, 1e-4, 1, 1, 64, 1), 0);
    EXPECT_THROW(count_full_blocks(t, 1.5, 1e-4, 0, 5, 64, 1), invalid_input);
}
