#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numeric>

using namespace cosie;
using testsupport::max_abs_diff;

namespace {

/// ||V1 V1^T - V2 V2^T||_F formed densely.
double dense_projection_distance(const Matrix& v1, const Matrix& v2) {
    return (v1 * v1.transpose() - v2 * v2.transpose()).norm();
}

GraphCollection noiseless(const CosieParams& params) {
    std::vector<Graph> graphs;
    for (std::size_t i = 0; i < params.m(); ++i) graphs.push_back(probability_matrix(params, i));
    return GraphCollection(std::move(graphs));
}

MaseOptions fixed(std::size_t d, std::size_t di, bool scaled = false) {
    MaseOptions o;
    o.d = d;
    o.graph_dims = std::vector<std::size_t>{di};
    o.scaled = scaled;
    return o;
}

Matrix fixed_b() {
    Matrix b(3, 3);
    b << 0.4, 0.1, 0.1, 0.1, 0.4, 0.2, 0.1, 0.2, 0.3;
    return b;
}

} // namespace

TEST_CASE("noiseless inputs recover the subspace and scores", "[mase]") {
    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        const auto params = testsupport::random_cosie(60, 3, 2 + rng.below(4), rng);
        for (bool scaled : {false, true}) {
            const auto fit = mase_fit(noiseless(params), fixed(3, 3, scaled));
            CHECK(dense_projection_distance(fit.basis, params.basis()) <= 1e-10);
            const Matrix w = procrustes_align(fit.basis, params.basis());
            for (std::size_t i = 0; i < params.m(); ++i) {
                const Matrix expect = w.transpose() * params.score(i) * w;
                CHECK((fit.scores[i] - expect).norm() <= 1e-10);
            }
            CHECK(fit.warnings.empty());
        }
    }
}

TEST_CASE("two rank-2 graphs identify three communities", "[mase]") {
    const double a = 0.6, b = 0.2;
    Matrix b1(3, 3), b2(3, 3);
    b1 << a, b, b, b, a, a, b, a, a;
    b2 << a, a, b, a, a, b, b, b, a;
    const MultilayerSbmParams sbm({0, 0, 1, 1, 2, 2}, {b1, b2});
    const GraphCollection graphs({sbm_probability_matrix(sbm, 0), sbm_probability_matrix(sbm, 1)});
    const auto fit = mase_fit(graphs, fixed(3, 2));

    // oracle: top-3 eigenvectors of U1 U1^T + U2 U2^T with U_i from a dense solver
    Matrix sum = Matrix::Zero(6, 6);
    for (const auto& g : graphs) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(g.entries());
        std::vector<Eigen::Index> idx(6);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto x, auto y) {
            return std::abs(es.eigenvalues()(x)) > std::abs(es.eigenvalues()(y));
        });
        Matrix u(6, 2);
        u << es.eigenvectors().col(idx[0]), es.eigenvectors().col(idx[1]);
        sum += u * u.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> joint(sum);
    const Matrix oracle = joint.eigenvectors().rightCols(3);
    CHECK(dense_projection_distance(fit.basis, oracle) <= 1e-10);

    Matrix z = Matrix::Zero(6, 3);
    for (std::size_t u = 0; u < 6; ++u) z(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(sbm.z()[u])) = 1.0;
    const Matrix proj = z * (z.transpose() * z).inverse() * z.transpose();
    CHECK((fit.basis - proj * fit.basis).norm() <= 1e-10);
    CHECK(fit.numerical_rank == 3);
}

TEST_CASE("score_matrix examples", "[mase]") {
    Rng rng(7);
    const auto params = testsupport::random_cosie(30, 3, 1, rng);
    const Matrix p = probability_matrix(params, 0).entries();
    CHECK(max_abs_diff(score_matrix(params.basis(), p), params.score(0)) <= 1e-12);

    const Matrix a = testsupport::random_symmetric(5, rng);
    CHECK(max_abs_diff(score_matrix(Matrix::Identity(5, 5), a), a) <= 1e-15);

    const Matrix w0 = testsupport::random_orthogonal(3, rng);
    const Matrix rotated = score_matrix(params.basis() * w0, p);
    Matrix oracle = Matrix::Zero(3, 3);
    const Matrix vw = params.basis() * w0;
    for (Eigen::Index k = 0; k < 3; ++k)
        for (Eigen::Index l = 0; l < 3; ++l)
            for (Eigen::Index u = 0; u < 30; ++u)
                for (Eigen::Index v = 0; v < 30; ++v) oracle(k, l) += vw(u, k) * p(u, v) * vw(v, l);
    CHECK(max_abs_diff(rotated, oracle) <= 1e-12);
    CHECK(max_abs_diff(rotated, Matrix(w0.transpose() * params.score(0) * w0)) <= 1e-12);
    CHECK_THROWS_AS(score_matrix(params.basis(), Matrix::Zero(4, 4)), Error);
}

TEST_CASE("reconstruct_p examples", "[mase]") {
    Rng rng(9);
    const auto params = testsupport::random_cosie(20, 2, 1, rng);
    const Matrix p = probability_matrix(params, 0).entries();
    CHECK(max_abs_diff(reconstruct_p(params.basis(), params.score(0), false), p) <= 1e-12);
    CHECK(reconstruct_p(params.basis(), Matrix::Zero(2, 2), true) == Matrix::Zero(20, 20));
    Matrix big = params.score(0) * 50.0;
    const Matrix clipped = reconstruct_p(params.basis(), big, true);
    CHECK(clipped.maxCoeff() <= 1.0);
    CHECK(clipped.minCoeff() >= 0.0);
}

TEST_CASE("more graphs give better probability estimates", "[mase][statistical]") {
    const std::size_t n = 512;
    const Matrix b = fixed_b();
    double err1 = 0.0, err20 = 0.0;
    const int reps = 25;
    Rng root(2024);
    for (int r = 0; r < reps; ++r) {
        const MultilayerSbmParams sbm(testsupport::block_labels(n, 3), std::vector<Matrix>(20, b));
        const Matrix p = sbm_probability_matrix(sbm, 0).entries();
        const auto graphs = sample_collection(sbm, root.derive(static_cast<std::uint64_t>(r)));
        const auto many = mase_fit(graphs, fixed(3, 3));
        const auto one = mase_fit(GraphCollection({graphs[0]}), fixed(3, 3));
        err20 += (reconstruct_p(many, 0, false) - p).norm() / p.norm();
        err1 += (reconstruct_p(one, 0, false) - p).norm() / p.norm();
    }
    CHECK(err20 < err1);
}

TEST_CASE("out_of_sample scoring", "[mase]") {
    Rng rng(55);
    const auto params = testsupport::random_cosie(40, 3, 3, rng);
    const auto graphs = sample_collection(params, rng.derive(1));
    const auto fit = mase_fit(graphs, fixed(3, 3));
    CHECK(out_of_sample(fit, graphs[1]) == fit.scores[1]);

    const auto exact = mase_fit(noiseless(params), fixed(3, 3));
    const Matrix w = procrustes_align(exact.basis, params.basis());
    const Matrix r = out_of_sample(exact, probability_matrix(params, 2));
    CHECK(max_abs_diff(r, Matrix(w.transpose() * params.score(2) * w)) <= 1e-10);
    CHECK_THROWS_AS(out_of_sample(fit, Graph::empty(39)), Error);
}

TEST_CASE("basis orthonormality and score symmetry on sampled graphs", "[mase][property]") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const auto params = testsupport::random_cosie(50 + rng.below(50), 3, 1 + rng.below(5), rng);
        const auto graphs = sample_collection(params, rng.derive(static_cast<std::uint64_t>(trial)));
        const auto fit = mase_fit(graphs, fixed(3, 2 + rng.below(3), trial % 2 == 0));
        CHECK(max_abs_diff(fit.basis.transpose() * fit.basis, Matrix::Identity(3, 3)) <= 1e-10);
        for (const auto& r : fit.scores) CHECK(max_abs_diff(r, r.transpose()) <= 1e-12);
    }
}

TEST_CASE("vertex relabeling conjugates the scores", "[mase][property]") {
    Rng rng(19);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 60;
        const auto params = testsupport::random_cosie(n, 3, 3, rng);
        const auto graphs = sample_collection(params, rng.derive(static_cast<std::uint64_t>(trial)));
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(static_cast<Eigen::Index>(n));
        perm.setIdentity();
        for (std::size_t i = n; i > 1; --i)
            std::swap(perm.indices()(static_cast<Eigen::Index>(i - 1)),
                      perm.indices()(static_cast<Eigen::Index>(rng.below(i))));
        std::vector<Graph> moved;
        for (const auto& g : graphs) moved.emplace_back(Matrix(perm * g.entries() * perm.transpose()), GraphKind::binary);
        const auto a = mase_fit(graphs, fixed(3, 3));
        const auto b = mase_fit(GraphCollection(moved), fixed(3, 3));
        CHECK(dense_projection_distance(Matrix(perm * a.basis), b.basis) <= 1e-8);
        const Matrix w = procrustes_align(b.basis, Matrix(perm * a.basis));
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(max_abs_diff(b.scores[i], Matrix(w.transpose() * a.scores[i] * w)) <= 1e-8);
            for (std::size_t j = 0; j < i; ++j)
                CHECK(std::abs((a.scores[i] - a.scores[j]).norm() - (b.scores[i] - b.scores[j]).norm()) <= 1e-8);
        }
    }
}

TEST_CASE("graph order does not change the subspace", "[mase][property]") {
    Rng rng(23);
    for (int trial = 0; trial < 8; ++trial) {
        const auto params = testsupport::random_cosie(50, 3, 4, rng);
        const auto graphs = sample_collection(params, rng.derive(static_cast<std::uint64_t>(trial)));
        const std::vector<std::size_t> order{2, 0, 3, 1};
        std::vector<Graph> shuffled;
        for (auto i : order) shuffled.push_back(graphs[i]);
        const auto a = mase_fit(graphs, fixed(3, 3));
        const auto b = mase_fit(GraphCollection(shuffled), fixed(3, 3));
        CHECK(dense_projection_distance(a.basis, b.basis) <= 1e-8);
        const Matrix w = procrustes_align(b.basis, a.basis);
        for (std::size_t k = 0; k < order.size(); ++k)
            CHECK(max_abs_diff(b.scores[k], Matrix(w.transpose() * a.scores[order[k]] * w)) <= 1e-8);
    }
}

TEST_CASE("wide concatenations use the Gram route with the same answer", "[mase]") {
    Rng rng(3);
    const auto params = testsupport::random_cosie(10, 2, 6, rng);
    const auto graphs = sample_collection(params, rng.derive(0));
    const auto fit = mase_fit(graphs, fixed(2, 3));  // 18 columns > 10 rows
    Matrix concat(10, 18);
    for (std::size_t i = 0; i < 6; ++i) concat.middleCols(static_cast<Eigen::Index>(3 * i), 3) = ase(graphs[i], 3, false);
    Eigen::JacobiSVD<Matrix> svd(concat, Eigen::ComputeThinU);
    CHECK(dense_projection_distance(fit.basis, svd.matrixU().leftCols(2)) <= 1e-8);
    CHECK(max_abs_diff(fit.singular_values.head(10), svd.singularValues()) <= 1e-8);
}

TEST_CASE("automatic dimensions on noiseless blocks", "[mase]") {
    const Matrix one = Matrix::Ones(3, 3), eye = Matrix::Identity(3, 3);
    const MultilayerSbmParams sbm(testsupport::block_labels(90, 3),
                                  {0.5 * eye + 0.1 * one, 0.4 * eye + 0.2 * one, 0.6 * eye + 0.05 * one});
    std::vector<Graph> graphs;
    for (std::size_t i = 0; i < 3; ++i) graphs.push_back(sbm_probability_matrix(sbm, i));
    const auto fit = mase_fit(GraphCollection(graphs));
    CHECK(fit.graph_dims == std::vector<std::size_t>{3, 3, 3});
    CHECK(fit.d == 3);
}

TEST_CASE("mase contract violations and rank warnings", "[mase]") {
    Rng rng(1);
    const auto params = testsupport::random_cosie(20, 2, 2, rng);
    const auto graphs = noiseless(params);
    CHECK_THROWS(mase_fit(graphs, fixed(5, 2)));
    MaseOptions bad = fixed(2, 2);
    bad.graph_dims = std::vector<std::size_t>{2, 2, 2};
    CHECK_THROWS(mase_fit(graphs, bad));
    CHECK_THROWS(mase_fit(graphs, fixed(2, 21)));
    CHECK_THROWS(mase_fit(GraphCollection{}, fixed(1, 1)));
    const auto over = mase_fit(graphs, fixed(3, 2));
    CHECK(over.numerical_rank == 2);
    CHECK(over.warnings.size() == 1);
}

TEST_CASE("fixed-B design concentrates the subspace estimate", "[mase][statistical]") {
    const std::size_t n = 729;
    const MultilayerSbmParams sbm(testsupport::block_labels(n, 3), std::vector<Matrix>(5, fixed_b()));
    const Matrix v = sbm_to_cosie(sbm).basis();
    Rng root(99);
    int close = 0;
    for (std::uint64_t r = 0; r < 25; ++r) {
        const auto fit = mase_fit(sample_collection(sbm, root.derive(r)), fixed(3, 3));
        close += projection_distance(fit.basis, v) < 0.5;
    }
    CHECK(close >= 24);
}
