#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

using namespace cosie;
using Catch::Approx;
using testsupport::max_abs_diff;

namespace {

void check_invariants(const Matrix& s, const EigenPairs& e) {
    const auto d = e.values.size();
    for (Eigen::Index j = 1; j < d; ++j) CHECK(std::abs(e.values(j)) <= std::abs(e.values(j - 1)));
    for (Eigen::Index j = 0; j < d; ++j) {
        const double resid = (s * e.vectors.col(j) - e.values(j) * e.vectors.col(j)).norm();
        CHECK(resid <= 1e-8 * std::max(1.0, std::abs(e.values(j))));
        Eigen::Index arg = 0;
        e.vectors.col(j).cwiseAbs().maxCoeff(&arg);
        CHECK(e.vectors(arg, j) > 0.0);
    }
    CHECK(max_abs_diff(e.vectors.transpose() * e.vectors, Matrix::Identity(d, d)) <= 1e-10);
}

/// Direct evaluation of every split, written independently of the library:
/// pooled variance sigma^2 = (SS1 + SS2) / p, so the likelihood is
/// monotone decreasing in sigma^2 and the best split minimizes SS1 + SS2.
std::size_t brute_elbow(const std::vector<double>& x) {
    std::size_t best = 0;
    double best_ss = INFINITY;
    for (std::size_t q = 1; q < x.size(); ++q) {
        auto ss = [&](std::size_t b, std::size_t e) {
            const double mu = std::accumulate(x.begin() + b, x.begin() + e, 0.0) / double(e - b);
            double s = 0.0;
            for (std::size_t i = b; i < e; ++i) s += (x[i] - mu) * (x[i] - mu);
            return s;
        };
        const double total = ss(0, q) + ss(q, x.size());
        if (best == 0 || total < best_ss - 1e-12 * best_ss) {
            best_ss = total;
            best = q;
        }
    }
    return best;
}

} // namespace

TEST_CASE("top_eigs on diagonal matrices", "[spectral]") {
    Matrix s = Vector::LinSpaced(3, 3.0, 1.0).asDiagonal();
    const auto e = top_eigs(s, 2);
    CHECK(e.values(0) == Approx(3.0));
    CHECK(e.values(1) == Approx(2.0));
    CHECK(max_abs_diff(e.vectors, Matrix::Identity(3, 2)) <= 1e-14);

    Matrix t(2, 2);
    t << -5, 0, 0, 1;
    const auto f = top_eigs(t, 1);
    CHECK(f.values(0) == Approx(-5.0));
    CHECK(std::abs(f.vectors(0, 0)) == Approx(1.0));
}

TEST_CASE("top_eigs matches a dense oracle", "[spectral][property]") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(40));
        const Matrix s = testsupport::random_symmetric(n, rng);
        const auto d = static_cast<std::size_t>(1 + rng.below(static_cast<std::size_t>(n)));
        const auto e = top_eigs(s, d);
        check_invariants(s, e);
        Eigen::SelfAdjointEigenSolver<Matrix> oracle(s);
        Vector mags = oracle.eigenvalues().cwiseAbs();
        std::sort(mags.data(), mags.data() + mags.size(), std::greater<>());
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j)
            CHECK(std::abs(e.values(j)) == Approx(mags(j)).margin(1e-10));
    }
    Rng r6(6);
    const Matrix s6 = testsupport::random_symmetric(6, r6);
    const auto full = top_eigs(s6, 6);
    CHECK((s6 - full.vectors * full.values.asDiagonal() * full.vectors.transpose()).norm() <= 1e-8);
}

TEST_CASE("top_eigs contract violations", "[spectral]") {
    CHECK_THROWS(top_eigs(Matrix::Identity(3, 3), 4));
    CHECK_THROWS(top_eigs(Matrix::Identity(3, 3), 0));
    Matrix asym = Matrix::Identity(3, 3);
    asym(0, 2) = 1.0;
    CHECK_THROWS_AS(top_eigs(asym, 1), ValidationError);
}

TEST_CASE("top_eigs under vertex permutation", "[spectral][property]") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 25;
        const Matrix q = testsupport::random_orthogonal(n, rng);
        const Vector lam = Vector::LinSpaced(n, 10.0, -4.0);
        Matrix s = q * lam.asDiagonal() * q.transpose();
        s = 0.5 * (s + s.transpose()).eval();
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
        perm.setIdentity();
        for (Eigen::Index i = n; i > 1; --i) std::swap(perm.indices()(i - 1), perm.indices()(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(i)))));
        const Matrix ps = perm * s * perm.transpose();
        const auto a = top_eigs(s, 4), b = top_eigs(ps, 4);
        CHECK(max_abs_diff(a.values, b.values) <= 1e-10);
        CHECK(max_abs_diff(Matrix(perm * a.vectors), b.vectors) <= 1e-8);
    }
}

TEST_CASE("ase on a constant matrix", "[spectral]") {
    const Matrix p = Matrix::Constant(4, 4, 0.25);
    const Matrix unscaled = ase(p, 1, false);
    CHECK(max_abs_diff(unscaled, Matrix::Constant(4, 1, 0.5)) <= 1e-14);
    const Matrix scaled = ase(p, 1, true);  // |lambda| = p n = 1
    CHECK(max_abs_diff(scaled, Matrix::Constant(4, 1, 0.5)) <= 1e-14);
}

TEST_CASE("ase scaled is unscaled times sqrt|lambda|; low-rank reconstruction", "[spectral][property]") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto params = testsupport::random_cosie(40, 3, 1, rng);
        const Matrix p = params.basis() * params.score(0) * params.basis().transpose();
        const auto e = top_eigs(p, 3);
        const Matrix u = ase(p, 3, false), x = ase(p, 3, true);
        CHECK(max_abs_diff(u.transpose() * u, Matrix::Identity(3, 3)) <= 1e-10);
        CHECK(max_abs_diff(x, Matrix(u * e.values.cwiseAbs().cwiseSqrt().asDiagonal())) == 0.0);
        CHECK((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - p).norm() <= 1e-8);
    }
}

TEST_CASE("elbow on simple spectra", "[spectral]") {
    CHECK(elbow_dimension(std::vector<double>{10, 10, 10, 1, 1, 1}) == 3);
    CHECK(elbow_dimension(std::vector<double>{5, 0.1, 0.1, 0.1}) == 1);
    const std::vector<double> fig{9.8, 7.5, 6.9, 1.2, 1.1, 1.0, 0.9};
    CHECK(brute_elbow(fig) == 3);
    CHECK(elbow_dimension(fig) == 3);
    CHECK_THROWS(elbow_dimension(std::vector<double>{1.0}));
    CHECK_THROWS(elbow_dimension(std::vector<double>{1.0, 2.0}));
}

TEST_CASE("elbow agrees with brute force and is scale invariant", "[spectral][property]") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t len = 2 + rng.below(30);
        std::vector<double> x(len);
        for (auto& v : x) v = std::abs(rng.normal()) * (rng.bernoulli(0.3) ? 20.0 : 1.0);
        std::sort(x.begin(), x.end(), std::greater<>());
        const auto q = elbow_dimension(x);
        CHECK(q == brute_elbow(x));
        for (double c : {1e-6, 0.37, 1e5}) {
            std::vector<double> y(x);
            for (auto& v : y) v *= c;
            CHECK(elbow_dimension(y) == q);
        }
    }
}

TEST_CASE("elbow candidate cap", "[spectral]") {
    std::vector<double> x{10, 9, 1, 1, 1, 0.5, 0.5, 0.01, 0.01};
    CHECK(elbow_dimension(x, 3) == brute_elbow({10, 9, 1}));
    CHECK(default_elbow_candidates(30) == 30);
    CHECK(default_elbow_candidates(729) == 100);
}

TEST_CASE("top_left_singular: wide and tall routes agree", "[spectral][property]") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 20;
        const Matrix wide = testsupport::gaussian(n, 30, rng);
        const Matrix tall = wide.leftCols(12);
        const auto w = top_left_singular(wide, 4);
        Eigen::JacobiSVD<Matrix> oracle(wide, Eigen::ComputeFullU);
        CHECK(max_abs_diff(w.values, oracle.singularValues().head(4)) <= 1e-10);
        const Matrix ou = oracle.matrixU().leftCols(4);
        CHECK((w.vectors * w.vectors.transpose() - ou * ou.transpose()).norm() <= 1e-8);
        const auto t = top_left_singular(tall, 4);
        Eigen::JacobiSVD<Matrix> oracle_t(tall, Eigen::ComputeFullU);
        const Matrix tu = oracle_t.matrixU().leftCols(4);
        CHECK((t.vectors * t.vectors.transpose() - tu * tu.transpose()).norm() <= 1e-8);
    }
}
