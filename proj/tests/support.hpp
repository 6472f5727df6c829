#pragma once

// Shared helpers for the unit tests: scratch directories and hand-rolled
// generators for random matrices and model parameters.

#include "cosie/cosie.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace testsupport {

using cosie::Matrix;
using cosie::Rng;
using cosie::Vector;

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cosie_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

inline Matrix random_symmetric(Eigen::Index n, Rng& rng) {
    Matrix g = gaussian(n, n, rng);
    return 0.5 * (g + g.transpose());
}

/// Orthonormal n x d basis from the QR factor of a Gaussian matrix.
inline Matrix random_orthonormal(Eigen::Index n, Eigen::Index d, Rng& rng) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(n, d, rng));
    return qr.householderQ() * Matrix::Identity(n, d);
}

inline Matrix random_orthogonal(Eigen::Index d, Rng& rng) { return random_orthonormal(d, d, rng); }

/// Symmetric K x K matrix with entries uniform in [lo, hi].
inline Matrix random_block(Eigen::Index k, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Matrix b(k, k);
    for (Eigen::Index v = 0; v < k; ++v)
        for (Eigen::Index u = 0; u <= v; ++u) b(u, v) = b(v, u) = lo + (hi - lo) * rng.uniform();
    return b;
}

/// Labels with every community in [0, K) present, then shuffled.
inline std::vector<std::size_t> random_labels(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> z(n);
    for (std::size_t u = 0; u < n; ++u) z[u] = u < k ? u : static_cast<std::size_t>(rng.below(k));
    for (std::size_t i = n; i > 1; --i) std::swap(z[i - 1], z[rng.below(i)]);
    return z;
}

inline std::vector<std::size_t> block_labels(std::size_t n, std::size_t k) {
    std::vector<std::size_t> z(n);
    for (std::size_t u = 0; u < n; ++u) z[u] = u * k / n;
    return z;
}

/// Z B Z^T by explicit triple loop.
inline Matrix brute_sbm_p(const std::vector<std::size_t>& z, const Matrix& b) {
    const auto n = static_cast<Eigen::Index>(z.size());
    Matrix zm = Matrix::Zero(n, b.rows());
    for (Eigen::Index u = 0; u < n; ++u) zm(u, static_cast<Eigen::Index>(z[static_cast<std::size_t>(u)])) = 1.0;
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index u = 0; u < n; ++u)
        for (Eigen::Index v = 0; v < n; ++v)
            for (Eigen::Index a = 0; a < b.rows(); ++a)
                for (Eigen::Index c = 0; c < b.cols(); ++c) p(u, v) += zm(u, a) * b(a, c) * zm(v, c);
    return p;
}

/// Random COSIE model whose probability matrices stay inside [0, 1]: V from
/// a balanced SBM basis rotated by an orthogonal d x d matrix, R_i from
/// random blocks in [lo, hi] (well conditioned for hi - lo modest).
inline cosie::CosieParams random_cosie(std::size_t n, std::size_t d, std::size_t m, Rng& rng, double lo = 0.05,
                                       double hi = 0.6) {
    std::vector<Matrix> blocks;
    for (std::size_t i = 0; i < m; ++i) {
        Matrix b = random_block(static_cast<Eigen::Index>(d), rng, lo, hi);
        b.diagonal().array() += 0.3;  // keep full rank
        b = b.cwiseMin(1.0);
        blocks.push_back(b);
    }
    const cosie::MultilayerSbmParams sbm(block_labels(n, d), blocks);
    const auto base = cosie::sbm_to_cosie(sbm);
    const Matrix w = random_orthogonal(static_cast<Eigen::Index>(d), rng);
    std::vector<Matrix> scores;
    for (const auto& r : base.scores()) {
        Matrix s = w.transpose() * r * w;
        scores.push_back(0.5 * (s + s.transpose()));
    }
    return cosie::CosieParams(base.basis() * w, scores);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace testsupport
