// Small end-to-end tour: sample a multilayer SBM, embed it jointly,
// recover the communities and compare two graphs.

#include "cosie/cosie.hpp"

#include <iostream>

int main() {
    using namespace cosie;
    const std::size_t n = 200;
    std::vector<std::size_t> z(n);
    for (std::size_t u = 0; u < n; ++u) z[u] = u < n / 2 ? 0 : 1;

    Matrix b1(2, 2), b2(2, 2);
    b1 << 0.4, 0.1, 0.1, 0.4;
    b2 << 0.2, 0.1, 0.1, 0.5;
    const MultilayerSbmParams sbm(z, {b1, b1, b2, b2});
    const auto graphs = sample_collection(sbm, Rng(42));

    MaseOptions opts;
    opts.d = 2;
    opts.graph_dims = std::vector<std::size_t>{2};
    const auto fit = mase_fit(graphs, opts);

    const Matrix v = sbm_to_cosie(sbm).basis();
    std::cout << "subspace error (Frobenius): " << projection_distance(fit.basis, v) << '\n';

    KMeansOptions ko;
    ko.seed = 7;
    const auto clusters = kmeans_cluster(fit.basis, 2, ko);
    std::cout << "misclustered vertices: " << misclustering_count(clusters.assignment, z, 2) << '\n';

    std::cout << "score distances:\n" << distance_matrix(fit.scores) << '\n';

    TestOptions to;
    to.d = 2;
    to.graph_dim = 2;
    to.reps = 100;
    const auto same = bootstrap_test(graphs[0], graphs[1], to, Rng(1));
    const auto diff = bootstrap_test(graphs[0], graphs[2], to, Rng(2));
    std::cout << "p-value, same model:      " << same.p_value << '\n';
    std::cout << "p-value, different model: " << diff.p_value << '\n';
}
