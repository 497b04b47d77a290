#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "affect/errors.hpp"
#include "affect/svr.hpp"
#include "qp_oracle.hpp"
#include "test_util.hpp"

using namespace affect;
using namespace affect::svr;
using testutil::random_tensor;

namespace {

// same standardization convention as fit_svr (population variance)
std::vector<double> standardize(const Tensor& features) {
    const std::size_t n = features.dim(0), d = features.dim(1);
    std::vector<double> x = features.data;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x[i * d + j];
        mean /= double(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = x[i * d + j] - mean;
            var += dv * dv;
        }
        var /= double(n);
        const double sd = std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i)
            x[i * d + j] = (x[i * d + j] - mean) / sd;
    }
    return x;
}

std::vector<double> linear_kernel_matrix(const std::vector<double>& x,
                                         std::size_t n, std::size_t d) {
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c)
                dot += x[i * d + c] * x[j * d + c];
            k[i * n + j] = dot;
        }
    return k;
}

double dual_objective(const std::vector<double>& kmat,
                      const std::vector<double>& y, double eps,
                      const std::vector<double>& beta) {
    const std::size_t n = y.size();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = 0.0;
        for (std::size_t j = 0; j < n; ++j) f += kmat[i * n + j] * beta[j];
        // alpha_i * alpha*_i = 0 at the optimum, so alpha + alpha* = |beta|
        obj += 0.5 * beta[i] * f + eps * std::fabs(beta[i]) - y[i] * beta[i];
    }
    return obj;
}

std::vector<double> full_beta(const SvrModel& model, const Tensor& features) {
    // recover per-training-point coefficients by matching support vectors
    const std::vector<double> x = standardize(features);
    const std::size_t n = features.dim(0), d = features.dim(1);
    std::vector<double> beta(n, 0.0);
    const std::size_t n_sv = model.dual_coef.size();
    std::vector<bool> used(n_sv, false);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < n_sv; ++s) {
            if (used[s]) continue;
            bool match = true;
            for (std::size_t c = 0; c < d; ++c)
                if (std::fabs(model.support_vectors.data[s * d + c] -
                              x[i * d + c]) > 1e-9) {
                    match = false;
                    break;
                }
            if (match) {
                beta[i] = model.dual_coef[s];
                used[s] = true;
                break;
            }
        }
    }
    return beta;
}

}  // namespace

TEST_CASE("two-point fit interpolates the midpoint") {
    Tensor x({2, 1}, {0, 1});
    SvrModel model = fit_svr(x, {0, 1}, 1000.0, 0.0);
    std::vector<double> pred = predict_svr(model, Tensor({1, 1}, {0.5}));
    CHECK(pred[0] == doctest::Approx(0.5).epsilon(1e-3));

    std::vector<double> train_pred = predict_svr(model, x);
    CHECK(train_pred[0] == doctest::Approx(0.0).epsilon(2e-3));
    CHECK(train_pred[1] == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("constant targets produce a constant model") {
    std::mt19937_64 rng(26);
    Tensor x = random_tensor({5, 2}, rng);
    SvrModel model = fit_svr(x, {0.4, 0.4, 0.4, 0.4, 0.4}, 10.0, 0.01);
    std::vector<double> pred = predict_svr(model, random_tensor({3, 2}, rng));
    for (double v : pred) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("an epsilon tube wider than the targets yields a flat model") {
    Tensor x({4, 1}, {0, 1, 2, 3});
    std::vector<double> y = {-0.1, 0.1, -0.1, 0.1};
    SvrModel model = fit_svr(x, y, 10.0, 0.5);
    CHECK(model.dual_coef.empty());
    std::vector<double> pred = predict_svr(model, x);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(std::fabs(pred[i] - y[i]) <= 0.5 + 1e-9);
}

TEST_CASE("zero-variance feature columns are dropped") {
    Tensor x({3, 2}, {1.0, 7.0, 2.0, 7.0, 3.0, 7.0});
    SvrModel model = fit_svr(x, {1, 2, 3}, 100.0, 0.0);
    CHECK(model.active_cols == std::vector<std::uint8_t>{1, 0});
    std::vector<double> pred = predict_svr(model, x);
    CHECK(pred[1] == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("dual coefficients respect the box constraint") {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + rng() % 10;
        Tensor x = random_tensor({n, 3}, rng);
        std::vector<double> y = testutil::random_series(n, rng);
        const double C = 0.5 + double(rng() % 100) / 10.0;
        SvrModel model = fit_svr(x, y, C, 0.05);
        double sum = 0.0;
        for (double b : model.dual_coef) {
            CHECK(std::fabs(b) <= C + 1e-9);
            sum += b;
        }
        CHECK(std::fabs(sum) < 1e-9);  // equality constraint
    }
}

TEST_CASE("smo agrees with the qp oracle on random small instances") {
    std::mt19937_64 rng(28);
    std::uniform_real_distribution<double> logc(std::log(0.1), std::log(100.0));
    std::uniform_real_distribution<double> epsd(0.0, 0.2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 5;   // up to 6 points
        const std::size_t d = 1 + rng() % 3;   // up to 3 features
        Tensor x = random_tensor({n, d}, rng);
        std::vector<double> y = testutil::random_series(n, rng);
        const double C = std::exp(logc(rng));
        const double eps = epsd(rng);

        SvrModel model = fit_svr(x, y, C, eps, KernelKind::Linear, 0.0, 1e-6);
        const std::vector<double> xs = standardize(x);
        const std::vector<double> kmat = linear_kernel_matrix(xs, n, d);
        qporacle::Solution oracle = qporacle::solve_svr_dual(kmat, y, C, eps);

        const std::vector<double> beta = full_beta(model, x);
        CHECK(std::fabs(dual_objective(kmat, y, eps, beta) -
                        oracle.objective) < 1e-3);

        std::vector<double> pred = predict_svr(model, x);
        for (std::size_t i = 0; i < n; ++i) {
            double f = oracle.bias;
            for (std::size_t j = 0; j < n; ++j)
                f += kmat[i * n + j] * oracle.beta[j];
            CHECK(std::fabs(pred[i] - f) < 1e-3);
        }
    }
}

TEST_CASE("linear-kernel predictions survive affine feature rescaling") {
    std::mt19937_64 rng(29);
    Tensor x = random_tensor({8, 2}, rng);
    std::vector<double> y = testutil::random_series(8, rng);
    SvrModel base = fit_svr(x, y, 5.0, 0.01, KernelKind::Linear, 0.0, 1e-6);

    Tensor scaled = x;
    for (std::size_t i = 0; i < 8; ++i) {
        scaled.data[i * 2] = 100.0 * scaled.data[i * 2] - 7.0;
        scaled.data[i * 2 + 1] = 0.01 * scaled.data[i * 2 + 1] + 3.0;
    }
    SvrModel rescaled =
        fit_svr(scaled, y, 5.0, 0.01, KernelKind::Linear, 0.0, 1e-6);
    std::vector<double> p1 = predict_svr(base, x);
    std::vector<double> p2 = predict_svr(rescaled, scaled);
    for (std::size_t i = 0; i < p1.size(); ++i)
        CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-6));
}

TEST_CASE("batch prediction equals row-by-row prediction") {
    std::mt19937_64 rng(30);
    Tensor x = random_tensor({6, 3}, rng);
    SvrModel model = fit_svr(x, testutil::random_series(6, rng), 10.0, 0.01);
    Tensor queries = random_tensor({4, 3}, rng);
    std::vector<double> batch = predict_svr(model, queries);
    for (std::size_t i = 0; i < 4; ++i) {
        Tensor row({1, 3},
                   {queries.data[i * 3], queries.data[i * 3 + 1],
                    queries.data[i * 3 + 2]});
        CHECK(predict_svr(model, row)[0] == batch[i]);
    }
}

TEST_CASE("fit_svr validates its inputs") {
    Tensor x({2, 1}, {0, 1});
    CHECK_THROWS_AS(fit_svr(x, {0.0}, 1.0, 0.0), ParamError);
    CHECK_THROWS_AS(fit_svr(x, {0, 1}, 0.0, 0.0), ParamError);
    CHECK_THROWS_AS(fit_svr(x, {0, 1}, 1.0, -0.1), ParamError);
    SvrModel model = fit_svr(x, {0, 1}, 1.0, 0.0);
    CHECK_THROWS_AS(predict_svr(model, Tensor({1, 2}, {0, 0})), ShapeError);
}

TEST_CASE("grid search picks the best dev cell with deterministic ties") {
    std::mt19937_64 rng(31);
    Tensor train = random_tensor({20, 2}, rng);
    std::vector<double> y_train(20), y_dev(10);
    Tensor dev = random_tensor({10, 2}, rng);
    for (std::size_t i = 0; i < 20; ++i)
        y_train[i] = 0.7 * train.data[i * 2] - 0.2 * train.data[i * 2 + 1];
    for (std::size_t i = 0; i < 10; ++i)
        y_dev[i] = 0.7 * dev.data[i * 2] - 0.2 * dev.data[i * 2 + 1];

    GridSearchReport one =
        grid_search(train, y_train, dev, y_dev, {1.0}, {0.01});
    CHECK(one.cells.size() == 1);
    CHECK(one.chosen == 0);

    GridSearchReport report = grid_search(train, y_train, dev, y_dev,
                                          {0.001, 1.0}, {0.01, 0.2});
    CHECK(report.cells.size() == 4);
    double best = -2.0;
    for (const GridCell& c : report.cells) best = std::max(best, c.dev_ccc);
    CHECK(report.best().dev_ccc == best);

    // a degenerate dev target of two values still yields ties broken by
    // smaller C then smaller epsilon: identical scores keep the first cell
    GridSearchReport tie = grid_search(train, y_train, dev, y_dev,
                                       {2.0, 1.0}, {0.01});
    if (tie.cells[0].dev_ccc == tie.cells[1].dev_ccc) {
        CHECK(tie.best().C == 1.0);
    }
    CHECK(tie.cells[0].C == 1.0);  // grids iterate in ascending order
}

TEST_CASE("svr models round-trip through the container format") {
    std::mt19937_64 rng(32);
    Tensor x = random_tensor({10, 3}, rng);
    std::vector<double> y = testutil::random_series(10, rng);
    SvrModel model = fit_svr(x, y, 3.0, 0.02);

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "svr_roundtrip.svrm";
    save_svr(path, model);
    SvrModel loaded = load_svr(path);
    CHECK(loaded.kernel == model.kernel);
    CHECK(loaded.C == model.C);
    CHECK(loaded.epsilon == model.epsilon);
    CHECK(loaded.bias == model.bias);
    CHECK(loaded.dual_coef == model.dual_coef);
    CHECK(loaded.support_vectors.data == model.support_vectors.data);
    CHECK(predict_svr(loaded, x) == predict_svr(model, x));
    std::filesystem::remove(path);
}
