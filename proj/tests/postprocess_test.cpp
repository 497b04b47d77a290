#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "affect/errors.hpp"
#include "affect/metrics.hpp"
#include "affect/postprocess.hpp"
#include "test_util.hpp"

using namespace affect;
using namespace affect::postprocess;
using testutil::random_series;

namespace {

// independent reference: explicit window gather + sort
Series median_oracle(const Series& pred, std::size_t w) {
    const long half = long(w) / 2;
    const long n = long(pred.size());
    Series out(pred.size());
    for (long t = 0; t < n; ++t) {
        std::vector<double> window;
        for (long k = t - half; k <= t + half; ++k)
            window.push_back(pred[std::size_t(std::clamp(k, 0L, n - 1))]);
        std::sort(window.begin(), window.end());
        out[std::size_t(t)] = window[window.size() / 2];
    }
    return out;
}

double mean_of(const Series& s) {
    double m = 0.0;
    for (double v : s) m += v;
    return m / double(s.size());
}

double std_of(const Series& s) {
    const double m = mean_of(s);
    double v = 0.0;
    for (double x : s) v += (x - m) * (x - m);
    return std::sqrt(v / double(s.size()));
}

}  // namespace

TEST_CASE("median filter basics") {
    Series s = {1, 5, 2};
    CHECK(median_filter(s, 1) == s);
    CHECK(median_filter(s, 3) == Series{1, 2, 2});
    CHECK(median_filter(Series(10, 0.3), 5) == Series(10, 0.3));
    CHECK_THROWS_AS(median_filter(s, 2), ParamError);
    CHECK_THROWS_AS(median_filter(s, 0), ParamError);
}

TEST_CASE("median filter matches a brute-force oracle on random series") {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 5 + rng() % 40;
        Series s = random_series(n, rng);
        const std::size_t w =
            2 * (rng() % std::min<std::size_t>((n - 1) / 2 + 1, 8)) + 1;
        Series got = median_filter(s, w);
        Series want = median_oracle(s, w);
        REQUIRE(got == want);
        // the median of real samples is always one of the samples
        for (double v : got)
            CHECK(std::find(s.begin(), s.end(), v) != s.end());
    }
}

TEST_CASE("centering in bias and literal modes") {
    CenterParams p = fit_center({0.3, 0.3}, {0.1, 0.1});
    CHECK(p.gold_mean == doctest::Approx(0.3));
    CHECK(p.pred_mean == doctest::Approx(0.1));

    Series out = apply_center({0, 1}, p, CenterMode::Bias);
    CHECK(out[0] == doctest::Approx(0.2));
    CHECK(out[1] == doctest::Approx(1.2));

    // equal means makes bias mode the identity
    CenterParams eq = fit_center({0.5, 0.7}, {0.7, 0.5});
    Series same = apply_center({0.1, 0.9}, eq, CenterMode::Bias);
    CHECK(same[0] == doctest::Approx(0.1));
    CHECK(same[1] == doctest::Approx(0.9));

    CenterParams lit = fit_center({1.0, 2.0}, {0, 0});
    Series litout = apply_center({1, 2}, lit, CenterMode::Literal);
    CHECK(litout[0] == doctest::Approx(-0.5));
    CHECK(litout[1] == doctest::Approx(0.5));
}

TEST_CASE("bias centering shifts the mean and keeps the variance") {
    std::mt19937_64 rng(17);
    Series gold = random_series(40, rng);
    Series pred = random_series(40, rng);
    CenterParams p = fit_center(gold, pred);
    Series out = apply_center(pred, p, CenterMode::Bias);
    CHECK(mean_of(out) - mean_of(pred) ==
          doctest::Approx(p.gold_mean - p.pred_mean).epsilon(1e-12));
    CHECK(std_of(out) == doctest::Approx(std_of(pred)).epsilon(1e-12));
}

TEST_CASE("scaling in std and ratio modes") {
    Series gold = {2, -2};
    Series pred = {1, -1};
    const double beta = fit_scale(gold, pred, ScaleMode::Std);
    CHECK(beta == doctest::Approx(2.0));
    Series out = apply_scale({0.5, -0.5}, beta);
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(-1.0));

    CHECK(fit_scale(pred, pred, ScaleMode::Std) == doctest::Approx(1.0));
    CHECK_THROWS_AS(fit_scale(gold, {1, 1}, ScaleMode::Std), ParamError);

    CHECK(fit_scale({4, 2}, {2, 1}, ScaleMode::LiteralRatio) ==
          doctest::Approx(2.0));
}

TEST_CASE("std scaling multiplies the standard deviation by beta") {
    std::mt19937_64 rng(18);
    Series gold = random_series(30, rng);
    Series pred = random_series(30, rng);
    const double beta = fit_scale(gold, pred, ScaleMode::Std);
    CHECK(std_of(apply_scale(pred, beta)) ==
          doctest::Approx(beta * std_of(pred)).epsilon(1e-12));
}

TEST_CASE("time shift pads with the first value") {
    Series s = {1, 2, 3};
    CHECK(time_shift(s, 0) == s);
    CHECK(time_shift(s, 1) == Series{1, 1, 2});
    CHECK_THROWS_AS(time_shift(s, 251), ParamError);

    std::mt19937_64 rng(19);
    Series r = random_series(50, rng);
    const std::size_t k = 7;
    Series shifted = time_shift(r, k);
    for (std::size_t t = k; t < r.size(); ++t)
        CHECK(shifted[t] == r[t - k]);
}

TEST_CASE("shift search recovers a constructed lag") {
    std::mt19937_64 rng(20);
    Series base(300);
    for (std::size_t t = 0; t < base.size(); ++t)
        base[t] = std::sin(0.07 * double(t));
    const std::size_t true_lag = 9;
    Series gold = time_shift(base, true_lag);
    double best = -2.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k <= 25; ++k) {
        const double c = metrics::ccc(gold, time_shift(base, k));
        if (c > best) {
            best = c;
            best_k = k;
        }
    }
    CHECK(best_k == true_lag);
}

TEST_CASE("delay compensation index arithmetic") {
    AlignedPair p0 = delay_compensate_indices(3, 0);
    CHECK(p0.first_indices == std::vector<std::size_t>{0, 1, 2});
    CHECK(p0.second_indices == std::vector<std::size_t>{0, 1, 2});

    AlignedPair p1 = delay_compensate_indices(3, 1);
    CHECK(p1.first_indices == std::vector<std::size_t>{0, 1});
    CHECK(p1.second_indices == std::vector<std::size_t>{1, 2});

    AlignedPair p = delay_compensate_indices(100, 40);
    CHECK(p.first_indices.size() == 60);
    CHECK_THROWS_AS(delay_compensate_indices(3, 3), ParamError);
}

TEST_CASE("optimize_chain leaves a perfect prediction alone") {
    std::mt19937_64 rng(21);
    Series gold = random_series(80, rng);
    PostprocessChain chain = optimize_chain(gold, gold, gold, gold);
    CHECK(!chain.median_window);
    CHECK(!chain.center);
    CHECK(!chain.scale_beta);
    CHECK(!chain.shift_frames);
    CHECK(apply_chain(chain, gold) == gold);
}

TEST_CASE("optimize_chain smooths noisy predictions") {
    std::mt19937_64 rng(22);
    auto noisy = [&](const Series& s) {
        std::normal_distribution<double> noise(0.0, 0.25);
        Series out = s;
        for (double& v : out) v += noise(rng);
        return out;
    };
    Series train(400), dev(400);
    for (std::size_t t = 0; t < train.size(); ++t) {
        train[t] = std::sin(0.05 * double(t));
        dev[t] = std::sin(0.05 * double(t) + 0.8);
    }
    Series pred_train = noisy(train);
    Series pred_dev = noisy(dev);
    PostprocessChain chain = optimize_chain(train, pred_train, dev, pred_dev);
    CHECK(chain.median_window.has_value());
    CHECK(*chain.median_window > 1);
    CHECK(metrics::ccc(dev, apply_chain(chain, pred_dev)) >
          metrics::ccc(dev, pred_dev));
}

TEST_CASE("optimize_chain rescales an attenuated prediction") {
    Series gold(200), pred(200);
    for (std::size_t t = 0; t < gold.size(); ++t) {
        gold[t] = std::sin(0.11 * double(t));
        pred[t] = 0.5 * gold[t];
    }
    PostprocessChain chain = optimize_chain(gold, pred, gold, pred);
    REQUIRE(chain.scale_beta.has_value());
    CHECK(*chain.scale_beta == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(metrics::ccc(gold, apply_chain(chain, pred)) >
          metrics::ccc(gold, pred));
}

TEST_CASE("chain gate never lowers dev ccc on random noisy pairs") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (int trial = 0; trial < 100; ++trial) {
        Series gold_train(120), gold_dev(120);
        for (std::size_t t = 0; t < gold_train.size(); ++t) {
            const double phase = 0.02 + 0.001 * double(trial % 10);
            gold_train[t] = std::sin(phase * 7.0 * double(t));
            gold_dev[t] = std::sin(phase * 7.0 * double(t) + 1.0);
        }
        Series pred_train = gold_train, pred_dev = gold_dev;
        for (double& v : pred_train) v = 0.6 * v + 0.1 + noise(rng);
        for (double& v : pred_dev) v = 0.6 * v + 0.1 + noise(rng);

        const double raw = metrics::ccc(gold_dev, pred_dev);
        PostprocessChain chain =
            optimize_chain(gold_train, pred_train, gold_dev, pred_dev);
        const double post =
            metrics::ccc(gold_dev, apply_chain(chain, pred_dev));
        CHECK(post >= raw - 1e-12);
    }
}

TEST_CASE("chain fitting never hurts the train-fit ccc") {
    std::mt19937_64 rng(24);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (int trial = 0; trial < 50; ++trial) {
        Series gold(150);
        for (std::size_t t = 0; t < gold.size(); ++t)
            gold[t] = std::cos(0.06 * double(t) + double(trial));
        Series pred = gold;
        for (double& v : pred) v = 0.8 * v + noise(rng);
        const double raw = metrics::ccc(gold, pred);
        PostprocessChain chain = optimize_chain(gold, pred, gold, pred);
        CHECK(metrics::ccc(gold, apply_chain(chain, pred)) >= raw - 1e-12);
    }
}

TEST_CASE("chain files round-trip") {
    Series gold(200), pred(200);
    std::mt19937_64 rng(25);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (std::size_t t = 0; t < gold.size(); ++t) {
        gold[t] = std::sin(0.09 * double(t));
        pred[t] = 0.5 * gold[t] + 0.2 + noise(rng);
    }
    PostprocessChain chain = optimize_chain(gold, pred, gold, pred);

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "chain_roundtrip.txt";
    write_chain(path, chain);
    PostprocessChain loaded = read_chain(path);
    CHECK(apply_chain(loaded, pred) == apply_chain(chain, pred));
    CHECK(loaded.median_window == chain.median_window);
    CHECK(loaded.scale_beta == chain.scale_beta);
    CHECK(loaded.shift_frames == chain.shift_frames);
    std::filesystem::remove(path);
}

TEST_CASE("default search grid covers the documented ranges") {
    ChainSearchGrid grid = default_grid();
    REQUIRE(!grid.median_windows.empty());
    CHECK(grid.median_windows.front() == 1);
    CHECK(grid.median_windows.back() == 501);
    for (std::size_t w : grid.median_windows) CHECK(w % 2 == 1);
    CHECK(grid.shifts.front() == 0);
    CHECK(grid.shifts.back() == 250);
}
