#ifndef AFFECT_METRICS_HPP
#define AFFECT_METRICS_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace affect::metrics {

// All moments in this module are population (1/N) moments so that the CCC
// denominator and Pearson numerator stay mutually consistent.

// Standard correlation; throws ParamError when either series is constant.
double pearson_cc(const std::vector<double>& x, const std::vector<double>& y);

// Concordance correlation: 2*rho*sx*sy / (sx^2 + sy^2 + (mx-my)^2).
// A constant prediction scores 0 (uninformative) rather than erroring.
double ccc(const std::vector<double>& gold, const std::vector<double>& pred);

double rmse(const std::vector<double>& gold, const std::vector<double>& pred);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& gold);

struct ScoreReport {
    std::string dimension;  // "valence" | "arousal"
    std::size_t n{0};
    double ccc{0.0};
    double pearson{0.0};
    double rmse{0.0};
};

std::string score_csv_header();
std::string score_csv_row(const ScoreReport& report);

}  // namespace affect::metrics

#endif  // AFFECT_METRICS_HPP
