#include "affect/metrics.hpp"

#include <cmath>
#include <sstream>

#include "affect/errors.hpp"

namespace affect::metrics {

namespace {

struct Moments {
    double mean;
    double var;  // population
};

Moments moments(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= double(x.size());
    return {mean, var};
}

double covariance(const std::vector<double>& x, const std::vector<double>& y,
                  double mx, double my) {
    double c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        c += (x[i] - mx) * (y[i] - my);
    return c / double(x.size());
}

void check_lengths(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ParamError("series length mismatch: " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
    if (x.size() < 2) throw ParamError("series must have length >= 2");
}

}  // namespace

double pearson_cc(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y);
    const Moments mx = moments(x), my = moments(y);
    if (mx.var == 0.0 || my.var == 0.0)
        throw ParamError("pearson correlation undefined for constant series");
    return covariance(x, y, mx.mean, my.mean) / std::sqrt(mx.var * my.var);
}

double ccc(const std::vector<double>& gold, const std::vector<double>& pred) {
    check_lengths(gold, pred);
    const Moments mg = moments(gold), mp = moments(pred);
    if (mg.var == 0.0)
        throw ParamError("ccc undefined for constant gold standard");
    if (mp.var == 0.0) return 0.0;  // limit convention for flat predictions
    const double cov = covariance(gold, pred, mg.mean, mp.mean);
    const double dm = mg.mean - mp.mean;
    return 2.0 * cov / (mg.var + mp.var + dm * dm);
}

double rmse(const std::vector<double>& gold, const std::vector<double>& pred) {
    check_lengths(gold, pred);
    double acc = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i)
        acc += (gold[i] - pred[i]) * (gold[i] - pred[i]);
    return std::sqrt(acc / double(gold.size()));
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& gold) {
    if (predicted.size() != gold.size())
        throw ParamError("accuracy: label vector length mismatch");
    if (predicted.empty()) throw ParamError("accuracy: empty label vectors");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == gold[i]) ++hits;
    return double(hits) / double(predicted.size());
}

std::string score_csv_header() { return "dimension,n,pearson,rmse,ccc"; }

std::string score_csv_row(const ScoreReport& r) {
    std::ostringstream os;
    os.precision(9);
    os << r.dimension << "," << r.n << "," << r.pearson << "," << r.rmse << ","
       << r.ccc;
    return os.str();
}

}  // namespace affect::metrics
