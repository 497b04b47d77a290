#include "affect/svr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "affect/checkpoint.hpp"
#include "affect/metrics.hpp"

namespace affect::svr {

KernelKind kernel_from_string(const std::string& s) {
    if (s == "linear") return KernelKind::Linear;
    if (s == "rbf") return KernelKind::Rbf;
    throw ParseError("unknown kernel '" + s + "'");
}

std::string kernel_to_string(KernelKind k) {
    return k == KernelKind::Linear ? "linear" : "rbf";
}

namespace {

double kernel_eval(KernelKind kind, double gamma, const double* a,
                   const double* b, std::size_t d) {
    if (kind == KernelKind::Linear) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += a[i] * b[i];
        return dot;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        sq += diff * diff;
    }
    return std::exp(-gamma * sq);
}

constexpr double kTau = 1e-12;

// SMO over the doubled variable set: t < l are the alpha side (sign +1),
// t >= l the alpha* side (sign -1). Q(s,t) = sign_s sign_t K(s%l, t%l).
struct SmoProblem {
    std::size_t l;
    const std::vector<double>& kmat;  // l*l kernel matrix
    double C;
    std::vector<double> alpha;  // 2l
    std::vector<double> grad;   // 2l
    std::vector<double> linear;  // 2l

    double sign(std::size_t t) const { return t < l ? 1.0 : -1.0; }
    double q(std::size_t s, std::size_t t) const {
        return sign(s) * sign(t) * kmat[(s % l) * l + (t % l)];
    }
};

}  // namespace

SvrModel fit_svr(const Tensor& features, const std::vector<double>& targets,
                 double C, double epsilon, KernelKind kernel, double gamma,
                 double tol, std::size_t max_iter) {
    if (features.rank() != 2)
        throw ShapeError("fit_svr features must be [N,D]");
    const std::size_t n = features.dim(0), dim = features.dim(1);
    if (n != targets.size())
        throw ParamError("fit_svr: feature rows != target count");
    if (n < 2) throw ParamError("fit_svr needs at least 2 samples");
    if (C <= 0.0) throw ParamError("fit_svr: C must be > 0");
    if (epsilon < 0.0) throw ParamError("fit_svr: epsilon must be >= 0");

    SvrModel model;
    model.kernel = kernel;
    model.C = C;
    model.epsilon = epsilon;
    model.input_dim = dim;
    model.feature_mean.assign(dim, 0.0);
    model.feature_std.assign(dim, 1.0);
    model.active_cols.assign(dim, 1);

    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += features.data[i * dim + j];
        mean /= double(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = features.data[i * dim + j] - mean;
            var += d * d;
        }
        var /= double(n);
        model.feature_mean[j] = mean;
        if (var == 0.0) {
            model.active_cols[j] = 0;
        } else {
            model.feature_std[j] = std::sqrt(var);
        }
    }
    std::size_t n_active = 0;
    for (std::uint8_t a : model.active_cols) n_active += a;
    if (n_active < dim)
        std::cerr << "fit_svr: dropping " << (dim - n_active)
                  << " zero-variance feature column(s)\n";
    if (n_active == 0) {
        // nothing to regress on; constant model at the target mean
        double mean = 0.0;
        for (double t : targets) mean += t;
        model.bias = mean / double(n);
        return model;
    }

    // standardized design matrix on active columns
    std::vector<double> x(n * n_active);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < dim; ++j) {
            if (!model.active_cols[j]) continue;
            x[i * n_active + k++] =
                (features.data[i * dim + j] - model.feature_mean[j]) /
                model.feature_std[j];
        }
    }
    if (kernel == KernelKind::Rbf && gamma <= 0.0)
        gamma = 1.0 / double(n_active);
    model.gamma = kernel == KernelKind::Rbf ? gamma : 0.0;

    std::vector<double> kmat(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = kernel_eval(kernel, gamma, &x[i * n_active],
                                         &x[j * n_active], n_active);
            kmat[i * n + j] = v;
            kmat[j * n + i] = v;
        }

    SmoProblem p{n, kmat, C, {}, {}, {}};
    p.alpha.assign(2 * n, 0.0);
    p.linear.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        p.linear[i] = epsilon - targets[i];
        p.linear[i + n] = epsilon + targets[i];
    }
    p.grad = p.linear;

    if (max_iter == 0) max_iter = std::max<std::size_t>(10000000 / n, 10000);
    bool converged = false;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // maximal violating pair
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t sel_i = 2 * n, sel_j = 2 * n;
        for (std::size_t t = 0; t < 2 * n; ++t) {
            const double s = p.sign(t);
            const double v = -s * p.grad[t];
            const bool in_up = (s > 0 && p.alpha[t] < C) ||
                               (s < 0 && p.alpha[t] > 0);
            const bool in_low = (s > 0 && p.alpha[t] > 0) ||
                                (s < 0 && p.alpha[t] < C);
            if (in_up && v > gmax) {
                gmax = v;
                sel_i = t;
            }
            if (in_low && v < gmin) {
                gmin = v;
                sel_j = t;
            }
        }
        if (gmax - gmin < tol) {
            converged = true;
            break;
        }
        const std::size_t i = sel_i, j = sel_j;
        const double si = p.sign(i), sj = p.sign(j);
        const double qii = p.q(i, i), qjj = p.q(j, j), qij = p.q(i, j);
        const double old_ai = p.alpha[i], old_aj = p.alpha[j];
        if (si != sj) {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-p.grad[i] - p.grad[j]) / quad;
            const double diff = p.alpha[i] - p.alpha[j];
            p.alpha[i] += delta;
            p.alpha[j] += delta;
            if (diff > 0.0) {
                if (p.alpha[j] < 0.0) {
                    p.alpha[j] = 0.0;
                    p.alpha[i] = diff;
                }
            } else {
                if (p.alpha[i] < 0.0) {
                    p.alpha[i] = 0.0;
                    p.alpha[j] = -diff;
                }
            }
            if (diff > 0.0) {
                if (p.alpha[i] > C) {
                    p.alpha[i] = C;
                    p.alpha[j] = C - diff;
                }
            } else {
                if (p.alpha[j] > C) {
                    p.alpha[j] = C;
                    p.alpha[i] = C + diff;
                }
            }
        } else {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (p.grad[i] - p.grad[j]) / quad;
            const double sum = p.alpha[i] + p.alpha[j];
            p.alpha[i] -= delta;
            p.alpha[j] += delta;
            if (sum > C) {
                if (p.alpha[i] > C) {
                    p.alpha[i] = C;
                    p.alpha[j] = sum - C;
                }
            } else {
                if (p.alpha[j] < 0.0) {
                    p.alpha[j] = 0.0;
                    p.alpha[i] = sum;
                }
            }
            if (sum > C) {
                if (p.alpha[j] > C) {
                    p.alpha[j] = C;
                    p.alpha[i] = sum - C;
                }
            } else {
                if (p.alpha[i] < 0.0) {
                    p.alpha[i] = 0.0;
                    p.alpha[j] = sum;
                }
            }
        }
        const double dai = p.alpha[i] - old_ai;
        const double daj = p.alpha[j] - old_aj;
        if (dai == 0.0 && daj == 0.0) {
            converged = true;  // numerically stuck at the optimum
            break;
        }
        for (std::size_t t = 0; t < 2 * n; ++t)
            p.grad[t] += p.q(t, i) * dai + p.q(t, j) * daj;
    }
    model.converged = converged;

    // bias from the KKT conditions (free variables, else interval midpoint)
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t nr_free = 0;
    for (std::size_t t = 0; t < 2 * n; ++t) {
        const double s = p.sign(t);
        const double yg = s * p.grad[t];
        if (p.alpha[t] >= C) {
            if (s < 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (p.alpha[t] <= 0.0) {
            if (s > 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            ++nr_free;
            sum_free += yg;
        }
    }
    const double rho = nr_free > 0 ? sum_free / double(nr_free)
                                   : (ub + lb) / 2.0;
    model.bias = -rho;

    std::vector<double> beta(n);
    std::size_t n_sv = 0;
    for (std::size_t i = 0; i < n; ++i) {
        beta[i] = p.alpha[i] - p.alpha[i + n];
        if (beta[i] != 0.0) ++n_sv;
    }
    model.dual_coef.reserve(n_sv);
    std::vector<double> sv_data;
    sv_data.reserve(n_sv * n_active);
    for (std::size_t i = 0; i < n; ++i) {
        if (beta[i] == 0.0) continue;
        model.dual_coef.push_back(beta[i]);
        sv_data.insert(sv_data.end(), x.begin() + i * n_active,
                       x.begin() + (i + 1) * n_active);
    }
    if (n_sv > 0)
        model.support_vectors = Tensor({n_sv, n_active}, std::move(sv_data));
    return model;
}

std::vector<double> predict_svr(const SvrModel& model, const Tensor& features) {
    if (features.rank() != 2)
        throw ShapeError("predict_svr features must be [N,D]");
    if (features.dim(1) != model.input_dim)
        throw ShapeError("predict_svr: feature dim " +
                         std::to_string(features.dim(1)) +
                         " does not match training dim " +
                         std::to_string(model.input_dim));
    const std::size_t n = features.dim(0), dim = model.input_dim;
    std::size_t n_active = 0;
    for (std::uint8_t a : model.active_cols) n_active += a;
    const std::size_t n_sv = model.dual_coef.size();

    std::vector<double> out(n, model.bias);
    if (n_sv == 0 || n_active == 0) return out;
    std::vector<double> z(n_active);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < dim; ++j) {
            if (!model.active_cols[j]) continue;
            z[k++] = (features.data[i * dim + j] - model.feature_mean[j]) /
                     model.feature_std[j];
        }
        double acc = 0.0;
        for (std::size_t s = 0; s < n_sv; ++s)
            acc += model.dual_coef[s] *
                   kernel_eval(model.kernel, model.gamma,
                               &model.support_vectors.data[s * n_active],
                               z.data(), n_active);
        out[i] += acc;
    }
    return out;
}

GridSearchReport grid_search(const Tensor& features_train,
                             const std::vector<double>& targets_train,
                             const Tensor& features_dev,
                             const std::vector<double>& targets_dev,
                             const std::vector<double>& c_grid,
                             const std::vector<double>& eps_grid,
                             KernelKind kernel, double gamma) {
    if (c_grid.empty() || eps_grid.empty())
        throw ParamError("grid_search: empty grid");
    std::vector<double> cs = c_grid, es = eps_grid;
    std::sort(cs.begin(), cs.end());
    std::sort(es.begin(), es.end());
    GridSearchReport report;
    double best = -std::numeric_limits<double>::infinity();
    for (double c : cs) {
        for (double e : es) {
            const auto t0 = std::chrono::steady_clock::now();
            SvrModel model =
                fit_svr(features_train, targets_train, c, e, kernel, gamma);
            std::vector<double> pred = predict_svr(model, features_dev);
            const double score = metrics::ccc(targets_dev, pred);
            const auto t1 = std::chrono::steady_clock::now();
            GridCell cell;
            cell.C = c;
            cell.epsilon = e;
            cell.dev_ccc = score;
            cell.seconds = std::chrono::duration<double>(t1 - t0).count();
            cell.converged = model.converged;
            report.cells.push_back(cell);
            // ascending iteration order makes strict > break ties toward
            // smaller C, then smaller epsilon
            if (score > best) {
                best = score;
                report.chosen = report.cells.size() - 1;
            }
        }
    }
    return report;
}

void write_grid_csv(const std::filesystem::path& path,
                    const GridSearchReport& report) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    os << "C,epsilon,dev_ccc,seconds\n";
    os.precision(9);
    for (const GridCell& c : report.cells)
        os << c.C << "," << c.epsilon << "," << c.dev_ccc << "," << c.seconds
           << "\n";
}

void save_svr(const std::filesystem::path& path, const SvrModel& model) {
    checkpoint::Container c;
    c.section = "SVRM";
    std::ostringstream os;
    os.precision(17);
    os << "kernel " << kernel_to_string(model.kernel) << "\n"
       << "gamma " << model.gamma << "\n"
       << "C " << model.C << "\n"
       << "epsilon " << model.epsilon << "\n"
       << "bias " << model.bias << "\n"
       << "input_dim " << model.input_dim << "\n"
       << "converged " << (model.converged ? 1 : 0) << "\n";
    c.text = os.str();
    c.blobs.push_back(
        {"support_vectors",
         model.support_vectors.size() == 0
             ? Tensor::zeros({1})
             : model.support_vectors});
    c.blobs.push_back(
        {"dual_coef",
         model.dual_coef.empty()
             ? Tensor::zeros({1})
             : Tensor({model.dual_coef.size()}, model.dual_coef)});
    c.blobs.push_back(
        {"n_sv", Tensor({1}, {double(model.dual_coef.size())})});
    c.blobs.push_back(
        {"feature_mean", Tensor({model.input_dim}, model.feature_mean)});
    c.blobs.push_back(
        {"feature_std", Tensor({model.input_dim}, model.feature_std)});
    Tensor active = Tensor::zeros({model.input_dim});
    for (std::size_t i = 0; i < model.input_dim; ++i)
        active.data[i] = model.active_cols[i];
    c.blobs.push_back({"active_cols", std::move(active)});
    checkpoint::write_container(path, c);
}

SvrModel load_svr(const std::filesystem::path& path) {
    checkpoint::Container c = checkpoint::read_container(path);
    if (c.section != "SVRM")
        throw ParseError(path.string() + ": expected SVRM section");
    SvrModel model;
    std::istringstream is(c.text);
    std::string key;
    while (is >> key) {
        if (key == "kernel") {
            std::string v;
            is >> v;
            model.kernel = kernel_from_string(v);
        } else if (key == "gamma")
            is >> model.gamma;
        else if (key == "C")
            is >> model.C;
        else if (key == "epsilon")
            is >> model.epsilon;
        else if (key == "bias")
            is >> model.bias;
        else if (key == "input_dim")
            is >> model.input_dim;
        else if (key == "converged") {
            int v;
            is >> v;
            model.converged = v != 0;
        } else
            throw ParseError(path.string() + ": unknown SVRM key " + key);
    }
    auto blob = [&](const std::string& name) -> const checkpoint::Blob& {
        for (const checkpoint::Blob& b : c.blobs)
            if (b.name == name) return b;
        throw ParseError(path.string() + ": missing blob " + name);
    };
    const std::size_t n_sv =
        static_cast<std::size_t>(blob("n_sv").tensor.data[0]);
    if (n_sv > 0) {
        model.support_vectors = blob("support_vectors").tensor;
        model.dual_coef = blob("dual_coef").tensor.data;
    }
    model.feature_mean = blob("feature_mean").tensor.data;
    model.feature_std = blob("feature_std").tensor.data;
    model.active_cols.resize(model.input_dim);
    const Tensor& active = blob("active_cols").tensor;
    for (std::size_t i = 0; i < model.input_dim; ++i)
        model.active_cols[i] = active.data[i] != 0.0 ? 1 : 0;
    return model;
}

}  // namespace affect::svr
