#ifndef AFFECT_SVR_HPP
#define AFFECT_SVR_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "affect/tensor.hpp"

namespace affect::svr {

enum class KernelKind { Linear, Rbf };

KernelKind kernel_from_string(const std::string& s);
std::string kernel_to_string(KernelKind k);

// Trained epsilon-SVR. Support vectors are stored in standardized feature
// space; the z-score stats travel with the model. Zero-variance training
// columns are dropped (active mask).
struct SvrModel {
    Tensor support_vectors;         // [n_sv, n_active]
    std::vector<double> dual_coef;  // alpha - alpha*, one per support vector
    double bias{0.0};
    KernelKind kernel{KernelKind::Linear};
    double gamma{0.0};  // rbf only
    double C{0.0};
    double epsilon{0.0};
    std::size_t input_dim{0};
    std::vector<double> feature_mean;       // per input dim
    std::vector<double> feature_std;        // per input dim
    std::vector<std::uint8_t> active_cols;  // per input dim
    bool converged{true};
};

// SMO (pairwise coordinate ascent on the dual, maximal-violating-pair
// selection). Non-convergence at max_iter flags the model, not an error.
SvrModel fit_svr(const Tensor& features, const std::vector<double>& targets,
                 double C, double epsilon,
                 KernelKind kernel = KernelKind::Linear, double gamma = 0.0,
                 double tol = 1e-3, std::size_t max_iter = 0);

std::vector<double> predict_svr(const SvrModel& model, const Tensor& features);

struct GridCell {
    double C{0.0};
    double epsilon{0.0};
    double dev_ccc{0.0};
    double seconds{0.0};
    bool converged{true};
};

struct GridSearchReport {
    std::vector<GridCell> cells;
    std::size_t chosen{0};  // index into cells
    const GridCell& best() const { return cells[chosen]; }
};

// One fit per (C, eps) cell, scored by dev CCC. Exact ties go to the
// smaller C, then the smaller epsilon.
GridSearchReport grid_search(const Tensor& features_train,
                             const std::vector<double>& targets_train,
                             const Tensor& features_dev,
                             const std::vector<double>& targets_dev,
                             const std::vector<double>& c_grid,
                             const std::vector<double>& eps_grid,
                             KernelKind kernel = KernelKind::Linear,
                             double gamma = 0.0);

// CSV `C,epsilon,dev_ccc,seconds`. The seconds column is wall-clock timing
// and is the one field exempt from byte-identical reruns.
void write_grid_csv(const std::filesystem::path& path,
                    const GridSearchReport& report);

// AFPL container, section tag SVRM.
void save_svr(const std::filesystem::path& path, const SvrModel& model);
SvrModel load_svr(const std::filesystem::path& path);

}  // namespace affect::svr

#endif  // AFFECT_SVR_HPP
