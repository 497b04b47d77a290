#ifndef AFFECT_POSTPROCESS_HPP
#define AFFECT_POSTPROCESS_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "affect/data.hpp"

namespace affect::postprocess {

using Series = std::vector<double>;

// Centered sliding median, odd window, nearest-edge replication padding.
Series median_filter(const Series& pred, std::size_t window_frames);

enum class CenterMode { Bias, Literal };
enum class ScaleMode { Std, LiteralRatio };

struct CenterParams {
    double gold_mean{0.0};
    double pred_mean{0.0};
};

CenterParams fit_center(const Series& gold_train, const Series& pred_train);
// bias mode: y + (mu_gold - mu_pred). literal mode: y - mu_gold.
Series apply_center(const Series& pred, const CenterParams& params,
                    CenterMode mode = CenterMode::Bias);

// std mode: sigma_gold / sigma_pred. literal-ratio mode: mu_gold / mu_pred.
double fit_scale(const Series& gold_train, const Series& pred_train,
                 ScaleMode mode = ScaleMode::Std);
Series apply_scale(const Series& pred, double beta);

// Forward shift by k frames; the first k samples hold pred[0].
Series time_shift(const Series& pred, std::size_t k_frames,
                  std::size_t max_frames = 250);

// Pairs element t of the first series with element t+n of the second;
// both outputs have length len - n.
struct AlignedPair {
    std::vector<std::size_t> first_indices;   // into frames/features
    std::vector<std::size_t> second_indices;  // into labels
};
AlignedPair delay_compensate_indices(std::size_t length, std::size_t n_frames);

// Pairs frame[t] with label[t+n]; both series truncated to the overlap.
std::pair<data::FrameSequence, data::AnnotationTrack> delay_compensate(
    const data::FrameSequence& frames, const data::AnnotationTrack& labels,
    std::size_t n_frames);

struct StepRecord {
    std::string name;  // median | center | scale | shift
    double param0{0.0};
    double param1{0.0};
    double ccc_before{0.0};
    double ccc_after{0.0};
    bool accepted{false};
};

// Accepted steps in the fixed order median -> center -> scale -> shift,
// with their train-fitted parameters, plus the full candidate log.
struct PostprocessChain {
    std::optional<std::size_t> median_window;
    std::optional<CenterParams> center;
    CenterMode center_mode{CenterMode::Bias};
    std::optional<double> scale_beta;
    std::optional<std::size_t> shift_frames;
    std::vector<StepRecord> log;
};

Series apply_chain(const PostprocessChain& chain, const Series& pred);

struct ChainSearchGrid {
    std::vector<std::size_t> median_windows;  // odd
    std::vector<std::size_t> shifts;
    CenterMode center_mode{CenterMode::Bias};
    ScaleMode scale_mode{ScaleMode::Std};
};

// Coarse log-spaced defaults covering the 0.04s..20s window and 0..10s
// shift ranges at 40 ms per frame.
ChainSearchGrid default_grid();

// Greedy per-step acceptance: a candidate step is kept iff dev CCC strictly
// improves and train CCC does not drop. Median/shift pick the dev-CCC grid
// argmax (lowest parameter wins ties); center/scale are fitted on train.
PostprocessChain optimize_chain(const Series& gold_train,
                                const Series& pred_train,
                                const Series& gold_dev, const Series& pred_dev,
                                const ChainSearchGrid& grid = default_grid());

// One step per line: name, parameters, accepted dev CCC.
void write_chain(const std::filesystem::path& path,
                 const PostprocessChain& chain);
PostprocessChain read_chain(const std::filesystem::path& path);

}  // namespace affect::postprocess

#endif  // AFFECT_POSTPROCESS_HPP
