#include "affect/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "affect/errors.hpp"
#include "affect/metrics.hpp"

namespace affect::postprocess {

Series median_filter(const Series& pred, std::size_t window_frames) {
    if (window_frames % 2 == 0)
        throw ParamError("median filter window must be odd, got " +
                         std::to_string(window_frames));
    if (window_frames < 1 || window_frames > pred.size())
        throw ParamError("median filter window out of range");
    if (window_frames == 1) return pred;
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(window_frames / 2);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pred.size());
    Series out(pred.size());
    std::vector<double> window(window_frames);
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        for (std::ptrdiff_t k = -half; k <= half; ++k) {
            const std::ptrdiff_t idx = std::clamp<std::ptrdiff_t>(t + k, 0, n - 1);
            window[static_cast<std::size_t>(k + half)] = pred[idx];
        }
        auto mid = window.begin() + half;
        std::nth_element(window.begin(), mid, window.end());
        out[t] = *mid;
    }
    return out;
}

namespace {

double mean_of(const Series& s) {
    double m = 0.0;
    for (double v : s) m += v;
    return m / double(s.size());
}

double std_of(const Series& s) {
    const double m = mean_of(s);
    double var = 0.0;
    for (double v : s) var += (v - m) * (v - m);
    return std::sqrt(var / double(s.size()));
}

}  // namespace

CenterParams fit_center(const Series& gold_train, const Series& pred_train) {
    if (gold_train.empty() || pred_train.empty())
        throw ParamError("fit_center: empty training series");
    return {mean_of(gold_train), mean_of(pred_train)};
}

Series apply_center(const Series& pred, const CenterParams& params,
                    CenterMode mode) {
    Series out = pred;
    const double delta = mode == CenterMode::Bias
                             ? params.gold_mean - params.pred_mean
                             : -params.gold_mean;
    for (double& v : out) v += delta;
    return out;
}

double fit_scale(const Series& gold_train, const Series& pred_train,
                 ScaleMode mode) {
    if (gold_train.empty() || pred_train.empty())
        throw ParamError("fit_scale: empty training series");
    if (mode == ScaleMode::Std) {
        const double sp = std_of(pred_train);
        if (sp == 0.0)
            throw ParamError("fit_scale: zero training prediction variance");
        return std_of(gold_train) / sp;
    }
    const double mp = mean_of(pred_train);
    if (std::abs(mp) < 1e-12)
        throw ParamError("fit_scale: training prediction mean too close to 0");
    return mean_of(gold_train) / mp;
}

Series apply_scale(const Series& pred, double beta) {
    Series out = pred;
    for (double& v : out) v *= beta;
    return out;
}

Series time_shift(const Series& pred, std::size_t k_frames,
                  std::size_t max_frames) {
    if (k_frames > max_frames)
        throw ParamError("time shift " + std::to_string(k_frames) +
                         " exceeds limit " + std::to_string(max_frames));
    if (k_frames == 0) return pred;
    Series out(pred.size());
    for (std::size_t t = 0; t < pred.size(); ++t)
        out[t] = t >= k_frames ? pred[t - k_frames] : pred[0];
    return out;
}

AlignedPair delay_compensate_indices(std::size_t length, std::size_t n_frames) {
    if (n_frames >= length)
        throw ParamError("delay " + std::to_string(n_frames) +
                         " >= series length " + std::to_string(length));
    AlignedPair pair;
    pair.first_indices.resize(length - n_frames);
    pair.second_indices.resize(length - n_frames);
    for (std::size_t t = 0; t < length - n_frames; ++t) {
        pair.first_indices[t] = t;
        pair.second_indices[t] = t + n_frames;
    }
    return pair;
}

std::pair<data::FrameSequence, data::AnnotationTrack> delay_compensate(
    const data::FrameSequence& frames, const data::AnnotationTrack& labels,
    std::size_t n_frames) {
    if (frames.frames.size() != labels.valence.size())
        throw ParamError("delay_compensate: frame/label length mismatch");
    const AlignedPair idx =
        delay_compensate_indices(frames.frames.size(), n_frames);
    data::FrameSequence out_frames;
    out_frames.subject_id = frames.subject_id;
    out_frames.partition = frames.partition;
    data::AnnotationTrack out_labels;
    out_labels.subject_id = labels.subject_id;
    for (std::size_t t = 0; t < idx.first_indices.size(); ++t) {
        out_frames.frames.push_back(frames.frames[idx.first_indices[t]]);
        out_labels.valence.push_back(labels.valence[idx.second_indices[t]]);
        out_labels.arousal.push_back(labels.arousal[idx.second_indices[t]]);
    }
    return {std::move(out_frames), std::move(out_labels)};
}

Series apply_chain(const PostprocessChain& chain, const Series& pred) {
    Series out = pred;
    if (chain.median_window) out = median_filter(out, *chain.median_window);
    if (chain.center) out = apply_center(out, *chain.center, chain.center_mode);
    if (chain.scale_beta) out = apply_scale(out, *chain.scale_beta);
    if (chain.shift_frames) out = time_shift(out, *chain.shift_frames);
    return out;
}

ChainSearchGrid default_grid() {
    ChainSearchGrid grid;
    // odd windows, roughly doubling, up to 20 s at 40 ms per frame
    for (std::size_t w : {1u, 3u, 5u, 9u, 17u, 33u, 65u, 129u, 257u, 501u})
        grid.median_windows.push_back(w);
    for (std::size_t k = 0; k <= 25; ++k) grid.shifts.push_back(k);
    for (std::size_t k = 30; k <= 250; k += 10) grid.shifts.push_back(k);
    return grid;
}

namespace {

double safe_ccc(const Series& gold, const Series& pred) {
    return metrics::ccc(gold, pred);
}

}  // namespace

PostprocessChain optimize_chain(const Series& gold_train,
                                const Series& pred_train,
                                const Series& gold_dev, const Series& pred_dev,
                                const ChainSearchGrid& grid) {
    if (gold_train.empty() || pred_train.empty() || gold_dev.empty() ||
        pred_dev.empty())
        throw ParamError("optimize_chain: empty series");
    PostprocessChain chain;
    chain.center_mode = grid.center_mode;
    Series cur_train = pred_train;
    Series cur_dev = pred_dev;
    double ccc_dev = safe_ccc(gold_dev, cur_dev);
    double ccc_train = safe_ccc(gold_train, cur_train);

    auto consider = [&](const std::string& name, double p0, double p1,
                        const Series& cand_train, const Series& cand_dev,
                        auto&& commit) {
        StepRecord rec{name, p0, p1, ccc_dev, ccc_dev, false};
        const double cand_ccc_dev = safe_ccc(gold_dev, cand_dev);
        const double cand_ccc_train = safe_ccc(gold_train, cand_train);
        rec.ccc_after = cand_ccc_dev;
        // dev must strictly improve and train must not regress
        if (cand_ccc_dev > ccc_dev && cand_ccc_train >= ccc_train - 1e-12) {
            rec.accepted = true;
            cur_train = cand_train;
            cur_dev = cand_dev;
            ccc_dev = cand_ccc_dev;
            ccc_train = cand_ccc_train;
            commit();
        }
        chain.log.push_back(rec);
    };

    // median
    {
        double best = -2.0;
        std::size_t best_w = 1;
        for (std::size_t w : grid.median_windows) {
            if (w % 2 == 0 || w > cur_dev.size()) continue;
            const double s = safe_ccc(gold_dev, median_filter(cur_dev, w));
            if (s > best) {  // ascending grid, strict > keeps the lowest w
                best = s;
                best_w = w;
            }
        }
        if (best_w > 1)
            consider("median", double(best_w), 0.0,
                     median_filter(cur_train, best_w),
                     median_filter(cur_dev, best_w),
                     [&] { chain.median_window = best_w; });
    }
    // centering (fit on train)
    {
        const CenterParams params = fit_center(gold_train, cur_train);
        consider("center", params.gold_mean, params.pred_mean,
                 apply_center(cur_train, params, grid.center_mode),
                 apply_center(cur_dev, params, grid.center_mode),
                 [&] { chain.center = params; });
    }
    // scaling (fit on train)
    {
        bool ok = true;
        double beta = 1.0;
        try {
            beta = fit_scale(gold_train, cur_train, grid.scale_mode);
        } catch (const ParamError&) {
            ok = false;  // degenerate training predictions: skip the step
        }
        if (ok)
            consider("scale", beta, 0.0, apply_scale(cur_train, beta),
                     apply_scale(cur_dev, beta),
                     [&] { chain.scale_beta = beta; });
    }
    // time shift
    {
        double best = -2.0;
        std::size_t best_k = 0;
        const std::size_t limit =
            grid.shifts.empty() ? 0 : *std::max_element(grid.shifts.begin(),
                                                        grid.shifts.end());
        for (std::size_t k : grid.shifts) {
            if (k >= cur_dev.size()) continue;
            const double s = safe_ccc(gold_dev, time_shift(cur_dev, k, limit));
            if (s > best) {
                best = s;
                best_k = k;
            }
        }
        if (best_k > 0)
            consider("shift", double(best_k), 0.0,
                     time_shift(cur_train, best_k, limit),
                     time_shift(cur_dev, best_k, limit),
                     [&] { chain.shift_frames = best_k; });
    }
    return chain;
}

void write_chain(const std::filesystem::path& path,
                 const PostprocessChain& chain) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    os.precision(17);
    os << "center_mode "
       << (chain.center_mode == CenterMode::Bias ? "bias" : "literal") << "\n";
    if (chain.median_window) os << "median " << *chain.median_window << "\n";
    if (chain.center)
        os << "center " << chain.center->gold_mean << " "
           << chain.center->pred_mean << "\n";
    if (chain.scale_beta) os << "scale " << *chain.scale_beta << "\n";
    if (chain.shift_frames) os << "shift " << *chain.shift_frames << "\n";
    for (const StepRecord& rec : chain.log)
        os << "# candidate " << rec.name << " " << rec.param0 << " "
           << rec.param1 << " ccc " << rec.ccc_before << " -> " << rec.ccc_after
           << (rec.accepted ? " accepted" : " rejected") << "\n";
}

PostprocessChain read_chain(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path.string());
    PostprocessChain chain;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "center_mode") {
            std::string v;
            ls >> v;
            chain.center_mode =
                v == "literal" ? CenterMode::Literal : CenterMode::Bias;
        } else if (key == "median") {
            std::size_t w;
            ls >> w;
            chain.median_window = w;
        } else if (key == "center") {
            CenterParams p;
            ls >> p.gold_mean >> p.pred_mean;
            chain.center = p;
        } else if (key == "scale") {
            double b;
            ls >> b;
            chain.scale_beta = b;
        } else if (key == "shift") {
            std::size_t k;
            ls >> k;
            chain.shift_frames = k;
        } else {
            throw ParseError(path.string() + ": unknown chain key " + key);
        }
        if (ls.fail()) throw ParseError(path.string() + ": malformed line " + line);
    }
    return chain;
}

}  // namespace affect::postprocess
