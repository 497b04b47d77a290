#include "stages.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "affect/checkpoint.hpp"
#include "affect/data.hpp"
#include "affect/metrics.hpp"
#include "affect/models.hpp"
#include "affect/nn.hpp"
#include "affect/postprocess.hpp"
#include "affect/svr.hpp"

namespace affect::cli {

namespace fs = std::filesystem;

namespace {

std::array<std::size_t, 3> conv_widths_of(const RunConfig& c) {
    if (c.model_conv_widths.size() != 3)
        throw ConfigError("model.conv_widths needs exactly 3 entries");
    return {c.model_conv_widths[0], c.model_conv_widths[1],
            c.model_conv_widths[2]};
}

std::array<std::size_t, 4> fc_of(const RunConfig& c) {
    if (c.model_fc.size() != 4)
        throw ConfigError("model.fc needs exactly 4 entries");
    return {c.model_fc[0], c.model_fc[1], c.model_fc[2], c.model_fc[3]};
}

void require_file(const fs::path& p, const std::string& produced_by) {
    if (!fs::exists(p))
        throw MissingArtifact(p.string() + " not found; run " + produced_by +
                              " first");
}

fs::path recola_root(const RunConfig& c) {
    if (c.data_recola_root.empty())
        throw MissingArtifact(
            "data.recola_root is not set; point it at a frame layout or run "
            "synth-data");
    fs::path root(c.data_recola_root);
    if (!fs::exists(root))
        throw MissingArtifact("data.recola_root " + root.string() +
                              " does not exist; run synth-data or fix the "
                              "config");
    return root;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& losses) {
    std::ofstream os(path);
    os.precision(17);
    os << "epoch,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i)
        os << (i + 1) << "," << losses[i] << "\n";
}

Tensor one_hot(const std::vector<int>& labels, std::size_t n_classes) {
    Tensor t = Tensor::zeros({labels.size(), n_classes});
    for (std::size_t i = 0; i < labels.size(); ++i)
        t.data[i * n_classes + std::size_t(labels[i])] = 1.0;
    return t;
}

Tensor take_rows(const Tensor& t, std::size_t begin, std::size_t count) {
    const std::size_t row = t.size() / t.dim(0);
    std::vector<std::size_t> shape = t.shape;
    shape[0] = count;
    std::vector<double> data(t.data.begin() + long(begin * row),
                             t.data.begin() + long((begin + count) * row));
    return Tensor(std::move(shape), std::move(data));
}

Tensor vstack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ParamError("vstack: nothing to stack");
    std::vector<std::size_t> shape = parts.front().shape;
    std::size_t rows = 0;
    std::vector<double> data;
    for (const Tensor& p : parts) {
        rows += p.dim(0);
        data.insert(data.end(), p.data.begin(), p.data.end());
    }
    shape[0] = rows;
    return Tensor(std::move(shape), std::move(data));
}

double batched_accuracy(const nn::NetworkSpec& spec, nn::ModelWeights& weights,
                        const data::LabeledImageSet& set) {
    std::mt19937_64 rng(0);
    const std::size_t n = set.images.dim(0);
    std::vector<int> predicted(n);
    const std::size_t chunk = 256;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t count = std::min(chunk, n - begin);
        Tensor out = nn::forward(spec, weights, take_rows(set.images, begin, count),
                                 Mode::Eval, rng);
        const std::size_t k = out.dim(1);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (out.data[i * k + j] > out.data[i * k + arg]) arg = j;
            predicted[begin + i] = int(arg);
        }
    }
    return metrics::accuracy(predicted, set.labels);
}

// Per-dimension series for one subject after delay compensation: feature
// row t is paired with label t+n, both truncated to the overlap.
struct SubjectSeries {
    data::Partition partition{data::Partition::Train};
    std::string subject_id;
    Tensor features;
    std::vector<double> valence;
    std::vector<double> arousal;
};

std::vector<SubjectSeries> load_feature_series(const RunConfig& config,
                                               const fs::path& out) {
    const fs::path feat_dir = out / "features";
    require_file(feat_dir, "encode");
    std::vector<data::SubjectData> subjects =
        data::load_recola_layout(recola_root(config));
    std::vector<SubjectSeries> result;
    for (const data::SubjectData& subject : subjects) {
        const fs::path feat_path =
            feat_dir / (data::partition_to_string(subject.frames.partition) +
                        "_" + subject.frames.subject_id + ".csv");
        require_file(feat_path, "encode");
        models::EncodedFeatures enc = models::read_features_csv(feat_path);

        const std::size_t n = config.eval_delay;
        const std::size_t len = std::min(enc.features.dim(0),
                                         subject.annotations.valence.size());
        if (len <= n)
            throw ParamError("subject " + subject.frames.subject_id +
                             ": delay " + std::to_string(n) +
                             " leaves no frames");
        const std::size_t usable = len - n;

        SubjectSeries s;
        s.partition = subject.frames.partition;
        s.subject_id = subject.frames.subject_id;
        s.features = take_rows(enc.features, 0, usable);
        s.valence.assign(subject.annotations.valence.begin() + long(n),
                         subject.annotations.valence.begin() + long(n + usable));
        s.arousal.assign(subject.annotations.arousal.begin() + long(n),
                         subject.annotations.arousal.begin() + long(n + usable));
        result.push_back(std::move(s));
    }
    return result;
}

struct PartitionSeries {
    Tensor features;
    std::vector<double> valence;
    std::vector<double> arousal;
};

PartitionSeries concat_partition(const std::vector<SubjectSeries>& series,
                                 data::Partition which) {
    std::vector<Tensor> feats;
    PartitionSeries out;
    for (const SubjectSeries& s : series) {
        if (s.partition != which) continue;
        feats.push_back(s.features);
        out.valence.insert(out.valence.end(), s.valence.begin(),
                           s.valence.end());
        out.arousal.insert(out.arousal.end(), s.arousal.begin(),
                           s.arousal.end());
    }
    if (feats.empty())
        throw ParamError("no subjects in partition " +
                         data::partition_to_string(which));
    out.features = vstack(feats);
    return out;
}

const std::vector<double>& dim_targets(const PartitionSeries& p,
                                       const std::string& dim) {
    return dim == "valence" ? p.valence : p.arousal;
}

postprocess::CenterMode center_mode_of(const RunConfig& c) {
    if (c.post_center_mode == "bias") return postprocess::CenterMode::Bias;
    if (c.post_center_mode == "literal")
        return postprocess::CenterMode::Literal;
    throw ConfigError("unknown post.center_mode '" + c.post_center_mode + "'");
}

postprocess::ScaleMode scale_mode_of(const RunConfig& c) {
    if (c.post_scale_mode == "std") return postprocess::ScaleMode::Std;
    if (c.post_scale_mode == "ratio")
        return postprocess::ScaleMode::LiteralRatio;
    throw ConfigError("unknown post.scale_mode '" + c.post_scale_mode + "'");
}

double safe_pearson(const std::vector<double>& gold,
                    const std::vector<double>& pred) {
    try {
        return metrics::pearson_cc(gold, pred);
    } catch (const ParamError&) {
        return 0.0;
    }
}

constexpr const char* kDimensions[] = {"valence", "arousal"};

}  // namespace

void stage_synth_data(const RunConfig& config, const fs::path& out) {
    fs::create_directories(out);
    std::map<data::Partition, data::LabeledImageSet> sets;
    sets[data::Partition::Train] = data::synth_labeled_set(
        config.seed, config.synth_per_class, data::Partition::Train);
    sets[data::Partition::Val] = data::synth_labeled_set(
        config.seed + 1, config.synth_per_class, data::Partition::Val);
    sets[data::Partition::Test] = data::synth_labeled_set(
        config.seed + 2, config.synth_per_class, data::Partition::Test);
    data::write_fer_csv(out / "fer.csv", sets);

    std::vector<data::SubjectData> subjects =
        data::synth_dataset(config.seed, config.synth_subjects,
                            config.synth_frames, config.synth_train_subjects);
    data::write_recola_layout(out / "recola", subjects);
}

void stage_pretrain(const RunConfig& config, const fs::path& out) {
    if (config.data_fer_csv.empty())
        throw MissingArtifact(
            "data.fer_csv is not set; point it at a labeled image CSV or run "
            "synth-data");
    require_file(config.data_fer_csv, "synth-data (or supply data.fer_csv)");
    fs::create_directories(out);

    auto sets = data::load_fer_csv(config.data_fer_csv);
    if (!sets.count(data::Partition::Train))
        throw ParamError("labeled CSV has no training rows");

    models::CnnOptions options;
    options.input_hw = config.model_input_hw;
    options.conv_widths = conv_widths_of(config);
    options.fc = fc_of(config);
    options.dropout = config.pretrain_dropout;
    auto [spec, weights] = models::build_pretrain_cnn(config.seed, options);

    const data::LabeledImageSet& train_set = sets.at(data::Partition::Train);
    nn::Dataset train{train_set.images,
                      one_hot(train_set.labels, options.fc.back())};
    nn::Dataset val;
    const bool has_val = sets.count(data::Partition::Val) != 0;
    if (has_val) {
        const data::LabeledImageSet& vs = sets.at(data::Partition::Val);
        val = {vs.images, one_hot(vs.labels, options.fc.back())};
    }

    nn::TrainConfig tc;
    tc.learning_rate = config.pretrain_lr;
    tc.batch_size = config.pretrain_batch;
    tc.max_epochs = config.pretrain_epochs;
    tc.loss = nn::LossKind::CategoricalCrossentropy;
    tc.seed = config.seed;
    std::vector<double> losses =
        nn::train(spec, weights, train, tc, has_val ? &val : nullptr);

    write_loss_csv(out / "pretrain_loss.csv", losses);
    checkpoint::save_model(out / "pretrain.ckpt", spec, weights);

    std::ofstream scores(out / "pretrain_scores.csv");
    scores.precision(9);
    scores << "partition,n,accuracy\n";
    for (const auto& [partition, set] : sets)
        scores << data::partition_to_string(partition) << ","
               << set.labels.size() << ","
               << batched_accuracy(spec, weights, set) << "\n";
}

void stage_train_cae(const RunConfig& config, const fs::path& out) {
    std::vector<data::SubjectData> subjects =
        data::load_recola_layout(recola_root(config));
    for (data::SubjectData& s : subjects)
        s.frames = data::substitute_missing_frames(s.frames);
    Tensor frames = data::training_frame_batch(subjects);
    fs::create_directories(out);

    models::CaeOptions options;
    options.input_hw = config.model_input_hw;
    options.conv_widths = conv_widths_of(config);
    options.dropout = config.cae_dropout;
    options.literal_pool_upsample = config.cae_literal_pool_upsample;
    auto [spec, weights] =
        models::build_cae(config.cae_encoder_size, config.seed, options);

    if (!config.cae_no_transfer) {
        const fs::path ckpt = config.cae_pretrain_checkpoint.empty()
                                  ? out / "pretrain.ckpt"
                                  : fs::path(config.cae_pretrain_checkpoint);
        require_file(ckpt, "pretrain");
        auto [src_spec, src_weights] = checkpoint::load_model(ckpt);
        models::transfer_weights(src_spec, src_weights, spec, weights);
    }
    models::set_frozen(spec, weights, config.cae_freeze,
                       {config.cae_freeze_bn_stats});

    const nn::ModelWeights initial = weights;

    nn::TrainConfig tc;
    tc.learning_rate = config.cae_lr;
    tc.batch_size = config.cae_batch;
    tc.max_epochs = config.cae_epochs;
    tc.loss = nn::LossKind::Mse;
    tc.seed = config.seed;
    nn::Dataset dataset{frames, frames};
    std::vector<double> losses = nn::train(spec, weights, dataset, tc);

    write_loss_csv(out / "cae_loss.csv", losses);
    checkpoint::save_model(out / "cae.ckpt", spec, weights);

    // Per-layer movement relative to the starting point. Frozen layers show
    // an exact zero here, which is the quickest way to see a run where the
    // encoder never trained.
    std::ofstream norms(out / "cae_update_norms.csv");
    norms.precision(9);
    norms << "layer,frozen,weight_delta_l2\n";
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (!weights.layers[i].has_params()) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < weights.layers[i].weight.size(); ++j) {
            const double d = weights.layers[i].weight.data[j] -
                             initial.layers[i].weight.data[j];
            acc += d * d;
        }
        norms << spec.layers[i].name << "," << int(weights.frozen[i]) << ","
              << std::sqrt(acc) << "\n";
    }
}

void stage_encode(const RunConfig& config, const fs::path& out) {
    const fs::path ckpt = out / "cae.ckpt";
    require_file(ckpt, "train-cae");
    auto [spec, weights] = checkpoint::load_model(ckpt);

    std::vector<data::SubjectData> subjects =
        data::load_recola_layout(recola_root(config));
    fs::create_directories(out / "features");
    for (data::SubjectData& subject : subjects) {
        subject.frames = data::substitute_missing_frames(subject.frames);
        models::EncodedFeatures enc = models::encode(
            spec, weights, data::frames_to_tensor(subject.frames),
            data::frame_timestamps(subject.frames));
        const fs::path path =
            out / "features" /
            (data::partition_to_string(subject.frames.partition) + "_" +
             subject.frames.subject_id + ".csv");
        models::write_features_csv(path, enc);
    }
}

void stage_train_svr(const RunConfig& config, const fs::path& out) {
    std::vector<SubjectSeries> series = load_feature_series(config, out);
    PartitionSeries train = concat_partition(series, data::Partition::Train);
    PartitionSeries dev = concat_partition(series, data::Partition::Val);

    const svr::KernelKind kernel = svr::kernel_from_string(config.svr_kernel);
    for (const char* dim : kDimensions) {
        svr::GridSearchReport report = svr::grid_search(
            train.features, dim_targets(train, dim), dev.features,
            dim_targets(dev, dim), config.svr_c_grid, config.svr_eps_grid,
            kernel, config.svr_gamma);
        svr::write_grid_csv(out / ("grid_" + std::string(dim) + ".csv"),
                            report);
        svr::SvrModel model = svr::fit_svr(
            train.features, dim_targets(train, dim), report.best().C,
            report.best().epsilon, kernel, config.svr_gamma, config.svr_tol);
        svr::save_svr(out / ("svr_" + std::string(dim) + ".svrm"), model);
    }
}

void stage_postprocess(const RunConfig& config, const fs::path& out) {
    std::vector<SubjectSeries> series = load_feature_series(config, out);
    PartitionSeries train = concat_partition(series, data::Partition::Train);
    PartitionSeries dev = concat_partition(series, data::Partition::Val);

    postprocess::ChainSearchGrid grid = postprocess::default_grid();
    grid.center_mode = center_mode_of(config);
    grid.scale_mode = scale_mode_of(config);

    for (const char* dim : kDimensions) {
        const fs::path model_path = out / ("svr_" + std::string(dim) + ".svrm");
        require_file(model_path, "train-svr");
        svr::SvrModel model = svr::load_svr(model_path);
        postprocess::PostprocessChain chain = postprocess::optimize_chain(
            dim_targets(train, dim), svr::predict_svr(model, train.features),
            dim_targets(dev, dim), svr::predict_svr(model, dev.features),
            grid);
        postprocess::write_chain(out / ("chain_" + std::string(dim) + ".txt"),
                                 chain);
    }
}

void stage_evaluate(const RunConfig& config, const fs::path& out) {
    std::vector<SubjectSeries> series = load_feature_series(config, out);
    PartitionSeries dev = concat_partition(series, data::Partition::Val);

    std::ofstream os(out / "scores.csv");
    os.precision(9);
    os << "dimension,n,raw_pearson,raw_rmse,raw_ccc,post_pearson,post_rmse,"
          "post_ccc\n";
    for (const char* dim : kDimensions) {
        const fs::path model_path = out / ("svr_" + std::string(dim) + ".svrm");
        const fs::path chain_path =
            out / ("chain_" + std::string(dim) + ".txt");
        require_file(model_path, "train-svr");
        require_file(chain_path, "postprocess");

        svr::SvrModel model = svr::load_svr(model_path);
        postprocess::PostprocessChain chain =
            postprocess::read_chain(chain_path);
        const std::vector<double>& gold = dim_targets(dev, dim);
        std::vector<double> raw = svr::predict_svr(model, dev.features);
        std::vector<double> post = postprocess::apply_chain(chain, raw);

        os << dim << "," << gold.size() << "," << safe_pearson(gold, raw)
           << "," << metrics::rmse(gold, raw) << "," << metrics::ccc(gold, raw)
           << "," << safe_pearson(gold, post) << ","
           << metrics::rmse(gold, post) << "," << metrics::ccc(gold, post)
           << "\n";
    }
}

namespace {

struct SweepCell {
    int freeze;
    std::size_t encoder_size;
    std::size_t delay;
    fs::path dir;
    std::string status{"ok"};
    // one (dimension, n, raw_ccc, post_ccc) row per dimension
    std::vector<std::array<std::string, 4>> rows;
};

void run_cell(const RunConfig& base, const fs::path& out, SweepCell& cell) {
    RunConfig config = base;
    config.cae_freeze = cell.freeze;
    config.cae_encoder_size = cell.encoder_size;
    config.eval_delay = cell.delay;
    if (!config.cae_no_transfer && config.cae_pretrain_checkpoint.empty())
        config.cae_pretrain_checkpoint = (out / "pretrain.ckpt").string();

    fs::create_directories(cell.dir);
    stage_train_cae(config, cell.dir);
    stage_encode(config, cell.dir);
    stage_train_svr(config, cell.dir);
    stage_postprocess(config, cell.dir);
    stage_evaluate(config, cell.dir);

    std::ifstream scores(cell.dir / "scores.csv");
    std::string line;
    std::getline(scores, line);  // header
    while (std::getline(scores, line)) {
        std::vector<std::string> fields;
        std::istringstream is(line);
        std::string cellv;
        while (std::getline(is, cellv, ',')) fields.push_back(cellv);
        if (fields.size() < 8) continue;
        cell.rows.push_back({fields[0], fields[1], fields[4], fields[7]});
    }
}

}  // namespace

void stage_sweep(const RunConfig& config, const fs::path& out) {
    std::vector<int> freezes = config.sweep_freeze;
    if (freezes.empty()) freezes = {config.cae_freeze};
    std::vector<std::size_t> sizes = config.sweep_encoder_size;
    if (sizes.empty()) sizes = {config.cae_encoder_size};
    std::vector<std::size_t> delays = config.sweep_delay;
    if (delays.empty()) delays = {config.eval_delay};

    std::vector<SweepCell> cells;
    for (int f : freezes)
        for (std::size_t d : sizes)
            for (std::size_t n : delays) {
                SweepCell cell;
                cell.freeze = f;
                cell.encoder_size = d;
                cell.delay = n;
                cell.dir = out / "cells" /
                           ("f" + std::to_string(f) + "_d" + std::to_string(d) +
                            "_n" + std::to_string(n));
                cells.push_back(std::move(cell));
            }

    fs::create_directories(out / "cells");
    std::atomic<std::size_t> next{0};
    const std::size_t n_workers =
        std::min(cells.size(), std::size_t(std::max(1, config.jobs)));
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                run_cell(config, out, cells[i]);
            } catch (const std::exception& e) {
                std::string msg = e.what();
                std::replace(msg.begin(), msg.end(), ',', ';');
                std::replace(msg.begin(), msg.end(), '\n', ' ');
                cells[i].status = "error: " + msg;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    std::ofstream os(out / "sweep.csv");
    os << "freeze,encoder_size,delay,dimension,n,raw_ccc,post_ccc,status\n";
    for (const SweepCell& cell : cells) {
        if (cell.rows.empty()) {
            os << cell.freeze << "," << cell.encoder_size << "," << cell.delay
               << ",-,0,,," << cell.status << "\n";
            continue;
        }
        for (const auto& row : cell.rows)
            os << cell.freeze << "," << cell.encoder_size << "," << cell.delay
               << "," << row[0] << "," << row[1] << "," << row[2] << ","
               << row[3] << "," << cell.status << "\n";
    }
}

}  // namespace affect::cli
