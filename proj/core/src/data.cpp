#include "affect/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace affect::data {

namespace fs = std::filesystem;

Partition partition_from_string(const std::string& s) {
    if (s == "train" || s == "Training") return Partition::Train;
    if (s == "val" || s == "PublicTest" || s == "Validation")
        return Partition::Val;
    if (s == "test" || s == "PrivateTest" || s == "Test") return Partition::Test;
    throw ParseError("unknown partition '" + s + "'");
}

std::string partition_to_string(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Val: return "val";
        case Partition::Test: return "test";
    }
    return "train";
}

namespace {

std::string fer_usage(Partition p) {
    switch (p) {
        case Partition::Train: return "Training";
        case Partition::Val: return "PublicTest";
        case Partition::Test: return "PrivateTest";
    }
    return "Training";
}

long long to_centiseconds(double timestamp) {
    return std::llround(timestamp * 100.0);
}

std::string frame_filename(double timestamp) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06lld.pgm",
                  to_centiseconds(timestamp));
    return buf;
}

}  // namespace

std::map<Partition, LabeledImageSet> load_fer_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line))
        throw ParseError(path.string() + ": empty file");
    // header: emotion,pixels,usage
    std::map<Partition, std::vector<double>> pixels;
    std::map<Partition, std::vector<int>> labels;
    std::size_t row = 0;
    const std::size_t n_px = kFrameSize * kFrameSize;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1)
            throw ParseError("row " + std::to_string(row) +
                             ": expected emotion,pixels,usage");
        int label;
        try {
            label = std::stoi(line.substr(0, c1));
        } catch (const std::exception&) {
            throw ParseError("row " + std::to_string(row) + ": bad label");
        }
        if (label < 0 || label >= kNumClasses)
            throw ParseError("row " + std::to_string(row) + ": label " +
                             std::to_string(label) + " outside 0..6");
        const Partition part =
            partition_from_string(line.substr(c2 + 1));
        std::istringstream ps(line.substr(c1 + 1, c2 - c1 - 1));
        std::size_t count = 0;
        int px;
        auto& dst = pixels[part];
        while (ps >> px) {
            if (px < 0 || px > 255)
                throw ParseError("row " + std::to_string(row) +
                                 ": pixel value outside 0..255");
            dst.push_back(double(px) / 255.0);
            ++count;
        }
        if (count != n_px) {
            dst.resize(dst.size() - count);
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(n_px) + " values, got " +
                             std::to_string(count));
        }
        labels[part].push_back(label);
    }
    std::map<Partition, LabeledImageSet> out;
    for (auto& [part, data] : pixels) {
        LabeledImageSet set;
        set.partition = part;
        const std::size_t n = labels[part].size();
        set.images =
            Tensor({n, kFrameSize, kFrameSize, 1}, std::move(data));
        set.labels = std::move(labels[part]);
        out.emplace(part, std::move(set));
    }
    return out;
}

void write_fer_csv(const fs::path& path,
                   const std::map<Partition, LabeledImageSet>& sets) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    os << "emotion,pixels,usage\n";
    const std::size_t n_px = kFrameSize * kFrameSize;
    for (const auto& [part, set] : sets) {
        const std::size_t n = set.labels.size();
        for (std::size_t i = 0; i < n; ++i) {
            os << set.labels[i] << ",";
            for (std::size_t p = 0; p < n_px; ++p) {
                if (p) os << " ";
                os << int(std::lround(set.images.data[i * n_px + p] * 255.0));
            }
            os << "," << fer_usage(part) << "\n";
        }
    }
}

void write_pgm(const fs::path& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 1)
        throw ShapeError("write_pgm expects [H,W,1]");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    os << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
    for (double v : image.data) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        os.put(static_cast<char>(std::lround(clamped * 255.0)));
    }
}

Tensor read_pgm(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path.string());
    std::string magic;
    is >> magic;
    if (magic != "P5") throw ParseError(path.string() + ": not a P5 PGM");
    std::size_t w, h;
    int maxval;
    is >> w >> h >> maxval;
    if (maxval != 255) throw ParseError(path.string() + ": maxval must be 255");
    is.get();  // single whitespace after header
    std::vector<char> raw(w * h);
    is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!is) throw ParseError(path.string() + ": truncated pixel data");
    std::vector<double> px(w * h);
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = double(static_cast<unsigned char>(raw[i])) / 255.0;
    return Tensor({h, w, 1}, std::move(px));
}

namespace {

std::vector<std::pair<double, double>> read_annotation_csv(
    const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path.string());
    std::vector<std::pair<double, double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first && line.find("timestamp") != std::string::npos) {
            first = false;
            continue;
        }
        first = false;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path.string() + ": malformed row " + line);
        const double ts = std::stod(line.substr(0, comma));
        const double value = std::stod(line.substr(comma + 1));
        if (value < -1.0 || value > 1.0)
            throw ParseError(path.string() + ": annotation value " +
                             std::to_string(value) + " outside [-1,1]");
        rows.emplace_back(ts, value);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first <= rows[i - 1].first)
            throw ParseError(path.string() + ": non-monotone timestamps");
        if (std::abs(rows[i].first - rows[i - 1].first - kFramePeriod) > 1e-6)
            throw ParseError(path.string() + ": timestamp step is not 0.04 s");
    }
    return rows;
}

void write_annotation_csv(const fs::path& path,
                          const std::vector<double>& timestamps,
                          const std::vector<double>& values) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    os << "timestamp,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < values.size(); ++i)
        os << timestamps[i] << "," << values[i] << "\n";
}

}  // namespace

std::vector<SubjectData> load_recola_layout(const fs::path& root) {
    if (!fs::is_directory(root))
        throw ParseError("layout root " + root.string() + " is not a directory");
    std::vector<SubjectData> out;
    for (const char* part_name : {"train", "val", "test"}) {
        const fs::path part_dir = root / part_name;
        if (!fs::is_directory(part_dir)) continue;
        std::vector<fs::path> subject_dirs;
        for (const auto& entry : fs::directory_iterator(part_dir))
            if (entry.is_directory()) subject_dirs.push_back(entry.path());
        std::sort(subject_dirs.begin(), subject_dirs.end());
        for (const fs::path& sdir : subject_dirs) {
            SubjectData subject;
            subject.frames.subject_id = sdir.filename().string();
            subject.frames.partition = partition_from_string(part_name);
            subject.annotations.subject_id = subject.frames.subject_id;
            const auto valence = read_annotation_csv(sdir / "valence.csv");
            const auto arousal = read_annotation_csv(sdir / "arousal.csv");
            if (valence.size() != arousal.size())
                throw ParseError(sdir.string() +
                                 ": valence/arousal row count mismatch");
            const fs::path frames_dir = sdir / "frames";
            for (std::size_t i = 0; i < valence.size(); ++i) {
                if (std::abs(valence[i].first - arousal[i].first) > 1e-9)
                    throw ParseError(sdir.string() +
                                     ": valence/arousal timestamps disagree");
                Frame frame;
                frame.timestamp = valence[i].first;
                const fs::path frame_path =
                    frames_dir / frame_filename(frame.timestamp);
                if (fs::exists(frame_path)) {
                    Tensor img = read_pgm(frame_path);
                    if (img.dim(0) != kFrameSize || img.dim(1) != kFrameSize)
                        throw ParseError(frame_path.string() +
                                         ": frame is not 48x48");
                    frame.image = std::move(img);
                }
                subject.frames.frames.push_back(std::move(frame));
                subject.annotations.valence.push_back(valence[i].second);
                subject.annotations.arousal.push_back(arousal[i].second);
            }
            out.push_back(std::move(subject));
        }
    }
    return out;
}

void write_recola_layout(const fs::path& root,
                         const std::vector<SubjectData>& subjects) {
    for (const SubjectData& subject : subjects) {
        const fs::path sdir = root /
                              partition_to_string(subject.frames.partition) /
                              subject.frames.subject_id;
        fs::create_directories(sdir / "frames");
        std::vector<double> timestamps;
        for (const Frame& f : subject.frames.frames) {
            timestamps.push_back(f.timestamp);
            if (f.image)
                write_pgm(sdir / "frames" / frame_filename(f.timestamp),
                          *f.image);
        }
        write_annotation_csv(sdir / "valence.csv", timestamps,
                             subject.annotations.valence);
        write_annotation_csv(sdir / "arousal.csv", timestamps,
                             subject.annotations.arousal);
    }
}

FrameSequence substitute_missing_frames(const FrameSequence& seq) {
    const bool any_valid =
        std::any_of(seq.frames.begin(), seq.frames.end(),
                    [](const Frame& f) { return f.image.has_value(); });
    if (!any_valid)
        throw ParamError("sequence " + seq.subject_id +
                         " has no valid frames to substitute from");
    FrameSequence out = seq;
    // nearest preceding valid frame; leading gap takes the first valid one
    std::size_t first_valid = 0;
    while (!out.frames[first_valid].image) ++first_valid;
    for (std::size_t i = 0; i < first_valid; ++i)
        out.frames[i].image = out.frames[first_valid].image;
    for (std::size_t i = first_valid + 1; i < out.frames.size(); ++i)
        if (!out.frames[i].image) out.frames[i].image = out.frames[i - 1].image;
    return out;
}

namespace {

// Smooth bounded latent: a pair of seeded sinusoids, range within [-1,1].
struct LatentTrack {
    double a1, f1, p1, a2, f2, p2;

    static LatentTrack make(std::mt19937_64& rng) {
        std::uniform_real_distribution<double> freq(0.05, 0.15);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
        LatentTrack t;
        t.a1 = 0.55;
        t.a2 = 0.35;
        t.f1 = freq(rng);
        t.f2 = freq(rng) * 2.3;
        t.p1 = phase(rng);
        t.p2 = phase(rng);
        return t;
    }

    double at(double seconds) const {
        return a1 * std::sin(2.0 * M_PI * f1 * seconds + p1) +
               a2 * std::sin(2.0 * M_PI * f2 * seconds + p2);
    }
};

Tensor blob_image(double cx, double cy, double amplitude, double sigma) {
    Tensor img = Tensor::zeros({kFrameSize, kFrameSize, 1});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t y = 0; y < kFrameSize; ++y)
        for (std::size_t x = 0; x < kFrameSize; ++x) {
            const double dx = double(x) - cx;
            const double dy = double(y) - cy;
            const double v = amplitude * std::exp(-(dx * dx + dy * dy) * inv);
            // quantize to 8 bits so in-memory data matches the PGM layout
            img.data[(y * kFrameSize + x)] =
                double(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
        }
    return img;
}

}  // namespace

std::vector<SubjectData> synth_dataset(std::uint64_t seed,
                                       std::size_t n_subjects,
                                       std::size_t n_frames,
                                       std::size_t n_train_subjects) {
    if (n_frames < 10) throw ParamError("synth_dataset needs >= 10 frames");
    std::vector<SubjectData> out;
    for (std::size_t s = 0; s < n_subjects; ++s) {
        std::mt19937_64 rng(seed * 1000003 + s);
        const LatentTrack valence_track = LatentTrack::make(rng);
        const LatentTrack arousal_track = LatentTrack::make(rng);
        SubjectData subject;
        subject.frames.subject_id = "subj" + std::to_string(s);
        subject.frames.partition =
            s < n_train_subjects ? Partition::Train : Partition::Val;
        subject.annotations.subject_id = subject.frames.subject_id;
        for (std::size_t i = 0; i < n_frames; ++i) {
            const double t = double(i) * kFramePeriod;
            const double v = valence_track.at(t);
            const double a = arousal_track.at(t);
            Frame frame;
            frame.timestamp = t;
            // valence drives blob x-position, arousal drives intensity
            frame.image = blob_image(24.0 + 14.0 * v, 24.0, 0.65 + 0.3 * a,
                                     6.0);
            subject.frames.frames.push_back(std::move(frame));
            subject.annotations.valence.push_back(v);
            subject.annotations.arousal.push_back(a);
        }
        out.push_back(std::move(subject));
    }
    return out;
}

LabeledImageSet synth_labeled_set(std::uint64_t seed, std::size_t n_per_class,
                                  Partition partition) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-2.0, 2.0);
    std::uniform_real_distribution<double> amp(0.6, 0.95);
    LabeledImageSet set;
    set.partition = partition;
    const std::size_t n = n_per_class * kNumClasses;
    std::vector<double> px;
    px.reserve(n * kFrameSize * kFrameSize);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        for (int cls = 0; cls < kNumClasses; ++cls) {
            const double angle = 2.0 * M_PI * double(cls) / double(kNumClasses);
            const double cx = 24.0 + 12.0 * std::cos(angle) + jitter(rng);
            const double cy = 24.0 + 12.0 * std::sin(angle) + jitter(rng);
            Tensor img = blob_image(cx, cy, amp(rng), 5.0);
            px.insert(px.end(), img.data.begin(), img.data.end());
            set.labels.push_back(cls);
        }
    }
    set.images = Tensor({n, kFrameSize, kFrameSize, 1}, std::move(px));
    return set;
}

Tensor frames_to_tensor(const FrameSequence& seq) {
    const std::size_t n = seq.frames.size();
    if (n == 0) throw ParamError("empty frame sequence");
    std::vector<double> px;
    px.reserve(n * kFrameSize * kFrameSize);
    for (const Frame& f : seq.frames) {
        if (!f.image)
            throw ParamError("sequence " + seq.subject_id +
                             " still has MISSING frames");
        px.insert(px.end(), f.image->data.begin(), f.image->data.end());
    }
    return Tensor({n, kFrameSize, kFrameSize, 1}, std::move(px));
}

std::vector<double> frame_timestamps(const FrameSequence& seq) {
    std::vector<double> ts;
    ts.reserve(seq.frames.size());
    for (const Frame& f : seq.frames) ts.push_back(f.timestamp);
    return ts;
}

Tensor training_frame_batch(const std::vector<SubjectData>& subjects) {
    std::vector<double> px;
    std::size_t n = 0;
    for (const SubjectData& subject : subjects) {
        if (subject.frames.partition != Partition::Train)
            continue;  // only train-partition frames feed unsupervised training
        Tensor t = frames_to_tensor(subject.frames);
        px.insert(px.end(), t.data.begin(), t.data.end());
        n += t.dim(0);
    }
    if (n == 0)
        throw ParamError("no train-partition frames available");
    return Tensor({n, kFrameSize, kFrameSize, 1}, std::move(px));
}

}  // namespace affect::data
