#ifndef AFFECT_DATA_HPP
#define AFFECT_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affect/tensor.hpp"

namespace affect::data {

enum class Partition { Train, Val, Test };

Partition partition_from_string(const std::string& s);
std::string partition_to_string(Partition p);

// 48x48 grayscale images in [0,1] with 7-class labels.
struct LabeledImageSet {
    Tensor images;            // [N, H, W, 1]
    std::vector<int> labels;  // 0..6
    Partition partition{Partition::Train};
};

inline constexpr double kFramePeriod = 0.04;  // 40 ms
inline constexpr std::size_t kFrameSize = 48;
inline constexpr int kNumClasses = 7;

struct Frame {
    double timestamp{0.0};
    std::optional<Tensor> image;  // [H,W,1]; nullopt == MISSING
};

struct FrameSequence {
    std::string subject_id;
    Partition partition{Partition::Train};
    std::vector<Frame> frames;  // strictly increasing timestamps, 0.04 s step
};

struct AnnotationTrack {
    std::string subject_id;
    std::vector<double> valence;  // [-1,1], per frame
    std::vector<double> arousal;  // [-1,1], per frame
};

struct SubjectData {
    FrameSequence frames;
    AnnotationTrack annotations;
};

// FER-style CSV with columns emotion,pixels,usage (2304 space-separated
// ints 0..255 per row). Pixels are scaled to [0,1].
std::map<Partition, LabeledImageSet> load_fer_csv(
    const std::filesystem::path& path);
void write_fer_csv(const std::filesystem::path& path,
                   const std::map<Partition, LabeledImageSet>& sets);

// Canonical frame layout: <root>/<partition>/<subject>/frames/*.pgm with
// valence.csv and arousal.csv (`timestamp,value` rows at 0.04 s). Frame
// files are named frame_NNNNNN.pgm where NNNNNN is the timestamp in
// centiseconds. Absent frame files become MISSING markers.
std::vector<SubjectData> load_recola_layout(const std::filesystem::path& root);
void write_recola_layout(const std::filesystem::path& root,
                         const std::vector<SubjectData>& subjects);

// Nearest-preceding-frame substitution; leading gaps take the nearest
// following frame. Labels untouched.
FrameSequence substitute_missing_frames(const FrameSequence& seq);

// Deterministic synthetic sequences: each frame holds a Gaussian blob whose
// x-position drives valence and whose intensity drives arousal, both
// drifting smoothly in [-1,1]. Subject i >= n_train_subjects lands in the
// val partition.
std::vector<SubjectData> synth_dataset(std::uint64_t seed,
                                       std::size_t n_subjects,
                                       std::size_t n_frames,
                                       std::size_t n_train_subjects);

// Synthetic 7-class blob set (one blob position per class) for desk-scale
// pre-training runs.
LabeledImageSet synth_labeled_set(std::uint64_t seed, std::size_t n_per_class,
                                  Partition partition = Partition::Train);

// Stacks every non-missing frame of the train partition into one [N,H,W,1]
// tensor; throws if any sequence still has MISSING entries or a non-train
// sequence slips in.
Tensor training_frame_batch(const std::vector<SubjectData>& subjects);

Tensor frames_to_tensor(const FrameSequence& seq);
std::vector<double> frame_timestamps(const FrameSequence& seq);

// 8-bit binary PGM (P5).
void write_pgm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pgm(const std::filesystem::path& path);

}  // namespace affect::data

#endif  // AFFECT_DATA_HPP
