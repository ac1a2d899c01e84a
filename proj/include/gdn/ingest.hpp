#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gdn::ingest {

enum class Label { MDD, HC };

std::string to_string(Label label);
Label label_from_string(const std::string& s);

// One subject's multichannel recording. `data` is row-major, C rows of T
// samples each, in microvolts.
struct Recording {
    std::string subject_id;
    Label label = Label::HC;
    int fs = 0;
    std::vector<std::string> channels;
    std::optional<std::vector<std::array<double, 2>>> positions;  // normalized to [-1,1]^2
    int C = 0;
    int T = 0;
    std::vector<double> data;

    double at(int c, int t) const { return data[static_cast<size_t>(c) * T + t]; }
    const double* row(int c) const { return data.data() + static_cast<size_t>(c) * T; }
};

// A fixed-length window cut from a Recording; C channels of N samples.
struct Segment {
    std::string subject_id;
    Label label = Label::HC;
    int segment_index = 0;
    int fs = 0;
    int C = 0;
    int N = 0;
    std::vector<double> data;

    double at(int c, int t) const { return data[static_cast<size_t>(c) * N + t]; }
    const double* row(int c) const { return data.data() + static_cast<size_t>(c) * N; }
};

// Subject-level split; ids keep manifest order within each list.
struct SplitPlan {
    std::vector<std::string> train, val, test;

    bool in_train(const std::string& id) const;
    bool in_val(const std::string& id) const;
    bool in_test(const std::string& id) const;
};

// Per-electrode sparse mixing rule for the synthetic corpus. Electrodes with
// an empty term list are latent sources; mixed electrodes must reference only
// lower-indexed electrodes so generation resolves in one pass.
struct MixRule {
    struct Term {
        int src = 0;
        double weight = 0.0;
        bool operator==(const Term&) const = default;
    };
    enum class Nonlin { Identity, Tanh };

    std::vector<std::vector<Term>> mixing;  // one entry per electrode
    Nonlin nonlin = Nonlin::Identity;
    double noise_amp = 0.0;

    bool operator==(const MixRule&) const = default;
};

// The two stock rules used by the CLI: same sparse support, different mixing
// weights, and rule B routes through tanh. `n_sources` latent channels feed
// the rest pairwise.
MixRule default_rule_a(int C, double noise_amp = 0.1, int n_sources = 6);
MixRule default_rule_b(int C, double noise_amp = 0.1, int n_sources = 6);

std::vector<Recording> load_corpus(const std::filesystem::path& root);

// Writes manifest.json plus one payload file per recording. `format` is
// "f32le" or "csv".
void write_corpus(const std::filesystem::path& root, const std::vector<Recording>& recordings,
                  const std::string& format = "f32le");

std::vector<Segment> segment_recording(const Recording& r, double window_seconds,
                                       double start_seconds = 0.0,
                                       std::optional<int> max_segments = std::nullopt);

SplitPlan make_split(const std::vector<Recording>& recordings, int train_per_class,
                     int val_per_class, bool allow_empty_test = false);

std::vector<Recording> synth_corpus(uint64_t seed, int n_subjects_per_class, int C, int fs,
                                    int seconds, const MixRule& rule_a, const MixRule& rule_b);

}  // namespace gdn::ingest
