#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gdn/ingest.hpp"

namespace gdn::dsp {

// Pass band in Hz; must satisfy 0 < low < high < fs/2 for the target fs.
struct BandSpec {
    double low_hz = 4.0;
    double high_hz = 14.0;
};

// Analysis length of a single-level db6 transform (12-tap filters,
// symmetric half-point extension): floor((n + 11) / 2).
int dwt_coeff_len(int n);

// The 12 db6 scaling-filter taps (reconstruction low-pass); the remaining
// bank filters derive from these.
std::span<const double, 12> db6_scaling_filter();

double cosine_similarity(std::span<const double> a, std::span<const double> b);

std::vector<double> hamming_window(int n);

// Hamming-windowed DFT band-pass: window, forward DFT, zero every bin whose
// frequency fs*k/n falls outside [low, high] (mirrored bins symmetrically),
// inverse DFT, divide the window back out.
std::vector<double> bandpass_dft(std::span<const double> x, double fs, const BandSpec& band);

struct WaveletCoeffs {
    std::vector<double> cA, cD;
};

WaveletCoeffs dwt_db6(std::span<const double> x);
std::vector<double> idwt_db6(std::span<const double> cA, std::span<const double> cD, int n);

// Per-electrode neighbor selection result: one (k+1) x N stack per electrode,
// row 0 the electrode itself, rows 1..k its most-similar channels in
// descending similarity (ties broken by ascending channel index).
struct SegmentStack {
    int C = 0;
    int k = 0;
    int N = 0;
    std::vector<std::vector<double>> stacks;     // C entries of (k+1)*N, row-major
    std::vector<std::vector<int>> neighbors;     // C entries of k channel indices

    const double* stack_row(int electrode, int row) const {
        return stacks[electrode].data() + static_cast<size_t>(row) * N;
    }
};

SegmentStack select_neighbors(const ingest::Segment& seg, int k);

// Wavelet coefficients for one electrode: k neighbor rows (S) plus the
// electrode's own filtered coefficients (O).
struct WaveletPair {
    int k = 0;
    int L = 0;
    int n_samples = 0;                 // time-domain length the pair came from
    std::vector<double> S_cA, S_cD;    // k x L row-major
    std::vector<double> O_cA, O_cD;    // length L

    const double* s_ca_row(int r) const { return S_cA.data() + static_cast<size_t>(r) * L; }
    const double* s_cd_row(int r) const { return S_cD.data() + static_cast<size_t>(r) * L; }
};

// Full preprocessing of one segment: band-pass every channel, pick neighbors
// on the filtered channels, wavelet-transform each row.
std::vector<WaveletPair> preprocess_segment(const ingest::Segment& seg, int k,
                                            const BandSpec& band);

// Same, but also keeps the filtered channels (time domain) for callers that
// score reconstructions against them.
struct PreprocessedSegment {
    std::vector<WaveletPair> pairs;              // one per electrode
    std::vector<std::vector<double>> filtered;   // C channels of N samples
};

PreprocessedSegment preprocess_segment_full(const ingest::Segment& seg, int k,
                                            const BandSpec& band);

// Debug dump: S/O matrices as f32le payloads plus a JSON sidecar, one file
// set per electrode, same binary conventions as the corpus format.
void dump_wavelet_pairs(const std::filesystem::path& dir, const std::vector<WaveletPair>& pairs);

}  // namespace gdn::dsp
