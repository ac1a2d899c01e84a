#include "gdn/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>

#include "gdn/error.hpp"

#include <nlohmann/json.hpp>

namespace gdn::dsp {

namespace {

// db6 scaling filter (reconstruction low-pass), 12 taps. Derived by spectral
// factorization of the degree-5 Daubechies polynomial; sums to sqrt(2) and
// has unit L2 norm. The other three bank filters follow from it.
constexpr int kFilterLen = 12;
constexpr double kRecLo[kFilterLen] = {
    0.11154074335010946362,    0.49462389039845308568,   0.75113390802109535068,
    0.31525035170919762909,    -0.22626469396543982008,  -0.12976686756726193556,
    0.097501605587323049102,   0.027522865530305728626,  -0.031582039317486029565,
    0.00055384220116149613925, 0.0047772575109455106396, -0.0010773010853084795649,
};

struct Db6Bank {
    double dec_lo[kFilterLen];
    double dec_hi[kFilterLen];
    double rec_hi[kFilterLen];
    Db6Bank() {
        for (int i = 0; i < kFilterLen; ++i) dec_lo[i] = kRecLo[kFilterLen - 1 - i];
        for (int i = 0; i < kFilterLen; ++i) rec_hi[i] = (i % 2 == 0 ? 1.0 : -1.0) * dec_lo[i];
        for (int i = 0; i < kFilterLen; ++i) dec_hi[i] = rec_hi[kFilterLen - 1 - i];
    }
};

const Db6Bank& bank() {
    static const Db6Bank b;
    return b;
}

// Half-point symmetric index mapping: [.. x1 x0 | x0 x1 .. xn-1 | xn-1 xn-2 ..]
inline int sym_index(int p, int n) {
    while (p < 0 || p >= n) {
        if (p < 0) p = -p - 1;
        if (p >= n) p = 2 * n - p - 1;
    }
    return p;
}

// ---- FFTW plan cache -------------------------------------------------------
// Plans are created once per length under a lock (FFTW planning is not
// thread-safe); execution uses the new-array interface on per-call
// fftw_malloc'd buffers, which is safe to run concurrently.

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

std::mutex g_plan_mutex;
std::map<int, PlanPair>& plan_cache() {
    static std::map<int, PlanPair> cache;
    return cache;
}

PlanPair get_plans(int n) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto& cache = plan_cache();
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    double* re = fftw_alloc_real(n);
    fftw_complex* cx = fftw_alloc_complex(n / 2 + 1);
    PlanPair p;
    p.fwd = fftw_plan_dft_r2c_1d(n, re, cx, FFTW_ESTIMATE);
    p.inv = fftw_plan_dft_c2r_1d(n, cx, re, FFTW_ESTIMATE);
    fftw_free(re);
    fftw_free(cx);
    cache[n] = p;
    return p;
}

struct FftBuffers {
    double* re;
    fftw_complex* cx;
    explicit FftBuffers(int n) : re(fftw_alloc_real(n)), cx(fftw_alloc_complex(n / 2 + 1)) {}
    ~FftBuffers() {
        fftw_free(re);
        fftw_free(cx);
    }
    FftBuffers(const FftBuffers&) = delete;
    FftBuffers& operator=(const FftBuffers&) = delete;
};

}  // namespace

int dwt_coeff_len(int n) { return (n + kFilterLen - 1) / 2; }

std::span<const double, 12> db6_scaling_filter() { return std::span<const double, 12>(kRecLo); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw DataError("cosine_similarity: vectors must have equal nonzero length");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw NumericError("cosine_similarity: undefined for a zero vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> hamming_window(int n) {
    if (n < 2) throw DataError("hamming_window: n must be >= 2");
    std::vector<double> w(n);
    const double c = 2.0 * M_PI / (n - 1);
    for (int t = 0; t < n; ++t) w[t] = 0.54 - 0.46 * std::cos(c * t);
    return w;
}

std::vector<double> bandpass_dft(std::span<const double> x, double fs, const BandSpec& band) {
    const int n = static_cast<int>(x.size());
    if (n < 2) throw DataError("bandpass_dft: signal must have length >= 2");
    if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz < fs / 2.0)) {
        throw DataError("bandpass_dft: band must satisfy 0 < low < high < fs/2");
    }

    const std::vector<double> w = hamming_window(n);
    PlanPair plans = get_plans(n);
    FftBuffers buf(n);
    for (int t = 0; t < n; ++t) buf.re[t] = x[t] * w[t];
    fftw_execute_dft_r2c(plans.fwd, buf.re, buf.cx);

    const int nbins = n / 2 + 1;
    for (int k = 0; k < nbins; ++k) {
        const double f = fs * static_cast<double>(k) / n;
        if (f < band.low_hz || f > band.high_hz) {
            buf.cx[k][0] = 0.0;
            buf.cx[k][1] = 0.0;
        }
    }

    fftw_execute_dft_c2r(plans.inv, buf.cx, buf.re);
    std::vector<double> out(n);
    const double inv_n = 1.0 / n;
    for (int t = 0; t < n; ++t) out[t] = buf.re[t] * inv_n / w[t];
    return out;
}

WaveletCoeffs dwt_db6(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    if (n < kFilterLen) throw DataError("dwt_db6: signal shorter than filter (12 samples)");
    const Db6Bank& f = bank();
    const int L = dwt_coeff_len(n);
    WaveletCoeffs out;
    out.cA.resize(L);
    out.cD.resize(L);
    for (int o = 0; o < L; ++o) {
        const int i = 2 * o + 1;
        double sa = 0.0, sd = 0.0;
        for (int j = 0; j < kFilterLen; ++j) {
            const double v = x[sym_index(i - j, n)];
            sa += f.dec_lo[j] * v;
            sd += f.dec_hi[j] * v;
        }
        out.cA[o] = sa;
        out.cD[o] = sd;
    }
    return out;
}

std::vector<double> idwt_db6(std::span<const double> cA, std::span<const double> cD, int n) {
    if (cA.size() != cD.size()) throw DataError("idwt_db6: cA and cD lengths differ");
    const int L = static_cast<int>(cA.size());
    if (L == 0 || dwt_coeff_len(n) != L) {
        throw DataError("idwt_db6: coefficient length inconsistent with requested n");
    }
    const Db6Bank& f = bank();
    const int rec_len = 2 * L - kFilterLen + 2;
    std::vector<double> y(static_cast<size_t>(std::max(rec_len, n)), 0.0);
    // Upsampled synthesis convolution, cropped by (filter_len - 2) leading samples.
    for (int i = 0; i < rec_len; ++i) {
        const int base = i + kFilterLen - 2;
        double s = 0.0;
        int k_lo = (base - (kFilterLen - 1) + 1) / 2;  // smallest k with base-2k <= F-1
        if (k_lo < 0) k_lo = 0;
        int k_hi = base / 2;  // largest k with base-2k >= 0
        if (k_hi > L - 1) k_hi = L - 1;
        for (int k = k_lo; k <= k_hi; ++k) {
            const int j = base - 2 * k;
            s += kRecLo[j] * cA[k] + f.rec_hi[j] * cD[k];
        }
        y[i] = s;
    }
    y.resize(n);
    return y;
}

SegmentStack select_neighbors(const ingest::Segment& seg, int k) {
    const int C = seg.C;
    if (k < 1 || k > C - 1) {
        throw DataError("select_neighbors: k must satisfy 1 <= k <= C-1 (k=" + std::to_string(k) +
                        ", C=" + std::to_string(C) + ")");
    }
    SegmentStack out;
    out.C = C;
    out.k = k;
    out.N = seg.N;
    out.stacks.resize(C);
    out.neighbors.resize(C);

    // Similarity matrix once; rows/cols fully deterministic.
    std::vector<double> norms(C);
    for (int c = 0; c < C; ++c) {
        double s = 0.0;
        const double* row = seg.row(c);
        for (int t = 0; t < seg.N; ++t) s += row[t] * row[t];
        if (s == 0.0) {
            throw NumericError("select_neighbors: channel " + std::to_string(c) +
                               " is all-zero; similarity undefined");
        }
        norms[c] = std::sqrt(s);
    }
    std::vector<double> sim(static_cast<size_t>(C) * C, 1.0);
    for (int a = 0; a < C; ++a) {
        for (int b = a + 1; b < C; ++b) {
            double dot = 0.0;
            const double* ra = seg.row(a);
            const double* rb = seg.row(b);
            for (int t = 0; t < seg.N; ++t) dot += ra[t] * rb[t];
            const double rho = dot / (norms[a] * norms[b]);
            sim[static_cast<size_t>(a) * C + b] = rho;
            sim[static_cast<size_t>(b) * C + a] = rho;
        }
    }

    for (int a = 0; a < C; ++a) {
        std::vector<int> order;
        order.reserve(C - 1);
        for (int b = 0; b < C; ++b) {
            if (b != a) order.push_back(b);
        }
        std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
            const double sl = sim[static_cast<size_t>(a) * C + lhs];
            const double sr = sim[static_cast<size_t>(a) * C + rhs];
            if (sl != sr) return sl > sr;
            return lhs < rhs;
        });
        order.resize(k);
        out.neighbors[a] = order;

        auto& stack = out.stacks[a];
        stack.resize(static_cast<size_t>(k + 1) * seg.N);
        std::memcpy(stack.data(), seg.row(a), sizeof(double) * seg.N);
        for (int r = 0; r < k; ++r) {
            std::memcpy(stack.data() + static_cast<size_t>(r + 1) * seg.N, seg.row(order[r]),
                        sizeof(double) * seg.N);
        }
    }
    return out;
}

PreprocessedSegment preprocess_segment_full(const ingest::Segment& seg, int k,
                                            const BandSpec& band) {
    PreprocessedSegment out;
    out.filtered.resize(seg.C);
    ingest::Segment filtered_seg = seg;
    for (int c = 0; c < seg.C; ++c) {
        out.filtered[c] = bandpass_dft(std::span(seg.row(c), static_cast<size_t>(seg.N)),
                                       static_cast<double>(seg.fs), band);
        std::memcpy(filtered_seg.data.data() + static_cast<size_t>(c) * seg.N,
                    out.filtered[c].data(), sizeof(double) * seg.N);
    }

    const SegmentStack stacks = select_neighbors(filtered_seg, k);
    const int L = dwt_coeff_len(seg.N);
    out.pairs.resize(seg.C);
    for (int a = 0; a < seg.C; ++a) {
        WaveletPair& wp = out.pairs[a];
        wp.k = k;
        wp.L = L;
        wp.n_samples = seg.N;
        wp.S_cA.resize(static_cast<size_t>(k) * L);
        wp.S_cD.resize(static_cast<size_t>(k) * L);
        const std::span<const double> target(stacks.stack_row(a, 0), static_cast<size_t>(seg.N));
        WaveletCoeffs oc = dwt_db6(target);
        wp.O_cA = std::move(oc.cA);
        wp.O_cD = std::move(oc.cD);
        for (int r = 0; r < k; ++r) {
            const std::span<const double> row(stacks.stack_row(a, r + 1),
                                              static_cast<size_t>(seg.N));
            WaveletCoeffs c = dwt_db6(row);
            std::memcpy(wp.S_cA.data() + static_cast<size_t>(r) * L, c.cA.data(),
                        sizeof(double) * L);
            std::memcpy(wp.S_cD.data() + static_cast<size_t>(r) * L, c.cD.data(),
                        sizeof(double) * L);
        }
    }
    return out;
}

std::vector<WaveletPair> preprocess_segment(const ingest::Segment& seg, int k,
                                            const BandSpec& band) {
    return preprocess_segment_full(seg, k, band).pairs;
}

namespace {

void write_f32le(const std::filesystem::path& path, const std::vector<double>& v) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path.string());
    std::vector<float> tmp(v.begin(), v.end());
    f.write(reinterpret_cast<const char*>(tmp.data()),
            static_cast<std::streamsize>(tmp.size() * sizeof(float)));
}

}  // namespace

void dump_wavelet_pairs(const std::filesystem::path& dir, const std::vector<WaveletPair>& pairs) {
    std::filesystem::create_directories(dir);
    nlohmann::json sidecar;
    sidecar["electrodes"] = pairs.size();
    sidecar["format"] = "f32le";
    auto& entries = sidecar["entries"];
    entries = nlohmann::json::array();
    for (size_t e = 0; e < pairs.size(); ++e) {
        const WaveletPair& wp = pairs[e];
        const std::string stem = "electrode_" + std::to_string(e);
        write_f32le(dir / (stem + "_S_cA.f32"), wp.S_cA);
        write_f32le(dir / (stem + "_S_cD.f32"), wp.S_cD);
        write_f32le(dir / (stem + "_O_cA.f32"), wp.O_cA);
        write_f32le(dir / (stem + "_O_cD.f32"), wp.O_cD);
        entries.push_back({{"electrode", e},
                           {"k", wp.k},
                           {"L", wp.L},
                           {"n_samples", wp.n_samples},
                           {"files",
                            {stem + "_S_cA.f32", stem + "_S_cD.f32", stem + "_O_cA.f32",
                             stem + "_O_cD.f32"}}});
    }
    std::ofstream f(dir / "wavelet_pairs.json");
    f << sidecar.dump(2) << "\n";
}

}  // namespace gdn::dsp
