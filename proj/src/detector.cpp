#include "gdn/detector.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "gdn/error.hpp"

namespace gdn::detector {

namespace {

double time_mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace

SegmentVerdict score_segment(const ingest::Segment& seg, model::GeneratorParams& gen_mdd,
                             model::GeneratorParams& gen_hc, const dsp::BandSpec& band,
                             int threads) {
    if (gen_mdd.cfg.k != gen_hc.cfg.k || gen_mdd.cfg.L != gen_hc.cfg.L) {
        throw DataError("score_segment: the two generators disagree on k/L");
    }
    const int k = gen_mdd.cfg.k;
    if (k > seg.C - 1) {
        throw DataError("score_segment: generator k=" + std::to_string(k) +
                        " exceeds available channels C-1=" + std::to_string(seg.C - 1));
    }
    const int L = dsp::dwt_coeff_len(seg.N);
    if (L != gen_mdd.cfg.L) {
        throw DataError("score_segment: segment yields L=" + std::to_string(L) +
                        " but generators were trained for L=" + std::to_string(gen_mdd.cfg.L));
    }

    const dsp::PreprocessedSegment pre = dsp::preprocess_segment_full(seg, k, band);

    SegmentVerdict verdict;
    verdict.subject_id = seg.subject_id;
    verdict.segment_index = seg.segment_index;
    verdict.electrode_count = seg.C;
    verdict.scores.resize(seg.C);

    auto score_range = [&](int begin, int end) {
        for (int e = begin; e < end; ++e) {
            const dsp::WaveletPair& wp = pre.pairs[e];
            model::Tape tape_m, tape_h;
            auto out_m = model::generator_forward(tape_m, wp, gen_mdd, model::Mode::Eval);
            auto out_h = model::generator_forward(tape_h, wp, gen_hc, model::Mode::Eval);
            const auto recon_m = model::reconstruct_time(out_m, seg.N);
            const auto recon_h = model::reconstruct_time(out_h, seg.N);
            verdict.scores[e] = {e, time_mse(recon_m, pre.filtered[e]),
                                 time_mse(recon_h, pre.filtered[e])};
        }
    };

    const int n_threads = std::max(1, std::min(threads, seg.C));
    if (n_threads == 1) {
        score_range(0, seg.C);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (seg.C + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(seg.C, begin + chunk);
            if (begin < end) pool.emplace_back(score_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    verdict.n = 0;
    for (const auto& s : verdict.scores) {
        if (s.err_mdd < s.err_hc) ++verdict.n;
    }
    return verdict;
}

Threshold select_threshold(const std::vector<std::pair<SegmentVerdict, ingest::Label>>& verdicts) {
    if (verdicts.empty()) throw DataError("select_threshold: empty validation set");
    int C = 0;
    bool has_mdd = false, has_hc = false;
    for (const auto& [v, label] : verdicts) {
        C = std::max(C, v.electrode_count);
        (label == ingest::Label::MDD ? has_mdd : has_hc) = true;
    }
    if (!has_mdd || !has_hc) {
        throw DataError("select_threshold: validation set must contain both classes");
    }

    // Count histograms once; accuracy at each n0 then falls out of prefix sums.
    std::vector<int> mdd_at(C + 1, 0), hc_at(C + 1, 0);
    int total = 0;
    for (const auto& [v, label] : verdicts) {
        if (v.n < 0 || v.n > C) throw DataError("select_threshold: verdict n out of range");
        (label == ingest::Label::MDD ? mdd_at : hc_at)[v.n] += 1;
        ++total;
    }

    // mdd_ge[t] = #MDD verdicts with n >= t; hc_lt[t] = #HC verdicts with n < t.
    std::vector<int> mdd_ge(C + 2, 0);
    for (int t = C; t >= 0; --t) mdd_ge[t] = mdd_ge[t + 1] + mdd_at[t];
    int best_correct = -1, best_n0 = 0;
    int hc_lt = 0;
    for (int n0 = 0; n0 <= C; ++n0) {
        const int correct = mdd_ge[n0] + hc_lt;
        if (correct > best_correct) {
            best_correct = correct;
            best_n0 = n0;
        }
        hc_lt += hc_at[n0];
    }
    return {best_n0, static_cast<double>(best_correct) / static_cast<double>(total)};
}

ingest::Label classify_segment(const SegmentVerdict& v, const Threshold& t) {
    return v.n >= t.n0 ? ingest::Label::MDD : ingest::Label::HC;
}

SubjectTally classify_subject(const std::vector<SegmentVerdict>& verdicts, const Threshold& t) {
    if (verdicts.empty()) throw DataError("classify_subject: no segments");
    SubjectTally tally;
    tally.subject_id = verdicts.front().subject_id;
    for (const auto& v : verdicts) {
        (classify_segment(v, t) == ingest::Label::MDD ? tally.mdd_votes : tally.hc_votes) += 1;
    }
    tally.decision = tally.mdd_votes >= tally.hc_votes ? ingest::Label::MDD : ingest::Label::HC;
    return tally;
}

Metrics evaluate(const std::vector<std::pair<ingest::Label, ingest::Label>>& pred_truth) {
    if (pred_truth.empty()) throw DataError("evaluate: empty prediction set");
    int tp = 0, fn = 0, tn = 0, fp = 0;
    for (const auto& [pred, truth] : pred_truth) {
        if (truth == ingest::Label::MDD) {
            (pred == ingest::Label::MDD ? tp : fn) += 1;
        } else {
            (pred == ingest::Label::HC ? tn : fp) += 1;
        }
    }
    Metrics m;
    m.sensitivity = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.specificity = tn + fp > 0 ? static_cast<double>(tn) / (tn + fp) : 0.0;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(pred_truth.size());
    return m;
}

}  // namespace gdn::detector
