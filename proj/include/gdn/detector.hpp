#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gdn/dsp.hpp"
#include "gdn/ingest.hpp"
#include "gdn/model.hpp"

namespace gdn::detector {

struct ElectrodeScore {
    int electrode = 0;
    double err_mdd = 0.0;  // time-domain MSE of the MDD generator's reconstruction
    double err_hc = 0.0;
};

struct SegmentVerdict {
    std::string subject_id;
    int segment_index = 0;
    int electrode_count = 0;
    int n = 0;  // electrodes where the MDD generator reconstructs strictly better
    std::optional<ingest::Label> decision;
    std::vector<ElectrodeScore> scores;
};

// Decision rule: n >= n0 -> MDD, n < n0 -> HC (ties at n0 count as MDD).
struct Threshold {
    int n0 = 0;
    double val_accuracy = 0.0;
};

struct Metrics {
    double sensitivity = 0.0;  // MDD recall
    double specificity = 0.0;  // HC recall
    double accuracy = 0.0;
};

struct SubjectTally {
    std::string subject_id;
    ingest::Label truth = ingest::Label::HC;
    ingest::Label decision = ingest::Label::HC;
    int mdd_votes = 0;
    int hc_votes = 0;
};

// Scores one segment against both generators: per electrode, reconstruct with
// each, invert to the time domain and compare with the band-passed original.
// Electrodes with equal errors vote HC (strict inequality).
SegmentVerdict score_segment(const ingest::Segment& seg, model::GeneratorParams& gen_mdd,
                             model::GeneratorParams& gen_hc, const dsp::BandSpec& band,
                             int threads = 1);

// Exhaustive scan of n0 in [0, C] maximizing validation accuracy; ties go to
// the smallest n0.
Threshold select_threshold(const std::vector<std::pair<SegmentVerdict, ingest::Label>>& verdicts);

ingest::Label classify_segment(const SegmentVerdict& v, const Threshold& t);

// Majority vote over segment decisions; exact ties resolve to MDD.
SubjectTally classify_subject(const std::vector<SegmentVerdict>& verdicts, const Threshold& t);

Metrics evaluate(const std::vector<std::pair<ingest::Label, ingest::Label>>& pred_truth);

}  // namespace gdn::detector
