#include "gdn/cli.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include "gdn/detector.hpp"
#include "gdn/dsp.hpp"
#include "gdn/error.hpp"
#include "gdn/explain.hpp"
#include "gdn/ingest.hpp"
#include "gdn/log.hpp"
#include "gdn/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace gdn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flags shared by the pipeline commands; every value lands in run.json.
struct CommonOpts {
    std::string corpus;
    std::string out;
    uint64_t seed = 0;
    int k = 10;
    double band_low = 4.0;
    double band_high = 14.0;
    int epochs = 100;
    double lr = 1e-3;
    int batch = 64;
    int threads = 1;
    std::string precision = "f64";
    int train_per_class = 15;
    int val_per_class = 5;
    double window_seconds = 10.0;
    double start_seconds = 0.0;
    int max_segments = -1;  // <0 = unlimited
    int patience = 10;
};

void add_common_train_flags(CLI::App* cmd, CommonOpts& o, bool needs_corpus = true) {
    if (needs_corpus) cmd->add_option("--corpus", o.corpus, "Corpus directory")->required();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--seed", o.seed, "Master seed (default 0)");
    cmd->add_option("--k", o.k, "Similar electrodes per target");
    cmd->add_option("--band-low", o.band_low, "Pass band low edge, Hz");
    cmd->add_option("--band-high", o.band_high, "Pass band high edge, Hz");
    cmd->add_option("--epochs", o.epochs, "Max training epochs");
    cmd->add_option("--lr", o.lr, "Learning rate");
    cmd->add_option("--batch", o.batch, "Batch size in electrode stacks");
    cmd->add_option("--threads", o.threads, "Worker threads");
    cmd->add_option("--precision", o.precision, "Checkpoint precision (f32|f64)");
    cmd->add_option("--train-per-class", o.train_per_class, "Training subjects per class");
    cmd->add_option("--val-per-class", o.val_per_class, "Validation subjects per class");
    cmd->add_option("--window", o.window_seconds, "Segment window, seconds");
    cmd->add_option("--start", o.start_seconds, "Segmentation start offset, seconds");
    cmd->add_option("--max-segments", o.max_segments, "Cap segments per recording");
    cmd->add_option("--patience", o.patience, "Early-stop patience, epochs");
}

json opts_to_json(const CommonOpts& o) {
    return json{{"corpus", o.corpus},
                {"out", o.out},
                {"seed", o.seed},
                {"k", o.k},
                {"band_low", o.band_low},
                {"band_high", o.band_high},
                {"epochs", o.epochs},
                {"lr", o.lr},
                {"batch", o.batch},
                {"threads", o.threads},
                {"precision", o.precision},
                {"train_per_class", o.train_per_class},
                {"val_per_class", o.val_per_class},
                {"window", o.window_seconds},
                {"start", o.start_seconds},
                {"max_segments", o.max_segments},
                {"patience", o.patience}};
}

void write_run_record(const fs::path& out_dir, const std::string& command, const json& flags) {
    fs::create_directories(out_dir);
    json rec{{"command", command}, {"flags", flags}};
    std::ofstream f(out_dir / "run.json");
    if (!f) throw DataError("cannot write run record under " + out_dir.string());
    f << rec.dump(2) << "\n";
}

// ---- shared pipeline steps ----

struct SegmentedCorpus {
    std::vector<ingest::Recording> recordings;
    ingest::SplitPlan split;
    // Per subject id, that recording's segments.
    std::map<std::string, std::vector<ingest::Segment>> segments;
    int N = 0;  // samples per segment
};

SegmentedCorpus load_and_segment(const CommonOpts& o) {
    SegmentedCorpus sc;
    sc.recordings = ingest::load_corpus(o.corpus);
    sc.split = ingest::make_split(sc.recordings, o.train_per_class, o.val_per_class);
    std::optional<int> cap;
    if (o.max_segments >= 0) cap = o.max_segments;
    for (const auto& r : sc.recordings) {
        auto segs = ingest::segment_recording(r, o.window_seconds, o.start_seconds, cap);
        if (segs.empty()) continue;
        if (sc.N == 0) sc.N = segs.front().N;
        if (segs.front().N != sc.N) {
            throw DataError("segment length differs across recordings (" +
                            std::to_string(segs.front().N) + " vs " + std::to_string(sc.N) + ")");
        }
        sc.segments[r.subject_id] = std::move(segs);
    }
    if (sc.N == 0) throw DataError("corpus produced no segments");
    return sc;
}

trainer::TrainConfig make_train_config(const CommonOpts& o, int N) {
    trainer::TrainConfig cfg;
    cfg.k = o.k;
    cfg.band = {o.band_low, o.band_high};
    cfg.learning_rate = o.lr;
    cfg.batch_size = o.batch;
    cfg.epochs = o.epochs;
    cfg.seed = o.seed;
    cfg.early_stop_patience = o.patience;
    cfg.precision = trainer::precision_from_string(o.precision);
    cfg.arch.k = o.k;
    cfg.arch.L = dsp::dwt_coeff_len(N);
    return cfg;
}

// Preprocesses every segment of `ids` subjects with label `label` into
// per-electrode training samples.
std::vector<trainer::TrainSample> collect_samples(const SegmentedCorpus& sc,
                                                  const std::vector<std::string>& ids,
                                                  ingest::Label label,
                                                  const trainer::TrainConfig& cfg) {
    std::vector<trainer::TrainSample> out;
    for (const auto& r : sc.recordings) {
        if (r.label != label) continue;
        if (std::find(ids.begin(), ids.end(), r.subject_id) == ids.end()) continue;
        auto it = sc.segments.find(r.subject_id);
        if (it == sc.segments.end()) continue;
        for (const auto& seg : it->second) {
            auto pairs = dsp::preprocess_segment(seg, cfg.k, cfg.band);
            for (auto& wp : pairs) {
                out.push_back({std::move(wp), r.subject_id, label});
            }
        }
    }
    return out;
}

struct TrainedPair {
    trainer::Checkpoint mdd, hc;
};

TrainedPair train_both(const SegmentedCorpus& sc, const trainer::TrainConfig& cfg,
                       const CommonOpts& o, const fs::path& out_dir) {
    auto train_one = [&](ingest::Label label) {
        auto train = collect_samples(sc, sc.split.train, label, cfg);
        auto val = collect_samples(sc, sc.split.val, label, cfg);
        if (train.empty()) {
            throw DataError("no training data for class " + ingest::to_string(label));
        }
        const std::string log_name =
            label == ingest::Label::MDD ? "train_mdd.jsonl" : "train_hc.jsonl";
        std::ofstream log_file(out_dir / log_name);
        auto ckpt = trainer::train_generator(label, train, val, cfg, &log_file);
        return ckpt;
    };

    // Both classes must exist before any training starts.
    bool has_mdd = false, has_hc = false;
    for (const auto& r : sc.recordings) {
        (r.label == ingest::Label::MDD ? has_mdd : has_hc) = true;
    }
    if (!has_mdd || !has_hc) {
        throw DataError("corpus must contain both MDD and HC subjects to train");
    }

    TrainedPair pair;
    if (o.threads >= 2) {
        auto fut = std::async(std::launch::async, train_one, ingest::Label::MDD);
        pair.hc = train_one(ingest::Label::HC);
        pair.mdd = fut.get();
    } else {
        pair.mdd = train_one(ingest::Label::MDD);
        pair.hc = train_one(ingest::Label::HC);
    }
    return pair;
}

struct LoadedGenerators {
    trainer::Checkpoint mdd, hc;
};

LoadedGenerators load_generators(const fs::path& dir, bool override_hash) {
    LoadedGenerators g;
    g.mdd = trainer::load_checkpoint(dir / "gen_mdd.ckpt");
    g.hc = trainer::load_checkpoint(dir / "gen_hc.ckpt");
    if (g.mdd.class_label != ingest::Label::MDD || g.hc.class_label != ingest::Label::HC) {
        throw DataError("checkpoint class labels are swapped or wrong under " + dir.string());
    }
    json cfg_m = g.mdd.cfg, cfg_h = g.hc.cfg;
    if (cfg_m != cfg_h && !override_hash) {
        throw DataError("the two generator checkpoints were trained with different configs "
                        "(pass --override-config-hash to proceed)");
    }
    return g;
}

struct ScoredSplit {
    // Ordered by (subject manifest order, segment index).
    std::vector<std::pair<detector::SegmentVerdict, ingest::Label>> verdicts;
};

ScoredSplit score_subjects(const SegmentedCorpus& sc, const std::vector<std::string>& ids,
                           LoadedGenerators& gens, const dsp::BandSpec& band, int threads) {
    ScoredSplit out;
    for (const auto& r : sc.recordings) {
        if (std::find(ids.begin(), ids.end(), r.subject_id) == ids.end()) continue;
        auto it = sc.segments.find(r.subject_id);
        if (it == sc.segments.end()) continue;
        for (const auto& seg : it->second) {
            out.verdicts.emplace_back(
                detector::score_segment(seg, gens.mdd.params, gens.hc.params, band, threads),
                r.label);
        }
    }
    return out;
}

json metrics_to_json(const detector::Metrics& m) {
    return json{{"sensitivity", m.sensitivity},
                {"specificity", m.specificity},
                {"accuracy", m.accuracy}};
}

struct ClassifyResult {
    detector::Threshold threshold;
    detector::Metrics segment_metrics;
    detector::Metrics subject_metrics;
    std::vector<detector::SubjectTally> tallies;
    json report;
};

ClassifyResult classify_corpus(const SegmentedCorpus& sc, LoadedGenerators& gens,
                               const CommonOpts& o, std::optional<int> n0_override,
                               const fs::path& out_dir) {
    if (sc.split.test.empty()) throw DataError("test split is empty; nothing to classify");
    const dsp::BandSpec band{o.band_low, o.band_high};

    ScoredSplit val = score_subjects(sc, sc.split.val, gens, band, o.threads);
    detector::Threshold threshold;
    if (n0_override) {
        threshold.n0 = *n0_override;
        int correct = 0;
        for (const auto& [v, label] : val.verdicts) {
            if (detector::classify_segment(v, threshold) == label) ++correct;
        }
        threshold.val_accuracy =
            val.verdicts.empty() ? 0.0
                                 : static_cast<double>(correct) / val.verdicts.size();
        log_info("using n0 override = ", threshold.n0, " (val accuracy ",
                 threshold.val_accuracy, ")");
    } else {
        threshold = detector::select_threshold(val.verdicts);
        log_info("selected n0 = ", threshold.n0, " with val accuracy ", threshold.val_accuracy);
    }

    ScoredSplit test = score_subjects(sc, sc.split.test, gens, band, o.threads);

    std::vector<std::pair<ingest::Label, ingest::Label>> seg_pred;
    std::map<std::string, std::vector<detector::SegmentVerdict>> by_subject;
    std::map<std::string, ingest::Label> subject_truth;
    for (const auto& [v, label] : test.verdicts) {
        seg_pred.emplace_back(detector::classify_segment(v, threshold), label);
        by_subject[v.subject_id].push_back(v);
        subject_truth[v.subject_id] = label;
    }

    ClassifyResult res;
    res.threshold = threshold;
    res.segment_metrics = detector::evaluate(seg_pred);

    std::vector<std::pair<ingest::Label, ingest::Label>> subj_pred;
    // Manifest order for the report.
    for (const auto& id : sc.split.test) {
        auto it = by_subject.find(id);
        if (it == by_subject.end()) continue;
        auto tally = detector::classify_subject(it->second, threshold);
        tally.truth = subject_truth[id];
        subj_pred.emplace_back(tally.decision, tally.truth);
        res.tallies.push_back(tally);
    }
    res.subject_metrics = detector::evaluate(subj_pred);

    // verdicts.csv for the test split
    {
        std::ofstream csv(out_dir / "verdicts.csv");
        csv << "subject_id,segment_index,n,decision,true_label\n";
        for (const auto& [v, label] : test.verdicts) {
            csv << v.subject_id << ',' << v.segment_index << ',' << v.n << ','
                << ingest::to_string(detector::classify_segment(v, threshold)) << ','
                << ingest::to_string(label) << "\n";
        }
    }

    json subjects = json::array();
    for (const auto& t : res.tallies) {
        const int total = t.mdd_votes + t.hc_votes;
        const int majority = std::max(t.mdd_votes, t.hc_votes);
        subjects.push_back({{"subject_id", t.subject_id},
                            {"true_label", ingest::to_string(t.truth)},
                            {"decision", ingest::to_string(t.decision)},
                            {"segments", total},
                            {"mdd_votes", t.mdd_votes},
                            {"hc_votes", t.hc_votes},
                            {"vote_share", total ? static_cast<double>(majority) / total : 0.0}});
    }
    res.report = json{{"n0", threshold.n0},
                      {"val_accuracy", threshold.val_accuracy},
                      {"segment_metrics", metrics_to_json(res.segment_metrics)},
                      {"subject_metrics", metrics_to_json(res.subject_metrics)},
                      {"subjects", subjects}};
    std::ofstream mf(out_dir / "metrics.json");
    mf << res.report.dump(2) << "\n";
    return res;
}

void print_report(const ClassifyResult& res) {
    std::ostringstream os;
    os << "n0=" << res.threshold.n0 << " val_acc=" << res.threshold.val_accuracy << "\n";
    os << "segment: sens=" << res.segment_metrics.sensitivity
       << " spec=" << res.segment_metrics.specificity
       << " acc=" << res.segment_metrics.accuracy << "\n";
    os << "subject: sens=" << res.subject_metrics.sensitivity
       << " spec=" << res.subject_metrics.specificity
       << " acc=" << res.subject_metrics.accuracy << "\n";
    os << "subject  truth  decision  segments  mdd  hc\n";
    for (const auto& t : res.tallies) {
        os << t.subject_id << "  " << ingest::to_string(t.truth) << "  "
           << ingest::to_string(t.decision) << "  " << (t.mdd_votes + t.hc_votes) << "  "
           << t.mdd_votes << "  " << t.hc_votes << "\n";
    }
    std::cout << os.str();
}

// ---- subcommand bodies ----

int cmd_synth(const CommonOpts& o, int subjects, int channels, int fs, int seconds, double noise,
              int sources) {
    const auto rule_a = ingest::default_rule_a(channels, noise, sources);
    const auto rule_b = ingest::default_rule_b(channels, noise, sources);
    auto corpus = ingest::synth_corpus(o.seed, subjects, channels, fs, seconds, rule_a, rule_b);
    ingest::write_corpus(o.out, corpus);
    json flags = opts_to_json(o);
    flags["subjects"] = subjects;
    flags["channels"] = channels;
    flags["fs"] = fs;
    flags["seconds"] = seconds;
    flags["noise"] = noise;
    flags["sources"] = sources;
    write_run_record(o.out, "synth", flags);
    log_info("wrote ", corpus.size(), " synthetic recordings to ", o.out);
    return 0;
}

int cmd_train(const CommonOpts& o) {
    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    SegmentedCorpus sc = load_and_segment(o);
    trainer::TrainConfig cfg = make_train_config(o, sc.N);
    cfg.validate();
    TrainedPair pair = train_both(sc, cfg, o, out_dir);
    trainer::save_checkpoint(out_dir / "gen_mdd.ckpt", pair.mdd);
    trainer::save_checkpoint(out_dir / "gen_hc.ckpt", pair.hc);
    write_run_record(out_dir, "train", opts_to_json(o));
    log_info("checkpoints written to ", o.out);
    return 0;
}

int cmd_classify(const CommonOpts& o, const std::string& checkpoints,
                 std::optional<int> n0_override, bool override_hash) {
    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    SegmentedCorpus sc = load_and_segment(o);
    LoadedGenerators gens =
        load_generators(checkpoints.empty() ? out_dir : fs::path(checkpoints), override_hash);
    ClassifyResult res = classify_corpus(sc, gens, o, n0_override, out_dir);
    json flags = opts_to_json(o);
    flags["checkpoints"] = checkpoints;
    flags["n0_override"] = n0_override ? json(*n0_override) : json(nullptr);
    write_run_record(out_dir, "classify", flags);
    print_report(res);
    return 0;
}

int cmd_explain(const CommonOpts& o, const std::string& checkpoints, const std::string& subject,
                int segment_index, const std::string& which_str, int resolution,
                bool override_hash) {
    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    auto recordings = ingest::load_corpus(o.corpus);
    const ingest::Recording* rec = nullptr;
    for (const auto& r : recordings) {
        if (r.subject_id == subject) rec = &r;
    }
    if (!rec) throw DataError("unknown subject '" + subject + "'");
    std::optional<int> cap;
    if (o.max_segments >= 0) cap = o.max_segments;
    auto segs = ingest::segment_recording(*rec, o.window_seconds, o.start_seconds, cap);
    if (segment_index < 0 || segment_index >= static_cast<int>(segs.size())) {
        throw DataError("unknown segment " + std::to_string(segment_index) + " for subject '" +
                        subject + "' (have " + std::to_string(segs.size()) + ")");
    }

    LoadedGenerators gens =
        load_generators(checkpoints.empty() ? out_dir : fs::path(checkpoints), override_hash);
    const dsp::BandSpec band{o.band_low, o.band_high};
    auto verdict =
        detector::score_segment(segs[segment_index], gens.mdd.params, gens.hc.params, band,
                                o.threads);
    auto heat = explain::heatmap_from_verdict(verdict, explain::which_from_string(which_str));
    if (rec->positions) {
        heat.positions = rec->positions;
    } else {
        log_warn("no electrode positions in manifest; writing a C x 1 score strip");
    }
    auto map = explain::render_topomap(heat, resolution);

    const std::string stem = "heatmap_" + subject + "_" + std::to_string(segment_index);
    explain::write_ppm(out_dir / (stem + ".ppm"), map);
    explain::write_grid_csv(out_dir / (stem + ".csv"), map);
    explain::write_sidecar_json(out_dir / (stem + ".json"), heat, map);

    json flags = opts_to_json(o);
    flags["subject"] = subject;
    flags["segment"] = segment_index;
    flags["which"] = which_str;
    flags["resolution"] = resolution;
    write_run_record(out_dir, "explain", flags);
    log_info("wrote ", stem, ".{ppm,csv,json} to ", o.out);
    return 0;
}

int cmd_ablate(const CommonOpts& o, std::vector<int> k_list, bool override_hash) {
    if (k_list.empty()) throw UsageError("ablate: --k-list must name at least one k");
    std::vector<int> ks;
    for (int k : k_list) {
        if (std::find(ks.begin(), ks.end(), k) != ks.end()) {
            log_warn("duplicate k=", k, " in --k-list ignored");
            continue;
        }
        ks.push_back(k);
    }

    const fs::path out_dir(o.out);
    fs::create_directories(out_dir);
    SegmentedCorpus sc = load_and_segment(o);

    json rows = json::array();
    std::ofstream csv(out_dir / "ablation.csv");
    csv << "k,n0,segment_sensitivity,segment_specificity,segment_accuracy,subject_accuracy\n";
    for (int k : ks) {
        CommonOpts ok = o;
        ok.k = k;
        ok.out = (out_dir / ("k" + std::to_string(k))).string();
        const fs::path sub_dir(ok.out);
        fs::create_directories(sub_dir);
        trainer::TrainConfig cfg = make_train_config(ok, sc.N);
        cfg.validate();
        TrainedPair pair = train_both(sc, cfg, ok, sub_dir);
        trainer::save_checkpoint(sub_dir / "gen_mdd.ckpt", pair.mdd);
        trainer::save_checkpoint(sub_dir / "gen_hc.ckpt", pair.hc);
        LoadedGenerators gens = load_generators(sub_dir, override_hash);
        ClassifyResult res = classify_corpus(sc, gens, ok, std::nullopt, sub_dir);
        csv << k << ',' << res.threshold.n0 << ',' << res.segment_metrics.sensitivity << ','
            << res.segment_metrics.specificity << ',' << res.segment_metrics.accuracy << ','
            << res.subject_metrics.accuracy << "\n";
        rows.push_back({{"k", k},
                        {"n0", res.threshold.n0},
                        {"segment_metrics", metrics_to_json(res.segment_metrics)},
                        {"subject_metrics", metrics_to_json(res.subject_metrics)}});
        std::cout << "k=" << k << " n0=" << res.threshold.n0
                  << " seg_acc=" << res.segment_metrics.accuracy
                  << " subj_acc=" << res.subject_metrics.accuracy << "\n";
    }
    json flags = opts_to_json(o);
    flags["k_list"] = ks;
    write_run_record(out_dir, "ablate", flags);
    std::ofstream jf(out_dir / "ablation.json");
    jf << rows.dump(2) << "\n";
    return 0;
}

int cmd_preprocess(const CommonOpts& o, const std::string& subject, int segment_index) {
    auto recordings = ingest::load_corpus(o.corpus);
    const ingest::Recording* rec = nullptr;
    for (const auto& r : recordings) {
        if (r.subject_id == subject) rec = &r;
    }
    if (!rec) throw DataError("unknown subject '" + subject + "'");
    std::optional<int> cap;
    if (o.max_segments >= 0) cap = o.max_segments;
    auto segs = ingest::segment_recording(*rec, o.window_seconds, o.start_seconds, cap);
    if (segment_index < 0 || segment_index >= static_cast<int>(segs.size())) {
        throw DataError("unknown segment " + std::to_string(segment_index));
    }
    const dsp::BandSpec band{o.band_low, o.band_high};
    auto pairs = dsp::preprocess_segment(segs[segment_index], o.k, band);
    dsp::dump_wavelet_pairs(o.out, pairs);
    json flags = opts_to_json(o);
    flags["subject"] = subject;
    flags["segment"] = segment_index;
    write_run_record(o.out, "preprocess", flags);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Generative detection network for two-class EEG screening"};
    app.require_subcommand(1);

    CommonOpts o;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-class corpus");
    int subjects = 10, channels = 16, fs = 250, seconds = 80, sources = 6;
    double noise = 0.1;
    synth->add_option("--out", o.out, "Output corpus directory")->required();
    synth->add_option("--seed", o.seed, "Master seed (default 0)");
    synth->add_option("--subjects", subjects, "Subjects per class");
    synth->add_option("--channels", channels, "Electrodes per subject");
    synth->add_option("--fs", fs, "Sampling rate, Hz");
    synth->add_option("--seconds", seconds, "Recording length, seconds");
    synth->add_option("--noise", noise, "Additive noise amplitude");
    synth->add_option("--sources", sources, "Latent source channels");

    // train
    auto* train = app.add_subcommand("train", "Train the two class generators");
    add_common_train_flags(train, o);

    // classify
    auto* classify = app.add_subcommand("classify", "Select n0 on val and score the test split");
    add_common_train_flags(classify, o);
    std::string checkpoints;
    int n0_override_value = -1;
    bool override_hash = false;
    classify->add_option("--checkpoints", checkpoints,
                         "Directory with gen_mdd.ckpt/gen_hc.ckpt (default: --out)");
    auto* n0_opt = classify->add_option("--n0-override", n0_override_value,
                                        "Skip threshold selection and use this n0");
    classify->add_flag("--override-config-hash", override_hash,
                       "Proceed even if checkpoint configs disagree");

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "Render per-electrode fit heatmaps");
    add_common_train_flags(explain_cmd, o);
    std::string subject, which = "winner";
    int segment_index = 0, resolution = 64;
    explain_cmd->add_option("--checkpoints", checkpoints,
                            "Directory with checkpoints (default: --out)");
    explain_cmd->add_option("--subject", subject, "Subject id")->required();
    explain_cmd->add_option("--segment", segment_index, "Segment index");
    explain_cmd->add_option("--which", which, "Score source: mdd|hc|winner");
    explain_cmd->add_option("--resolution", resolution, "Topomap grid resolution");
    explain_cmd->add_flag("--override-config-hash", override_hash,
                          "Proceed even if checkpoint configs disagree");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Sweep k and report metrics per value");
    add_common_train_flags(ablate, o);
    std::vector<int> k_list;
    ablate->add_option("--k-list", k_list, "k values to sweep")->delimiter(',')->required();

    // preprocess (debug dump)
    auto* preprocess = app.add_subcommand("preprocess", "Dump wavelet pairs for one segment");
    add_common_train_flags(preprocess, o);
    preprocess->add_option("--subject", subject, "Subject id")->required();
    preprocess->add_option("--segment", segment_index, "Segment index");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "gdn: E2 usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*synth) return cmd_synth(o, subjects, channels, fs, seconds, noise, sources);
        if (*train) return cmd_train(o);
        if (*classify) {
            std::optional<int> n0;
            if (n0_opt->count() > 0) n0 = n0_override_value;
            return cmd_classify(o, checkpoints, n0, override_hash);
        }
        if (*explain_cmd) {
            return cmd_explain(o, checkpoints, subject, segment_index, which, resolution,
                               override_hash);
        }
        if (*ablate) return cmd_ablate(o, k_list, override_hash);
        if (*preprocess) return cmd_preprocess(o, subject, segment_index);
        std::cerr << "gdn: E2 usage: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "gdn: E" << e.exit_code() << " "
                  << (e.code() == ErrorCode::Usage
                          ? "usage"
                          : e.code() == ErrorCode::Data ? "data" : "numeric")
                  << ": " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "gdn: E1 internal: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace gdn::cli
