// End-to-end acceptance suite: one pass/fail line per criterion, exit code =
// number of failures. Heavier than the unit tests; the synthetic end-to-end
// training run dominates the wall time.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "gdn/cli.hpp"
#include "gdn/detector.hpp"
#include "gdn/dsp.hpp"
#include "gdn/explain.hpp"
#include "gdn/ingest.hpp"
#include "gdn/model.hpp"
#include "gdn/rng.hpp"
#include "gdn/trainer.hpp"

#include <nlohmann/json.hpp>

using namespace gdn;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
};

fs::path work_root() {
    static const fs::path p = [] {
        fs::path root = fs::temp_directory_path() / "gdn_acceptance";
        fs::remove_all(root);
        fs::create_directories(root);
        return root;
    }();
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void expect(Outcome& o, bool cond, const std::string& what) {
    if (!cond) {
        o.pass = false;
        o.detail << (o.detail.str().empty() ? "" : "; ") << what;
    }
}

// ---- criterion 1: dwt/idwt exactness --------------------------------------

Outcome criterion_dwt() {
    Outcome o;
    Rng rng(20240601);
    double worst = 0.0;
    for (int n : {100, 2500, 2560}) {
        if (dsp::dwt_coeff_len(n) != (n + 11) / 2) {
            expect(o, false, "coefficient length formula broken for n=" + std::to_string(n));
        }
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<double> x(n);
            for (double& v : x) v = 2.0 * rng.next_double() - 1.0;
            const auto c = dsp::dwt_db6(x);
            const auto y = dsp::idwt_db6(c.cA, c.cD, n);
            for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
        }
    }
    expect(o, dsp::dwt_coeff_len(2500) == 1255, "L(2500) != 1255");
    expect(o, worst < 1e-8, "round-trip max abs err " + std::to_string(worst));
    o.detail << "max abs err " << worst << ", L(2500)=" << dsp::dwt_coeff_len(2500);
    return o;
}

// ---- criterion 2: filter correctness ---------------------------------------

Outcome criterion_filter() {
    Outcome o;
    const int n = 2500;
    const double fs_hz = 250.0;
    const int lo = static_cast<int>(std::ceil(0.05 * n));
    const int hi = static_cast<int>(std::floor(0.95 * n));
    auto tone = [&](double f, double phase) {
        std::vector<double> x(n);
        for (int t = 0; t < n; ++t) x[t] = std::sin(2.0 * M_PI * f * t / fs_hz + phase);
        return x;
    };
    auto interior_energy = [&](const std::vector<double>& v) {
        double e = 0.0;
        for (int i = lo; i < hi; ++i) e += v[i] * v[i];
        return e;
    };

    const auto x20 = tone(20.0, 0.3);
    const auto y20 = dsp::bandpass_dft(x20, fs_hz, {4.0, 14.0});
    const double ratio = interior_energy(y20) / interior_energy(x20);
    expect(o, ratio < 1e-6, "20 Hz attenuation ratio " + std::to_string(ratio));

    const auto x10 = tone(10.0, 1.1);
    const auto y10 = dsp::bandpass_dft(x10, fs_hz, {4.0, 14.0});
    double num = 0.0, den = 0.0;
    for (int i = lo; i < hi; ++i) {
        num += (y10[i] - x10[i]) * (y10[i] - x10[i]);
        den += x10[i] * x10[i];
    }
    const double rel = std::sqrt(num / den);
    expect(o, rel < 1e-6, "10 Hz pass rel err " + std::to_string(rel));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "20 Hz energy ratio %.2e, 10 Hz rel err %.2e", ratio, rel);
    o.detail << buf;
    return o;
}

// ---- criterion 3: gradient fidelity on the tiny generator ------------------

Outcome criterion_gradients() {
    Outcome o;
    model::GeneratorConfig cfg;
    cfg.k = 2;
    cfg.L = 30;
    cfg.hidden = 8;
    cfg.enc_stride = 1;  // keeps every node's length >= 2 (batchnorm minimum)

    double worst = 0.0;
    std::string worst_name;
    int checked = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(900 + seed);
        dsp::WaveletPair wp;
        wp.k = cfg.k;
        wp.L = cfg.L;
        wp.n_samples = 2 * dsp::dwt_coeff_len(30) - 10;
        wp.S_cA.resize(static_cast<size_t>(cfg.k) * cfg.L);
        wp.S_cD.resize(wp.S_cA.size());
        wp.O_cA.resize(cfg.L);
        wp.O_cD.resize(cfg.L);
        for (auto* v : {&wp.S_cA, &wp.S_cD, &wp.O_cA, &wp.O_cD}) {
            for (double& x : *v) x = 2.0 * rng.next_double() - 1.0;
        }
        auto params = model::GeneratorParams::init(cfg, seed);

        auto forward = [&]() {
            model::Tape tape;
            auto out = model::generator_forward(tape, wp, params, model::Mode::Train);
            return model::loss(tape, out, wp)->data[0];
        };
        params.zero_grad();
        {
            model::Tape tape;
            auto out = model::generator_forward(tape, wp, params, model::Mode::Train);
            tape.backward(model::loss(tape, out, wp));
        }
        // three entries per parameter tensor: first, middle, last
        params.for_each_param([&](const std::string& name, const model::TensorPtr& t) {
            const size_t n = t->data.size();
            for (size_t idx : {size_t{0}, n / 2, n - 1}) {
                const double keep = t->data[idx];
                const double step = 1e-5;
                t->data[idx] = keep + step;
                const double up = forward();
                t->data[idx] = keep - step;
                const double down = forward();
                t->data[idx] = keep;
                const double fd = (up - down) / (2.0 * step);
                const double rel =
                    std::abs(t->grad[idx] - fd) / std::max(std::abs(fd), 1e-8);
                ++checked;
                if (rel > worst) {
                    worst = rel;
                    worst_name = name;
                }
            }
        });
    }
    expect(o, worst < 1e-3,
           "worst rel grad err " + std::to_string(worst) + " at " + worst_name);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d entries over 10 seeds, worst rel err %.2e", checked,
                  worst);
    o.detail << buf;
    return o;
}

// ---- criterion 4: threshold oracle equivalence ------------------------------

Outcome criterion_threshold() {
    Outcome o;
    Rng rng(424242);
    int mismatches = 0;
    int done = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int C = trial % 2 == 0 ? 19 : 128;
        const int count = 4 + static_cast<int>(rng.below(60));
        std::vector<std::pair<detector::SegmentVerdict, ingest::Label>> verdicts;
        bool has[2] = {false, false};
        for (int i = 0; i < count; ++i) {
            detector::SegmentVerdict v;
            v.electrode_count = C;
            v.n = static_cast<int>(rng.below(C + 1));
            const ingest::Label label = rng.below(2) ? ingest::Label::MDD : ingest::Label::HC;
            has[label == ingest::Label::MDD ? 0 : 1] = true;
            verdicts.emplace_back(std::move(v), label);
        }
        if (!has[0] || !has[1]) continue;
        ++done;
        const auto got = detector::select_threshold(verdicts);
        // independent exhaustive oracle
        int best_correct = -1, best_n0 = 0;
        for (int n0 = 0; n0 <= C; ++n0) {
            int correct = 0;
            for (const auto& [v, label] : verdicts) {
                const auto pred = v.n >= n0 ? ingest::Label::MDD : ingest::Label::HC;
                if (pred == label) ++correct;
            }
            if (correct > best_correct) {
                best_correct = correct;
                best_n0 = n0;
            }
        }
        if (got.n0 != best_n0 ||
            std::abs(got.val_accuracy -
                     static_cast<double>(best_correct) / static_cast<double>(verdicts.size())) >
                1e-12) {
            ++mismatches;
        }
    }
    expect(o, mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
    o.detail << done << " random verdict sets, C in {19,128}, mismatches: " << mismatches;
    return o;
}

// ---- criterion 5: end-to-end synthetic discrimination -----------------------

Outcome criterion_end_to_end(json& metrics_out) {
    Outcome o;
    const fs::path root = work_root() / "e2e";
    const auto corpus = (root / "corpus").string();
    const auto run = (root / "run").string();
    const auto cls = (root / "classify").string();

    int rc = cli::run({"synth", "--out", corpus, "--seed", "42", "--subjects", "10", "--channels",
                       "16", "--fs", "250", "--seconds", "80", "--noise", "0.1", "--sources",
                       "6"});
    expect(o, rc == 0, "synth exited " + std::to_string(rc));
    if (rc != 0) return o;

    const std::vector<std::string> shared{
        "--corpus", corpus, "--seed", "42", "--k", "5", "--epochs", "40", "--lr", "3e-3",
        "--batch", "8", "--threads", "2", "--train-per-class", "6", "--val-per-class", "2",
        "--patience", "12"};
    std::vector<std::string> train_args{"train", "--out", run};
    train_args.insert(train_args.end(), shared.begin(), shared.end());
    rc = cli::run(train_args);
    expect(o, rc == 0, "train exited " + std::to_string(rc));
    if (rc != 0) return o;

    std::vector<std::string> cls_args{"classify", "--out", cls, "--checkpoints", run};
    cls_args.insert(cls_args.end(), shared.begin(), shared.end());
    rc = cli::run(cls_args);
    expect(o, rc == 0, "classify exited " + std::to_string(rc));
    if (rc != 0) return o;

    const auto metrics = json::parse(slurp(fs::path(cls) / "metrics.json"));
    metrics_out = metrics;
    const double seg_acc = metrics["segment_metrics"]["accuracy"].get<double>();
    const double subj_acc = metrics["subject_metrics"]["accuracy"].get<double>();
    expect(o, seg_acc >= 0.90, "segment accuracy " + std::to_string(seg_acc));
    expect(o, subj_acc == 1.0, "subject accuracy " + std::to_string(subj_acc));
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "segment acc %.3f (need >= 0.90), subject acc %.3f (need 1.0), n0 %d", seg_acc,
                  subj_acc, metrics["n0"].get<int>());
    o.detail << buf;
    return o;
}

// ---- criterion 6: CLI determinism -------------------------------------------

Outcome criterion_determinism() {
    Outcome o;
    const fs::path root = work_root() / "determinism";
    const auto corpus = (root / "corpus").string();
    int rc = cli::run({"synth", "--out", corpus, "--seed", "11", "--subjects", "4", "--channels",
                       "8", "--sources", "4", "--fs", "50", "--seconds", "40", "--noise", "0.1"});
    expect(o, rc == 0, "synth exited " + std::to_string(rc));

    auto train_into = [&](const std::string& out) {
        return cli::run({"train", "--corpus", corpus, "--out", out, "--seed", "9", "--k", "2",
                         "--epochs", "3", "--batch", "16", "--train-per-class", "2",
                         "--val-per-class", "1"});
    };
    const auto run_a = (root / "run_a").string();
    const auto run_b = (root / "run_b").string();
    expect(o, train_into(run_a) == 0, "first train failed");
    expect(o, train_into(run_b) == 0, "second train failed");
    const bool mdd_same =
        slurp(fs::path(run_a) / "gen_mdd.ckpt") == slurp(fs::path(run_b) / "gen_mdd.ckpt");
    const bool hc_same =
        slurp(fs::path(run_a) / "gen_hc.ckpt") == slurp(fs::path(run_b) / "gen_hc.ckpt");
    expect(o, mdd_same, "gen_mdd.ckpt differs between identical runs");
    expect(o, hc_same, "gen_hc.ckpt differs between identical runs");

    auto classify_into = [&](const std::string& out) {
        return cli::run({"classify", "--corpus", corpus, "--out", out, "--checkpoints", run_a,
                         "--seed", "9", "--k", "2", "--train-per-class", "2", "--val-per-class",
                         "1"});
    };
    const auto cls_a = (root / "cls_a").string();
    const auto cls_b = (root / "cls_b").string();
    expect(o, classify_into(cls_a) == 0, "first classify failed");
    expect(o, classify_into(cls_b) == 0, "second classify failed");
    const bool metrics_same =
        slurp(fs::path(cls_a) / "metrics.json") == slurp(fs::path(cls_b) / "metrics.json");
    const bool verdicts_same =
        slurp(fs::path(cls_a) / "verdicts.csv") == slurp(fs::path(cls_b) / "verdicts.csv");
    expect(o, metrics_same, "metrics.json differs");
    expect(o, verdicts_same, "verdicts.csv differs");
    o.detail << "checkpoints byte-identical: " << (mdd_same && hc_same ? "yes" : "no")
             << ", classify outputs identical: " << (metrics_same && verdicts_same ? "yes" : "no");
    return o;
}

// ---- criterion 7: split fidelity --------------------------------------------

Outcome criterion_split() {
    Outcome o;
    auto stub = [](const std::string& id, ingest::Label label) {
        ingest::Recording r;
        r.subject_id = id;
        r.label = label;
        r.fs = 250;
        r.C = 2;
        r.T = 250;
        r.channels = {"a", "b"};
        r.data.assign(500, 1.0);
        return r;
    };
    std::vector<ingest::Recording> modma;
    for (int i = 0; i < 24; ++i) modma.push_back(stub("m" + std::to_string(i), ingest::Label::MDD));
    for (int i = 0; i < 29; ++i) modma.push_back(stub("h" + std::to_string(i), ingest::Label::HC));
    const auto plan_a = ingest::make_split(modma, 15, 5);
    expect(o, plan_a.test.size() == 13,
           "24/29 split test size " + std::to_string(plan_a.test.size()));

    std::vector<ingest::Recording> husm;
    for (int i = 0; i < 29; ++i) husm.push_back(stub("m" + std::to_string(i), ingest::Label::MDD));
    for (int i = 0; i < 25; ++i) husm.push_back(stub("h" + std::to_string(i), ingest::Label::HC));
    const auto plan_b = ingest::make_split(husm, 15, 5);
    expect(o, plan_b.test.size() == 14,
           "29/25 split test size " + std::to_string(plan_b.test.size()));
    o.detail << "24/29 -> " << plan_a.test.size() << " test subjects, 29/25 -> "
             << plan_b.test.size();
    return o;
}

// ---- criterion 8: explainability determinism and bounds ----------------------

Outcome criterion_explain() {
    Outcome o;
    Rng rng(777);
    detector::SegmentVerdict v;
    v.subject_id = "subj";
    v.segment_index = 2;
    v.electrode_count = 12;
    for (int e = 0; e < 12; ++e) {
        v.scores.push_back({e, rng.uniform(1e-4, 2.0), rng.uniform(1e-4, 2.0)});
    }
    auto heat = explain::heatmap_from_verdict(v, explain::Which::Winner);
    heat.positions = std::vector<std::array<double, 2>>{};
    for (int e = 0; e < 12; ++e) {
        const double th = 2.0 * M_PI * e / 12.0;
        heat.positions->push_back({0.85 * std::cos(th), 0.85 * std::sin(th)});
    }

    const auto m1 = explain::render_topomap(heat, 96);
    const auto m2 = explain::render_topomap(heat, 96);
    const fs::path root = work_root() / "explain";
    fs::create_directories(root);
    explain::write_ppm(root / "a.ppm", m1);
    explain::write_ppm(root / "b.ppm", m2);
    const bool identical = slurp(root / "a.ppm") == slurp(root / "b.ppm");
    expect(o, identical, "re-rendered pixmaps differ");

    bool in_bounds = true;
    for (double g : m1.grid) {
        if (std::isnan(g)) continue;
        if (g < heat.min_score - 1e-12 || g > heat.max_score + 1e-12) in_bounds = false;
    }
    expect(o, in_bounds, "interpolated value escapes [min, max]");
    o.detail << "pixmaps byte-identical: " << (identical ? "yes" : "no")
             << ", IDW values within score bounds: " << (in_bounds ? "yes" : "no");
    return o;
}

struct Criterion {
    std::string name;
    std::function<Outcome()> fn;
    double budget_seconds;  // <= 0: informational only
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    json e2e_metrics;
    const std::vector<Criterion> criteria{
        {"dwt/idwt exactness (1000 signals x {100,2500,2560})", criterion_dwt, 10.0},
        {"band-pass filter correctness (20 Hz stop, 10 Hz pass)", criterion_filter, 1.0},
        {"gradient fidelity vs finite differences (tiny net, 10 seeds)", criterion_gradients,
         60.0},
        {"threshold selection equals exhaustive oracle (500 sets)", criterion_threshold, 5.0},
        {"end-to-end synthetic discrimination (train + classify)",
         [&] { return criterion_end_to_end(e2e_metrics); }, -900.0},
        {"determinism of cmd_train / cmd_classify", criterion_determinism, -1.0},
        {"split fidelity (24/29 -> 13, 29/25 -> 14)", criterion_split, 1.0},
        {"explainability determinism and interpolation bounds", criterion_explain, 5.0},
    };

    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        if (only && static_cast<int>(i + 1) != only) continue;
        const auto t0 = clk::now();
        Outcome o;
        try {
            o = criteria[i].fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(clk::now() - t0).count();
        const double budget = criteria[i].budget_seconds;
        if (budget > 0.0 && secs > budget) {
            o.pass = false;
            o.detail << "; runtime " << secs << " s exceeds " << budget << " s";
        }
        if (!o.pass) ++failures;
        std::printf("%s  criterion %zu: %s — %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].name.c_str(), o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
    } else {
        std::printf("%d criterion(s) failed\n", failures);
    }
    return failures;
}
