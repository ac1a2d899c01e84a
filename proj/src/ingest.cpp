#include "gdn/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gdn/error.hpp"
#include "gdn/rng.hpp"

#include <nlohmann/json.hpp>

namespace gdn::ingest {

using nlohmann::json;

std::string to_string(Label label) { return label == Label::MDD ? "MDD" : "HC"; }

Label label_from_string(const std::string& s) {
    if (s == "MDD") return Label::MDD;
    if (s == "HC") return Label::HC;
    throw DataError("unknown label '" + s + "' (expected MDD or HC)");
}

namespace {

bool contains(const std::vector<std::string>& ids, const std::string& id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::vector<float> read_f32le(const std::filesystem::path& path, size_t expected) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot open payload file: " + path.string());
    const auto bytes = static_cast<size_t>(f.tellg());
    if (bytes != expected * sizeof(float)) {
        throw DataError("dimension mismatch in " + path.filename().string() + ": expected " +
                        std::to_string(expected) + " f32 values, file holds " +
                        std::to_string(bytes / sizeof(float)));
    }
    f.seekg(0);
    std::vector<float> v(expected);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw DataError("short read from " + path.string());
    return v;
}

std::vector<float> read_csv(const std::filesystem::path& path, size_t rows, size_t cols) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open payload file: " + path.string());
    std::vector<float> v;
    v.reserve(rows * cols);
    std::string line;
    size_t row = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        size_t count_in_row = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            float value;
            auto [next, ec] = std::from_chars(p, end, value);
            if (ec != std::errc()) {
                throw DataError("bad CSV value in " + path.filename().string() + " row " +
                                std::to_string(row));
            }
            v.push_back(value);
            ++count_in_row;
            p = next;
            if (p < end && *p == ',') ++p;
        }
        if (count_in_row != cols) {
            throw DataError("dimension mismatch in " + path.filename().string() + ": row " +
                            std::to_string(row) + " has " + std::to_string(count_in_row) +
                            " values, expected " + std::to_string(cols));
        }
        ++row;
    }
    if (row != rows) {
        throw DataError("dimension mismatch in " + path.filename().string() + ": " +
                        std::to_string(row) + " rows, expected " + std::to_string(rows));
    }
    return v;
}

void validate_recording(const Recording& r, const std::string& file) {
    if (r.C < 2) throw DataError(file + ": recording needs at least 2 channels");
    if (r.T < r.fs) throw DataError(file + ": recording shorter than 1 s");
    if (r.fs <= 0) throw DataError(file + ": sampling rate must be positive");
    if (r.positions && static_cast<int>(r.positions->size()) != r.C) {
        throw DataError(file + ": positions entry count does not match channel count");
    }
    for (double v : r.data) {
        if (!std::isfinite(v)) throw DataError(file + ": payload contains NaN or Inf");
    }
}

}  // namespace

bool SplitPlan::in_train(const std::string& id) const { return contains(train, id); }
bool SplitPlan::in_val(const std::string& id) const { return contains(val, id); }
bool SplitPlan::in_test(const std::string& id) const { return contains(test, id); }

std::vector<Recording> load_corpus(const std::filesystem::path& root) {
    const auto manifest_path = root / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw DataError("missing manifest: " + manifest_path.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw DataError("unparseable manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.contains("subjects") || !manifest["subjects"].is_array()) {
        throw DataError("manifest has no subjects array: " + manifest_path.string());
    }

    std::vector<Recording> out;
    for (const auto& s : manifest["subjects"]) {
        Recording r;
        try {
            r.subject_id = s.at("id").get<std::string>();
            r.label = label_from_string(s.at("label").get<std::string>());
            r.fs = s.at("fs").get<int>();
            r.channels = s.at("channels").get<std::vector<std::string>>();
            if (s.contains("positions") && !s["positions"].is_null()) {
                std::vector<std::array<double, 2>> pos;
                for (const auto& p : s["positions"]) {
                    pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                }
                r.positions = std::move(pos);
            }
        } catch (const json::exception& e) {
            throw DataError("bad manifest entry: " + std::string(e.what()));
        }
        const std::string file = s.at("file").get<std::string>();
        const std::string format = s.value("format", "f32le");
        r.C = s.at("rows").get<int>();
        r.T = s.at("cols").get<int>();
        if (r.C != static_cast<int>(r.channels.size())) {
            throw DataError(file + ": manifest rows=" + std::to_string(r.C) + " but " +
                            std::to_string(r.channels.size()) + " channel names");
        }
        const size_t expected = static_cast<size_t>(r.C) * static_cast<size_t>(r.T);
        std::vector<float> raw;
        if (format == "f32le") {
            raw = read_f32le(root / file, expected);
        } else if (format == "csv") {
            raw = read_csv(root / file, static_cast<size_t>(r.C), static_cast<size_t>(r.T));
        } else {
            throw DataError(file + ": unknown payload format '" + format + "'");
        }
        r.data.assign(raw.begin(), raw.end());
        validate_recording(r, file);
        out.push_back(std::move(r));
    }
    return out;
}

void write_corpus(const std::filesystem::path& root, const std::vector<Recording>& recordings,
                  const std::string& format) {
    if (format != "f32le" && format != "csv") {
        throw UsageError("write_corpus: format must be f32le or csv");
    }
    std::filesystem::create_directories(root);
    json manifest;
    manifest["subjects"] = json::array();
    for (const auto& r : recordings) {
        const std::string ext = format == "f32le" ? ".f32" : ".csv";
        const std::string file = r.subject_id + ext;
        json entry = {{"id", r.subject_id},     {"label", to_string(r.label)},
                      {"fs", r.fs},             {"channels", r.channels},
                      {"file", file},           {"format", format},
                      {"rows", r.C},            {"cols", r.T}};
        if (r.positions) {
            json pos = json::array();
            for (const auto& p : *r.positions) pos.push_back({p[0], p[1]});
            entry["positions"] = pos;
        }
        manifest["subjects"].push_back(entry);

        const auto path = root / file;
        if (format == "f32le") {
            std::vector<float> raw(r.data.begin(), r.data.end());
            std::ofstream f(path, std::ios::binary);
            if (!f) throw DataError("cannot write payload: " + path.string());
            f.write(reinterpret_cast<const char*>(raw.data()),
                    static_cast<std::streamsize>(raw.size() * sizeof(float)));
        } else {
            std::ofstream f(path);
            if (!f) throw DataError("cannot write payload: " + path.string());
            char buf[64];
            for (int c = 0; c < r.C; ++c) {
                for (int t = 0; t < r.T; ++t) {
                    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<float>(r.at(c, t)));
                    if (t) f << ',';
                    f << buf;
                }
                f << '\n';
            }
        }
    }
    std::ofstream mf(root / "manifest.json");
    if (!mf) throw DataError("cannot write manifest under " + root.string());
    mf << manifest.dump(2) << "\n";
}

std::vector<Segment> segment_recording(const Recording& r, double window_seconds,
                                       double start_seconds, std::optional<int> max_segments) {
    if (window_seconds <= 0.0) throw UsageError("segment_recording: window must be positive");
    if (start_seconds < 0.0) throw UsageError("segment_recording: start must be >= 0");
    const long long window = std::llround(window_seconds * r.fs);
    const long long start = std::llround(start_seconds * r.fs);
    if (window < 1) throw UsageError("segment_recording: window shorter than one sample");
    if (start + window > r.T) {
        throw DataError("segment_recording: no full window fits (T=" + std::to_string(r.T) +
                        ", start+window=" + std::to_string(start + window) + " samples)");
    }
    long long count = (r.T - start) / window;
    if (max_segments && *max_segments >= 0 && count > *max_segments) count = *max_segments;

    std::vector<Segment> out;
    out.reserve(static_cast<size_t>(count));
    for (long long i = 0; i < count; ++i) {
        Segment s;
        s.subject_id = r.subject_id;
        s.label = r.label;
        s.segment_index = static_cast<int>(i);
        s.fs = r.fs;
        s.C = r.C;
        s.N = static_cast<int>(window);
        s.data.resize(static_cast<size_t>(s.C) * s.N);
        const long long offset = start + i * window;
        for (int c = 0; c < r.C; ++c) {
            std::memcpy(s.data.data() + static_cast<size_t>(c) * s.N, r.row(c) + offset,
                        sizeof(double) * static_cast<size_t>(window));
        }
        out.push_back(std::move(s));
    }
    return out;
}

SplitPlan make_split(const std::vector<Recording>& recordings, int train_per_class,
                     int val_per_class, bool allow_empty_test) {
    if (train_per_class < 1 || val_per_class < 1) {
        throw UsageError("make_split: per-class train and val counts must be >= 1");
    }
    std::map<Label, std::vector<const Recording*>> by_class;
    for (const auto& r : recordings) by_class[r.label].push_back(&r);

    SplitPlan plan;
    for (auto& [label, recs] : by_class) {
        const int n = static_cast<int>(recs.size());
        const int needed = train_per_class + val_per_class;
        if (n < needed || (n == needed && !allow_empty_test)) {
            throw DataError("make_split: class " + to_string(label) + " has " + std::to_string(n) +
                            " subjects, needs more than " + std::to_string(needed));
        }
        for (int i = 0; i < n; ++i) {
            const std::string& id = recs[i]->subject_id;
            if (i < train_per_class) {
                plan.train.push_back(id);
            } else if (i < needed) {
                plan.val.push_back(id);
            } else {
                plan.test.push_back(id);
            }
        }
    }
    return plan;
}

namespace {

void validate_rule(const MixRule& rule, int C, const char* name) {
    if (static_cast<int>(rule.mixing.size()) != C) {
        throw DataError(std::string("synth_corpus: ") + name + " must list all " +
                        std::to_string(C) + " electrodes");
    }
    for (int e = 0; e < C; ++e) {
        for (const auto& term : rule.mixing[e]) {
            if (term.src < 0 || term.src >= e) {
                throw DataError(std::string("synth_corpus: ") + name + " electrode " +
                                std::to_string(e) +
                                " must mix only lower-indexed electrodes (src=" +
                                std::to_string(term.src) + ")");
            }
        }
    }
    if (rule.noise_amp < 0.0) {
        throw DataError(std::string("synth_corpus: ") + name + " noise amplitude must be >= 0");
    }
}

std::vector<std::pair<int, int>> source_pairs(int n_sources, int count) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n_sources && static_cast<int>(pairs.size()) < count; ++a) {
        for (int b = a + 1; b < n_sources && static_cast<int>(pairs.size()) < count; ++b) {
            pairs.emplace_back(a, b);
        }
    }
    // More derived channels than distinct pairs: cycle.
    for (int i = static_cast<int>(pairs.size()); i < count; ++i) {
        pairs.push_back(pairs[i % std::max<size_t>(pairs.size(), 1)]);
    }
    return pairs;
}

MixRule paired_rule(int C, int n_sources, double w_first, double w_second, MixRule::Nonlin nonlin,
                    double noise_amp) {
    if (n_sources < 2 || C < n_sources + 1) {
        throw UsageError("synthetic rules need at least 2 source channels and 1 mixed channel");
    }
    MixRule rule;
    rule.mixing.resize(C);
    rule.nonlin = nonlin;
    rule.noise_amp = noise_amp;
    const auto pairs = source_pairs(n_sources, C - n_sources);
    for (int i = 0; i < C - n_sources; ++i) {
        rule.mixing[n_sources + i] = {{pairs[i].first, w_first}, {pairs[i].second, w_second}};
    }
    return rule;
}

}  // namespace

MixRule default_rule_a(int C, double noise_amp, int n_sources) {
    return paired_rule(C, n_sources, 0.9, 0.8, MixRule::Nonlin::Identity, noise_amp);
}

MixRule default_rule_b(int C, double noise_amp, int n_sources) {
    // Same sparse support as rule A, different weights, and saturating
    // nonlinearity; the gain is folded into the weights.
    return paired_rule(C, n_sources, 0.825, 1.275, MixRule::Nonlin::Tanh, noise_amp);
}

std::vector<Recording> synth_corpus(uint64_t seed, int n_subjects_per_class, int C, int fs,
                                    int seconds, const MixRule& rule_a, const MixRule& rule_b) {
    if (n_subjects_per_class < 1) throw UsageError("synth_corpus: need at least 1 subject per class");
    if (C < 2) throw UsageError("synth_corpus: need at least 2 channels");
    if (fs < 1 || seconds < 1) throw UsageError("synth_corpus: fs and seconds must be positive");
    if (rule_a == rule_b) throw UsageError("synth_corpus: the two class rules must differ");
    validate_rule(rule_a, C, "rule_a");
    validate_rule(rule_b, C, "rule_b");

    const int T = fs * seconds;
    std::vector<Recording> out;
    std::vector<std::string> channel_names;
    std::vector<std::array<double, 2>> positions;
    for (int c = 0; c < C; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "ch%02d", c);
        channel_names.emplace_back(buf);
        const double theta = 2.0 * M_PI * c / C;
        positions.push_back({0.9 * std::cos(theta), 0.9 * std::sin(theta)});
    }

    for (int cls = 0; cls < 2; ++cls) {
        const MixRule& rule = cls == 0 ? rule_a : rule_b;
        const Label label = cls == 0 ? Label::MDD : Label::HC;
        for (int subj = 0; subj < n_subjects_per_class; ++subj) {
            Recording r;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%s%02d", cls == 0 ? "mdd" : "hc", subj);
            r.subject_id = buf;
            r.label = label;
            r.fs = fs;
            r.channels = channel_names;
            r.positions = positions;
            r.C = C;
            r.T = T;
            r.data.resize(static_cast<size_t>(C) * T);

            for (int e = 0; e < C; ++e) {
                double* row = r.data.data() + static_cast<size_t>(e) * T;
                if (rule.mixing[e].empty()) {
                    // Latent source: three tones at class-specific frequencies
                    // (a fixed spectral fingerprint per class and source).
                    // Amplitudes and phases redraw every 10 s block so a
                    // corpus carries many independent realizations per
                    // subject; each block is normalized to unit RMS.
                    const double base[3] = {cls == 0 ? 4.7 : 5.3, cls == 0 ? 7.3 : 8.1,
                                            cls == 0 ? 10.1 : 11.3};
                    const double step = cls == 0 ? 0.31 : 0.41;
                    const int block = 10 * fs;
                    for (int b0 = 0; b0 < T; b0 += block) {
                        const int b1 = std::min(T, b0 + block);
                        Rng rng = Rng::substream(seed, "synth.src",
                                                 {static_cast<uint64_t>(cls),
                                                  static_cast<uint64_t>(subj),
                                                  static_cast<uint64_t>(e),
                                                  static_cast<uint64_t>(b0)});
                        std::fill(row + b0, row + b1, 0.0);
                        for (int tone = 0; tone < 3; ++tone) {
                            const double f = base[tone] + step * (e % 7);
                            const double amp = rng.uniform(0.5, 1.0);
                            const double phase = rng.uniform(0.0, 2.0 * M_PI);
                            const double omega = 2.0 * M_PI * f / fs;
                            for (int t = b0; t < b1; ++t) {
                                row[t] += amp * std::sin(omega * (t - b0) + phase);
                            }
                        }
                        double rms = 0.0;
                        for (int t = b0; t < b1; ++t) rms += row[t] * row[t];
                        rms = std::sqrt(rms / (b1 - b0));
                        if (rms > 0.0) {
                            for (int t = b0; t < b1; ++t) row[t] /= rms;
                        }
                    }
                } else {
                    for (int t = 0; t < T; ++t) {
                        double v = 0.0;
                        for (const auto& term : rule.mixing[e]) {
                            v += term.weight * r.data[static_cast<size_t>(term.src) * T + t];
                        }
                        row[t] = rule.nonlin == MixRule::Nonlin::Tanh ? std::tanh(v) : v;
                    }
                }
                if (rule.noise_amp > 0.0) {
                    Rng noise = Rng::substream(seed, "synth.noise",
                                               {static_cast<uint64_t>(cls),
                                                static_cast<uint64_t>(subj),
                                                static_cast<uint64_t>(e)});
                    for (int t = 0; t < T; ++t) row[t] += rule.noise_amp * noise.normal();
                }
            }
            // Quantize through f32 so the in-memory corpus matches a
            // write_corpus/load_corpus round trip bit for bit.
            for (double& v : r.data) v = static_cast<double>(static_cast<float>(v));
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace gdn::ingest
