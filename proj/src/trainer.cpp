#include "gdn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "gdn/error.hpp"
#include "gdn/log.hpp"
#include "gdn/rng.hpp"

namespace gdn::trainer {

using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& s) {
    if (s == "f32") return Precision::F32;
    if (s == "f64") return Precision::F64;
    throw UsageError("precision must be f32 or f64, got '" + s + "'");
}

void TrainConfig::validate() const {
    if (k < 1) throw UsageError("k must be >= 1");
    if (learning_rate <= 0.0) throw UsageError("learning rate must be positive");
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    if (epochs < 0) throw UsageError("epochs must be >= 0");
    if (early_stop_patience < 0) throw UsageError("early stop patience must be >= 0");
    if (arch.k != k) throw UsageError("architecture k does not match training k");
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"k", c.k},
             {"band_low_hz", c.band.low_hz},
             {"band_high_hz", c.band.high_hz},
             {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},
             {"epochs", c.epochs},
             {"seed", c.seed},
             {"early_stop_patience", c.early_stop_patience},
             {"precision", to_string(c.precision)},
             {"arch", c.arch}};
}

void from_json(const json& j, TrainConfig& c) {
    j.at("k").get_to(c.k);
    j.at("band_low_hz").get_to(c.band.low_hz);
    j.at("band_high_hz").get_to(c.band.high_hz);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs").get_to(c.epochs);
    j.at("seed").get_to(c.seed);
    j.at("early_stop_patience").get_to(c.early_stop_patience);
    c.precision = precision_from_string(j.at("precision").get<std::string>());
    j.at("arch").get_to(c.arch);
}

uint64_t config_hash(const TrainConfig& cfg, ingest::Label class_label) {
    json j = cfg;
    j["class_label"] = ingest::to_string(class_label);
    return fnv1a64(j.dump());
}

void apply_update(model::GeneratorParams& params, AdamState& state, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    params.for_each_param([&](const std::string& name, const model::TensorPtr& t) {
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != t->data.size()) m.assign(t->data.size(), 0.0);
        if (v.size() != t->data.size()) v.assign(t->data.size(), 0.0);
        if (t->grad.empty()) return;  // no gradient accumulated: leave values be
        for (size_t i = 0; i < t->data.size(); ++i) {
            const double g = t->grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            t->data[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    });
}

double time_domain_loss(model::GeneratorParams& params, const std::vector<TrainSample>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& s : samples) {
        model::Tape tape;
        auto out = model::generator_forward(tape, s.wp, params, model::Mode::Eval);
        const std::vector<double> recon = model::reconstruct_time(out, s.wp.n_samples);
        const std::vector<double> target =
            dsp::idwt_db6(s.wp.O_cA, s.wp.O_cD, s.wp.n_samples);
        double mse = 0.0;
        for (size_t i = 0; i < recon.size(); ++i) {
            const double d = recon[i] - target[i];
            mse += d * d;
        }
        total += mse / static_cast<double>(recon.size());
    }
    return total / static_cast<double>(samples.size());
}

Checkpoint train_generator(ingest::Label class_label, const std::vector<TrainSample>& train,
                           const std::vector<TrainSample>& val, const TrainConfig& cfg,
                           std::ostream* log_jsonl) {
    cfg.validate();
    if (train.empty()) throw DataError("train_generator: empty training corpus");
    for (const auto* set : {&train, &val}) {
        for (const auto& s : *set) {
            if (s.label != class_label) {
                throw DataError("train_generator: sample from subject '" + s.subject_id +
                                "' is not of class " + ingest::to_string(class_label));
            }
        }
    }

    const uint64_t class_tag = class_label == ingest::Label::MDD ? 1 : 2;
    model::GeneratorParams params = model::GeneratorParams::init(
        cfg.arch, fnv1a64_mix(class_tag, fnv1a64_mix(cfg.seed, fnv1a64("train.init"))));
    AdamState opt;

    Checkpoint best;
    best.params = params.clone();
    best.opt = opt;
    best.epoch = 0;
    best.class_label = class_label;
    best.cfg = cfg;
    best.config_hash = config_hash(cfg, class_label);

    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = Rng::substream(cfg.seed, "train.shuffle",
                                         {class_tag, static_cast<uint64_t>(epoch)});
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            params.zero_grad();
            double batch_loss = 0.0;
            try {
                for (size_t i = start; i < stop; ++i) {
                    model::Tape tape;
                    auto out =
                        model::generator_forward(tape, train[order[i]].wp, params, model::Mode::Train);
                    auto l = model::loss(tape, out, train[order[i]].wp);
                    tape.backward(l);
                    batch_loss += l->data[0];
                }
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch starting at sample " + std::to_string(start) +
                                   " (lr=" + std::to_string(cfg.learning_rate) +
                                   "): " + e.what() + "; lower the learning rate or batch size");
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            params.for_each_param([&](const std::string&, const model::TensorPtr& t) {
                if (t->grad.empty()) return;
                for (double& g : t->grad) g *= inv;
            });
            apply_update(params, opt, cfg.learning_rate);
            epoch_loss += batch_loss;
            seen += stop - start;
        }
        epoch_loss /= static_cast<double>(seen);
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("training loss is not finite at epoch " + std::to_string(epoch) +
                               " (lr=" + std::to_string(cfg.learning_rate) + ")");
        }

        const double val_loss = val.empty() ? epoch_loss : time_domain_loss(params, val);
        best.train_loss_history.push_back(epoch_loss);
        best.val_loss_history.push_back(val_loss);

        const auto t1 = std::chrono::steady_clock::now();
        const auto wall_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        if (log_jsonl) {
            json rec{{"epoch", epoch},
                     {"train_loss", epoch_loss},
                     {"val_loss", val_loss},
                     {"wall_ms", wall_ms}};
            (*log_jsonl) << rec.dump() << std::endl;  // flush: progress is tailable
        }
        log_debug("train ", ingest::to_string(class_label), " epoch ", epoch, " train_loss=",
                  epoch_loss, " val_loss=", val_loss, " (", wall_ms, " ms)");

        if (val_loss < best_val) {
            best_val = val_loss;
            best.params = params.clone();
            best.opt = opt;
            best.epoch = epoch + 1;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best > cfg.early_stop_patience) {
                log_info("early stop for ", ingest::to_string(class_label), " at epoch ", epoch,
                         " (best val ", best_val, " at epoch ", best.epoch, ")");
                break;
            }
        }
    }
    return best;
}

// ---- checkpoint serialization ----------------------------------------------
// Layout: 8-byte magic, u64 little-endian header length, JSON header, then the
// tensor payloads concatenated in header order (f32le or f64le).

namespace {

constexpr char kMagic[8] = {'G', 'D', 'N', 'C', 'K', '0', '0', '1'};

struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double>* values;
};

// Collects every persisted array: parameters, optimizer moments, BN state.
std::vector<NamedTensor> persisted_tensors(Checkpoint& ckpt) {
    std::vector<NamedTensor> out;
    ckpt.params.for_each_param([&](const std::string& name, const model::TensorPtr& t) {
        out.push_back({"param/" + name, t->shape, &t->data});
    });
    ckpt.params.for_each_param([&](const std::string& name, const model::TensorPtr& t) {
        auto& m = ckpt.opt.m[name];
        auto& v = ckpt.opt.v[name];
        if (m.size() != t->data.size()) m.assign(t->data.size(), 0.0);
        if (v.size() != t->data.size()) v.assign(t->data.size(), 0.0);
        out.push_back({"adam_m/" + name, t->shape, &m});
        out.push_back({"adam_v/" + name, t->shape, &v});
    });
    ckpt.params.for_each_bn_state([&](const std::string& name, model::BatchNormState& st) {
        const int c = static_cast<int>(st.running_mean.size());
        out.push_back({"state/" + name + "/mean", {c}, &st.running_mean});
        out.push_back({"state/" + name + "/var", {c}, &st.running_var});
    });
    return out;
}

void round_to_f32(std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt) {
    auto tensors = persisted_tensors(ckpt);
    const bool f32 = ckpt.cfg.precision == Precision::F32;
    if (f32) {
        for (auto& t : tensors) round_to_f32(*t.values);
    }

    json header;
    header["version"] = 1;
    header["class_label"] = ingest::to_string(ckpt.class_label);
    header["epoch"] = ckpt.epoch;
    header["config"] = ckpt.cfg;
    header["config_hash"] = ckpt.config_hash;
    header["adam_step"] = ckpt.opt.step;
    header["train_loss_history"] = ckpt.train_loss_history;
    header["val_loss_history"] = ckpt.val_loss_history;
    header["dtype"] = f32 ? "f32le" : "f64le";
    std::vector<bool> bn_init;
    ckpt.params.for_each_bn_state(
        [&](const std::string&, model::BatchNormState& st) { bn_init.push_back(st.initialized); });
    header["bn_initialized"] = bn_init;
    auto& tl = header["tensors"];
    tl = json::array();
    for (const auto& t : tensors) {
        tl.push_back({{"name", t.name}, {"shape", t.shape}, {"count", t.values->size()}});
    }
    const std::string header_str = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path.string());
    f.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = header_str.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& t : tensors) {
        if (f32) {
            std::vector<float> raw(t.values->begin(), t.values->end());
            f.write(reinterpret_cast<const char*>(raw.data()),
                    static_cast<std::streamsize>(raw.size() * sizeof(float)));
        } else {
            f.write(reinterpret_cast<const char*>(t.values->data()),
                    static_cast<std::streamsize>(t.values->size() * sizeof(double)));
        }
    }
    if (!f) throw DataError("short write to checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<uint64_t> expect_hash,
                           bool override_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint file: " + path.string());
    }
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f) throw DataError("truncated checkpoint header: " + path.string());
    std::string header_str(hlen, '\0');
    f.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw DataError("truncated checkpoint header: " + path.string());

    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw DataError("unparseable checkpoint header in " + path.string() + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.cfg = header.at("config").get<TrainConfig>();
    ckpt.class_label = ingest::label_from_string(header.at("class_label").get<std::string>());
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.config_hash = header.at("config_hash").get<uint64_t>();
    ckpt.opt.step = header.at("adam_step").get<int64_t>();
    ckpt.train_loss_history = header.at("train_loss_history").get<std::vector<double>>();
    ckpt.val_loss_history = header.at("val_loss_history").get<std::vector<double>>();
    const bool f32 = header.at("dtype").get<std::string>() == "f32le";

    const uint64_t stored_hash = config_hash(ckpt.cfg, ckpt.class_label);
    if (stored_hash != ckpt.config_hash) {
        throw DataError("checkpoint config hash does not match its own config (corrupt?): " +
                        path.string());
    }
    if (expect_hash && *expect_hash != ckpt.config_hash && !override_hash) {
        throw DataError("checkpoint config hash mismatch for " + path.string() +
                        " (pass the override flag to load anyway)");
    }

    // Materialize parameter tensors at the stored architecture, then fill.
    ckpt.params = model::GeneratorParams::init(ckpt.cfg.arch, /*seed=*/0);
    auto tensors = persisted_tensors(ckpt);
    const auto& tl = header.at("tensors");
    if (tl.size() != tensors.size()) {
        throw DataError("checkpoint tensor count mismatch: header lists " +
                        std::to_string(tl.size()) + ", architecture needs " +
                        std::to_string(tensors.size()));
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& entry = tl[i];
        if (entry.at("name").get<std::string>() != tensors[i].name ||
            entry.at("count").get<size_t>() != tensors[i].values->size()) {
            throw DataError("checkpoint tensor mismatch at index " + std::to_string(i) + " (" +
                            entry.at("name").get<std::string>() + " vs " + tensors[i].name + ")");
        }
        auto& dst = *tensors[i].values;
        if (f32) {
            std::vector<float> raw(dst.size());
            f.read(reinterpret_cast<char*>(raw.data()),
                   static_cast<std::streamsize>(raw.size() * sizeof(float)));
            if (!f) throw DataError("truncated checkpoint payload: " + path.string());
            dst.assign(raw.begin(), raw.end());
        } else {
            f.read(reinterpret_cast<char*>(dst.data()),
                   static_cast<std::streamsize>(dst.size() * sizeof(double)));
            if (!f) throw DataError("truncated checkpoint payload: " + path.string());
        }
    }
    const auto bn_init = header.at("bn_initialized").get<std::vector<bool>>();
    size_t bn_i = 0;
    ckpt.params.for_each_bn_state([&](const std::string&, model::BatchNormState& st) {
        if (bn_i < bn_init.size()) st.initialized = bn_init[bn_i++];
    });
    return ckpt;
}

}  // namespace gdn::trainer
