#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gdn/dsp.hpp"
#include "gdn/ingest.hpp"
#include "gdn/model.hpp"

namespace gdn::trainer {

enum class Precision { F32, F64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct TrainConfig {
    int k = 10;
    dsp::BandSpec band;
    double learning_rate = 1e-3;
    int batch_size = 64;  // electrode stacks per update
    int epochs = 100;
    uint64_t seed = 0;
    int early_stop_patience = 10;
    Precision precision = Precision::F64;
    model::GeneratorConfig arch;  // arch.k / arch.L must agree with the corpus

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// One preprocessed electrode stack, tagged with its provenance.
struct TrainSample {
    dsp::WaveletPair wp;
    std::string subject_id;
    ingest::Label label = ingest::Label::HC;
};

struct AdamState {
    std::map<std::string, std::vector<double>> m, v;
    int64_t step = 0;
};

struct Checkpoint {
    model::GeneratorParams params;
    AdamState opt;
    int epoch = 0;
    std::vector<double> train_loss_history, val_loss_history;
    ingest::Label class_label = ingest::Label::HC;
    TrainConfig cfg;
    uint64_t config_hash = 0;
};

uint64_t config_hash(const TrainConfig& cfg, ingest::Label class_label);

// Adam step over every trainable tensor, reading the accumulated gradients
// in place. beta1=0.9, beta2=0.999, eps=1e-8.
void apply_update(model::GeneratorParams& params, AdamState& state, double lr);

// Trains one class generator on its preprocessed stacks. Training loss is the
// coefficient-domain objective; validation loss is time-domain MSE after
// inverse wavelet synthesis. Returns the best-validation checkpoint.
// `log_jsonl`, when set, receives one JSON record per epoch.
Checkpoint train_generator(ingest::Label class_label, const std::vector<TrainSample>& train,
                           const std::vector<TrainSample>& val, const TrainConfig& cfg,
                           std::ostream* log_jsonl = nullptr);

// Mutates the checkpoint when storing at f32: live tensors are rounded so the
// in-memory state matches the persisted bytes exactly.
void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt);

// `expect_hash`, when set, is checked against the stored hash (resume guard);
// mismatch is fatal unless `override_hash`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<uint64_t> expect_hash = std::nullopt,
                           bool override_hash = false);

// Mean time-domain reconstruction MSE of `params` over samples (eval mode).
double time_domain_loss(model::GeneratorParams& params, const std::vector<TrainSample>& samples);

}  // namespace gdn::trainer
