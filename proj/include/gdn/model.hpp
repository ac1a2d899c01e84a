#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gdn/autograd.hpp"
#include "gdn/dsp.hpp"

#include <nlohmann/json.hpp>

namespace gdn::model {

using autograd::BatchNormState;
using autograd::Mode;
using autograd::Tape;
using autograd::TensorPtr;

struct GeneratorConfig {
    int k = 10;        // neighbor rows per electrode stack
    int L = 1255;      // wavelet coefficient length
    int hidden = 300;  // fused feature width
    int enc_channels = 16;
    int enc_nodes = 6;
    int enc_kernel = 7;
    int enc_stride = 2;
    int enc_padding = 3;
    // Number of leading nodes that apply enc_stride; the rest use stride 1.
    // Defaults to "all nodes" (the stock pyramid reaching length 20 from 1255).
    int enc_stride_nodes = 6;
    int dec_nodes = 5;
    double activation_slope = 0.01;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    double ln_eps = 1e-5;

    int node_stride(int node) const { return node < enc_stride_nodes ? enc_stride : 1; }

    bool operator==(const GeneratorConfig&) const = default;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

// Temporal length after each encoder node (size enc_nodes + 1, starting at L).
std::vector<int> encoder_lengths(const GeneratorConfig& cfg);

// One encoder feature node: y = Conv(Conv1x1(BN(x)) + BN(x)), where the
// residual branch gets its own 1x1 projection when channel counts differ.
struct EncoderNodeParams {
    TensorPtr bn_gamma, bn_beta;
    BatchNormState bn_state;
    TensorPtr conv1_w;          // [out, in, 1]
    TensorPtr proj_w;           // [out, in, 1], null when in == out
    TensorPtr conv2_w;          // [out, out, kernel]
};

struct EncoderParams {
    std::vector<EncoderNodeParams> nodes;
    TensorPtr proj_w, proj_b;  // flatten -> hidden
};

// One decoder node: y = Linear2(act(Linear1(N(x))) + N(x)).
struct DecoderNodeParams {
    TensorPtr w1, b1;  // hidden -> hidden
    TensorPtr w2, b2;  // hidden -> hidden (final node: hidden -> L)
};

struct DecoderParams {
    std::vector<DecoderNodeParams> nodes;
};

struct GeneratorParams {
    GeneratorConfig cfg;
    EncoderParams enc_ca, enc_cd;
    TensorPtr omega1, omega2;  // learnable fusion weights
    DecoderParams dec_ca, dec_cd;

    static GeneratorParams init(const GeneratorConfig& cfg, uint64_t seed);
    GeneratorParams clone() const;

    // Visits every trainable tensor with a stable, unique name.
    void for_each_param(const std::function<void(const std::string&, const TensorPtr&)>& fn) const;
    // Visits batch-norm running state (non-trainable).
    void for_each_bn_state(const std::function<void(const std::string&, BatchNormState&)>& fn);
    int64_t param_count() const;
    void zero_grad() const;
};

struct GeneratorOutput {
    TensorPtr g_ca, g_cd;  // generated coefficients, length L each
};

TensorPtr encoder_forward(Tape& tape, const TensorPtr& S, EncoderParams& enc,
                          const GeneratorConfig& cfg, Mode mode);
TensorPtr decoder_forward(Tape& tape, const TensorPtr& hidden, DecoderParams& dec,
                          const GeneratorConfig& cfg);
GeneratorOutput generator_forward(Tape& tape, const dsp::WaveletPair& wp, GeneratorParams& params,
                                  Mode mode);

// Sum of coefficient-domain MSEs against the target electrode's coefficients.
TensorPtr loss(Tape& tape, const GeneratorOutput& out, const dsp::WaveletPair& wp);

// Inverse wavelet synthesis of the generated coefficients to N samples.
std::vector<double> reconstruct_time(const GeneratorOutput& out, int n);

}  // namespace gdn::model
