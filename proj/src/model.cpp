#include "gdn/model.hpp"

#include <cmath>

#include "gdn/error.hpp"
#include "gdn/rng.hpp"

namespace gdn::model {

using nlohmann::json;

void to_json(json& j, const GeneratorConfig& c) {
    j = json{{"k", c.k},
             {"L", c.L},
             {"hidden", c.hidden},
             {"enc_channels", c.enc_channels},
             {"enc_nodes", c.enc_nodes},
             {"enc_kernel", c.enc_kernel},
             {"enc_stride", c.enc_stride},
             {"enc_stride_nodes", c.enc_stride_nodes},
             {"enc_padding", c.enc_padding},
             {"dec_nodes", c.dec_nodes},
             {"activation_slope", c.activation_slope},
             {"bn_momentum", c.bn_momentum},
             {"bn_eps", c.bn_eps},
             {"ln_eps", c.ln_eps}};
}

void from_json(const json& j, GeneratorConfig& c) {
    j.at("k").get_to(c.k);
    j.at("L").get_to(c.L);
    j.at("hidden").get_to(c.hidden);
    j.at("enc_channels").get_to(c.enc_channels);
    j.at("enc_nodes").get_to(c.enc_nodes);
    j.at("enc_kernel").get_to(c.enc_kernel);
    j.at("enc_stride").get_to(c.enc_stride);
    c.enc_stride_nodes = j.value("enc_stride_nodes", c.enc_nodes);
    j.at("enc_padding").get_to(c.enc_padding);
    j.at("dec_nodes").get_to(c.dec_nodes);
    j.at("activation_slope").get_to(c.activation_slope);
    j.at("bn_momentum").get_to(c.bn_momentum);
    j.at("bn_eps").get_to(c.bn_eps);
    j.at("ln_eps").get_to(c.ln_eps);
}

std::vector<int> encoder_lengths(const GeneratorConfig& cfg) {
    std::vector<int> lens;
    lens.push_back(cfg.L);
    int len = cfg.L;
    for (int i = 0; i < cfg.enc_nodes; ++i) {
        len = (len + 2 * cfg.enc_padding - cfg.enc_kernel) / cfg.node_stride(i) + 1;
        if (len < 1) {
            throw DataError("encoder_lengths: temporal length collapsed below 1 at node " +
                            std::to_string(i));
        }
        lens.push_back(len);
    }
    return lens;
}

namespace {

using autograd::make_tensor;
using autograd::scalar_tensor;

TensorPtr he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    auto t = make_tensor(std::move(shape), true);
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : t->data) v = rng.uniform(-bound, bound);
    return t;
}

EncoderParams init_encoder(const GeneratorConfig& cfg, Rng& rng) {
    EncoderParams enc;
    const auto lens = encoder_lengths(cfg);
    for (int i = 0; i < cfg.enc_nodes; ++i) {
        const int in_ch = i == 0 ? cfg.k : cfg.enc_channels;
        const int out_ch = cfg.enc_channels;
        EncoderNodeParams node;
        node.bn_gamma = make_tensor({in_ch}, std::vector<double>(in_ch, 1.0), true);
        node.bn_beta = make_tensor({in_ch}, true);
        node.bn_state = BatchNormState(in_ch, cfg.bn_momentum, cfg.bn_eps);
        node.conv1_w = he_uniform({out_ch, in_ch, 1}, in_ch, rng);
        if (in_ch != out_ch) node.proj_w = he_uniform({out_ch, in_ch, 1}, in_ch, rng);
        node.conv2_w = he_uniform({out_ch, out_ch, cfg.enc_kernel}, out_ch * cfg.enc_kernel, rng);
        enc.nodes.push_back(std::move(node));
    }
    const int flat = cfg.enc_channels * lens.back();
    enc.proj_w = he_uniform({cfg.hidden, flat}, flat, rng);
    enc.proj_b = make_tensor({cfg.hidden}, true);
    return enc;
}

DecoderParams init_decoder(const GeneratorConfig& cfg, Rng& rng) {
    DecoderParams dec;
    for (int i = 0; i < cfg.dec_nodes; ++i) {
        const int out = i == cfg.dec_nodes - 1 ? cfg.L : cfg.hidden;
        DecoderNodeParams node;
        node.w1 = he_uniform({cfg.hidden, cfg.hidden}, cfg.hidden, rng);
        node.b1 = make_tensor({cfg.hidden}, true);
        node.w2 = he_uniform({out, cfg.hidden}, cfg.hidden, rng);
        node.b2 = make_tensor({out}, true);
        dec.nodes.push_back(std::move(node));
    }
    return dec;
}

TensorPtr clone_tensor(const TensorPtr& t) {
    if (!t) return nullptr;
    auto c = std::make_shared<autograd::Tensor>(*t);
    return c;
}

EncoderParams clone_encoder(const EncoderParams& enc) {
    EncoderParams out;
    for (const auto& n : enc.nodes) {
        EncoderNodeParams c;
        c.bn_gamma = clone_tensor(n.bn_gamma);
        c.bn_beta = clone_tensor(n.bn_beta);
        c.bn_state = n.bn_state;
        c.conv1_w = clone_tensor(n.conv1_w);
        c.proj_w = clone_tensor(n.proj_w);
        c.conv2_w = clone_tensor(n.conv2_w);
        out.nodes.push_back(std::move(c));
    }
    out.proj_w = clone_tensor(enc.proj_w);
    out.proj_b = clone_tensor(enc.proj_b);
    return out;
}

DecoderParams clone_decoder(const DecoderParams& dec) {
    DecoderParams out;
    for (const auto& n : dec.nodes) {
        out.nodes.push_back({clone_tensor(n.w1), clone_tensor(n.b1), clone_tensor(n.w2),
                             clone_tensor(n.b2)});
    }
    return out;
}

void visit_encoder(const std::string& prefix, const EncoderParams& enc,
                   const std::function<void(const std::string&, const TensorPtr&)>& fn) {
    for (size_t i = 0; i < enc.nodes.size(); ++i) {
        const auto& n = enc.nodes[i];
        const std::string base = prefix + ".node" + std::to_string(i);
        fn(base + ".bn_gamma", n.bn_gamma);
        fn(base + ".bn_beta", n.bn_beta);
        fn(base + ".conv1_w", n.conv1_w);
        if (n.proj_w) fn(base + ".proj_w", n.proj_w);
        fn(base + ".conv2_w", n.conv2_w);
    }
    fn(prefix + ".proj_w", enc.proj_w);
    fn(prefix + ".proj_b", enc.proj_b);
}

void visit_decoder(const std::string& prefix, const DecoderParams& dec,
                   const std::function<void(const std::string&, const TensorPtr&)>& fn) {
    for (size_t i = 0; i < dec.nodes.size(); ++i) {
        const auto& n = dec.nodes[i];
        const std::string base = prefix + ".node" + std::to_string(i);
        fn(base + ".w1", n.w1);
        fn(base + ".b1", n.b1);
        fn(base + ".w2", n.w2);
        fn(base + ".b2", n.b2);
    }
}

}  // namespace

GeneratorParams GeneratorParams::init(const GeneratorConfig& cfg, uint64_t seed) {
    Rng rng = Rng::substream(seed, "model.init");
    GeneratorParams p;
    p.cfg = cfg;
    p.enc_ca = init_encoder(cfg, rng);
    p.enc_cd = init_encoder(cfg, rng);
    p.omega1 = scalar_tensor(0.5, true);
    p.omega2 = scalar_tensor(0.5, true);
    p.dec_ca = init_decoder(cfg, rng);
    p.dec_cd = init_decoder(cfg, rng);
    return p;
}

GeneratorParams GeneratorParams::clone() const {
    GeneratorParams p;
    p.cfg = cfg;
    p.enc_ca = clone_encoder(enc_ca);
    p.enc_cd = clone_encoder(enc_cd);
    p.omega1 = clone_tensor(omega1);
    p.omega2 = clone_tensor(omega2);
    p.dec_ca = clone_decoder(dec_ca);
    p.dec_cd = clone_decoder(dec_cd);
    return p;
}

void GeneratorParams::for_each_param(
    const std::function<void(const std::string&, const TensorPtr&)>& fn) const {
    visit_encoder("enc_ca", enc_ca, fn);
    visit_encoder("enc_cd", enc_cd, fn);
    fn("omega1", omega1);
    fn("omega2", omega2);
    visit_decoder("dec_ca", dec_ca, fn);
    visit_decoder("dec_cd", dec_cd, fn);
}

void GeneratorParams::for_each_bn_state(
    const std::function<void(const std::string&, BatchNormState&)>& fn) {
    for (size_t i = 0; i < enc_ca.nodes.size(); ++i) {
        fn("enc_ca.node" + std::to_string(i) + ".bn_state", enc_ca.nodes[i].bn_state);
    }
    for (size_t i = 0; i < enc_cd.nodes.size(); ++i) {
        fn("enc_cd.node" + std::to_string(i) + ".bn_state", enc_cd.nodes[i].bn_state);
    }
}

int64_t GeneratorParams::param_count() const {
    int64_t n = 0;
    for_each_param([&](const std::string&, const TensorPtr& t) { n += t->numel(); });
    return n;
}

void GeneratorParams::zero_grad() const {
    for_each_param([](const std::string&, const TensorPtr& t) { t->zero_grad(); });
}

TensorPtr encoder_forward(Tape& tape, const TensorPtr& S, EncoderParams& enc,
                          const GeneratorConfig& cfg, Mode mode) {
    if (S->shape.size() != 2 || S->dim(0) != cfg.k || S->dim(1) != cfg.L) {
        throw DataError("encoder_forward: input must be [k, L] = [" + std::to_string(cfg.k) +
                        ", " + std::to_string(cfg.L) + "]");
    }
    TensorPtr x = S;
    for (size_t i = 0; i < enc.nodes.size(); ++i) {
        auto& node = enc.nodes[i];
        TensorPtr bn = tape.batchnorm(x, node.bn_gamma, node.bn_beta, node.bn_state, mode);
        TensorPtr h = tape.conv1d(bn, node.conv1_w, 1, 0);
        TensorPtr res = node.proj_w ? tape.conv1d(bn, node.proj_w, 1, 0) : bn;
        TensorPtr s = tape.add(h, res);
        TensorPtr y = tape.conv1d(s, node.conv2_w, cfg.node_stride(static_cast<int>(i)),
                                   cfg.enc_padding);
        x = tape.leaky_relu(y, cfg.activation_slope);
    }
    TensorPtr flat = tape.reshape(x, {static_cast<int>(x->numel())});
    return tape.linear(flat, enc.proj_w, enc.proj_b);
}

TensorPtr decoder_forward(Tape& tape, const TensorPtr& hidden, DecoderParams& dec,
                          const GeneratorConfig& cfg) {
    if (hidden->numel() != cfg.hidden) {
        throw DataError("decoder_forward: hidden width mismatch");
    }
    TensorPtr x = hidden;
    for (auto& node : dec.nodes) {
        TensorPtr n = tape.layernorm(x, cfg.ln_eps);
        TensorPtr a = tape.linear(n, node.w1, node.b1);
        a = tape.leaky_relu(a, cfg.activation_slope);
        TensorPtr s = tape.add(a, n);
        x = tape.linear(s, node.w2, node.b2);
    }
    return x;
}

GeneratorOutput generator_forward(Tape& tape, const dsp::WaveletPair& wp, GeneratorParams& params,
                                  Mode mode) {
    const GeneratorConfig& cfg = params.cfg;
    if (wp.k != cfg.k || wp.L != cfg.L) {
        throw DataError("generator_forward: wavelet pair is " + std::to_string(wp.k) + "x" +
                        std::to_string(wp.L) + ", generator expects " + std::to_string(cfg.k) +
                        "x" + std::to_string(cfg.L));
    }
    TensorPtr s_ca = autograd::make_tensor({cfg.k, cfg.L}, wp.S_cA);
    TensorPtr s_cd = autograd::make_tensor({cfg.k, cfg.L}, wp.S_cD);
    TensorPtr f_ca = encoder_forward(tape, s_ca, params.enc_ca, cfg, mode);
    TensorPtr f_cd = encoder_forward(tape, s_cd, params.enc_cd, cfg, mode);
    TensorPtr hidden = tape.scale_sum(f_ca, f_cd, params.omega1, params.omega2);
    GeneratorOutput out;
    out.g_ca = decoder_forward(tape, hidden, params.dec_ca, cfg);
    out.g_cd = decoder_forward(tape, hidden, params.dec_cd, cfg);
    return out;
}

TensorPtr loss(Tape& tape, const GeneratorOutput& out, const dsp::WaveletPair& wp) {
    TensorPtr o_ca = autograd::make_tensor({wp.L}, wp.O_cA);
    TensorPtr o_cd = autograd::make_tensor({wp.L}, wp.O_cD);
    return tape.add(tape.mse(out.g_ca, o_ca), tape.mse(out.g_cd, o_cd));
}

std::vector<double> reconstruct_time(const GeneratorOutput& out, int n) {
    return dsp::idwt_db6(out.g_ca->data, out.g_cd->data, n);
}

}  // namespace gdn::model
