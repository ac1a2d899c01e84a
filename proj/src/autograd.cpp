#include "gdn/autograd.hpp"

#include <cmath>
#include <cstring>

#include "gdn/error.hpp"

namespace gdn::autograd {

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(t->numel()), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    if (static_cast<int64_t>(values.size()) != t->numel()) {
        throw DataError("make_tensor: value count does not match shape");
    }
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr scalar_tensor(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

namespace {

void require_shape(const TensorPtr& t, size_t dims, const char* op) {
    if (t->shape.size() != dims) {
        throw DataError(std::string(op) + ": expected a " + std::to_string(dims) + "-d tensor");
    }
}

// Gradients accumulate into every tensor that asked for them or that was
// produced by a recorded op (intermediates propagate the chain).
inline bool wants_grad(const TensorPtr& t) { return t->requires_grad; }

inline void accumulate(const TensorPtr& t, size_t i, double v) { t->grad[i] += v; }

}  // namespace

Tape::Tape(bool check_finite) : check_finite_(check_finite) {}

void Tape::check_values(const Tensor& t, const char* op) const {
    if (!check_finite_) return;
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}

TensorPtr Tape::record(std::vector<int> shape, bool needs_grad, std::function<void()> back,
                       std::vector<double> values) {
    auto out = make_tensor(std::move(shape), std::move(values), needs_grad);
    nodes_.push_back({out, std::move(back)});
    return out;
}

TensorPtr Tape::conv1d(const TensorPtr& x, const TensorPtr& w, int stride, int padding) {
    require_shape(x, 2, "conv1d/x");
    require_shape(w, 3, "conv1d/w");
    const int cin = x->dim(0), len = x->dim(1);
    const int cout = w->dim(0), k = w->dim(2);
    if (w->dim(1) != cin) throw DataError("conv1d: weight in-channels mismatch input");
    if (stride < 1 || padding < 0) throw DataError("conv1d: bad stride/padding");
    const int lout = (len + 2 * padding - k) / stride + 1;
    if (len + 2 * padding < k || lout < 1) throw DataError("conv1d: output length would be empty");

    // Valid output range per tap, so the inner loops stay branch-free.
    std::vector<int> o_lo(k), o_hi(k);
    for (int j = 0; j < k; ++j) {
        const int shift = padding - j;  // t = o*stride - shift
        o_lo[j] = shift <= 0 ? 0 : (shift + stride - 1) / stride;
        o_hi[j] = std::min(lout - 1, (len - 1 + shift) / stride);
    }

    std::vector<double> y(static_cast<size_t>(cout) * lout, 0.0);
    for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
            const double* wrow = w->data.data() + (static_cast<size_t>(co) * cin + ci) * k;
            const double* xrow = x->data.data() + static_cast<size_t>(ci) * len;
            double* yrow = y.data() + static_cast<size_t>(co) * lout;
            for (int j = 0; j < k; ++j) {
                const double wv = wrow[j];
                if (wv == 0.0) continue;
                const double* xs = xrow + j - padding;
                for (int o = o_lo[j]; o <= o_hi[j]; ++o) yrow[o] += wv * xs[o * stride];
            }
        }
    }

    const bool needs = wants_grad(x) || wants_grad(w);
    TensorPtr xa = x, wa = w;
    auto out = record({cout, lout}, needs, nullptr, std::move(y));
    TensorPtr o = out;
    auto lo = std::make_shared<std::vector<int>>(o_lo);
    auto hi = std::make_shared<std::vector<int>>(o_hi);
    nodes_.back().back = [xa, wa, o, stride, padding, cin, len, cout, k, lout, lo, hi]() {
        const bool gx = xa->requires_grad;
        const bool gw = wa->requires_grad;
        if (gx) xa->ensure_grad();
        if (gw) wa->ensure_grad();
        (void)len;
        (void)lout;
        for (int co = 0; co < cout; ++co) {
            const double* gy = o->grad.data() + static_cast<size_t>(co) * lout;
            for (int ci = 0; ci < cin; ++ci) {
                const size_t wbase = (static_cast<size_t>(co) * cin + ci) * k;
                const double* xrow = xa->data.data() + static_cast<size_t>(ci) * len;
                double* gxr = gx ? xa->grad.data() + static_cast<size_t>(ci) * len : nullptr;
                for (int j = 0; j < k; ++j) {
                    const double wv = wa->data[wbase + j];
                    const int olo = (*lo)[j], ohi = (*hi)[j];
                    const int off = j - padding;
                    double wg = 0.0;
                    if (gx) {
                        double* gxs = gxr + off;
                        const double* xs = xrow + off;
                        for (int oo = olo; oo <= ohi; ++oo) {
                            gxs[oo * stride] += wv * gy[oo];
                            wg += xs[oo * stride] * gy[oo];
                        }
                    } else {
                        const double* xs = xrow + off;
                        for (int oo = olo; oo <= ohi; ++oo) wg += xs[oo * stride] * gy[oo];
                    }
                    if (gw) wa->grad[wbase + j] += wg;
                }
            }
        }
    };
    check_values(*out, "conv1d");
    return out;
}

TensorPtr Tape::linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    require_shape(x, 1, "linear/x");
    require_shape(w, 2, "linear/w");
    require_shape(b, 1, "linear/b");
    const int fin = x->dim(0), fout = w->dim(0);
    if (w->dim(1) != fin || b->dim(0) != fout) throw DataError("linear: shape mismatch");

    std::vector<double> y(static_cast<size_t>(fout));
    for (int r = 0; r < fout; ++r) {
        const double* wrow = w->data.data() + static_cast<size_t>(r) * fin;
        double s = b->data[r];
        for (int c = 0; c < fin; ++c) s += wrow[c] * x->data[c];
        y[r] = s;
    }

    const bool needs = wants_grad(x) || wants_grad(w) || wants_grad(b);
    TensorPtr xa = x, wa = w, ba = b;
    auto out = record({fout}, needs, nullptr, std::move(y));
    TensorPtr o = out;
    nodes_.back().back = [xa, wa, ba, o, fin, fout]() {
        const bool gx = xa->requires_grad;
        const bool gw = wa->requires_grad;
        const bool gb = ba->requires_grad;
        if (gx) xa->ensure_grad();
        if (gw) wa->ensure_grad();
        if (gb) ba->ensure_grad();
        for (int r = 0; r < fout; ++r) {
            const double g = o->grad[r];
            if (g == 0.0) continue;
            if (gb) ba->grad[r] += g;
            if (gx) {
                const double* wrow = wa->data.data() + static_cast<size_t>(r) * fin;
                double* gxr = xa->grad.data();
                for (int c = 0; c < fin; ++c) gxr[c] += g * wrow[c];
            }
            if (gw) {
                double* gwr = wa->grad.data() + static_cast<size_t>(r) * fin;
                const double* xd = xa->data.data();
                for (int c = 0; c < fin; ++c) gwr[c] += g * xd[c];
            }
        }
    };
    check_values(*out, "linear");
    return out;
}

TensorPtr Tape::batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                          BatchNormState& state, Mode mode) {
    require_shape(x, 2, "batchnorm/x");
    const int C = x->dim(0), L = x->dim(1);
    if (gamma->numel() != C || beta->numel() != C) throw DataError("batchnorm: gamma/beta size");
    if (static_cast<int>(state.running_mean.size()) != C) {
        throw DataError("batchnorm: state channel count mismatch");
    }
    if (mode == Mode::Train && L < 2) throw DataError("batchnorm: need L >= 2 to train");
    if (mode == Mode::Eval && !state.initialized) {
        throw NumericError("batchnorm: eval requested before any training step initialized stats");
    }

    auto mean = std::make_shared<std::vector<double>>(C);
    auto inv_std = std::make_shared<std::vector<double>>(C);
    std::vector<double> y(static_cast<size_t>(C) * L);
    const double eps = state.eps;
    for (int c = 0; c < C; ++c) {
        const double* row = x->data.data() + static_cast<size_t>(c) * L;
        double m, v;
        if (mode == Mode::Train) {
            m = 0.0;
            for (int t = 0; t < L; ++t) m += row[t];
            m /= L;
            v = 0.0;
            for (int t = 0; t < L; ++t) v += (row[t] - m) * (row[t] - m);
            v /= L;
            // torch-style running stats: unbiased variance in the average.
            const double unbiased = v * L / (L - 1);
            state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * m;
            state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            m = state.running_mean[c];
            v = state.running_var[c];
        }
        (*mean)[c] = m;
        (*inv_std)[c] = 1.0 / std::sqrt(v + eps);
        const double g = gamma->data[c], bta = beta->data[c], is = (*inv_std)[c];
        double* yrow = y.data() + static_cast<size_t>(c) * L;
        for (int t = 0; t < L; ++t) yrow[t] = g * (row[t] - m) * is + bta;
    }
    if (mode == Mode::Train) state.initialized = true;

    const bool needs = wants_grad(x) || wants_grad(gamma) || wants_grad(beta);
    TensorPtr xa = x, ga = gamma, ba = beta;
    auto out = record({C, L}, needs, nullptr, std::move(y));
    TensorPtr o = out;
    const bool train_mode = mode == Mode::Train;
    nodes_.back().back = [xa, ga, ba, o, mean, inv_std, C, L, train_mode]() {
        const bool gx = xa->requires_grad;
        const bool gg = ga->requires_grad;
        const bool gb = ba->requires_grad;
        if (gx) xa->ensure_grad();
        if (gg) ga->ensure_grad();
        if (gb) ba->ensure_grad();
        for (int c = 0; c < C; ++c) {
            const double m = (*mean)[c], is = (*inv_std)[c], g = ga->data[c];
            const double* row = xa->data.data() + static_cast<size_t>(c) * L;
            const double* gy = o->grad.data() + static_cast<size_t>(c) * L;
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (int t = 0; t < L; ++t) {
                sum_gy += gy[t];
                sum_gy_xhat += gy[t] * (row[t] - m) * is;
            }
            if (gb) ba->grad[c] += sum_gy;
            if (gg) ga->grad[c] += sum_gy_xhat;
            if (!gx) continue;
            double* gxr = xa->grad.data() + static_cast<size_t>(c) * L;
            if (train_mode) {
                // d/dx of per-channel standardization with batch statistics.
                for (int t = 0; t < L; ++t) {
                    const double xhat = (row[t] - m) * is;
                    gxr[t] += g * is * (gy[t] - sum_gy / L - xhat * sum_gy_xhat / L);
                }
            } else {
                for (int t = 0; t < L; ++t) gxr[t] += g * is * gy[t];
            }
        }
    };
    check_values(*out, "batchnorm");
    return out;
}

TensorPtr Tape::layernorm(const TensorPtr& x, double eps) {
    require_shape(x, 1, "layernorm/x");
    const int n = x->dim(0);
    if (n < 2) throw DataError("layernorm: need at least 2 elements");
    double m = 0.0;
    for (double v : x->data) m += v;
    m /= n;
    double var = 0.0;
    for (double v : x->data) var += (v - m) * (v - m);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    std::vector<double> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) y[i] = (x->data[i] - m) * is;

    TensorPtr xa = x;
    auto out = record({n}, wants_grad(x), nullptr, std::move(y));
    TensorPtr o = out;
    nodes_.back().back = [xa, o, m, is, n]() {
        if (!xa->requires_grad) return;
        xa->ensure_grad();
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            sum_gy += o->grad[i];
            sum_gy_xhat += o->grad[i] * (xa->data[i] - m) * is;
        }
        for (int i = 0; i < n; ++i) {
            const double xhat = (xa->data[i] - m) * is;
            xa->grad[i] += is * (o->grad[i] - sum_gy / n - xhat * sum_gy_xhat / n);
        }
    };
    check_values(*out, "layernorm");
    return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw DataError("add: shape mismatch");
    std::vector<double> y(a->data.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] + b->data[i];
    TensorPtr aa = a, bb = b;
    auto out = record(a->shape, wants_grad(a) || wants_grad(b), nullptr, std::move(y));
    TensorPtr o = out;
    nodes_.back().back = [aa, bb, o]() {
        if (aa->requires_grad) {
            aa->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) aa->grad[i] += o->grad[i];
        }
        if (bb->requires_grad) {
            bb->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) bb->grad[i] += o->grad[i];
        }
    };
    check_values(*out, "add");
    return out;
}

TensorPtr Tape::scale_sum(const TensorPtr& a, const TensorPtr& b, const TensorPtr& w1,
                          const TensorPtr& w2) {
    if (a->shape != b->shape) throw DataError("scale_sum: shape mismatch");
    if (w1->numel() != 1 || w2->numel() != 1) throw DataError("scale_sum: weights must be scalars");
    const double s1 = w1->data[0], s2 = w2->data[0];
    std::vector<double> y(a->data.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = s1 * a->data[i] + s2 * b->data[i];
    TensorPtr aa = a, bb = b, wa = w1, wb = w2;
    const bool needs = wants_grad(a) || wants_grad(b) || wants_grad(w1) || wants_grad(w2);
    auto out = record(a->shape, needs, nullptr, std::move(y));
    TensorPtr o = out;
    nodes_.back().back = [aa, bb, wa, wb, o, s1, s2]() {
        if (aa->requires_grad) {
            aa->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) aa->grad[i] += s1 * o->grad[i];
        }
        if (bb->requires_grad) {
            bb->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) bb->grad[i] += s2 * o->grad[i];
        }
        if (wa->requires_grad) {
            wa->ensure_grad();
            double s = 0.0;
            for (size_t i = 0; i < o->grad.size(); ++i) s += o->grad[i] * aa->data[i];
            wa->grad[0] += s;
        }
        if (wb->requires_grad) {
            wb->ensure_grad();
            double s = 0.0;
            for (size_t i = 0; i < o->grad.size(); ++i) s += o->grad[i] * bb->data[i];
            wb->grad[0] += s;
        }
    };
    check_values(*out, "scale_sum");
    return out;
}

TensorPtr Tape::leaky_relu(const TensorPtr& x, double slope) {
    std::vector<double> y(x->data.size());
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = x->data[i] > 0.0 ? x->data[i] : slope * x->data[i];
    }
    TensorPtr xa = x;
    auto out = record(x->shape, wants_grad(x), nullptr, std::move(y));
    TensorPtr o = out;
    nodes_.back().back = [xa, o, slope]() {
        if (!xa->requires_grad) return;
        xa->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) {
            xa->grad[i] += (xa->data[i] > 0.0 ? 1.0 : slope) * o->grad[i];
        }
    };
    check_values(*out, "leaky_relu");
    return out;
}

TensorPtr Tape::mse(const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape != target->shape) throw DataError("mse: shape mismatch");
    const size_t n = pred->data.size();
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = pred->data[i] - target->data[i];
        s += d * d;
    }
    TensorPtr pa = pred, ta = target;
    auto out = record({1}, wants_grad(pred) || wants_grad(target), nullptr,
                      {s / static_cast<double>(n)});
    TensorPtr o = out;
    nodes_.back().back = [pa, ta, o, n]() {
        const double g = o->grad[0] * 2.0 / static_cast<double>(n);
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n; ++i) pa->grad[i] += g * (pa->data[i] - ta->data[i]);
        }
        if (ta->requires_grad) {
            ta->ensure_grad();
            for (size_t i = 0; i < n; ++i) ta->grad[i] -= g * (pa->data[i] - ta->data[i]);
        }
    };
    check_values(*out, "mse");
    return out;
}

TensorPtr Tape::sum(const TensorPtr& x) {
    double s = 0.0;
    for (double v : x->data) s += v;
    TensorPtr xa = x;
    auto out = record({1}, wants_grad(x), nullptr, {s});
    TensorPtr o = out;
    nodes_.back().back = [xa, o]() {
        if (!xa->requires_grad) return;
        xa->ensure_grad();
        for (size_t i = 0; i < xa->grad.size(); ++i) xa->grad[i] += o->grad[0];
    };
    check_values(*out, "sum");
    return out;
}

TensorPtr Tape::reshape(const TensorPtr& x, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != x->numel()) throw DataError("reshape: element count mismatch");
    TensorPtr xa = x;
    auto out = record(std::move(shape), wants_grad(x), nullptr, x->data);
    TensorPtr o = out;
    nodes_.back().back = [xa, o]() {
        if (!xa->requires_grad) return;
        xa->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) xa->grad[i] += o->grad[i];
    };
    return out;
}

void Tape::backward(const TensorPtr& loss) {
    if (loss->numel() != 1) throw DataError("backward: loss must be a scalar");
    // Intermediates get fresh zero grads; user tensors keep accumulating.
    for (auto& node : nodes_) {
        if (node.out != loss) node.out->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->out->grad.empty()) continue;
        // Intermediates behave as grad-carrying links even when the caller
        // did not mark them; recorded outputs own requires_grad from record().
        if (it->back) it->back();
    }
}

}  // namespace gdn::autograd
