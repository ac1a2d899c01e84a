#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gdn::autograd {

// Dense row-major real tensor. Gradients live on the tensor itself and
// survive tape destruction, so parameters accumulate across backward passes
// until zero_grad().
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily; empty means "no grad yet"
    bool requires_grad = false;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values,
                      bool requires_grad = false);
TensorPtr scalar_tensor(double value, bool requires_grad = false);

enum class Mode { Train, Eval };

// Per-channel running statistics for batch normalization.
struct BatchNormState {
    std::vector<double> running_mean, running_var;
    bool initialized = false;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(int channels = 0, double momentum_ = 0.1, double eps_ = 1e-5)
        : running_mean(channels, 0.0), running_var(channels, 1.0), momentum(momentum_), eps(eps_) {}
};

// Records one forward pass; backward() replays the recorded ops in reverse.
// A tape is single-threaded and intended to be discarded after backward.
class Tape {
  public:
    explicit Tape(bool check_finite = true);

    // y[co, o] = sum_{ci, j} w[co, ci, j] * x[ci, o*stride + j - padding]
    TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, int stride, int padding);
    TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);
    TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                        BatchNormState& state, Mode mode);
    TensorPtr layernorm(const TensorPtr& x, double eps);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale_sum(const TensorPtr& a, const TensorPtr& b, const TensorPtr& w1,
                        const TensorPtr& w2);
    TensorPtr leaky_relu(const TensorPtr& x, double slope);
    TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);
    TensorPtr sum(const TensorPtr& x);
    TensorPtr reshape(const TensorPtr& x, std::vector<int> shape);

    void backward(const TensorPtr& loss);

  private:
    struct Node {
        TensorPtr out;
        std::function<void()> back;
    };
    std::vector<Node> nodes_;
    bool check_finite_;

    TensorPtr record(std::vector<int> shape, bool needs_grad, std::function<void()> back,
                     std::vector<double> values);
    void check_values(const Tensor& t, const char* op) const;
};

}  // namespace gdn::autograd
