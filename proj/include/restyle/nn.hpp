#pragma once

#include <functional>
#include <string>
#include <vector>

#include "restyle/rng.hpp"
#include "restyle/tensor.hpp"

namespace restyle::nn {

// Named parameter arrays. Checkpointing walks the entries in order.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
    };

    int add(std::string name, Tensor init) {
        entries_.push_back({std::move(name), std::move(init)});
        return static_cast<int>(entries_.size()) - 1;
    }

    Tensor& operator[](int i) { return entries_[static_cast<std::size_t>(i)].value; }
    const Tensor& operator[](int i) const { return entries_[static_cast<std::size_t>(i)].value; }

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    double checksum() const;

private:
    std::vector<Entry> entries_;
};

// Gradient buffers matching a ParamStore layout.
class GradStore {
public:
    GradStore() = default;
    explicit GradStore(const ParamStore& p) {
        grads_.reserve(p.size());
        for (const auto& e : p.entries()) grads_.emplace_back(e.value.shape());
    }

    Tensor& operator[](int i) { return grads_[static_cast<std::size_t>(i)]; }
    const Tensor& operator[](int i) const { return grads_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return grads_.size(); }

    void zero() {
        for (auto& g : grads_) g.zero();
    }
    void add(const GradStore& o) {
        for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += o.grads_[i];
    }
    void scale(double s) {
        for (auto& g : grads_) g *= s;
    }

private:
    std::vector<Tensor> grads_;
};

// ---- layers -----------------------------------------------------------

struct DenseCache {
    Tensor x;
};

// y = W x + b, W: (out, in), x: (in).
Tensor dense_forward(const Tensor& W, const Tensor& b, const Tensor& x, DenseCache* cache);
// Accumulates into dW/db when non-null; returns dx.
Tensor dense_backward(const Tensor& W, const DenseCache& cache, const Tensor& dy,
                      Tensor* dW, Tensor* db);

struct ConvCache {
    Tensor col;  // (IC*KH*KW, OH*OW)
    std::vector<int> in_shape;
};

// x: (IC, H, W), W: (OC, IC, KH, KW), b: (OC). Zero padding.
Tensor conv2d_forward(const Tensor& W, const Tensor& b, const Tensor& x,
                      int stride, int pad, ConvCache* cache);
Tensor conv2d_backward(const Tensor& W, const ConvCache& cache, const Tensor& dy,
                       int stride, int pad, Tensor* dW, Tensor* db, bool need_dx);

struct ActCache {
    Tensor y;
};

Tensor leaky_relu_forward(const Tensor& x, double slope, ActCache* cache);
Tensor leaky_relu_backward(const ActCache& cache, double slope, const Tensor& dy);
Tensor tanh_forward(const Tensor& x, ActCache* cache);
Tensor tanh_backward(const ActCache& cache, const Tensor& dy);

Tensor upsample2x(const Tensor& x);            // nearest neighbour, (C,H,W)
Tensor upsample2x_backward(const Tensor& dy);  // sums 2x2 cells

// Instance-norm + style modulation. The style vector is mapped through an
// affine (W: (2C, d), b: (2C)) to per-channel scale/shift; scale acts as
// (1 + s) around identity.
struct AdainCache {
    Tensor xhat;     // normalized features
    Tensor inv_std;  // per channel
    Tensor gamma;    // per channel, = 1 + scale
    Tensor style;
};

Tensor adain_forward(const Tensor& x, const Tensor& style, const Tensor& W,
                     const Tensor& b, AdainCache* cache);
// Returns dx; accumulates into dW/db/dstyle when non-null.
Tensor adain_backward(const Tensor& W, const AdainCache& cache, const Tensor& dy,
                      Tensor* dW, Tensor* db, Tensor* dstyle);

// ---- init helpers -----------------------------------------------------

Tensor he_conv_init(Rng& rng, int oc, int ic, int kh, int kw);
Tensor he_dense_init(Rng& rng, int out, int in);

// ---- optimizer --------------------------------------------------------

class Adam {
public:
    explicit Adam(const ParamStore& params, double lr = 1e-3,
                  double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(ParamStore& params, const GradStore& grads);
    double lr;

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Deterministic fan-out: results land in index order regardless of thread
// count, so reductions are reproducible.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

}  // namespace restyle::nn
