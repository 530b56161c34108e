#include "restyle/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <thread>

namespace restyle::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

double ParamStore::checksum() const {
    double s = 0.0;
    for (const auto& e : entries_) {
        std::size_t i = 0;
        for (std::size_t j = 0; j < e.value.numel(); ++j, ++i)
            s += e.value[j] * std::cos(static_cast<double>(i % 97));
    }
    return s;
}

// ---- dense -------------------------------------------------------------

Tensor dense_forward(const Tensor& W, const Tensor& b, const Tensor& x, DenseCache* cache) {
    const int out = W.dim(0), in = W.dim(1);
    if (static_cast<int>(x.numel()) != in)
        throw std::invalid_argument("dense_forward: input size mismatch");
    Tensor y({out});
    ConstMatMap Wm(W.data(), out, in);
    ConstVecMap xv(x.data(), in);
    VecMap yv(y.data(), out);
    yv = Wm * xv + ConstVecMap(b.data(), out);
    if (cache) cache->x = x;
    return y;
}

Tensor dense_backward(const Tensor& W, const DenseCache& cache, const Tensor& dy,
                      Tensor* dW, Tensor* db) {
    const int out = W.dim(0), in = W.dim(1);
    ConstMatMap Wm(W.data(), out, in);
    ConstVecMap dyv(dy.data(), out);
    ConstVecMap xv(cache.x.data(), in);
    if (dW) MatMap(dW->data(), out, in).noalias() += dyv * xv.transpose();
    if (db) VecMap(db->data(), out) += dyv;
    Tensor dx(cache.x.shape());
    VecMap(dx.data(), in).noalias() = Wm.transpose() * dyv;
    return dx;
}

// ---- conv2d ------------------------------------------------------------

static Tensor im2col(const Tensor& x, int kh, int kw, int stride, int pad,
                     int oh, int ow) {
    const int ic = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor col({ic * kh * kw, oh * ow});
    double* cd = col.data();
    for (int c = 0; c < ic; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const std::size_t row = (static_cast<std::size_t>(c) * kh + ky) * kw + kx;
                double* dst = cd + row * static_cast<std::size_t>(oh) * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) {
                        for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0.0;
                        continue;
                    }
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        dst[oy * ow + ox] = (ix < 0 || ix >= w) ? 0.0 : x.at3(c, iy, ix);
                    }
                }
            }
        }
    }
    return col;
}

static void col2im(const Tensor& col, int kh, int kw, int stride, int pad,
                   int oh, int ow, Tensor& dx) {
    const int ic = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
    const double* cd = col.data();
    for (int c = 0; c < ic; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const std::size_t row = (static_cast<std::size_t>(c) * kh + ky) * kw + kx;
                const double* src = cd + row * static_cast<std::size_t>(oh) * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        dx.at3(c, iy, ix) += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

Tensor conv2d_forward(const Tensor& W, const Tensor& b, const Tensor& x,
                      int stride, int pad, ConvCache* cache) {
    const int oc = W.dim(0), ic = W.dim(1), kh = W.dim(2), kw = W.dim(3);
    if (x.dim(0) != ic)
        throw std::invalid_argument("conv2d_forward: channel mismatch");
    const int oh = (x.dim(1) + 2 * pad - kh) / stride + 1;
    const int ow = (x.dim(2) + 2 * pad - kw) / stride + 1;
    Tensor col = im2col(x, kh, kw, stride, pad, oh, ow);
    Tensor y({oc, oh, ow});
    ConstMatMap Wm(W.data(), oc, ic * kh * kw);
    ConstMatMap Cm(col.data(), ic * kh * kw, oh * ow);
    MatMap Ym(y.data(), oc, oh * ow);
    Ym.noalias() = Wm * Cm;
    Ym.colwise() += ConstVecMap(b.data(), oc);
    if (cache) {
        cache->col = std::move(col);
        cache->in_shape = x.shape();
    }
    return y;
}

Tensor conv2d_backward(const Tensor& W, const ConvCache& cache, const Tensor& dy,
                       int stride, int pad, Tensor* dW, Tensor* db, bool need_dx) {
    const int oc = W.dim(0), ic = W.dim(1), kh = W.dim(2), kw = W.dim(3);
    const int oh = dy.dim(1), ow = dy.dim(2);
    ConstMatMap dYm(dy.data(), oc, oh * ow);
    ConstMatMap Cm(cache.col.data(), ic * kh * kw, oh * ow);
    if (dW) MatMap(dW->data(), oc, ic * kh * kw).noalias() += dYm * Cm.transpose();
    if (db) VecMap(db->data(), oc) += dYm.rowwise().sum();
    Tensor dx;
    if (need_dx) {
        Tensor dcol({ic * kh * kw, oh * ow});
        MatMap(dcol.data(), ic * kh * kw, oh * ow).noalias() =
            ConstMatMap(W.data(), oc, ic * kh * kw).transpose() * dYm;
        dx = Tensor(cache.in_shape);
        col2im(dcol, kh, kw, stride, pad, oh, ow, dx);
    }
    return dx;
}

// ---- activations -------------------------------------------------------

Tensor leaky_relu_forward(const Tensor& x, double slope, ActCache* cache) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
    if (cache) cache->y = y;
    return y;
}

Tensor leaky_relu_backward(const ActCache& cache, double slope, const Tensor& dy) {
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i)
        dx[i] = cache.y[i] >= 0.0 ? dy[i] : slope * dy[i];
    return dx;
}

Tensor tanh_forward(const Tensor& x, ActCache* cache) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    if (cache) cache->y = y;
    return y;
}

Tensor tanh_backward(const ActCache& cache, const Tensor& dy) {
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i)
        dx[i] = dy[i] * (1.0 - cache.y[i] * cache.y[i]);
    return dx;
}

Tensor upsample2x(const Tensor& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor y({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                const double v = x.at3(ch, iy, ix);
                y.at3(ch, 2 * iy, 2 * ix) = v;
                y.at3(ch, 2 * iy, 2 * ix + 1) = v;
                y.at3(ch, 2 * iy + 1, 2 * ix) = v;
                y.at3(ch, 2 * iy + 1, 2 * ix + 1) = v;
            }
    return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
    const int c = dy.dim(0), h = dy.dim(1) / 2, w = dy.dim(2) / 2;
    Tensor dx({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix)
                dx.at3(ch, iy, ix) = dy.at3(ch, 2 * iy, 2 * ix) + dy.at3(ch, 2 * iy, 2 * ix + 1) +
                                     dy.at3(ch, 2 * iy + 1, 2 * ix) +
                                     dy.at3(ch, 2 * iy + 1, 2 * ix + 1);
    return dx;
}

// ---- adain -------------------------------------------------------------

static constexpr double kNormEps = 1e-8;

Tensor adain_forward(const Tensor& x, const Tensor& style, const Tensor& W,
                     const Tensor& b, AdainCache* cache) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int n = h * w;
    Tensor affine = dense_forward(W, b, style, nullptr);  // (2C)
    Tensor xhat(x.shape());
    Tensor inv_std({c});
    Tensor gamma({c});
    Tensor y(x.shape());
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = x.data() + static_cast<std::size_t>(ch) * n;
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += xp[i];
        mu /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) var += (xp[i] - mu) * (xp[i] - mu);
        var /= n;
        const double is = 1.0 / std::sqrt(var + kNormEps);
        inv_std[static_cast<std::size_t>(ch)] = is;
        const double g = 1.0 + affine[static_cast<std::size_t>(ch)];
        const double beta = affine[static_cast<std::size_t>(c + ch)];
        gamma[static_cast<std::size_t>(ch)] = g;
        double* hp = xhat.data() + static_cast<std::size_t>(ch) * n;
        double* yp = y.data() + static_cast<std::size_t>(ch) * n;
        for (int i = 0; i < n; ++i) {
            hp[i] = (xp[i] - mu) * is;
            yp[i] = g * hp[i] + beta;
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->gamma = std::move(gamma);
        cache->style = style;
    }
    return y;
}

Tensor adain_backward(const Tensor& W, const AdainCache& cache, const Tensor& dy,
                      Tensor* dW, Tensor* db, Tensor* dstyle) {
    const int c = dy.dim(0), h = dy.dim(1), w = dy.dim(2);
    const int n = h * w;
    Tensor daffine({2 * c});
    Tensor dx(dy.shape());
    for (int ch = 0; ch < c; ++ch) {
        const double* hp = cache.xhat.data() + static_cast<std::size_t>(ch) * n;
        const double* dyp = dy.data() + static_cast<std::size_t>(ch) * n;
        double* dxp = dx.data() + static_cast<std::size_t>(ch) * n;
        const double g = cache.gamma[static_cast<std::size_t>(ch)];
        const double is = cache.inv_std[static_cast<std::size_t>(ch)];
        double sum_dy = 0.0, sum_dyh = 0.0;
        for (int i = 0; i < n; ++i) {
            sum_dy += dyp[i];
            sum_dyh += dyp[i] * hp[i];
        }
        daffine[static_cast<std::size_t>(ch)] = sum_dyh;      // dgamma
        daffine[static_cast<std::size_t>(c + ch)] = sum_dy;   // dbeta
        // d xhat = g * dy; instance-norm backward
        const double k = g * is / n;
        for (int i = 0; i < n; ++i)
            dxp[i] = k * (n * dyp[i] - sum_dy - hp[i] * sum_dyh);
    }
    DenseCache dc;
    dc.x = cache.style;
    Tensor ds = dense_backward(W, dc, daffine, dW, db);
    if (dstyle) *dstyle += ds;
    return dx;
}

// ---- init --------------------------------------------------------------

Tensor he_conv_init(Rng& rng, int oc, int ic, int kh, int kw) {
    Tensor w({oc, ic, kh, kw});
    const double std = std::sqrt(2.0 / (ic * kh * kw));
    rng.fill_gaussian(w, std);
    return w;
}

Tensor he_dense_init(Rng& rng, int out, int in) {
    Tensor w({out, in});
    const double std = std::sqrt(2.0 / in);
    rng.fill_gaussian(w, std);
    return w;
}

// ---- Adam --------------------------------------------------------------

Adam::Adam(const ParamStore& params, double lr_, double beta1, double beta2, double eps)
    : lr(lr_), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& e : params.entries()) {
        m_.emplace_back(e.value.shape());
        v_.emplace_back(e.value.shape());
    }
}

void Adam::step(ParamStore& params, const GradStore& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& val = params[static_cast<int>(p)];
        const Tensor& g = grads[static_cast<int>(p)];
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < val.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            val[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

// ---- parallel_for ------------------------------------------------------

void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
    if (n_threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = std::min(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += workers) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace restyle::nn
