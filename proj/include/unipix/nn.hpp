// SPDX-License-Identifier: Apache-2.0
//
// Minimal layer library with hand-written backward passes. Activations are
// row-major (rows = tokens, cols = features); a batch of B sequences of S
// tokens is stacked into B*S rows. Parameters live in one flat buffer so the
// optimizer and checkpointing see a single contiguous vector.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "unipix/error.hpp"
#include "unipix/rng.hpp"
#include "unipix/tensor.hpp"

namespace unipix::nn {

struct ParamInfo {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

struct ParamRef {
    std::size_t index = 0;
};

// Every tensor starts on a 64-byte boundary. Eigen's vectorized reductions
// peel an address-dependent head off unaligned data, so without this the
// same parameters could give different bits in different allocations.
template <typename T>
using AlignedBuffer = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
class ParameterStore {
public:
    static constexpr std::size_t kAlign = 64 / sizeof(T);

    ParamRef add(std::string name, Eigen::Index rows, Eigen::Index cols) {
        const std::size_t offset = (values_.size() + kAlign - 1) / kAlign * kAlign;
        ParamInfo info{std::move(name), rows, cols, offset};
        count_ += info.size();
        values_.resize(offset + info.size(), T(0));
        grads_.resize(values_.size(), T(0));
        entries_.push_back(std::move(info));
        return ParamRef{entries_.size() - 1};
    }

    MatMap<T> value(ParamRef r) { return map(values_, r); }
    ConstMatMap<T> value(ParamRef r) const { return cmap(values_, r); }
    MatMap<T> grad(ParamRef r) { return map(grads_, r); }
    ConstMatMap<T> grad(ParamRef r) const { return cmap(grads_, r); }

    // Flat buffers, including the zero padding between tensors.
    AlignedBuffer<T>& values() { return values_; }
    const AlignedBuffer<T>& values() const { return values_; }
    AlignedBuffer<T>& grads() { return grads_; }
    const AlignedBuffer<T>& grads() const { return grads_; }
    const std::vector<ParamInfo>& entries() const { return entries_; }
    std::size_t size() const { return values_.size(); }
    // Number of trainable scalars, excluding padding.
    std::size_t count() const { return count_; }

    void zero_grad() { std::fill(grads_.begin(), grads_.end(), T(0)); }

    const ParamInfo* find(const std::string& name) const {
        for (const auto& e : entries_)
            if (e.name == name) return &e;
        return nullptr;
    }

private:
    MatMap<T> map(AlignedBuffer<T>& buf, ParamRef r) {
        const ParamInfo& e = entries_.at(r.index);
        return MatMap<T>(buf.data() + e.offset, e.rows, e.cols);
    }
    ConstMatMap<T> cmap(const AlignedBuffer<T>& buf, ParamRef r) const {
        const ParamInfo& e = entries_.at(r.index);
        return ConstMatMap<T>(buf.data() + e.offset, e.rows, e.cols);
    }

    std::vector<ParamInfo> entries_;
    AlignedBuffer<T> values_;
    AlignedBuffer<T> grads_;
    std::size_t count_ = 0;
};

template <typename T>
void fill_uniform(MatMap<T> m, Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

template <typename T>
void fill_normal(MatMap<T> m, Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal() * stddev);
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Mat<T> silu(const Mat<T>& x) {
    return x.unaryExpr([](T v) { return v / (T(1) + std::exp(-v)); });
}

template <typename T>
Mat<T> silu_backward(const Mat<T>& x, const Mat<T>& dy) {
    return dy.binaryExpr(x, [](T g, T v) {
        const T s = T(1) / (T(1) + std::exp(-v));
        return g * s * (T(1) + v * (T(1) - s));
    });
}

// tanh approximation of GELU, written as array expressions so Eigen can
// vectorize the tanh.
template <typename T>
Mat<T> gelu(const Mat<T>& x) {
    const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    const auto xa = x.array();
    const auto th = (k * (xa + T(0.044715) * xa.cube())).tanh();
    return (T(0.5) * xa * (T(1) + th)).matrix();
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy) {
    const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    const auto xa = x.array();
    const Mat<T> th = (k * (xa + T(0.044715) * xa.cube())).tanh().matrix();
    const auto ta = th.array();
    const auto du = k * (T(1) + T(3) * T(0.044715) * xa.square());
    return (dy.array() * (T(0.5) * (T(1) + ta) + T(0.5) * xa * (T(1) - ta.square()) * du)).matrix();
}

// ---------------------------------------------------------------------------
// Linear: y = x W + b, W is (in x out).

template <typename T>
struct Linear {
    ParamRef w;
    ParamRef b;
    Eigen::Index in = 0;
    Eigen::Index out = 0;

    static Linear create(ParameterStore<T>& p, const std::string& name, Eigen::Index in, Eigen::Index out) {
        Linear l;
        l.in = in;
        l.out = out;
        l.w = p.add(name + ".weight", in, out);
        l.b = p.add(name + ".bias", 1, out);
        return l;
    }

    void init_xavier(ParameterStore<T>& p, Rng& rng) const {
        fill_uniform(p.value(w), rng, std::sqrt(6.0 / static_cast<double>(in + out)));
        p.value(b).setZero();
    }

    void init_zero(ParameterStore<T>& p) const {
        p.value(w).setZero();
        p.value(b).setZero();
    }

    Mat<T> forward(const ParameterStore<T>& p, const Mat<T>& x) const {
        if (x.cols() != in) fail(ErrorCode::shape_mismatch, "linear: input width mismatch");
        Mat<T> y(x.rows(), out);
        y.noalias() = x * p.value(w);
        y.rowwise() += p.value(b).row(0);
        return y;
    }

    // Accumulates parameter gradients; returns dL/dx.
    Mat<T> backward(ParameterStore<T>& p, const Mat<T>& x, const Mat<T>& dy, bool need_dx = true) const {
        p.grad(w).noalias() += x.transpose() * dy;
        p.grad(b).row(0) += dy.colwise().sum();
        if (!need_dx) return {};
        Mat<T> dx(dy.rows(), in);
        dx.noalias() = dy * p.value(w).transpose();
        return dx;
    }
};

// ---------------------------------------------------------------------------
// LayerNorm over the feature axis.

template <typename T>
struct NormCache {
    Mat<T> xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
};

template <typename T>
Mat<T> normalize_rows(const Mat<T>& x, NormCache<T>& cache, T eps = T(1e-6)) {
    const Eigen::Index n = x.cols();
    cache.xhat.resize(x.rows(), n);
    cache.rstd.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mean = x.row(r).mean();
        const T var = (x.row(r).array() - mean).square().mean();
        const T rstd = T(1) / std::sqrt(var + eps);
        cache.rstd(r) = rstd;
        cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
    }
    return cache.xhat;
}

template <typename T>
Mat<T> normalize_rows_backward(const Mat<T>& dxhat, const NormCache<T>& cache) {
    Mat<T> dx(dxhat.rows(), dxhat.cols());
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const T m1 = dxhat.row(r).mean();
        const T m2 = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
        dx.row(r) = cache.rstd(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
    }
    return dx;
}

template <typename T>
struct LayerNorm {
    ParamRef gamma;
    ParamRef beta;

    static LayerNorm create(ParameterStore<T>& p, const std::string& name, Eigen::Index width) {
        LayerNorm ln;
        ln.gamma = p.add(name + ".gamma", 1, width);
        ln.beta = p.add(name + ".beta", 1, width);
        return ln;
    }

    void init(ParameterStore<T>& p) const {
        p.value(gamma).setOnes();
        p.value(beta).setZero();
    }

    Mat<T> forward(const ParameterStore<T>& p, const Mat<T>& x, NormCache<T>& cache) const {
        Mat<T> y = normalize_rows(x, cache);
        y.array().rowwise() *= p.value(gamma).row(0).array();
        y.rowwise() += p.value(beta).row(0);
        return y;
    }

    Mat<T> backward(ParameterStore<T>& p, const Mat<T>& dy, const NormCache<T>& cache) const {
        p.grad(gamma).row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
        p.grad(beta).row(0) += dy.colwise().sum();
        Mat<T> dxhat = dy;
        dxhat.array().rowwise() *= p.value(gamma).row(0).array();
        return normalize_rows_backward(dxhat, cache);
    }
};

// ---------------------------------------------------------------------------
// Per-sequence affine modulation: y = x * (1 + scale_b) + shift_b, where the
// b-th block of `seq` rows uses row b of shift/scale.

template <typename T>
Mat<T> modulate(const Mat<T>& x, const Mat<T>& shift, const Mat<T>& scale, Eigen::Index seq) {
    Mat<T> y(x.rows(), x.cols());
    for (Eigen::Index b = 0; b < shift.rows(); ++b) {
        auto xb = x.middleRows(b * seq, seq);
        auto yb = y.middleRows(b * seq, seq);
        yb = (xb.array().rowwise() * (scale.row(b).array() + T(1))).matrix();
        yb.rowwise() += shift.row(b);
    }
    return y;
}

// Returns dx and writes per-sequence dshift/dscale.
template <typename T>
Mat<T> modulate_backward(const Mat<T>& x, const Mat<T>& scale, const Mat<T>& dy, Eigen::Index seq, Mat<T>& dshift,
                         Mat<T>& dscale) {
    Mat<T> dx(dy.rows(), dy.cols());
    dshift.resize(scale.rows(), scale.cols());
    dscale.resize(scale.rows(), scale.cols());
    for (Eigen::Index b = 0; b < scale.rows(); ++b) {
        auto dyb = dy.middleRows(b * seq, seq);
        dshift.row(b) = dyb.colwise().sum();
        dscale.row(b) = (dyb.array() * x.middleRows(b * seq, seq).array()).colwise().sum().matrix();
        dx.middleRows(b * seq, seq) = (dyb.array().rowwise() * (scale.row(b).array() + T(1))).matrix();
    }
    return dx;
}

// y = x * gate_b (per sequence); used for gated residual branches.
template <typename T>
Mat<T> gate_rows(const Mat<T>& x, const Mat<T>& gate, Eigen::Index seq) {
    Mat<T> y(x.rows(), x.cols());
    for (Eigen::Index b = 0; b < gate.rows(); ++b) {
        y.middleRows(b * seq, seq) = (x.middleRows(b * seq, seq).array().rowwise() * gate.row(b).array()).matrix();
    }
    return y;
}

template <typename T>
Mat<T> gate_rows_backward(const Mat<T>& x, const Mat<T>& gate, const Mat<T>& dy, Eigen::Index seq, Mat<T>& dgate) {
    dgate.resize(gate.rows(), gate.cols());
    for (Eigen::Index b = 0; b < gate.rows(); ++b) {
        dgate.row(b) = (dy.middleRows(b * seq, seq).array() * x.middleRows(b * seq, seq).array()).colwise().sum().matrix();
    }
    return gate_rows(dy, gate, seq);
}

// ---------------------------------------------------------------------------
// Multi-head self-attention within each sequence of the batch.

template <typename T>
struct Attention {
    Linear<T> qkv;
    Linear<T> proj;
    Eigen::Index width = 0;
    Eigen::Index heads = 1;

    struct Cache {
        Mat<T> x;
        Mat<T> qkv;
        Mat<T> ctx;
        std::vector<Mat<T>> probs;  // [b * heads + h], seq x seq
    };

    static Attention create(ParameterStore<T>& p, const std::string& name, Eigen::Index width, Eigen::Index heads) {
        if (heads <= 0 || width % heads != 0) fail(ErrorCode::config_error, "width must be divisible by heads");
        Attention a;
        a.width = width;
        a.heads = heads;
        a.qkv = Linear<T>::create(p, name + ".qkv", width, 3 * width);
        a.proj = Linear<T>::create(p, name + ".proj", width, width);
        return a;
    }

    void init(ParameterStore<T>& p, Rng& rng) const {
        qkv.init_xavier(p, rng);
        proj.init_xavier(p, rng);
    }

    Mat<T> forward(const ParameterStore<T>& p, const Mat<T>& x, Eigen::Index batch, Eigen::Index seq,
                   Cache& cache) const {
        const Eigen::Index dh = width / heads;
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        cache.x = x;
        cache.qkv = qkv.forward(p, x);
        cache.ctx.resize(x.rows(), width);
        cache.probs.assign(static_cast<std::size_t>(batch * heads), Mat<T>());
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index h = 0; h < heads; ++h) {
                const auto q = cache.qkv.block(b * seq, h * dh, seq, dh);
                const auto k = cache.qkv.block(b * seq, width + h * dh, seq, dh);
                const auto v = cache.qkv.block(b * seq, 2 * width + h * dh, seq, dh);
                Mat<T>& pr = cache.probs[static_cast<std::size_t>(b * heads + h)];
                pr.noalias() = q * k.transpose();
                pr *= scale;
                for (Eigen::Index r = 0; r < seq; ++r) {
                    const T mx = pr.row(r).maxCoeff();
                    pr.row(r) = (pr.row(r).array() - mx).exp();
                    pr.row(r) /= pr.row(r).sum();
                }
                cache.ctx.block(b * seq, h * dh, seq, dh).noalias() = pr * v;
            }
        }
        return proj.forward(p, cache.ctx);
    }

    Mat<T> backward(ParameterStore<T>& p, const Mat<T>& dy, Eigen::Index batch, Eigen::Index seq,
                    const Cache& cache) const {
        const Eigen::Index dh = width / heads;
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        const Mat<T> dctx = proj.backward(p, cache.ctx, dy);
        Mat<T> dqkv(dy.rows(), 3 * width);
        Mat<T> dp;
        Mat<T> ds;
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index h = 0; h < heads; ++h) {
                const auto q = cache.qkv.block(b * seq, h * dh, seq, dh);
                const auto k = cache.qkv.block(b * seq, width + h * dh, seq, dh);
                const auto v = cache.qkv.block(b * seq, 2 * width + h * dh, seq, dh);
                const Mat<T>& pr = cache.probs[static_cast<std::size_t>(b * heads + h)];
                const auto dc = dctx.block(b * seq, h * dh, seq, dh);
                dp.noalias() = dc * v.transpose();
                dqkv.block(b * seq, 2 * width + h * dh, seq, dh).noalias() = pr.transpose() * dc;
                ds = pr.cwiseProduct(dp);
                const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = ds.rowwise().sum();
                ds.noalias() -= (pr.array().colwise() * rowdot.array()).matrix();
                ds *= scale;
                dqkv.block(b * seq, h * dh, seq, dh).noalias() = ds * k;
                dqkv.block(b * seq, width + h * dh, seq, dh).noalias() = ds.transpose() * q;
            }
        }
        return qkv.backward(p, cache.x, dqkv);
    }
};

// ---------------------------------------------------------------------------
// Two-layer GELU MLP.

template <typename T>
struct Mlp {
    Linear<T> fc1;
    Linear<T> fc2;

    struct Cache {
        Mat<T> x;
        Mat<T> pre;
        Mat<T> act;
    };

    static Mlp create(ParameterStore<T>& p, const std::string& name, Eigen::Index width, Eigen::Index hidden) {
        Mlp m;
        m.fc1 = Linear<T>::create(p, name + ".fc1", width, hidden);
        m.fc2 = Linear<T>::create(p, name + ".fc2", hidden, width);
        return m;
    }

    void init(ParameterStore<T>& p, Rng& rng) const {
        fc1.init_xavier(p, rng);
        fc2.init_xavier(p, rng);
    }

    Mat<T> forward(const ParameterStore<T>& p, const Mat<T>& x, Cache& cache) const {
        cache.x = x;
        cache.pre = fc1.forward(p, x);
        cache.act = gelu(cache.pre);
        return fc2.forward(p, cache.act);
    }

    Mat<T> backward(ParameterStore<T>& p, const Mat<T>& dy, const Cache& cache) const {
        const Mat<T> dact = fc2.backward(p, cache.act, dy);
        return fc1.backward(p, cache.x, gelu_backward(cache.pre, dact));
    }
};

// ---------------------------------------------------------------------------
// Fixed sinusoidal encodings.

// (positions x dim) table; dim must be even.
template <typename T>
Mat<T> sincos_1d(Eigen::Index positions, Eigen::Index dim) {
    Mat<T> pe(positions, dim);
    const Eigen::Index half = dim / 2;
    for (Eigen::Index pos = 0; pos < positions; ++pos) {
        for (Eigen::Index i = 0; i < half; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
            pe(pos, i) = static_cast<T>(std::sin(static_cast<double>(pos) * freq));
            pe(pos, half + i) = static_cast<T>(std::cos(static_cast<double>(pos) * freq));
        }
    }
    return pe;
}

// Row-major grid positions; first half of the features encodes the row, second half the column.
template <typename T>
Mat<T> sincos_2d(Eigen::Index grid_h, Eigen::Index grid_w, Eigen::Index dim) {
    const Eigen::Index half = dim / 2;
    const Mat<T> rows = sincos_1d<T>(grid_h, half);
    const Mat<T> cols = sincos_1d<T>(grid_w, half);
    Mat<T> pe(grid_h * grid_w, dim);
    for (Eigen::Index y = 0; y < grid_h; ++y) {
        for (Eigen::Index x = 0; x < grid_w; ++x) {
            pe.row(y * grid_w + x).head(half) = rows.row(y);
            pe.row(y * grid_w + x).tail(half) = cols.row(x);
        }
    }
    return pe;
}

// Diffusion-time features: [cos(1000 t f_i), sin(1000 t f_i)].
template <typename T>
Mat<T> timestep_features(const std::vector<T>& t, Eigen::Index dim) {
    const Eigen::Index half = dim / 2;
    Mat<T> out(static_cast<Eigen::Index>(t.size()), dim);
    for (Eigen::Index b = 0; b < out.rows(); ++b) {
        for (Eigen::Index i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
            const double arg = 1000.0 * static_cast<double>(t[static_cast<std::size_t>(b)]) * freq;
            out(b, i) = static_cast<T>(std::cos(arg));
            out(b, half + i) = static_cast<T>(std::sin(arg));
        }
    }
    return out;
}

}  // namespace unipix::nn
