#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pyrocast/adam.hpp"
#include "pyrocast/graph.hpp"
#include "pyrocast/kernels.hpp"
#include "pyrocast/rng.hpp"
#include "pyrocast/sampling.hpp"
#include "pyrocast/tensor.hpp"

namespace pyrocast {

enum class RunMode { train, eval };

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    bool decay = true;  // weight decay applies to weights, never biases
};

template <typename T>
class ParamList {
  public:
    Param<T>& add(std::string name, Tensor<T> value, bool decay) {
        items_.push_back(Param<T>{std::move(name), std::move(value), decay});
        return items_.back();
    }
    std::vector<Param<T>>& items() { return items_; }
    const std::vector<Param<T>>& items() const { return items_; }

    std::int64_t scalar_count() const {
        std::int64_t n = 0;
        for (const auto& p : items_) n += p.value.size();
        return n;
    }
    const Param<T>* find(std::string_view name) const {
        for (const auto& p : items_)
            if (p.name == name) return &p;
        return nullptr;
    }

  private:
    std::vector<Param<T>> items_;
};

// Glorot uniform fill over [-sqrt(6/(fan_in+fan_out)), +...]. The stream is
// taken by value so every parameter draws from its own named child.
template <typename T>
void glorot_fill(Tensor<T>& w, std::int64_t fan_in, std::int64_t fan_out, RngStream rng) {
    if (fan_in <= 0 || fan_out <= 0) throw parameter_error("glorot fans must be positive");
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::int64_t i = 0; i < w.size(); ++i)
        w[i] = static_cast<T>(rng.uniform(-limit, limit));
}

// One LSTM layer over a [batch, steps, features] sequence. The four gates
// share a single [features+hidden, 4*hidden] matrix in i,f,g,o block order,
// biases are [4*hidden], and the initial state is zero. Returns the final
// hidden state [batch, hidden].
template <typename T>
typename Graph<T>::Var lstm_seq(Graph<T>& g, typename Graph<T>::Var x,
                                typename Graph<T>::Var w, typename Graph<T>::Var b,
                                std::int64_t hidden) {
    using Var = typename Graph<T>::Var;
    if (hidden <= 0) throw parameter_error("lstm_seq hidden size must be positive");
    const Tensor<T>& vx = g.value(x);
    if (vx.rank() != 3)
        throw dimension_error("lstm_seq input must be [batch, steps, features], got " +
                              vx.shape_string());
    std::int64_t n = vx.dim(0), steps = vx.dim(1), f = vx.dim(2);
    const Tensor<T>& vw = g.value(w);
    if (vw.rank() != 2 || vw.dim(0) != f + hidden || vw.dim(1) != 4 * hidden)
        throw dimension_error("lstm_seq weights for " + std::to_string(f) + " features and " +
                              std::to_string(hidden) + " hidden units must be [" +
                              std::to_string(f + hidden) + ", " + std::to_string(4 * hidden) +
                              "], got " + vw.shape_string());
    if (g.value(b).size() != 4 * hidden)
        throw dimension_error("lstm_seq bias must have 4*hidden entries");

    Var h = g.leaf(Tensor<T>({n, hidden}));
    Var c = g.leaf(Tensor<T>({n, hidden}));
    for (std::int64_t t = 0; t < steps; ++t) {
        Var xt = g.reshape(g.slice_axis1(x, t, t + 1), {n, f});
        Var gates = g.linear(g.concat_axis1(xt, h), w, b);
        Var gi = g.sigmoid(g.slice_axis1(gates, 0, hidden));
        Var gf = g.sigmoid(g.slice_axis1(gates, hidden, 2 * hidden));
        Var gg = g.tanh_op(g.slice_axis1(gates, 2 * hidden, 3 * hidden));
        Var go = g.sigmoid(g.slice_axis1(gates, 3 * hidden, 4 * hidden));
        c = g.add(g.mul(gf, c), g.mul(gi, gg));
        h = g.mul(go, g.tanh_op(c));
    }
    return h;
}

namespace detail {

// z_t = [x_t | h_{t-1}] packed per sample, channels concatenated.
template <typename T>
void pack_convlstm_input(const T* x, std::int64_t n, std::int64_t steps, std::int64_t cin,
                         std::int64_t plane, std::int64_t hidden, std::int64_t t, const T* hprev,
                         T* z) {
    std::int64_t xstep = cin * plane, hstep = hidden * plane;
    for (std::int64_t s = 0; s < n; ++s) {
        T* dst = z + s * (xstep + hstep);
        std::memcpy(dst, x + (s * steps + t) * xstep, sizeof(T) * static_cast<std::size_t>(xstep));
        if (hprev)
            std::memcpy(dst + xstep, hprev + s * hstep,
                        sizeof(T) * static_cast<std::size_t>(hstep));
        else
            std::fill(dst + xstep, dst + xstep + hstep, T(0));
    }
}

}  // namespace detail

// ConvLSTM layer over [batch, steps, channels, height, width]. Kernels are
// [4*hidden, channels+hidden, k, k] with odd square k and same-padding, gate
// blocks in i,f,g,o order, no peephole terms, zero initial state. Returns the
// final hidden map [batch, hidden, height, width].
//
// Implemented as one fused tape node: the forward stores only the per-step
// hidden and cell maps, and the backward recomputes the pre-activation gates
// from those. An op-per-step graph would retain every intermediate (~20x the
// memory for the reference batch), which is what this avoids.
template <typename T>
typename Graph<T>::Var convlstm_seq(Graph<T>& g, typename Graph<T>::Var x,
                                    typename Graph<T>::Var kern, typename Graph<T>::Var bias,
                                    std::int64_t hidden) {
    using Var = typename Graph<T>::Var;
    if (hidden <= 0) throw parameter_error("convlstm_seq hidden size must be positive");
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& vk = g.value(kern);
    if (vx.rank() != 5)
        throw dimension_error(
            "convlstm_seq input must be [batch, steps, channels, height, width], got " +
            vx.shape_string());
    std::int64_t n = vx.dim(0), steps = vx.dim(1), cin = vx.dim(2);
    std::int64_t hh = vx.dim(3), ww = vx.dim(4);
    if (vk.rank() != 4 || vk.dim(0) != 4 * hidden || vk.dim(1) != cin + hidden)
        throw dimension_error("convlstm_seq kernels for " + std::to_string(cin) +
                              " channels and " + std::to_string(hidden) +
                              " hidden units must be [" + std::to_string(4 * hidden) + ", " +
                              std::to_string(cin + hidden) + ", k, k], got " + vk.shape_string());
    std::int64_t k = vk.dim(2);
    if (vk.dim(3) != k || k % 2 == 0)
        throw dimension_error("convlstm_seq kernels must be square with odd size, got " +
                              vk.shape_string());
    if (g.value(bias).size() != 4 * hidden)
        throw dimension_error("convlstm_seq bias must have 4*hidden entries");

    kernels::ConvDims d;
    d.n = n;
    d.c_in = cin + hidden;
    d.h = hh;
    d.w = ww;
    d.c_out = 4 * hidden;
    d.kh = k;
    d.kw = k;
    d.pad = (k - 1) / 2;
    d.stride = 1;
    d.oh = kernels::conv_out_size(hh, k, d.pad, 1);
    d.ow = kernels::conv_out_size(ww, k, d.pad, 1);

    std::int64_t plane = hh * ww;
    std::int64_t hsz = hidden * plane;
    auto hs = std::make_shared<std::vector<Tensor<T>>>();
    auto cs = std::make_shared<std::vector<Tensor<T>>>();
    hs->reserve(steps);
    cs->reserve(steps);

    {
        std::vector<T> z(static_cast<std::size_t>(n) * d.c_in * plane);
        std::vector<T> a(static_cast<std::size_t>(n) * d.c_out * plane);
        std::vector<T> col(static_cast<std::size_t>(d.c_in * d.kh * d.kw) * plane);
        for (std::int64_t t = 0; t < steps; ++t) {
            const T* hprev = t > 0 ? (*hs)[t - 1].data() : nullptr;
            const T* cprev = t > 0 ? (*cs)[t - 1].data() : nullptr;
            detail::pack_convlstm_input(vx.data(), n, steps, cin, plane, hidden, t, hprev,
                                        z.data());
            kernels::conv2d_forward(d, z.data(), vk.data(), g.value(bias).data(), a.data(),
                                    col.data());
            Tensor<T> hcur({n, hidden, hh, ww});
            Tensor<T> ccur({n, hidden, hh, ww});
            for (std::int64_t s = 0; s < n; ++s) {
                const T* ga = a.data() + s * 4 * hsz;
                const T* cp = cprev ? cprev + s * hsz : nullptr;
                T* hc = hcur.data() + s * hsz;
                T* cc = ccur.data() + s * hsz;
                for (std::int64_t i = 0; i < hsz; ++i) {
                    T iv = kernels::sigmoid(ga[i]);
                    T fv = kernels::sigmoid(ga[hsz + i]);
                    T gv = std::tanh(ga[2 * hsz + i]);
                    T ov = kernels::sigmoid(ga[3 * hsz + i]);
                    T cv = fv * (cp ? cp[i] : T(0)) + iv * gv;
                    cc[i] = cv;
                    hc[i] = ov * std::tanh(cv);
                }
            }
            hs->push_back(std::move(hcur));
            cs->push_back(std::move(ccur));
        }
    }

    Tensor<T> out = hs->back();
    auto ix = x.id, ik = kern.id, ib = bias.id;
    return g.make_node(
        std::move(out), {x, kern, bias},
        [ix, ik, ib, d, hidden, steps, cin, hs, cs](Graph<T>& g2, std::int32_t self) {
            std::int64_t n = d.n, plane = d.h * d.w, hsz = hidden * plane;
            const T* xv = g2.value(Var{ix}).data();
            const T* kv = g2.value(Var{ik}).data();
            const T* bv = g2.value(Var{ib}).data();
            const Tensor<T>& gout = g2.grad_ref(self);
            Tensor<T>& gx = g2.grad_ref(ix);
            Tensor<T>& gk = g2.grad_ref(ik);
            Tensor<T>& gb = g2.grad_ref(ib);

            std::vector<T> z(static_cast<std::size_t>(n) * d.c_in * plane);
            std::vector<T> a(static_cast<std::size_t>(n) * d.c_out * plane);
            std::vector<T> da(a.size()), dz(z.size());
            std::vector<T> dh(static_cast<std::size_t>(n) * hsz);
            std::vector<T> dc(static_cast<std::size_t>(n) * hsz, T(0));
            std::vector<T> col(static_cast<std::size_t>(d.c_in * d.kh * d.kw) * plane);
            std::vector<T> dcol(col.size());
            std::memcpy(dh.data(), gout.data(), sizeof(T) * dh.size());

            for (std::int64_t t = steps - 1; t >= 0; --t) {
                const T* hprev = t > 0 ? (*hs)[t - 1].data() : nullptr;
                const T* cprev = t > 0 ? (*cs)[t - 1].data() : nullptr;
                const T* ct = (*cs)[t].data();
                detail::pack_convlstm_input(xv, n, steps, cin, plane, hidden, t, hprev, z.data());
                kernels::conv2d_forward(d, z.data(), kv, bv, a.data(), col.data());
                for (std::int64_t s = 0; s < n; ++s) {
                    T* ga = a.data() + s * 4 * hsz;
                    T* dg_ = da.data() + s * 4 * hsz;
                    const T* cp = cprev ? cprev + s * hsz : nullptr;
                    const T* ctv = ct + s * hsz;
                    const T* dhv = dh.data() + s * hsz;
                    T* dcv = dc.data() + s * hsz;
                    for (std::int64_t i = 0; i < hsz; ++i) {
                        T iv = kernels::sigmoid(ga[i]);
                        T fv = kernels::sigmoid(ga[hsz + i]);
                        T gv = std::tanh(ga[2 * hsz + i]);
                        T ov = kernels::sigmoid(ga[3 * hsz + i]);
                        T th = std::tanh(ctv[i]);
                        T dht = dhv[i];
                        T dct = dcv[i] + dht * ov * (T(1) - th * th);
                        dg_[i] = dct * gv * iv * (T(1) - iv);
                        dg_[hsz + i] = dct * (cp ? cp[i] : T(0)) * fv * (T(1) - fv);
                        dg_[2 * hsz + i] = dct * iv * (T(1) - gv * gv);
                        dg_[3 * hsz + i] = dht * th * ov * (T(1) - ov);
                        dcv[i] = dct * fv;
                    }
                }
                std::fill(dz.begin(), dz.end(), T(0));
                kernels::conv2d_backward(d, z.data(), kv, da.data(), dz.data(), gk.data(),
                                         gb.data(), col.data(), dcol.data());
                for (std::int64_t s = 0; s < n; ++s) {
                    const T* dzs = dz.data() + s * d.c_in * plane;
                    T* dxs = gx.data() + (s * steps + t) * cin * plane;
                    for (std::int64_t i = 0; i < cin * plane; ++i) dxs[i] += dzs[i];
                    std::memcpy(dh.data() + s * hsz, dzs + cin * plane,
                                sizeof(T) * static_cast<std::size_t>(hsz));
                }
            }
        });
}

namespace detail {

// Shared classifier tail: two dropout-regularized hidden layers, then logits.
// p[first..first+5] are w1,b1,w2,b2,w3,b3.
template <typename T>
typename Graph<T>::Var mlp_head(Graph<T>& g, typename Graph<T>::Var x,
                                const std::vector<typename Graph<T>::Var>& p, std::size_t first,
                                double drop, bool train, RngStream& rng) {
    auto h = g.dropout(g.relu(g.linear(x, p[first], p[first + 1])), drop, train, rng);
    h = g.dropout(g.relu(g.linear(h, p[first + 2], p[first + 3])), drop, train, rng);
    return g.linear(h, p[first + 4], p[first + 5]);
}

}  // namespace detail

// Binary classifier over one sample modality. Parameters live in the model in
// declaration order (also the checkpoint order); run() copies them into the
// graph as leaves so a pass never mutates the model.
template <typename T>
class Model {
  public:
    using Var = typename Graph<T>::Var;
    struct Pass {
        Var logits;                   // [n, 2]
        std::vector<Var> param_vars;  // aligned with params().items()
    };

    virtual ~Model() = default;
    virtual std::string architecture() const = 0;
    virtual std::unique_ptr<Model<T>> clone() const = 0;

    const std::vector<std::int64_t>& input_dims() const { return input_dims_; }
    ParamList<T>& params() { return params_; }
    const ParamList<T>& params() const { return params_; }

    // x is [n, input_dims...]. The dropout stream is consumed only in train
    // mode; eval passes are pure functions of (params, x).
    Pass run(Graph<T>& g, Tensor<T> x, RunMode mode, RngStream& dropout_rng) const {
        check_input(x);
        Pass pass;
        pass.param_vars.reserve(params_.items().size());
        for (const Param<T>& p : params_.items()) pass.param_vars.push_back(g.leaf(p.value));
        Var xin = g.leaf(std::move(x));
        pass.logits = forward(g, xin, pass.param_vars, mode, dropout_rng);
        return pass;
    }

  protected:
    static constexpr double kDropout = 0.5;

    virtual Var forward(Graph<T>& g, Var x, const std::vector<Var>& p, RunMode mode,
                        RngStream& rng) const = 0;

    void check_input(const Tensor<T>& x) const {
        bool ok = x.rank() == static_cast<std::int64_t>(input_dims_.size()) + 1;
        for (std::size_t i = 0; ok && i < input_dims_.size(); ++i)
            ok = x.dim(static_cast<std::int64_t>(i) + 1) == input_dims_[i];
        if (!ok) {
            std::string want = "[n";
            for (auto v : input_dims_) want += ", " + std::to_string(v);
            throw dimension_error(architecture() + " batch must be " + want + "], got " +
                                  x.shape_string());
        }
    }

    void add_head(RngStream& init, std::int64_t in, std::int64_t h1, std::int64_t h2) {
        auto lin = [&](const char* wname, const char* bname, std::int64_t rows,
                       std::int64_t cols) {
            Tensor<T> w({rows, cols});
            glorot_fill(w, rows, cols, init.split(wname));
            params_.add(wname, std::move(w), true);
            params_.add(bname, Tensor<T>({cols}), false);
        };
        lin("head.w1", "head.b1", in, h1);
        lin("head.w2", "head.b2", h1, h2);
        lin("head.w3", "head.b3", h2, 2);
    }

    std::vector<std::int64_t> input_dims_;
    ParamList<T> params_;
};

// LSTM over the temporal modality [steps, features]; the classifier head runs
// on the final hidden state.
template <typename T>
class LSTMModel : public Model<T> {
  public:
    explicit LSTMModel(std::vector<std::int64_t> input_dims, RngStream init,
                       std::int64_t hidden = 64)
        : hidden_(hidden) {
        if (input_dims.size() != 2)
            throw dimension_error("lstm input dims must be [steps, features]");
        if (hidden <= 0) throw parameter_error("lstm hidden size must be positive");
        this->input_dims_ = std::move(input_dims);
        std::int64_t f = this->input_dims_[1];
        Tensor<T> w({f + hidden_, 4 * hidden_});
        glorot_fill(w, f + hidden_, 4 * hidden_, init.split("cell.weights"));
        this->params_.add("cell.weights", std::move(w), true);
        Tensor<T> b({4 * hidden_});
        for (std::int64_t i = hidden_; i < 2 * hidden_; ++i) b[i] = T(1);  // forget gate open
        this->params_.add("cell.bias", std::move(b), false);
        this->add_head(init, hidden_, 64, 32);
    }

    std::string architecture() const override { return "lstm"; }
    std::unique_ptr<Model<T>> clone() const override {
        return std::make_unique<LSTMModel<T>>(*this);
    }
    std::int64_t hidden() const { return hidden_; }

  protected:
    using typename Model<T>::Var;
    Var forward(Graph<T>& g, Var x, const std::vector<Var>& p, RunMode mode,
                RngStream& rng) const override {
        Var h = lstm_seq(g, x, p[0], p[1], hidden_);
        return detail::mlp_head(g, h, p, 2, this->kDropout, mode == RunMode::train, rng);
    }

  private:
    std::int64_t hidden_;
};

// Single 3x3 conv block over the spatial modality [channels, height, width]:
// conv, ReLU, 2x2 max-pool, then the classifier head on the flattened maps.
template <typename T>
class CNNModel : public Model<T> {
  public:
    explicit CNNModel(std::vector<std::int64_t> input_dims, RngStream init,
                      std::int64_t maps = 16)
        : maps_(maps) {
        if (input_dims.size() != 3)
            throw dimension_error("cnn input dims must be [channels, height, width]");
        if (maps <= 0) throw parameter_error("cnn map count must be positive");
        if (input_dims[1] < 2 || input_dims[2] < 2)
            throw dimension_error("cnn spatial input must be at least 2x2 for pooling");
        this->input_dims_ = std::move(input_dims);
        std::int64_t c = this->input_dims_[0];
        Tensor<T> kern({maps_, c, 3, 3});
        glorot_fill(kern, c * 9, maps_ * 9, init.split("conv.kernels"));
        this->params_.add("conv.kernels", std::move(kern), true);
        this->params_.add("conv.bias", Tensor<T>({maps_}), false);
        flat_ = maps_ * (this->input_dims_[1] / 2) * (this->input_dims_[2] / 2);
        this->add_head(init, flat_, 16, 8);
    }

    std::string architecture() const override { return "cnn"; }
    std::unique_ptr<Model<T>> clone() const override { return std::make_unique<CNNModel<T>>(*this); }

  protected:
    using typename Model<T>::Var;
    Var forward(Graph<T>& g, Var x, const std::vector<Var>& p, RunMode mode,
                RngStream& rng) const override {
        bool train = mode == RunMode::train;
        Var h = g.max_pool2d(g.relu(g.conv2d(x, p[0], p[1], 1, 1)), 2);
        h = g.reshape(h, {g.value(x).dim(0), flat_});
        h = g.dropout(h, this->kDropout, train, rng);
        return detail::mlp_head(g, h, p, 2, this->kDropout, train, rng);
    }

  private:
    std::int64_t maps_;
    std::int64_t flat_ = 0;
};

// ConvLSTM over the spatiotemporal modality [steps, channels, height, width];
// the classifier head runs on the pooled final hidden map.
template <typename T>
class ConvLSTMModel : public Model<T> {
  public:
    explicit ConvLSTMModel(std::vector<std::int64_t> input_dims, RngStream init,
                           std::int64_t hidden = 16)
        : hidden_(hidden) {
        if (input_dims.size() != 4)
            throw dimension_error("convlstm input dims must be [steps, channels, height, width]");
        if (hidden <= 0) throw parameter_error("convlstm hidden size must be positive");
        if (input_dims[2] < 2 || input_dims[3] < 2)
            throw dimension_error("convlstm spatial input must be at least 2x2 for pooling");
        this->input_dims_ = std::move(input_dims);
        std::int64_t c = this->input_dims_[1];
        Tensor<T> kern({4 * hidden_, c + hidden_, 3, 3});
        glorot_fill(kern, (c + hidden_) * 9, 4 * hidden_ * 9, init.split("cell.kernels"));
        this->params_.add("cell.kernels", std::move(kern), true);
        Tensor<T> b({4 * hidden_});
        for (std::int64_t i = hidden_; i < 2 * hidden_; ++i) b[i] = T(1);
        this->params_.add("cell.bias", std::move(b), false);
        flat_ = hidden_ * (this->input_dims_[2] / 2) * (this->input_dims_[3] / 2);
        this->add_head(init, flat_, 16, 8);
    }

    std::string architecture() const override { return "convlstm"; }
    std::unique_ptr<Model<T>> clone() const override {
        return std::make_unique<ConvLSTMModel<T>>(*this);
    }
    std::int64_t hidden() const { return hidden_; }

  protected:
    using typename Model<T>::Var;
    Var forward(Graph<T>& g, Var x, const std::vector<Var>& p, RunMode mode,
                RngStream& rng) const override {
        bool train = mode == RunMode::train;
        Var h = g.max_pool2d(convlstm_seq(g, x, p[0], p[1], hidden_), 2);
        h = g.reshape(h, {g.value(x).dim(0), flat_});
        h = g.dropout(h, this->kDropout, train, rng);
        return detail::mlp_head(g, h, p, 2, this->kDropout, train, rng);
    }

  private:
    std::int64_t hidden_;
    std::int64_t flat_ = 0;
};

// Positive-class probability for a single payload shaped like input_dims().
template <typename T>
double predict_proba(const Model<T>& model, const Tensor<T>& payload) {
    const auto& dims = model.input_dims();
    bool ok = payload.rank() == static_cast<std::int64_t>(dims.size());
    for (std::size_t i = 0; ok && i < dims.size(); ++i)
        ok = payload.dim(static_cast<std::int64_t>(i)) == dims[i];
    if (!ok)
        throw dimension_error("payload shape " + payload.shape_string() +
                              " does not match model input");
    std::vector<std::int64_t> shape{1};
    shape.insert(shape.end(), dims.begin(), dims.end());
    Tensor<T> x(shape, std::vector<T>(payload.data(), payload.data() + payload.size()));
    Graph<T> g;
    RngStream unused(0, "eval");
    auto pass = model.run(g, std::move(x), RunMode::eval, unused);
    return softmax_probs(g.value(pass.logits).data(), 2)[1];
}

// Positive-class probabilities for a batch [n, input_dims...], eval mode.
std::vector<double> score_batch(const Model<float>& model, Tensor<float> x);

struct TrainConfig {
    int epochs = 50;
    std::int64_t batch_size = 128;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    std::uint64_t seed = 0;

    // Published optimizer settings per architecture; epochs/batch are common.
    static TrainConfig reference_for(const std::string& architecture);

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_auroc;
};

struct TrainResult {
    std::vector<EpochLog> log;
    // Lowest-validation-loss epoch (earliest on ties); equals the final epoch
    // when there is no validation data.
    int best_epoch = 0;
    std::optional<double> best_val_loss;
    std::vector<Tensor<float>> best_params;
    std::vector<Tensor<float>> final_params;
};

// Adam + decoupled-style L2 (gradient addend 2*wd*w on decaying parameters),
// shuffled mini-batches, per-epoch validation loss/AUROC. The model is left
// holding the final-epoch parameters; both snapshots are in the result.
TrainResult train(Model<float>& model, const SampleSource& train_data,
                  const SampleSource* validation, const TrainConfig& config,
                  std::ostream* progress = nullptr);

// Overwrites model parameters from a snapshot (shape-checked).
void set_params(Model<float>& model, const std::vector<Tensor<float>>& values);

// width 0 picks the published size (64 hidden for lstm, 16 maps/channels for
// cnn and convlstm).
std::unique_ptr<Model<float>> make_model(const std::string& architecture,
                                         const std::vector<std::int64_t>& input_dims,
                                         RngStream init, std::int64_t width = 0);

struct CheckpointInfo {
    std::string architecture;
    Modality modality = Modality::pixel;
    TrainConfig config;
    std::uint64_t schema_hash = 0;
    int epoch = 0;  // epoch the stored weights came from
    std::optional<double> val_loss;
    std::optional<double> val_auroc;
    std::optional<Standardization> stats;  // how payloads were standardized
    nlohmann::json provenance;
};

// Checkpoint file: "PMC1" magic, JSON header (architecture, shapes, config,
// metrics, standardization), then each parameter tensor as little-endian f32
// in declaration order. Byte-stable across save/load/save round trips.
void save_checkpoint(const std::string& path, const Model<float>& model,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
    std::unique_ptr<Model<float>> model;
    CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace pyrocast
