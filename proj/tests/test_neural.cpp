#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "gradcheck.hpp"
#include "pyrocast/binio.hpp"
#include "pyrocast/neural.hpp"

using namespace pyrocast;

namespace {

// Plain-loop LSTM, written from the recurrence equations. Returns the final
// hidden state [n, hidden] flattened.
std::vector<double> lstm_reference(const TensorD& x, const TensorD& w, const TensorD& b,
                                   std::int64_t hidden) {
    std::int64_t n = x.dim(0), steps = x.dim(1), f = x.dim(2);
    std::vector<double> h(n * hidden, 0.0), c(n * hidden, 0.0);
    std::vector<double> z(f + hidden), pre(4 * hidden);
    for (std::int64_t t = 0; t < steps; ++t) {
        for (std::int64_t s = 0; s < n; ++s) {
            for (std::int64_t k = 0; k < f; ++k) z[k] = x.at({s, t, k});
            for (std::int64_t k = 0; k < hidden; ++k) z[f + k] = h[s * hidden + k];
            for (std::int64_t j = 0; j < 4 * hidden; ++j) {
                double acc = b[j];
                for (std::int64_t k = 0; k < f + hidden; ++k) acc += z[k] * w.at({k, j});
                pre[j] = acc;
            }
            for (std::int64_t k = 0; k < hidden; ++k) {
                double gi = 1.0 / (1.0 + std::exp(-pre[k]));
                double gf = 1.0 / (1.0 + std::exp(-pre[hidden + k]));
                double gg = std::tanh(pre[2 * hidden + k]);
                double go = 1.0 / (1.0 + std::exp(-pre[3 * hidden + k]));
                double cv = gf * c[s * hidden + k] + gi * gg;
                c[s * hidden + k] = cv;
                h[s * hidden + k] = go * std::tanh(cv);
            }
        }
    }
    return h;
}

// Direct-summation ConvLSTM with zero padding; returns final hidden maps
// [n, hidden, hh, ww] flattened.
std::vector<double> convlstm_reference(const TensorD& x, const TensorD& kern, const TensorD& b,
                                       std::int64_t hidden) {
    std::int64_t n = x.dim(0), steps = x.dim(1), cin = x.dim(2);
    std::int64_t hh = x.dim(3), ww = x.dim(4);
    std::int64_t k = kern.dim(2), pad = (k - 1) / 2;
    std::int64_t plane = hh * ww;
    std::vector<double> h(n * hidden * plane, 0.0), c(n * hidden * plane, 0.0);
    for (std::int64_t t = 0; t < steps; ++t) {
        std::vector<double> hnew(h.size()), cnew(c.size());
        for (std::int64_t s = 0; s < n; ++s) {
            for (std::int64_t hc = 0; hc < hidden; ++hc) {
                for (std::int64_t y = 0; y < hh; ++y) {
                    for (std::int64_t xx = 0; xx < ww; ++xx) {
                        double pre[4];
                        for (int gate = 0; gate < 4; ++gate) {
                            std::int64_t co = gate * hidden + hc;
                            double acc = b[co];
                            for (std::int64_t ci = 0; ci < cin + hidden; ++ci) {
                                for (std::int64_t dy = 0; dy < k; ++dy) {
                                    for (std::int64_t dx = 0; dx < k; ++dx) {
                                        std::int64_t yy = y + dy - pad, xs = xx + dx - pad;
                                        if (yy < 0 || yy >= hh || xs < 0 || xs >= ww) continue;
                                        double v;
                                        if (ci < cin)
                                            v = x.at({s, t, ci, yy, xs});
                                        else
                                            v = h[((s * hidden) + (ci - cin)) * plane + yy * ww +
                                                  xs];
                                        acc += v * kern.at({co, ci, dy, dx});
                                    }
                                }
                            }
                            pre[gate] = acc;
                        }
                        double gi = 1.0 / (1.0 + std::exp(-pre[0]));
                        double gf = 1.0 / (1.0 + std::exp(-pre[1]));
                        double gg = std::tanh(pre[2]);
                        double go = 1.0 / (1.0 + std::exp(-pre[3]));
                        std::int64_t at = ((s * hidden) + hc) * plane + y * ww + xx;
                        double cv = gf * c[at] + gi * gg;
                        cnew[at] = cv;
                        hnew[at] = go * std::tanh(cv);
                    }
                }
            }
        }
        h.swap(hnew);
        c.swap(cnew);
    }
    return h;
}

template <typename T>
Tensor<T> random_tensor(std::vector<std::int64_t> shape, RngStream& rng, double scale = 1.0) {
    Tensor<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.normal() * scale);
    return t;
}

void zero_params(Model<float>& m) {
    for (auto& p : m.params().items()) p.value.fill(0.0f);
}

float* param_data(Model<float>& m, const char* name) {
    for (auto& p : m.params().items())
        if (p.name == name) return p.value.data();
    REQUIRE(false);
    return nullptr;
}

SampleSet toy_temporal_set(std::int64_t n, std::int64_t steps, std::int64_t features,
                           std::uint64_t seed, const char* split) {
    SampleSet set;
    set.modality = Modality::temporal;
    set.dims = {steps, features};
    set.split_name = split;
    set.cube_start = Date::from_ymd(2019, 1, 1);
    RngStream rng(seed, "toy");
    for (std::int64_t i = 0; i < n; ++i) {
        SampleKey key;
        key.row = static_cast<std::int32_t>(i);
        key.col = 0;
        key.target_date = set.cube_start + static_cast<std::int32_t>(20 + i);
        key.label = static_cast<std::uint8_t>(i % 2);
        key.landcover = 1;
        std::vector<float> payload(steps * features);
        double shift = key.label ? 1.5 : -1.5;
        for (auto& v : payload) v = static_cast<float>(rng.normal() + shift);
        set.keys.push_back(key);
        set.payloads.push_back(std::move(payload));
    }
    return set;
}

std::vector<std::vector<float>> snapshot_params(const Model<float>& m) {
    std::vector<std::vector<float>> out;
    for (const auto& p : m.params().items())
        out.emplace_back(p.value.data(), p.value.data() + p.value.size());
    return out;
}

bool params_bitwise_equal(const Model<float>& m, const std::vector<std::vector<float>>& snap) {
    const auto& items = m.params().items();
    if (items.size() != snap.size()) return false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (static_cast<std::size_t>(items[i].value.size()) != snap[i].size()) return false;
        if (std::memcmp(items[i].value.data(), snap[i].data(),
                        snap[i].size() * sizeof(float)) != 0)
            return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("neural") {
    TEST_CASE("parameter layout and exact counts") {
        RngStream init(11, "init");
        LSTMModel<float> lstm({10, 18}, init.split("lstm"));
        const auto& lp = lstm.params().items();
        REQUIRE(lp.size() == 8);
        CHECK(lp[0].name == "cell.weights");
        CHECK(lp[0].value.shape() == std::vector<std::int64_t>{82, 256});
        CHECK(lp[0].decay);
        CHECK(lp[1].name == "cell.bias");
        CHECK_FALSE(lp[1].decay);
        CHECK(lp[0].value.size() + lp[1].value.size() == 21248);
        std::int64_t head = 0;
        for (std::size_t i = 2; i < lp.size(); ++i) head += lp[i].value.size();
        CHECK(head == 6306);
        CHECK(lstm.params().scalar_count() == 27554);
        // forget-gate bias block starts open, every other bias entry is zero
        CHECK(lp[1].value[64 - 1] == 0.0f);
        CHECK(lp[1].value[64] == 1.0f);
        CHECK(lp[1].value[127] == 1.0f);
        CHECK(lp[1].value[128] == 0.0f);

        CNNModel<float> cnn({18, 25, 25}, init.split("cnn"));
        const auto& cp = cnn.params().items();
        CHECK(cp[0].value.shape() == std::vector<std::int64_t>{16, 18, 3, 3});
        CHECK(cp[2].name == "head.w1");
        CHECK(cp[2].value.shape() == std::vector<std::int64_t>{2304, 16});  // 16*12*12 input
        CHECK(cp[0].value.size() + cp[1].value.size() == 2608);
        CHECK(cnn.params().scalar_count() == 2608 + 36880 + 136 + 18);

        ConvLSTMModel<float> clstm({10, 18, 25, 25}, init.split("clstm"));
        const auto& qp = clstm.params().items();
        CHECK(qp[0].value.shape() == std::vector<std::int64_t>{64, 34, 3, 3});
        CHECK(qp[0].value.size() + qp[1].value.size() == 19648);
        CHECK(qp[2].value.shape() == std::vector<std::int64_t>{2304, 16});
        CHECK(clstm.params().scalar_count() == 19648 + 36880 + 136 + 18);
    }

    TEST_CASE("zero weights propagate to bias logits") {
        RngStream init(3, "init"), data(4, "data");
        RngStream unused(0, "eval");
        auto check_bias_logits = [&](Model<float>& m, Tensor<float> x) {
            zero_params(m);
            float* b3 = param_data(m, "head.b3");
            b3[0] = 0.25f;
            b3[1] = -0.75f;
            Graph<float> g;
            auto pass = m.run(g, std::move(x), RunMode::eval, unused);
            const auto& logits = g.value(pass.logits);
            for (std::int64_t i = 0; i < logits.dim(0); ++i) {
                CHECK(logits.at({i, 0}) == 0.25f);
                CHECK(logits.at({i, 1}) == -0.75f);
            }
        };
        LSTMModel<float> lstm({6, 5}, init.split("l"));
        check_bias_logits(lstm, random_tensor<float>({3, 6, 5}, data));
        CNNModel<float> cnn({4, 6, 6}, init.split("c"));
        check_bias_logits(cnn, random_tensor<float>({2, 4, 6, 6}, data));
        ConvLSTMModel<float> clstm({3, 4, 6, 6}, init.split("q"));
        check_bias_logits(clstm, random_tensor<float>({2, 3, 4, 6, 6}, data));
    }

    TEST_CASE("predict_proba saturation points") {
        RngStream init(5, "init"), data(6, "data");
        LSTMModel<float> m({4, 3}, init);
        zero_params(m);
        Tensor<float> payload = random_tensor<float>({4, 3}, data);
        CHECK(predict_proba(m, payload) == 0.5);  // logits (0,0)
        float* b3 = param_data(m, "head.b3");
        b3[0] = -20.0f;
        b3[1] = 20.0f;
        CHECK(predict_proba(m, payload) > 1.0 - 1e-8);
        b3[0] = 20.0f;
        b3[1] = -20.0f;
        CHECK(predict_proba(m, payload) < 1e-8);
        CHECK_THROWS_AS(predict_proba(m, random_tensor<float>({3, 3}, data)), dimension_error);
    }

    TEST_CASE("lstm_seq matches the plain-loop recurrence") {
        for (std::uint64_t draw = 0; draw < 5; ++draw) {
            RngStream rng(100 + draw, "lstmref");
            std::int64_t n = 2, steps = draw == 0 ? 1 : 4, f = 3, hidden = 3;
            TensorD x = random_tensor<double>({n, steps, f}, rng);
            TensorD w = random_tensor<double>({f + hidden, 4 * hidden}, rng, 0.5);
            TensorD b = random_tensor<double>({4 * hidden}, rng, 0.3);
            auto ref = lstm_reference(x, w, b, hidden);
            GraphD g;
            auto h = lstm_seq(g, g.leaf(x), g.leaf(w), g.leaf(b), hidden);
            const auto& hv = g.value(h);
            REQUIRE(hv.size() == static_cast<std::int64_t>(ref.size()));
            for (std::size_t i = 0; i < ref.size(); ++i)
                CHECK(hv[static_cast<std::int64_t>(i)] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }

    TEST_CASE("convlstm_seq matches direct convolution sums") {
        for (std::uint64_t draw = 0; draw < 3; ++draw) {
            RngStream rng(200 + draw, "clstmref");
            std::int64_t n = 2, steps = draw == 0 ? 1 : 3, cin = 2, hidden = 2, hh = 4, ww = 3;
            TensorD x = random_tensor<double>({n, steps, cin, hh, ww}, rng);
            TensorD k = random_tensor<double>({4 * hidden, cin + hidden, 3, 3}, rng, 0.3);
            TensorD b = random_tensor<double>({4 * hidden}, rng, 0.2);
            auto ref = convlstm_reference(x, k, b, hidden);
            GraphD g;
            auto h = convlstm_seq(g, g.leaf(x), g.leaf(k), g.leaf(b), hidden);
            const auto& hv = g.value(h);
            REQUIRE(hv.size() == static_cast<std::int64_t>(ref.size()));
            for (std::size_t i = 0; i < ref.size(); ++i)
                CHECK(hv[static_cast<std::int64_t>(i)] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }

    TEST_CASE("convlstm on 1x1 grids degenerates to the lstm cell") {
        for (std::uint64_t draw = 0; draw < 10; ++draw) {
            RngStream rng(300 + draw, "degen");
            std::int64_t n = 3, steps = 4, cin = 5, hidden = 4;
            TensorF xs = random_tensor<float>({n, steps, cin}, rng);
            TensorF w = random_tensor<float>({cin + hidden, 4 * hidden}, rng, 0.4);
            TensorF b = random_tensor<float>({4 * hidden}, rng, 0.2);
            // K[co, ci, 0, 0] = W[ci, co]; inputs reshaped to 1x1 maps
            TensorF k({4 * hidden, cin + hidden, 1, 1});
            for (std::int64_t co = 0; co < 4 * hidden; ++co)
                for (std::int64_t ci = 0; ci < cin + hidden; ++ci)
                    k.at({co, ci, 0, 0}) = w.at({ci, co});
            TensorF xc({n, steps, cin, 1, 1},
                       std::vector<float>(xs.data(), xs.data() + xs.size()));
            GraphF gl, gc;
            auto hl = lstm_seq(gl, gl.leaf(xs), gl.leaf(w), gl.leaf(b), hidden);
            auto hc = convlstm_seq(gc, gc.leaf(xc), gc.leaf(k), gc.leaf(b), hidden);
            const auto& lv = gl.value(hl);
            const auto& cv = gc.value(hc);
            REQUIRE(lv.size() == cv.size());
            for (std::int64_t i = 0; i < lv.size(); ++i)
                CHECK(std::abs(lv[i] - cv[i]) < 1e-6f);
        }
    }

    TEST_CASE("spatially constant inputs stay constant under center-tap kernels") {
        RngStream rng(7, "sym");
        std::int64_t n = 2, steps = 3, cin = 3, hidden = 2, hh = 5, ww = 5;
        // constant over space, varying over (sample, step, channel)
        TensorF x({n, steps, cin, hh, ww});
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t t = 0; t < steps; ++t)
                for (std::int64_t c = 0; c < cin; ++c) {
                    float v = static_cast<float>(rng.normal());
                    for (std::int64_t i = 0; i < hh * ww; ++i)
                        x.data()[(((s * steps + t) * cin + c) * hh * ww) + i] = v;
                }
        TensorF k({4 * hidden, cin + hidden, 3, 3});
        for (std::int64_t co = 0; co < 4 * hidden; ++co)
            for (std::int64_t ci = 0; ci < cin + hidden; ++ci)
                k.at({co, ci, 1, 1}) = static_cast<float>(rng.normal() * 0.5);
        TensorF b = random_tensor<float>({4 * hidden}, rng, 0.2);
        GraphF g;
        auto h = convlstm_seq(g, g.leaf(x), g.leaf(k), g.leaf(b), hidden);
        const auto& hv = g.value(h);
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t c = 0; c < hidden; ++c) {
                const float* plane = hv.data() + ((s * hidden) + c) * hh * ww;
                for (std::int64_t i = 1; i < hh * ww; ++i) CHECK(plane[i] == plane[0]);
            }

        // Full 3x3 kernels: zero-padding contaminates one border ring per step,
        // so after `steps` steps only cells at distance >= steps stay constant.
        std::int64_t big = 9;
        TensorF xb({n, steps, cin, big, big});
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t t = 0; t < steps; ++t)
                for (std::int64_t c = 0; c < cin; ++c) {
                    float v = static_cast<float>(rng.normal());
                    for (std::int64_t i = 0; i < big * big; ++i)
                        xb.data()[(((s * steps + t) * cin + c) * big * big) + i] = v;
                }
        TensorF kfull({4 * hidden, cin + hidden, 3, 3});
        for (std::int64_t co = 0; co < 4 * hidden; ++co)
            for (std::int64_t ci = 0; ci < cin + hidden; ++ci) {
                float v = static_cast<float>(rng.normal() * 0.1);
                for (std::int64_t i = 0; i < 9; ++i)
                    kfull.data()[(co * (cin + hidden) + ci) * 9 + i] = v;
            }
        GraphF g2;
        auto h2 = convlstm_seq(g2, g2.leaf(xb), g2.leaf(kfull), g2.leaf(b), hidden);
        const auto& hv2 = g2.value(h2);
        for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t c = 0; c < hidden; ++c) {
                const float* plane = hv2.data() + ((s * hidden) + c) * big * big;
                float center = plane[4 * big + 4];
                for (std::int64_t y = steps; y < big - steps; ++y)
                    for (std::int64_t xx = steps; xx < big - steps; ++xx)
                        CHECK(std::abs(plane[y * big + xx] - center) < 1e-6f);
            }
    }

    TEST_CASE("translated spatial input changes logits, not shapes") {
        RngStream init(9, "init"), data(10, "data");
        CNNModel<float> cnn({3, 8, 8}, init);
        Tensor<float> x = random_tensor<float>({1, 3, 8, 8}, data);
        Tensor<float> shifted({1, 3, 8, 8});
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t y = 0; y < 8; ++y)
                for (std::int64_t xx = 0; xx < 8; ++xx)
                    shifted.at({0, c, y, xx}) = x.at({0, c, (y + 2) % 8, (xx + 2) % 8});
        RngStream unused(0, "eval");
        Graph<float> g1, g2;
        auto p1 = cnn.run(g1, x, RunMode::eval, unused);
        auto p2 = cnn.run(g2, shifted, RunMode::eval, unused);
        CHECK(g1.value(p1.logits).shape() == g2.value(p2.logits).shape());
        bool differs = g1.value(p1.logits)[0] != g2.value(p2.logits)[0] ||
                       g1.value(p1.logits)[1] != g2.value(p2.logits)[1];
        CHECK(differs);
    }

    TEST_CASE("gradients match finite differences") {
        SUBCASE("lstm_seq primitive, including inputs") {
            for (std::uint64_t draw = 0; draw < 3; ++draw) {
                RngStream rng(400 + draw, "gc");
                std::int64_t n = 2, steps = 3, f = 2, hidden = 2;
                std::vector<TensorD> params{
                    random_tensor<double>({f + hidden, 4 * hidden}, rng, 0.5),
                    random_tensor<double>({4 * hidden}, rng, 0.3),
                    random_tensor<double>({n, steps, f}, rng)};
                TensorD mask = random_tensor<double>({n, hidden}, rng);
                auto loss_fn = [&](const std::vector<TensorD>& ps, std::vector<TensorD>* grads) {
                    GraphD g;
                    auto w = g.leaf(ps[0]), b = g.leaf(ps[1]), x = g.leaf(ps[2]);
                    auto loss = g.sum(g.mul(lstm_seq(g, x, w, b, hidden), g.leaf(mask)));
                    double v = g.value(loss)[0];
                    if (grads) {
                        g.backward(loss);
                        *grads = {g.grad(w), g.grad(b), g.grad(x)};
                    }
                    return v;
                };
                auto rep = gradcheck::check(params, loss_fn);
                INFO("draw ", draw, " worst ", rep.worst_param, "[", rep.worst_index, "]");
                CHECK(rep.max_rel < 1e-4);
            }
        }
        SUBCASE("convlstm_seq primitive, including inputs") {
            for (std::uint64_t draw = 0; draw < 3; ++draw) {
                RngStream rng(500 + draw, "gc");
                std::int64_t n = 2, steps = 3, cin = 2, hidden = 2, hh = 4, ww = 4;
                std::vector<TensorD> params{
                    random_tensor<double>({4 * hidden, cin + hidden, 3, 3}, rng, 0.3),
                    random_tensor<double>({4 * hidden}, rng, 0.2),
                    random_tensor<double>({n, steps, cin, hh, ww}, rng)};
                TensorD mask = random_tensor<double>({n, hidden, hh, ww}, rng);
                auto loss_fn = [&](const std::vector<TensorD>& ps, std::vector<TensorD>* grads) {
                    GraphD g;
                    auto k = g.leaf(ps[0]), b = g.leaf(ps[1]), x = g.leaf(ps[2]);
                    auto loss = g.sum(g.mul(convlstm_seq(g, x, k, b, hidden), g.leaf(mask)));
                    double v = g.value(loss)[0];
                    if (grads) {
                        g.backward(loss);
                        *grads = {g.grad(k), g.grad(b), g.grad(x)};
                    }
                    return v;
                };
                auto rep = gradcheck::check(params, loss_fn);
                INFO("draw ", draw, " worst ", rep.worst_param, "[", rep.worst_index, "]");
                CHECK(rep.max_rel < 1e-4);
            }
        }
        SUBCASE("whole models with cross-entropy and dropout") {
            auto model_check = [](Model<double>& m, Tensor<double> x, std::vector<int> labels) {
                // Zero-initialized biases put ReLU pre-activations exactly on
                // the kink whenever a dropout mask blanks a sample row, where
                // finite differences are undefined; jitter to a generic point.
                RngStream jitter(88, m.architecture());
                for (auto& p : m.params().items())
                    for (std::int64_t i = 0; i < p.value.size(); ++i)
                        p.value[i] += jitter.uniform(-0.1, 0.1);
                std::vector<TensorD> params;
                for (const auto& p : m.params().items()) params.push_back(p.value);
                auto loss_fn = [&](const std::vector<TensorD>& ps, std::vector<TensorD>* grads) {
                    auto& items = m.params().items();
                    for (std::size_t i = 0; i < ps.size(); ++i) items[i].value = ps[i];
                    GraphD g;
                    RngStream drop(77, "fixed");
                    auto pass = m.run(g, x, RunMode::train, drop);
                    auto loss = g.softmax_cross_entropy(pass.logits, labels);
                    double v = g.value(loss)[0];
                    if (grads) {
                        g.backward(loss);
                        grads->clear();
                        for (auto pv : pass.param_vars) grads->push_back(g.grad(pv));
                    }
                    return v;
                };
                auto rep = gradcheck::check_guarded(params, loss_fn);
                INFO("arch ", m.architecture(), " worst ", rep.worst_param, "[", rep.worst_index,
                     "] skipped ", rep.skipped);
                CHECK(rep.max_rel < 1e-4);
                CHECK(rep.checked > 0);
                // kink-contaminated indices must stay rare
                CHECK(rep.skipped * 50 <= rep.checked + rep.skipped);
            };
            RngStream init(21, "init"), data(22, "data");
            LSTMModel<double> lstm({3, 2}, init.split("l"), 3);
            model_check(lstm, random_tensor<double>({4, 3, 2}, data), {0, 1, 1, 0});
            CNNModel<double> cnn({2, 4, 4}, init.split("c"), 4);
            model_check(cnn, random_tensor<double>({3, 2, 4, 4}, data), {1, 0, 1});
            ConvLSTMModel<double> clstm({3, 2, 4, 4}, init.split("q"), 2);
            model_check(clstm, random_tensor<double>({3, 3, 2, 4, 4}, data), {0, 1, 0});
        }
    }

    TEST_CASE("weight decay enters as an exact gradient addend") {
        RngStream rng(31, "adam");
        TensorF w1 = random_tensor<float>({5}, rng);
        TensorF w2 = w1;
        TensorF g = random_tensor<float>({5}, rng);
        double wd = 0.03, lr = 0.01;
        TensorF g_aug({5});
        for (int i = 0; i < 5; ++i)
            g_aug[i] = g[i] + static_cast<float>(2.0 * wd) * w2[i];
        AdamState<float> s1({5}), s2({5});
        adam_step(w1, g, s1, lr, wd, true);
        adam_step(w2, g_aug, s2, lr, 0.0, true);
        for (int i = 0; i < 5; ++i) CHECK(w1[i] == w2[i]);

        // decay=false parameters ignore weight decay entirely
        TensorF b1 = random_tensor<float>({4}, rng);
        TensorF b2 = b1;
        TensorF gb = random_tensor<float>({4}, rng);
        AdamState<float> s3({4}), s4({4});
        adam_step(b1, gb, s3, lr, wd, false);
        adam_step(b2, gb, s4, lr, 0.0, false);
        for (int i = 0; i < 4; ++i) CHECK(b1[i] == b2[i]);
    }

    TEST_CASE("one optimizer step at the reference rate reduces first-batch loss") {
        auto one_step = [](Model<float>& m, Tensor<float> x, std::vector<int> labels) {
            TrainConfig ref = TrainConfig::reference_for(m.architecture());
            auto loss_at = [&](RngStream drop) {
                Graph<float> g;
                auto pass = m.run(g, x, RunMode::train, drop);
                return g.value(g.softmax_cross_entropy(pass.logits, labels))[0];
            };
            RngStream drop(55, "drop");
            double before = loss_at(drop);
            Graph<float> g;
            RngStream drop2(55, "drop");
            auto pass = m.run(g, x, RunMode::train, drop2);
            auto loss = g.softmax_cross_entropy(pass.logits, labels);
            g.backward(loss);
            auto& items = m.params().items();
            std::vector<AdamState<float>> st;
            for (auto& p : items) st.emplace_back(p.value.shape());
            for (std::size_t k = 0; k < items.size(); ++k)
                adam_step(items[k].value, g.grad(pass.param_vars[k]), st[k], ref.learning_rate,
                          ref.weight_decay, items[k].decay);
            double after = loss_at(RngStream(55, "drop"));
            INFO(m.architecture(), " before ", before, " after ", after);
            CHECK(after < before);
        };
        RngStream init(41, "init"), data(42, "data");
        std::vector<int> labels{0, 1, 1, 0, 1, 0, 0, 1};
        LSTMModel<float> lstm({10, 5}, init.split("l"));
        one_step(lstm, random_tensor<float>({8, 10, 5}, data), labels);
        CNNModel<float> cnn({3, 6, 6}, init.split("c"));
        one_step(cnn, random_tensor<float>({8, 3, 6, 6}, data), labels);
        ConvLSTMModel<float> clstm({4, 3, 6, 6}, init.split("q"));
        one_step(clstm, random_tensor<float>({8, 4, 3, 6, 6}, data), labels);
    }

    TEST_CASE("training is deterministic per seed") {
        SampleSet set = toy_temporal_set(40, 6, 4, 1, "train");
        MemorySampleSource src(set);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.01;
        cfg.weight_decay = 0.01;
        cfg.seed = 9;
        auto run_once = [&](std::uint64_t train_seed) {
            LSTMModel<float> m({6, 4}, RngStream(13, "init"), 8);
            TrainConfig c = cfg;
            c.seed = train_seed;
            auto res = train(m, src, nullptr, c);
            std::vector<double> losses;
            for (const auto& row : res.log) losses.push_back(row.train_loss);
            return losses;
        };
        auto a = run_once(9), b = run_once(9), c = run_once(10);
        CHECK(a == b);
        CHECK(a != c);
    }

    TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
        SampleSet set = toy_temporal_set(12, 5, 3, 2, "train");
        MemorySampleSource src(set);
        LSTMModel<float> m({5, 3}, RngStream(17, "init"), 4);
        auto snap = snapshot_params(m);
        TrainConfig cfg;
        cfg.epochs = 4;
        cfg.batch_size = 5;
        cfg.learning_rate = 0.0;
        cfg.weight_decay = 0.03;
        auto res = train(m, src, nullptr, cfg);
        CHECK(res.log.size() == 4);
        CHECK(params_bitwise_equal(m, snap));
    }

    TEST_CASE("single sample is memorized") {
        SampleSet set = toy_temporal_set(1, 5, 3, 3, "train");
        MemorySampleSource src(set);
        LSTMModel<float> m({5, 3}, RngStream(19, "init"), 8);
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.batch_size = 1;
        cfg.learning_rate = 0.01;
        cfg.weight_decay = 0.0;
        auto res = train(m, src, nullptr, cfg);
        CHECK(res.log.back().train_loss < 1e-3);
    }

    TEST_CASE("validation tracks the best epoch and both snapshots are returned") {
        SampleSet tr = toy_temporal_set(60, 5, 3, 4, "train");
        SampleSet va = toy_temporal_set(30, 5, 3, 5, "validation");
        MemorySampleSource train_src(tr), val_src(va);
        LSTMModel<float> m({5, 3}, RngStream(23, "init"), 8);
        TrainConfig cfg;
        cfg.epochs = 6;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.02;
        cfg.weight_decay = 0.0;
        std::ostringstream progress;
        auto res = train(m, train_src, &val_src, cfg, &progress);
        REQUIRE(res.log.size() == 6);
        int argmin = 0;
        double lowest = 1e300;
        for (const auto& row : res.log) {
            REQUIRE(row.val_loss.has_value());
            REQUIRE(row.val_auroc.has_value());
            if (*row.val_loss < lowest) {
                lowest = *row.val_loss;
                argmin = row.epoch;
            }
        }
        CHECK(res.best_epoch == argmin);
        CHECK(*res.best_val_loss == lowest);
        REQUIRE(res.best_params.size() == m.params().items().size());
        REQUIRE(res.final_params.size() == m.params().items().size());
        CHECK(progress.str().find("epoch 6/6") != std::string::npos);

        // restoring the best snapshot reproduces the recorded validation loss
        set_params(m, res.best_params);
        double vsum = 0.0;
        std::vector<int> labels;
        Tensor<float> x({static_cast<std::int64_t>(va.keys.size()), 5, 3});
        for (std::size_t i = 0; i < va.keys.size(); ++i) {
            val_src.fetch(static_cast<std::int64_t>(i), x.data() + i * 15);
            labels.push_back(va.keys[i].label);
        }
        Graph<float> g;
        RngStream unused(0, "eval");
        auto pass = m.run(g, x, RunMode::eval, unused);
        vsum = g.value(g.softmax_cross_entropy(pass.logits, labels))[0];
        CHECK(vsum == doctest::Approx(lowest).epsilon(1e-6));
    }

    TEST_CASE("no validation set means best equals final") {
        SampleSet set = toy_temporal_set(10, 5, 3, 6, "train");
        MemorySampleSource src(set);
        LSTMModel<float> m({5, 3}, RngStream(29, "init"), 4);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cfg.learning_rate = 0.01;
        auto res = train(m, src, nullptr, cfg);
        CHECK(res.best_epoch == 2);
        CHECK_FALSE(res.best_val_loss.has_value());
        REQUIRE(res.best_params.size() == res.final_params.size());
        for (std::size_t i = 0; i < res.best_params.size(); ++i)
            CHECK(std::memcmp(res.best_params[i].data(), res.final_params[i].data(),
                              res.final_params[i].size() * sizeof(float)) == 0);
    }

    TEST_CASE("divergence is reported with epoch and batch") {
        SampleSet set = toy_temporal_set(8, 5, 3, 7, "train");
        MemorySampleSource src(set);
        LSTMModel<float> m({5, 3}, RngStream(31, "init"), 4);
        param_data(m, "head.b3")[0] = std::numeric_limits<float>::infinity();
        TrainConfig cfg;
        cfg.epochs = 1;
        cfg.batch_size = 8;
        cfg.learning_rate = 0.001;
        try {
            train(m, src, nullptr, cfg);
            FAIL("expected divergence_error");
        } catch (const divergence_error& e) {
            std::string msg = e.what();
            CHECK(msg.find("epoch 1") != std::string::npos);
            CHECK(msg.find("batch 1") != std::string::npos);
        }
    }

    TEST_CASE("empty training set is rejected") {
        SampleSet set;
        set.modality = Modality::temporal;
        set.dims = {5, 3};
        MemorySampleSource src(set);
        LSTMModel<float> m({5, 3}, RngStream(37, "init"), 4);
        TrainConfig cfg;
        CHECK_THROWS_AS(train(m, src, nullptr, cfg), parameter_error);
    }

    TEST_CASE("mismatched sample dims are rejected") {
        SampleSet set = toy_temporal_set(4, 6, 3, 8, "train");
        MemorySampleSource src(set);
        LSTMModel<float> m({5, 3}, RngStream(41, "init"), 4);
        TrainConfig cfg;
        CHECK_THROWS_AS(train(m, src, nullptr, cfg), schema_error);
    }

    TEST_CASE("eval passes are pure and leave the model untouched") {
        RngStream init(43, "init"), data(44, "data");
        ConvLSTMModel<float> m({3, 2, 4, 4}, init, 2);
        auto snap = snapshot_params(m);
        Tensor<float> x = random_tensor<float>({5, 3, 2, 4, 4}, data);
        auto s1 = score_batch(m, x);
        auto s2 = score_batch(m, x);
        CHECK(s1 == s2);
        for (double v : s1) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // a train-mode pass must not mutate parameters either
        Graph<float> g;
        RngStream drop(3, "drop");
        m.run(g, x, RunMode::train, drop);
        CHECK(params_bitwise_equal(m, snap));
    }

    TEST_CASE("train mode consumes the dropout stream, eval does not") {
        RngStream init(47, "init"), data(48, "data");
        CNNModel<float> m({2, 4, 4}, init, 4);
        Tensor<float> x = random_tensor<float>({2, 2, 4, 4}, data);
        Graph<float> g1, g2, g3;
        RngStream d1(5, "drop"), d2(5, "drop"), d3(6, "drop");
        auto p1 = m.run(g1, x, RunMode::train, d1);
        auto p2 = m.run(g2, x, RunMode::train, d2);
        auto p3 = m.run(g3, x, RunMode::train, d3);
        // same stream, same masks; different stream, (almost surely) different logits
        CHECK(std::memcmp(g1.value(p1.logits).data(), g2.value(p2.logits).data(),
                          sizeof(float) * 4) == 0);
        CHECK(std::memcmp(g1.value(p1.logits).data(), g3.value(p3.logits).data(),
                          sizeof(float) * 4) != 0);
    }

    TEST_CASE("checkpoints round-trip bitwise, NaN payloads included") {
        namespace fs = std::filesystem;
        fs::path dir = fs::temp_directory_path() / "pyro_ckpt_test";
        fs::create_directories(dir);
        std::string p1 = (dir / "model_a.pmc").string();
        std::string p2 = (dir / "model_b.pmc").string();

        RngStream init(51, "init");
        LSTMModel<float> m({5, 3}, init, 4);
        m.params().items()[0].value[7] = std::numeric_limits<float>::quiet_NaN();

        CheckpointInfo info;
        info.modality = Modality::temporal;
        info.config = TrainConfig::reference_for("lstm");
        info.config.seed = 99;
        info.schema_hash = 0xabcdef0123456789ull;
        info.epoch = 17;
        info.val_loss = 0.25;
        info.val_auroc = 0.9125;
        Standardization st;
        st.modality = Modality::temporal;
        st.mean = {0.5, 1.5, -2.0};
        st.stddev = {1.0, 2.0, 0.25};
        info.stats = st;
        info.provenance = {{"source", "unit-test"}};

        save_checkpoint(p1, m, info);
        auto loaded = load_checkpoint(p1);
        CHECK(loaded.info.architecture == "lstm");
        CHECK(loaded.info.modality == Modality::temporal);
        CHECK(loaded.info.config.seed == 99);
        CHECK(loaded.info.config.learning_rate == 1e-3);
        CHECK(loaded.info.schema_hash == 0xabcdef0123456789ull);
        CHECK(loaded.info.epoch == 17);
        CHECK(loaded.info.val_loss == 0.25);
        CHECK(loaded.info.val_auroc == 0.9125);
        REQUIRE(loaded.info.stats.has_value());
        CHECK(loaded.info.stats->stddev == std::vector<double>{1.0, 2.0, 0.25});
        CHECK(loaded.model->input_dims() == std::vector<std::int64_t>{5, 3});
        const auto& a = m.params().items();
        const auto& b = loaded.model->params().items();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::memcmp(a[i].value.data(), b[i].value.data(),
                              a[i].value.size() * sizeof(float)) == 0);
        CHECK(std::isnan(b[0].value[7]));

        save_checkpoint(p2, *loaded.model, loaded.info);
        CHECK(binio::file_hash(p1) == binio::file_hash(p2));

        // scoring through the loaded model matches the original bitwise
        RngStream data(52, "data");
        Tensor<float> payload = random_tensor<float>({5, 3}, data);
        CHECK(predict_proba(m, payload) == predict_proba(*loaded.model, payload));

        SUBCASE("corrupted files are refused") {
            {
                auto os = binio::open_out(p1);
                os << "XXXX";
            }
            CHECK_THROWS_AS(load_checkpoint(p1), format_error);
            std::string p3 = (dir / "trailing.pmc").string();
            save_checkpoint(p3, m, info);
            {
                std::ofstream os(p3, std::ios::binary | std::ios::app);
                os << "junk";
            }
            CHECK_THROWS_AS(load_checkpoint(p3), format_error);
        }
        fs::remove_all(dir);
    }

    TEST_CASE("factory and reference configurations") {
        RngStream init(53, "init");
        auto lstm = make_model("lstm", {10, 18}, init);
        CHECK(lstm->architecture() == "lstm");
        CHECK(lstm->params().scalar_count() == 27554);
        auto cnn = make_model("cnn", {18, 25, 25}, init);
        CHECK(cnn->params().items()[2].value.dim(0) == 2304);
        auto clstm = make_model("convlstm", {10, 18, 25, 25}, init);
        CHECK(clstm->architecture() == "convlstm");
        CHECK_THROWS_AS(make_model("mlp", {31}, init), parameter_error);
        CHECK_THROWS_AS(TrainConfig::reference_for("rf"), parameter_error);

        TrainConfig cnn_ref = TrainConfig::reference_for("cnn");
        CHECK(cnn_ref.learning_rate == 4e-4);
        CHECK(cnn_ref.weight_decay == 3e-2);
        CHECK(cnn_ref.epochs == 50);
        CHECK(cnn_ref.batch_size == 128);
        TrainConfig clstm_ref = TrainConfig::reference_for("convlstm");
        CHECK(clstm_ref.learning_rate == 1e-4);
        CHECK(clstm_ref.weight_decay == 3e-2);

        TrainConfig parsed = TrainConfig::from_json(
            {{"epochs", 7}, {"learning_rate", 0.5}, {"seed", 4}});
        CHECK(parsed.epochs == 7);
        CHECK(parsed.learning_rate == 0.5);
        CHECK(parsed.batch_size == 128);
        CHECK(parsed.seed == 4);
        TrainConfig round = TrainConfig::from_json(parsed.to_json());
        CHECK(round.to_json() == parsed.to_json());

        // cloning is a deep copy
        auto copy = lstm->clone();
        copy->params().items()[0].value[0] += 1.0f;
        CHECK(copy->params().items()[0].value[0] != lstm->params().items()[0].value[0]);
    }
}
