#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pyrocast/kernels.hpp"
#include "pyrocast/rng.hpp"
#include "pyrocast/tensor.hpp"

namespace pyrocast {

// Reverse-mode tape. A graph is built per forward pass; node ids grow
// monotonically and parents always precede children, so the tape order is a
// topological order and cycles cannot be constructed.
template <typename T>
class Graph {
  public:
    struct Var {
        std::int32_t id = -1;
        bool valid() const { return id >= 0; }
    };

    Var leaf(Tensor<T> value) { return push(std::move(value), {}, nullptr); }

    Var make_node(Tensor<T> value, std::vector<Var> parents,
                  std::function<void(Graph&, std::int32_t)> backward_fn) {
        return push(std::move(value), std::move(parents), std::move(backward_fn));
    }

    const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }

    Tensor<T>& grad(Var v) { return grad_ref(v.id); }

    void zero_grad() {
        for (auto& n : nodes_)
            if (n.grad.size() > 0) n.grad.fill(T(0));
    }

    // Leaf gradients accumulate across calls; callers zero first when they want
    // a fresh pass. Interior-node gradients are per-pass scratch.
    void backward(Var loss) {
        if (value(loss).size() != 1)
            throw dimension_error("backward requires a scalar loss node, got shape " +
                                  value(loss).shape_string());
        std::vector<char> reachable(nodes_.size(), 0);
        mark_reachable(loss.id, reachable);
        for (std::size_t id = 0; id < nodes_.size(); ++id)
            if (reachable[id] && nodes_[id].backward_fn && nodes_[id].grad.size() > 0)
                nodes_[id].grad.fill(T(0));
        grad_ref(loss.id)[0] += T(1);
        for (std::int32_t id = loss.id; id >= 0; --id) {
            if (!reachable[id] || !nodes_[id].backward_fn) continue;
            if (nodes_[id].grad.size() == 0) continue;
            nodes_[id].backward_fn(*this, id);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        check_same(a, b, "add");
        Tensor<T> out = value(a);
        const Tensor<T>& vb = value(b);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] += vb[i];
        auto ia = a.id, ib = b.id;
        return make_node(std::move(out), {a, b}, [ia, ib](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            Tensor<T>& ga = g.grad_ref(ia);
            Tensor<T>& gb = g.grad_ref(ib);
            for (std::int64_t i = 0; i < go.size(); ++i) {
                ga[i] += go[i];
                gb[i] += go[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        check_same(a, b, "mul");
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        Tensor<T> out(va.shape());
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
        auto ia = a.id, ib = b.id;
        return make_node(std::move(out), {a, b}, [ia, ib](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            const Tensor<T>& va = g.nodes_[ia].value;
            const Tensor<T>& vb = g.nodes_[ib].value;
            Tensor<T>& ga = g.grad_ref(ia);
            Tensor<T>& gb = g.grad_ref(ib);
            for (std::int64_t i = 0; i < go.size(); ++i) {
                ga[i] += go[i] * vb[i];
                gb[i] += go[i] * va[i];
            }
        });
    }

    Var scale(Var a, T c) {
        Tensor<T> out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c;
        auto ia = a.id;
        return make_node(std::move(out), {a}, [ia, c](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
        });
    }

    Var relu(Var a) {
        Tensor<T> out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
        auto ia = a.id;
        return make_node(std::move(out), {a}, [ia](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            const Tensor<T>& va = g.nodes_[ia].value;
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < go.size(); ++i)
                if (va[i] > T(0)) ga[i] += go[i];
        });
    }

    Var sigmoid(Var a) {
        Tensor<T> out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = kernels::sigmoid(out[i]);
        auto ia = a.id;
        return make_node(std::move(out), {a}, [ia](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            const Tensor<T>& vo = g.nodes_[self].value;
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < go.size(); ++i)
                ga[i] += go[i] * vo[i] * (T(1) - vo[i]);
        });
    }

    Var tanh_op(Var a) {
        Tensor<T> out = value(a);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
        auto ia = a.id;
        return make_node(std::move(out), {a}, [ia](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            const Tensor<T>& vo = g.nodes_[self].value;
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (T(1) - vo[i] * vo[i]);
        });
    }

    Var sum(Var a) {
        T acc = T(0);
        const Tensor<T>& va = value(a);
        for (std::int64_t i = 0; i < va.size(); ++i) acc += va[i];
        auto ia = a.id;
        return make_node(Tensor<T>::scalar(acc), {a}, [ia](Graph& g, std::int32_t self) {
            T go = g.grad_ref(self)[0];
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += go;
        });
    }

    // ---- shape ops ----

    Var reshape(Var a, std::vector<std::int64_t> shape) {
        Tensor<T> out(std::move(shape), std::vector<T>(value(a).data(),
                                                       value(a).data() + value(a).size()));
        if (out.size() != value(a).size())
            throw dimension_error("reshape size mismatch");
        auto ia = a.id;
        return make_node(std::move(out), {a}, [ia](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
    }

    // Select [c0,c1) along axis 1 of a rank>=2 tensor.
    Var slice_axis1(Var a, std::int64_t c0, std::int64_t c1) {
        const Tensor<T>& va = value(a);
        if (va.rank() < 2) throw dimension_error("slice_axis1 needs rank >= 2");
        std::int64_t n = va.dim(0), c = va.dim(1);
        if (c0 < 0 || c1 > c || c0 >= c1) throw bounds_error("slice_axis1 range out of bounds");
        std::int64_t block = 1;
        for (std::size_t i = 2; i < va.rank(); ++i) block *= va.dim(i);
        std::vector<std::int64_t> shape = va.shape();
        shape[1] = c1 - c0;
        Tensor<T> out(shape);
        for (std::int64_t s = 0; s < n; ++s)
            std::copy(va.data() + (s * c + c0) * block, va.data() + (s * c + c1) * block,
                      out.data() + s * (c1 - c0) * block);
        auto ia = a.id;
        return make_node(std::move(out), {a},
                         [ia, c0, c1, c, block, n](Graph& g, std::int32_t self) {
                             const Tensor<T>& go = g.grad_ref(self);
                             Tensor<T>& ga = g.grad_ref(ia);
                             for (std::int64_t s = 0; s < n; ++s) {
                                 const T* src = go.data() + s * (c1 - c0) * block;
                                 T* dst = ga.data() + (s * c + c0) * block;
                                 for (std::int64_t i = 0; i < (c1 - c0) * block; ++i)
                                     dst[i] += src[i];
                             }
                         });
    }

    Var concat_axis1(Var a, Var b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        if (va.rank() != vb.rank() || va.rank() < 2 || va.dim(0) != vb.dim(0))
            throw dimension_error("concat_axis1 shape mismatch");
        std::int64_t block_a = va.size() / va.dim(0);
        std::int64_t block_b = vb.size() / vb.dim(0);
        std::vector<std::int64_t> shape = va.shape();
        shape[1] += vb.dim(1);
        Tensor<T> out(shape);
        std::int64_t n = va.dim(0);
        for (std::int64_t s = 0; s < n; ++s) {
            std::copy(va.data() + s * block_a, va.data() + (s + 1) * block_a,
                      out.data() + s * (block_a + block_b));
            std::copy(vb.data() + s * block_b, vb.data() + (s + 1) * block_b,
                      out.data() + s * (block_a + block_b) + block_a);
        }
        auto ia = a.id, ib = b.id;
        return make_node(std::move(out), {a, b},
                         [ia, ib, block_a, block_b, n](Graph& g, std::int32_t self) {
                             const Tensor<T>& go = g.grad_ref(self);
                             Tensor<T>& ga = g.grad_ref(ia);
                             Tensor<T>& gb = g.grad_ref(ib);
                             for (std::int64_t s = 0; s < n; ++s) {
                                 const T* src = go.data() + s * (block_a + block_b);
                                 for (std::int64_t i = 0; i < block_a; ++i)
                                     ga[s * block_a + i] += src[i];
                                 for (std::int64_t i = 0; i < block_b; ++i)
                                     gb[s * block_b + i] += src[block_a + i];
                             }
                         });
    }

    // ---- linear algebra ----

    Var matmul(Var a, Var b) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
            throw dimension_error("matmul shapes " + va.shape_string() + " x " +
                                  vb.shape_string());
        std::int64_t m = va.dim(0), k = va.dim(1), n = vb.dim(1);
        Tensor<T> out({m, n});
        kernels::gemm(va.data(), vb.data(), out.data(), m, k, n);
        auto ia = a.id, ib = b.id;
        return make_node(std::move(out), {a, b}, [ia, ib, m, k, n](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            const Tensor<T>& va = g.nodes_[ia].value;
            const Tensor<T>& vb = g.nodes_[ib].value;
            kernels::gemm_a_bt(go.data(), vb.data(), g.grad_ref(ia).data(), m, n, k, true);
            kernels::gemm_at_b(va.data(), go.data(), g.grad_ref(ib).data(), k, m, n, true);
        });
    }

    // y[N,M] = x[N,M] + b[M] broadcast over rows.
    Var add_rows(Var x, Var b) {
        const Tensor<T>& vx = value(x);
        const Tensor<T>& vb = value(b);
        if (vx.rank() != 2 || vb.size() != vx.dim(1))
            throw dimension_error("add_rows bias length mismatch");
        std::int64_t n = vx.dim(0), m = vx.dim(1);
        Tensor<T> out = vx;
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int64_t c = 0; c < m; ++c) out[r * m + c] += vb[c];
        auto ix = x.id, ib = b.id;
        return make_node(std::move(out), {x, b}, [ix, ib, n, m](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            Tensor<T>& gx = g.grad_ref(ix);
            Tensor<T>& gb = g.grad_ref(ib);
            for (std::int64_t r = 0; r < n; ++r)
                for (std::int64_t c = 0; c < m; ++c) {
                    gx[r * m + c] += go[r * m + c];
                    gb[c] += go[r * m + c];
                }
        });
    }

    Var linear(Var x, Var w, Var b) { return add_rows(matmul(x, w), b); }

    // ---- layer primitives ----

    Var conv2d(Var input, Var kern, Var bias, std::int64_t pad, std::int64_t stride) {
        const Tensor<T>& vi = value(input);
        const Tensor<T>& vk = value(kern);
        kernels::ConvDims d = kernels::conv_check(vi, vk, pad, stride);
        if (bias.valid() && value(bias).size() != d.c_out)
            throw dimension_error("conv2d bias length mismatch");
        bool batched = vi.rank() == 4;
        Tensor<T> out(batched ? std::vector<std::int64_t>{d.n, d.c_out, d.oh, d.ow}
                              : std::vector<std::int64_t>{d.c_out, d.oh, d.ow});
        std::vector<T> col(static_cast<std::size_t>(d.c_in * d.kh * d.kw) * d.oh * d.ow);
        kernels::conv2d_forward(d, vi.data(), vk.data(),
                                bias.valid() ? value(bias).data() : nullptr, out.data(),
                                col.data());
        auto ii = input.id, ik = kern.id, ib = bias.valid() ? bias.id : -1;
        std::vector<Var> parents{input, kern};
        if (bias.valid()) parents.push_back(bias);
        return make_node(std::move(out), std::move(parents),
                         [ii, ik, ib, d](Graph& g, std::int32_t self) {
                             const Tensor<T>& go = g.grad_ref(self);
                             std::vector<T> col(static_cast<std::size_t>(d.c_in * d.kh * d.kw) *
                                                d.oh * d.ow);
                             std::vector<T> dcol(col.size());
                             kernels::conv2d_backward(
                                 d, g.nodes_[ii].value.data(), g.nodes_[ik].value.data(),
                                 go.data(), g.grad_ref(ii).data(), g.grad_ref(ik).data(),
                                 ib >= 0 ? g.grad_ref(ib).data() : nullptr, col.data(),
                                 dcol.data());
                         });
    }

    Var max_pool2d(Var input, std::int64_t window = 2) {
        const Tensor<T>& vi = value(input);
        if (vi.rank() != 3 && vi.rank() != 4)
            throw dimension_error("max_pool2d input must be [C,H,W] or [N,C,H,W]");
        std::int64_t h = vi.dim(vi.rank() - 2), w = vi.dim(vi.rank() - 1);
        if (h < window || w < window)
            throw dimension_error("max_pool2d input " + vi.shape_string() +
                                  " smaller than window " + std::to_string(window));
        std::int64_t planes = vi.size() / (h * w);
        std::vector<std::int64_t> shape = vi.shape();
        shape[vi.rank() - 2] = h / window;
        shape[vi.rank() - 1] = w / window;
        Tensor<T> out(shape);
        auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
        kernels::max_pool2d_forward(vi.data(), planes, h, w, window, out.data(), argmax->data());
        auto ii = input.id;
        return make_node(std::move(out), {input}, [ii, argmax](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            kernels::max_pool2d_backward(go.data(), argmax->data(), go.size(),
                                         g.grad_ref(ii).data());
        });
    }

    // Inverted dropout. The mask is sampled at construction from the caller's
    // stream, so a rebuilt graph with an identically seeded stream reproduces it.
    Var dropout(Var input, double p, bool train, RngStream& rng) {
        if (p < 0.0 || p >= 1.0)
            throw parameter_error("dropout probability must be in [0,1), got " +
                                  std::to_string(p));
        if (!train || p == 0.0) return identity(input);
        const Tensor<T>& vi = value(input);
        auto mask = std::make_shared<Tensor<T>>(vi.shape());
        T keep_scale = static_cast<T>(1.0 / (1.0 - p));
        Tensor<T> out(vi.shape());
        for (std::int64_t i = 0; i < vi.size(); ++i) {
            T m = rng.next_double() < p ? T(0) : keep_scale;
            (*mask)[i] = m;
            out[i] = vi[i] * m;
        }
        auto ii = input.id;
        return make_node(std::move(out), {input}, [ii, mask](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            Tensor<T>& gi = g.grad_ref(ii);
            for (std::int64_t i = 0; i < go.size(); ++i) gi[i] += go[i] * (*mask)[i];
        });
    }

    // Mean softmax cross-entropy over the batch; logits [N,C] or [C].
    Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
        const Tensor<T>& vl = value(logits);
        std::int64_t n = vl.rank() == 2 ? vl.dim(0) : 1;
        std::int64_t c = vl.rank() == 2 ? vl.dim(1) : vl.dim(0);
        if (static_cast<std::int64_t>(labels.size()) != n)
            throw dimension_error("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(n) + " rows");
        if (!vl.all_finite()) throw numeric_error("softmax_cross_entropy: non-finite logits");
        for (int y : labels)
            if (y < 0 || y >= c) throw parameter_error("label out of range");
        auto probs = std::make_shared<Tensor<T>>(std::vector<std::int64_t>{n, c});
        T loss = T(0);
        for (std::int64_t r = 0; r < n; ++r) {
            const T* row = vl.data() + r * c;
            T m = row[0];
            for (std::int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
            T denom = T(0);
            for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - m);
            for (std::int64_t j = 0; j < c; ++j)
                (*probs)[r * c + j] = std::exp(row[j] - m) / denom;
            loss += std::log(denom) - (row[labels[r]] - m);
        }
        loss /= static_cast<T>(n);
        auto il = logits.id;
        auto lab = std::make_shared<std::vector<int>>(labels);
        return make_node(Tensor<T>::scalar(loss), {logits},
                         [il, probs, lab, n, c](Graph& g, std::int32_t self) {
                             T go = g.grad_ref(self)[0];
                             Tensor<T>& gl = g.grad_ref(il);
                             T inv_n = T(1) / static_cast<T>(n);
                             for (std::int64_t r = 0; r < n; ++r)
                                 for (std::int64_t j = 0; j < c; ++j) {
                                     T p = (*probs)[r * c + j];
                                     T y = (*lab)[r] == j ? T(1) : T(0);
                                     gl[r * c + j] += go * (p - y) * inv_n;
                                 }
                         });
    }

    Var identity(Var a) {
        auto ia = a.id;
        return make_node(value(a), {a}, [ia](Graph& g, std::int32_t self) {
            const Tensor<T>& go = g.grad_ref(self);
            Tensor<T>& ga = g.grad_ref(ia);
            for (std::int64_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
    }

    Tensor<T>& grad_ref(std::int32_t id) {
        auto& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = Tensor<T>(n.value.shape());
        return n.grad;
    }

  private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::vector<std::int32_t> parents;
        std::function<void(Graph&, std::int32_t)> backward_fn;
    };

    Var push(Tensor<T> value, std::vector<Var> parents,
             std::function<void(Graph&, std::int32_t)> backward_fn) {
        std::int32_t id = static_cast<std::int32_t>(nodes_.size());
        Node n;
        n.value = std::move(value);
        n.parents.reserve(parents.size());
        for (Var p : parents) {
            if (!p.valid() || p.id >= id)
                throw state_error("graph parents must precede children");
            n.parents.push_back(p.id);
        }
        n.backward_fn = std::move(backward_fn);
        nodes_.push_back(std::move(n));
        return Var{id};
    }

    void mark_reachable(std::int32_t from, std::vector<char>& mark) const {
        std::vector<std::int32_t> stack{from};
        while (!stack.empty()) {
            std::int32_t id = stack.back();
            stack.pop_back();
            if (mark[id]) continue;
            mark[id] = 1;
            for (std::int32_t p : nodes_[id].parents) stack.push_back(p);
        }
    }

    void check_same(Var a, Var b, const char* op) {
        if (!value(a).same_shape(value(b)))
            throw dimension_error(std::string(op) + ": shape mismatch " +
                                  value(a).shape_string() + " vs " + value(b).shape_string());
    }

    std::vector<Node> nodes_;
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

template <typename T>
std::vector<T> softmax_probs(const T* logits, std::int64_t c) {
    T m = logits[0];
    for (std::int64_t j = 1; j < c; ++j) m = std::max(m, logits[j]);
    T denom = T(0);
    std::vector<T> p(c);
    for (std::int64_t j = 0; j < c; ++j) denom += std::exp(logits[j] - m);
    for (std::int64_t j = 0; j < c; ++j) p[j] = std::exp(logits[j] - m) / denom;
    return p;
}

}  // namespace pyrocast
