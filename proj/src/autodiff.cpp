#include "cfn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cfn/error.hpp"

namespace cfn::ad {

namespace {

std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
    std::ostringstream os;
    os << op << ": shape mismatch " << shape_string(a) << " vs " << shape_string(b);
    throw DimensionError(os.str());
}

void require_vector(std::string_view op, const Tensor& t) {
    if (!t.is_vector()) {
        throw DimensionError(std::string(op) + ": expected a vector, got " +
                             shape_string(t.shape));
    }
}

void require_matrix(std::string_view op, const Tensor& t) {
    if (!t.is_matrix()) {
        throw DimensionError(std::string(op) + ": expected a matrix, got " +
                             shape_string(t.shape));
    }
}

Graph& graph_of(Var a) { return *a.graph; }

void require_same_graph(Var a, Var b) {
    if (a.graph != b.graph) throw DimensionError("operands belong to different graphs");
}

Node make_node(Op op, Tensor value, std::initializer_list<Var> parents) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    for (Var p : parents) {
        n.parents[n.parent_count++] = p.id;
        n.requires_grad = n.requires_grad || graph_of(p).node(p.id).requires_grad;
    }
    return n;
}

Var elementwise(Op op, Var a, Var b, double (*fn)(double, double)) {
    require_same_graph(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.shape != y.shape) shape_mismatch(op_name(op), x.shape, y.shape);
    Tensor out(x.shape, std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i], y[i]);
    return graph_of(a).push(make_node(op, std::move(out), {a, b}));
}

double stable_logsumexp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_product(shape) != values.size()) {
        throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }
}

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

bool Tensor::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

std::string_view op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Affine: return "affine";
        case Op::Relu: return "relu";
        case Op::Logistic: return "logistic";
        case Op::Softmax: return "softmax";
        case Op::RowMax: return "row_max";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::ScaleShift: return "scale_shift";
        case Op::Clamp: return "clamp";
        case Op::Temper: return "temper";
        case Op::SoftmaxCrossEntropy: return "softmax_cross_entropy";
        case Op::SquaredDistance: return "squared_distance";
        case Op::Sum: return "sum";
        case Op::Dot: return "dot";
        case Op::Concat: return "concat";
        case Op::Slice: return "slice";
        case Op::StackRows: return "stack_rows";
        case Op::Row: return "row";
        case Op::ColMean: return "col_mean";
    }
    return "unknown";
}

std::optional<Op> op_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(Op::ColMean); ++i) {
        const auto op = static_cast<Op>(i);
        if (op_name(op) == name) return op;
    }
    return std::nullopt;
}

const Tensor& Var::value() const { return graph->node(id).value; }
const Tensor& Var::grad() const { return graph->node(id).grad; }

Graph::Graph(std::optional<Op> flipped) : flipped_(flipped) { nodes_.reserve(64); }

Var Graph::variable(Tensor t) {
    Node n;
    n.value = std::move(t);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Graph::constant(Tensor t) {
    Node n;
    n.value = std::move(t);
    return push(std::move(n));
}

Var Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

void Graph::backward(Var root) {
    if (root.value().size() != 1) {
        throw DimensionError("backward: root must be a single value, got " +
                             shape_string(root.shape()));
    }
    backward(root, Tensor(root.shape(), {1.0}));
}

void Graph::backward(Var root, const Tensor& seed) {
    if (root.graph != this) throw DimensionError("backward: root from another graph");
    if (backward_done_) throw Error("backward: graph was already differentiated");
    if (seed.shape != root.shape()) shape_mismatch("backward", seed.shape, root.shape());
    backward_done_ = true;

    for (std::size_t i = 0; i <= root.id; ++i) {
        if (nodes_[i].requires_grad) nodes_[i].grad = Tensor::zeros(nodes_[i].value.shape);
    }
    if (!nodes_[root.id].requires_grad) return;
    for (std::size_t i = 0; i < seed.size(); ++i) nodes_[root.id].grad[i] += seed[i];

    for (std::size_t id = root.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.op == Op::Leaf) continue;
        if (flipped_ && *flipped_ == n.op) {
            Tensor g = n.grad;
            for (double& v : g.values) v = -v;
            propagate(id, g);
        } else {
            propagate(id, n.grad);
        }
    }
}

void Graph::propagate(std::size_t id, const Tensor& g) {
    const Node& n = nodes_[id];
    auto wants = [&](int k) { return nodes_[n.parents[k]].requires_grad; };
    auto parent = [&](int k) -> Node& { return nodes_[n.parents[k]]; };

    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Affine: {
            const Tensor& x = parent(0).value;
            const Tensor& W = parent(1).value;
            const std::size_t m = W.rows();
            const std::size_t k = W.cols();
            if (wants(0)) {
                Tensor& gx = parent(0).grad;
                for (std::size_t i = 0; i < m; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < k; ++j) s += W.at(i, j) * g[j];
                    gx[i] += s;
                }
            }
            if (wants(1)) {
                Tensor& gW = parent(1).grad;
                for (std::size_t i = 0; i < m; ++i) {
                    if (x[i] == 0.0) continue;
                    for (std::size_t j = 0; j < k; ++j) gW.at(i, j) += x[i] * g[j];
                }
            }
            if (n.parent_count == 3 && wants(2)) {
                Tensor& gb = parent(2).grad;
                for (std::size_t j = 0; j < k; ++j) gb[j] += g[j];
            }
            break;
        }
        case Op::Relu: {
            if (!wants(0)) break;
            const Tensor& x = parent(0).value;
            Tensor& gx = parent(0).grad;
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i] > 0.0) gx[i] += g[i];
            }
            break;
        }
        case Op::Logistic: {
            if (!wants(0)) break;
            Tensor& gx = parent(0).grad;
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                const double s = n.value[i];
                gx[i] += g[i] * s * (1.0 - s);
            }
            break;
        }
        case Op::Softmax: {
            if (!wants(0)) break;
            const Tensor& p = n.value;
            double inner = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * g[i];
            Tensor& gx = parent(0).grad;
            for (std::size_t i = 0; i < p.size(); ++i) gx[i] += p[i] * (g[i] - inner);
            break;
        }
        case Op::RowMax: {
            if (!wants(0)) break;
            const Tensor& P = parent(0).value;
            Tensor& gP = parent(0).grad;
            for (std::size_t c = 0; c < P.cols(); ++c) {
                std::size_t best = 0;
                for (std::size_t r = 1; r < P.rows(); ++r) {
                    if (P.at(r, c) > P.at(best, c)) best = r;
                }
                gP.at(best, c) += g[c];
            }
            break;
        }
        case Op::Add:
        case Op::Sub: {
            const double sign_b = n.op == Op::Add ? 1.0 : -1.0;
            if (wants(0)) {
                Tensor& ga = parent(0).grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (wants(1)) {
                Tensor& gb = parent(1).grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign_b * g[i];
            }
            break;
        }
        case Op::Mul: {
            const Tensor& a = parent(0).value;
            const Tensor& b = parent(1).value;
            if (wants(0)) {
                Tensor& ga = parent(0).grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
            }
            if (wants(1)) {
                Tensor& gb = parent(1).grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
            }
            break;
        }
        case Op::ScaleShift: {
            if (!wants(0)) break;
            Tensor& gx = parent(0).grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.aux[0] * g[i];
            break;
        }
        case Op::Clamp: {
            if (!wants(0)) break;
            const Tensor& x = parent(0).value;
            Tensor& gx = parent(0).grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (x[i] > n.aux[0] && x[i] < n.aux[1]) gx[i] += g[i];
            }
            break;
        }
        case Op::Temper: {
            const Tensor& h = parent(0).value;
            const double factor = std::exp(-2.0 * parent(1).value[0]);
            if (wants(0)) {
                Tensor& gh = parent(0).grad;
                for (std::size_t i = 0; i < h.size(); ++i) gh[i] += g[i] * factor;
            }
            if (wants(1)) {
                double s = 0.0;
                for (std::size_t i = 0; i < h.size(); ++i) s += g[i] * h[i];
                parent(1).grad[0] += -2.0 * factor * s;
            }
            break;
        }
        case Op::SoftmaxCrossEntropy: {
            if (!wants(0)) break;
            const Tensor& t = parent(0).value;
            const double lse = stable_logsumexp(t.values);
            Tensor& gt = parent(0).grad;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double p = std::exp(t[i] - lse);
                gt[i] += g[0] * (p - (i == n.index_aux ? 1.0 : 0.0));
            }
            break;
        }
        case Op::SquaredDistance: {
            const Tensor& a = parent(0).value;
            const Tensor& b = parent(1).value;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = 2.0 * (a[i] - b[i]) * g[0];
                if (wants(0)) parent(0).grad[i] += d;
                if (wants(1)) parent(1).grad[i] -= d;
            }
            break;
        }
        case Op::Sum: {
            if (!wants(0)) break;
            for (double& v : parent(0).grad.values) v += g[0];
            break;
        }
        case Op::Dot: {
            const Tensor& a = parent(0).value;
            const Tensor& b = parent(1).value;
            if (wants(0)) {
                for (std::size_t i = 0; i < a.size(); ++i) parent(0).grad[i] += g[0] * b[i];
            }
            if (wants(1)) {
                for (std::size_t i = 0; i < a.size(); ++i) parent(1).grad[i] += g[0] * a[i];
            }
            break;
        }
        case Op::Concat: {
            const std::size_t na = parent(0).value.size();
            if (wants(0)) {
                for (std::size_t i = 0; i < na; ++i) parent(0).grad[i] += g[i];
            }
            if (wants(1)) {
                Tensor& gb = parent(1).grad;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
            }
            break;
        }
        case Op::Slice: {
            if (!wants(0)) break;
            Tensor& gx = parent(0).grad;
            for (std::size_t i = 0; i < n.length_aux; ++i) gx[n.index_aux + i] += g[i];
            break;
        }
        case Op::StackRows: {
            const std::size_t d = parent(0).value.size();
            if (wants(0)) {
                for (std::size_t i = 0; i < d; ++i) parent(0).grad[i] += g[i];
            }
            if (wants(1)) {
                for (std::size_t i = 0; i < d; ++i) parent(1).grad[i] += g[d + i];
            }
            break;
        }
        case Op::Row: {
            if (!wants(0)) break;
            Tensor& gP = parent(0).grad;
            const std::size_t c = gP.cols();
            for (std::size_t i = 0; i < c; ++i) gP.at(n.index_aux, i) += g[i];
            break;
        }
        case Op::ColMean: {
            if (!wants(0)) break;
            Tensor& gP = parent(0).grad;
            const double inv = 1.0 / static_cast<double>(gP.rows());
            for (std::size_t r = 0; r < gP.rows(); ++r) {
                for (std::size_t c = 0; c < gP.cols(); ++c) gP.at(r, c) += g[c] * inv;
            }
            break;
        }
    }
}

// ---------------------------------------------------------------------------

Var affine(Var x, Var W, Var b) {
    require_same_graph(x, W);
    require_same_graph(x, b);
    const Tensor& xv = x.value();
    const Tensor& Wv = W.value();
    const Tensor& bv = b.value();
    require_vector("affine", xv);
    require_matrix("affine", Wv);
    require_vector("affine", bv);
    if (Wv.rows() != xv.size()) shape_mismatch("affine (x, W)", xv.shape, Wv.shape);
    if (Wv.cols() != bv.size()) shape_mismatch("affine (W, b)", Wv.shape, bv.shape);
    const std::size_t k = Wv.cols();
    Tensor out = bv;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double xi = xv[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) out[j] += xi * Wv.at(i, j);
    }
    return graph_of(x).push(make_node(Op::Affine, std::move(out), {x, W, b}));
}

Var affine(Var x, Var W) {
    require_same_graph(x, W);
    const Tensor& xv = x.value();
    const Tensor& Wv = W.value();
    require_vector("affine", xv);
    require_matrix("affine", Wv);
    if (Wv.rows() != xv.size()) shape_mismatch("affine (x, W)", xv.shape, Wv.shape);
    const std::size_t k = Wv.cols();
    Tensor out = Tensor::zeros({k});
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double xi = xv[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) out[j] += xi * Wv.at(i, j);
    }
    return graph_of(x).push(make_node(Op::Affine, std::move(out), {x, W}));
}

Var relu(Var x) {
    Tensor out = x.value();
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    return graph_of(x).push(make_node(Op::Relu, std::move(out), {x}));
}

Var logistic(Var x) {
    Tensor out = x.value();
    for (double& v : out.values) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return graph_of(x).push(make_node(Op::Logistic, std::move(out), {x}));
}

Var softmax(Var x) {
    const Tensor& xv = x.value();
    require_vector("softmax", xv);
    if (xv.size() == 0) throw DimensionError("softmax: empty vector");
    Tensor out = xv;
    const double m = *std::max_element(out.values.begin(), out.values.end());
    double s = 0.0;
    for (double& v : out.values) {
        v = std::exp(v - m);
        s += v;
    }
    for (double& v : out.values) v /= s;
    return graph_of(x).push(make_node(Op::Softmax, std::move(out), {x}));
}

Var row_max(Var P) {
    const Tensor& Pv = P.value();
    require_matrix("row_max", Pv);
    if (Pv.rows() == 0) throw DimensionError("row_max: matrix has no rows");
    Tensor out = Tensor::zeros({Pv.cols()});
    for (std::size_t c = 0; c < Pv.cols(); ++c) {
        double best = Pv.at(0, c);
        for (std::size_t r = 1; r < Pv.rows(); ++r) best = std::max(best, Pv.at(r, c));
        out[c] = best;
    }
    return graph_of(P).push(make_node(Op::RowMax, std::move(out), {P}));
}

Var add(Var a, Var b) {
    return elementwise(Op::Add, a, b, [](double x, double y) { return x + y; });
}

Var sub(Var a, Var b) {
    return elementwise(Op::Sub, a, b, [](double x, double y) { return x - y; });
}

Var mul(Var a, Var b) {
    return elementwise(Op::Mul, a, b, [](double x, double y) { return x * y; });
}

Var scale_shift(Var x, double a, double c) {
    Tensor out = x.value();
    for (double& v : out.values) v = a * v + c;
    Node n = make_node(Op::ScaleShift, std::move(out), {x});
    n.aux = {a, c};
    return graph_of(x).push(std::move(n));
}

Var clamp(Var x, double lo, double hi) {
    Tensor out = x.value();
    for (double& v : out.values) v = std::clamp(v, lo, hi);
    Node n = make_node(Op::Clamp, std::move(out), {x});
    n.aux = {lo, hi};
    return graph_of(x).push(std::move(n));
}

Var temper(Var h, Var log_sigma) {
    require_same_graph(h, log_sigma);
    if (log_sigma.value().size() != 1) {
        throw DimensionError("temper: log_sigma must be a single value, got " +
                             shape_string(log_sigma.shape()));
    }
    const double factor = std::exp(-2.0 * log_sigma.value()[0]);
    Tensor out = h.value();
    for (double& v : out.values) v *= factor;
    return graph_of(h).push(make_node(Op::Temper, std::move(out), {h, log_sigma}));
}

Var softmax_cross_entropy(Var logits, std::size_t target) {
    const Tensor& t = logits.value();
    require_vector("softmax_cross_entropy", t);
    if (target >= t.size()) {
        throw InputError("softmax_cross_entropy: target index " + std::to_string(target) +
                         " out of range for " + std::to_string(t.size()) + " classes");
    }
    const double loss = stable_logsumexp(t.values) - t[target];
    Node n = make_node(Op::SoftmaxCrossEntropy, Tensor::scalar(loss), {logits});
    n.index_aux = target;
    return graph_of(logits).push(std::move(n));
}

Var squared_distance(Var a, Var b) {
    require_same_graph(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.shape != y.shape) shape_mismatch("squared_distance", x.shape, y.shape);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return graph_of(a).push(make_node(Op::SquaredDistance, Tensor::scalar(s), {a, b}));
}

Var sum(Var x) {
    const Tensor& v = x.value();
    const double s = std::accumulate(v.values.begin(), v.values.end(), 0.0);
    return graph_of(x).push(make_node(Op::Sum, Tensor::scalar(s), {x}));
}

Var dot(Var a, Var b) {
    require_same_graph(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.shape != y.shape) shape_mismatch("dot", x.shape, y.shape);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return graph_of(a).push(make_node(Op::Dot, Tensor::scalar(s), {a, b}));
}

Var concat(Var a, Var b) {
    require_same_graph(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_vector("concat", x);
    require_vector("concat", y);
    std::vector<double> out;
    out.reserve(x.size() + y.size());
    out.insert(out.end(), x.values.begin(), x.values.end());
    out.insert(out.end(), y.values.begin(), y.values.end());
    return graph_of(a).push(make_node(Op::Concat, Tensor::vector(std::move(out)), {a, b}));
}

Var slice(Var x, std::size_t offset, std::size_t length) {
    const Tensor& v = x.value();
    require_vector("slice", v);
    if (offset + length > v.size()) {
        throw DimensionError("slice: [" + std::to_string(offset) + ", " +
                             std::to_string(offset + length) + ") out of range for " +
                             shape_string(v.shape));
    }
    std::vector<double> out(v.values.begin() + static_cast<std::ptrdiff_t>(offset),
                            v.values.begin() + static_cast<std::ptrdiff_t>(offset + length));
    Node n = make_node(Op::Slice, Tensor::vector(std::move(out)), {x});
    n.index_aux = offset;
    n.length_aux = length;
    return graph_of(x).push(std::move(n));
}

Var stack_rows(Var a, Var b) {
    require_same_graph(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_vector("stack_rows", x);
    if (x.shape != y.shape) shape_mismatch("stack_rows", x.shape, y.shape);
    std::vector<double> out(x.values);
    out.insert(out.end(), y.values.begin(), y.values.end());
    return graph_of(a).push(
        make_node(Op::StackRows, Tensor::matrix(2, x.size(), std::move(out)), {a, b}));
}

Var row(Var P, std::size_t r) {
    const Tensor& Pv = P.value();
    require_matrix("row", Pv);
    if (r >= Pv.rows()) throw DimensionError("row: index out of range");
    const auto first = Pv.values.begin() + static_cast<std::ptrdiff_t>(r * Pv.cols());
    std::vector<double> out(first, first + static_cast<std::ptrdiff_t>(Pv.cols()));
    Node n = make_node(Op::Row, Tensor::vector(std::move(out)), {P});
    n.index_aux = r;
    return graph_of(P).push(std::move(n));
}

Var col_mean(Var P) {
    const Tensor& Pv = P.value();
    require_matrix("col_mean", Pv);
    if (Pv.rows() == 0) throw DimensionError("col_mean: matrix has no rows");
    Tensor out = Tensor::zeros({Pv.cols()});
    for (std::size_t r = 0; r < Pv.rows(); ++r) {
        for (std::size_t c = 0; c < Pv.cols(); ++c) out[c] += Pv.at(r, c);
    }
    for (double& v : out.values) v /= static_cast<double>(Pv.rows());
    return graph_of(P).push(make_node(Op::ColMean, std::move(out), {P}));
}

// ---------------------------------------------------------------------------

namespace {

double evaluate(const ScalarFunction& f, std::span<const Tensor> point) {
    Graph g;
    std::vector<Var> inputs;
    inputs.reserve(point.size());
    for (const Tensor& t : point) inputs.push_back(g.constant(t));
    const Var out = f(g, inputs);
    if (out.value().size() != 1) {
        throw DimensionError("grad_check: function must return a single value");
    }
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
}

}  // namespace

double grad_check(const ScalarFunction& f, std::span<const Tensor> point,
                  const GradCheckOptions& options) {
    if (!(options.eps > 0.0 && options.eps <= 1e-2)) {
        throw ParameterError("grad_check: eps must lie in (0, 1e-2]");
    }
    for (const Tensor& t : point) {
        if (!t.all_finite()) throw NumericError("grad_check: non-finite input point");
    }

    std::vector<Tensor> analytic;
    {
        Graph g(options.flip_backward_of);
        std::vector<Var> inputs;
        for (const Tensor& t : point) inputs.push_back(g.variable(t));
        const Var out = f(g, inputs);
        if (!out.value().all_finite()) {
            throw NumericError("grad_check: non-finite function value");
        }
        g.backward(out);
        for (Var v : inputs) analytic.push_back(v.grad());
    }

    std::vector<Tensor> probe(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t k = 0; k < probe.size(); ++k) {
        if (!analytic[k].all_finite()) throw NumericError("grad_check: non-finite gradient");
        for (std::size_t i = 0; i < probe[k].size(); ++i) {
            const double x0 = probe[k][i];
            probe[k][i] = x0 + options.eps;
            const double up = evaluate(f, probe);
            probe[k][i] = x0 - options.eps;
            const double down = evaluate(f, probe);
            probe[k][i] = x0;
            const double numeric = (up - down) / (2.0 * options.eps);
            const double a = analytic[k][i];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
        }
    }
    return worst;
}

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point,
                  const GradCheckOptions& options) {
    const ScalarFunction wrapped = [&f](Graph& g, std::span<const Var> in) {
        return f(g, in[0]);
    };
    return grad_check(wrapped, std::span<const Tensor>(&point, 1), options);
}

}  // namespace cfn::ad
