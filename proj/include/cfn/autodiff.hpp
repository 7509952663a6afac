#pragma once

// Define-by-run reverse-mode differentiation over small dense tensors.
//
// A Graph records every operation applied to its nodes in creation order,
// which is already a topological order, so backward() is a single reverse
// sweep. Graphs are cheap and meant to be rebuilt for every forward pass.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cfn::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Row-major dense array of doubles. A rank-0 tensor (empty shape) holds one
// value.
struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape);
    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

    bool all_finite() const;
    bool is_vector() const { return shape.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Identifier of the operation that produced a node. Backward dispatches on it.
enum class Op : std::uint8_t {
    Leaf,
    Affine,
    Relu,
    Logistic,
    Softmax,
    RowMax,
    Add,
    Sub,
    Mul,
    ScaleShift,
    Clamp,
    Temper,
    SoftmaxCrossEntropy,
    SquaredDistance,
    Sum,
    Dot,
    Concat,
    Slice,
    StackRows,
    Row,
    ColMean,
};

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

struct Node {
    Tensor value;
    Tensor grad;
    std::array<std::size_t, 3> parents{};
    std::uint8_t parent_count = 0;
    Op op = Op::Leaf;
    std::array<double, 2> aux{};
    std::size_t index_aux = 0;
    std::size_t length_aux = 0;
    bool requires_grad = false;
};

class Graph;

// Handle to a node inside a Graph. Cheap to copy; valid as long as the graph.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
    const Shape& shape() const { return value().shape; }
};

class Graph {
public:
    // `flipped` negates the backward rule of one operation. Used only to
    // verify that gradient checks catch a broken rule.
    explicit Graph(std::optional<Op> flipped = std::nullopt);

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Trainable leaf: gradients are accumulated into it.
    Var variable(Tensor t);
    // Constant leaf: no gradient is tracked.
    Var constant(Tensor t);

    const Node& node(std::size_t id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(root)/d(root) = 1 and propagates to every node that requires a
    // gradient. The root must hold a single value. May be called once.
    void backward(Var root);
    // Same, with an explicit upstream gradient of root's shape.
    void backward(Var root, const Tensor& seed);

    Var push(Node n);

private:
    void propagate(std::size_t id, const Tensor& g);

    std::vector<Node> nodes_;
    std::optional<Op> flipped_;
    bool backward_done_ = false;
};

// out = xᵀW + b for x[m], W[m×k], b[k].
Var affine(Var x, Var W, Var b);
// out = xᵀW, the bias-free form.
Var affine(Var x, Var W);
Var relu(Var x);
Var logistic(Var x);
// Numerically stable softmax of a vector.
Var softmax(Var x);
// Column-wise max over rows; backward routes each column's gradient to the
// lowest-index row that attains the max.
Var row_max(Var P);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a * x + c, elementwise.
Var scale_shift(Var x, double a, double c);
inline Var scale(Var x, double a) { return scale_shift(x, a, 0.0); }
inline Var one_minus(Var x) { return scale_shift(x, -1.0, 1.0); }
// Elementwise clamp; the subgradient is 0 outside [lo, hi].
Var clamp(Var x, double lo, double hi);
// h * exp(-2 * log_sigma), i.e. h / sigma^2 with sigma parameterized by its log.
Var temper(Var h, Var log_sigma);
// log(sum(exp(logits))) - logits[target], computed with max-subtraction.
Var softmax_cross_entropy(Var logits, std::size_t target);
// sum((a - b)^2)
Var squared_distance(Var a, Var b);
Var sum(Var x);
Var dot(Var a, Var b);
Var concat(Var a, Var b);
Var slice(Var x, std::size_t offset, std::size_t length);
// Stacks two vectors of equal length into a 2×d matrix.
Var stack_rows(Var a, Var b);
Var row(Var P, std::size_t r);
Var col_mean(Var P);

// ---------------------------------------------------------------------------
// Finite-difference checking

struct GradCheckOptions {
    double eps = 1e-5;
    std::optional<Op> flip_backward_of;
};

using ScalarFunction = std::function<Var(Graph&, std::span<const Var>)>;

// Max over all coordinates of all inputs of
//   |analytic - central_difference| / max(1, |analytic|).
// Throws ParameterError for eps outside (0, 1e-2] and NumericError if any
// evaluation is non-finite.
double grad_check(const ScalarFunction& f, std::span<const Tensor> point,
                  const GradCheckOptions& options = {});

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point,
                  const GradCheckOptions& options = {});

}  // namespace cfn::ad
