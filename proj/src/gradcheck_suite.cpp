#include "cfn/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <random>

#include "cfn/emotions.hpp"
#include "cfn/error.hpp"
#include "cfn/fusion.hpp"
#include "cfn/loss.hpp"

namespace cfn {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

constexpr double kMargin = 1e-3;
constexpr std::size_t kMaxAttempts = 10000;

using Point = std::vector<Tensor>;
using Sampler = std::function<Point(std::mt19937_64&)>;
using Smooth = std::function<bool(const Point&)>;

struct Check {
    std::string name;
    Sampler sample;
    ad::ScalarFunction f;
    Smooth smooth = [](const Point&) { return true; };
};

Tensor normal(std::mt19937_64& rng, ad::Shape shape, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = d(rng);
    return t;
}

Tensor uniform(std::mt19937_64& rng, ad::Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = d(rng);
    return t;
}

// Fixed, non-degenerate weights turning a tensor output into a scalar.
Var readout(Var v) {
    if (v.value().rank() == 0) return v;
    std::vector<double> w(v.value().size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = 0.5 + std::sin(1.7 * static_cast<double>(k) + 0.3);
    }
    Var flat = v;
    if (v.value().rank() == 2) {
        Var acc;
        const std::size_t r = v.value().rows();
        for (std::size_t i = 0; i < r; ++i) {
            const Var row = ad::row(v, i);
            acc = i == 0 ? row : ad::concat(acc, row);
        }
        flat = acc;
    }
    return ad::dot(flat, v.graph->constant(Tensor::vector(std::move(w))));
}

bool away_from(const Tensor& t, double kink) {
    return std::all_of(t.values.begin(), t.values.end(),
                       [&](double v) { return std::abs(v - kink) > kMargin; });
}

// Each column's top value must beat the runner-up by the margin.
bool distinct_column_max(const Tensor& P) {
    for (std::size_t c = 0; c < P.cols(); ++c) {
        std::vector<double> col;
        for (std::size_t r = 0; r < P.rows(); ++r) col.push_back(P.at(r, c));
        std::sort(col.begin(), col.end(), std::greater<>());
        if (col.size() > 1 && col[0] - col[1] <= kMargin) return false;
    }
    return true;
}

Check unary(std::string name, std::size_t n, std::function<Var(Var)> op) {
    return {std::move(name), [n](std::mt19937_64& rng) { return Point{normal(rng, {n})}; },
            [op](Graph&, std::span<const Var> in) { return readout(op(in[0])); }};
}

Check binary(std::string name, std::size_t n, std::function<Var(Var, Var)> op) {
    return {std::move(name),
            [n](std::mt19937_64& rng) { return Point{normal(rng, {n}), normal(rng, {n})}; },
            [op](Graph&, std::span<const Var> in) { return readout(op(in[0], in[1])); }};
}

// ---------------------------------------------------------------------------
// Fusion pipeline

struct FusionFixture {
    StreamPriors place;
    StreamPriors object;
    FusionSettings settings;
};

StreamPriors random_priors(std::size_t kappa, std::mt19937_64& rng) {
    StreamPriors p;
    for (std::size_t k = 0; k < kappa; ++k) p.indices.push_back(k);
    p.plus = uniform(rng, {kappa, kDiscreteEmotions}, 0.0, 1.0);
    p.minus = uniform(rng, {kappa, kDiscreteEmotions}, 0.0, 1.0);
    return p;
}

constexpr std::size_t kPlaceIn = 6;
constexpr std::size_t kObjectIn = 5;
constexpr std::size_t kKappa = 3;

// Point layout: z_p, f_p, b_p, z_o, f_o, b_o, then the check's own tensors.
Point fusion_stream_point(std::mt19937_64& rng) {
    return {uniform(rng, {kPlaceIn}, 0.0, 1.0),  normal(rng, {kPlaceIn, kKappa}),
            normal(rng, {kKappa}, 0.5),          uniform(rng, {kObjectIn}, 0.0, 1.0),
            normal(rng, {kObjectIn, kKappa}),    normal(rng, {kKappa}, 0.5)};
}

FusionNodes run_fusion(const FusionFixture& fx, std::span<const Var> in, Var y_emotion) {
    return fusion_forward(StreamInput{in[0], in[1], in[2], &fx.place},
                          StreamInput{in[3], in[4], in[5], &fx.object}, y_emotion, fx.settings);
}

bool fusion_smooth(const FusionNodes& n, const FusionSettings& s) {
    if (!distinct_column_max(n.P_plus_2.value())) return false;
    if (s.collapse == Collapse::Max && !distinct_column_max(n.P_hat.value())) return false;
    if (s.rule == FusionRule::Reciprocal) {
        for (double c : n.context.value().values) {
            const double v = c / s.lambda;
            if (std::abs(v) <= kMargin || std::abs(v - 1.0) <= kMargin) return false;
        }
    }
    return true;
}

Check fusion_check(std::string name, FusionSettings settings, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fx = std::make_shared<FusionFixture>(
        FusionFixture{random_priors(kKappa, rng), random_priors(kKappa, rng), settings});
    Check c;
    c.name = std::move(name);
    c.sample = [](std::mt19937_64& r) {
        Point p = fusion_stream_point(r);
        p.push_back(uniform(r, {kEmotionDims}, 0.05, 0.95));
        return p;
    };
    c.f = [fx](Graph&, std::span<const Var> in) {
        return readout(run_fusion(*fx, in, in[6]).fused);
    };
    c.smooth = [fx](const Point& p) {
        Graph g;
        std::vector<Var> in;
        for (const Tensor& t : p) in.push_back(g.constant(t));
        return fusion_smooth(run_fusion(*fx, in, in[6]), fx->settings);
    };
    return c;
}

// Small network: features → affine+relu → affine head (logistic discrete,
// linear continuous) → fusion → mse + β·tempered CE.
Check network_check(std::uint64_t seed) {
    constexpr std::size_t kIn = 5;
    constexpr std::size_t kHidden = 6;
    constexpr double kBeta = 0.3;
    std::mt19937_64 rng(seed);
    auto fx = std::make_shared<FusionFixture>(FusionFixture{
        random_priors(kKappa, rng), random_priors(kKappa, rng), {0.2, FusionRule::Convex,
                                                                 Collapse::Mean}});
    auto x = std::make_shared<Tensor>(normal(rng, {kIn}));
    auto y = std::make_shared<Tensor>(uniform(rng, {kEmotionDims}, 0.0, 1.0));

    struct Out {
        Var hidden_pre;
        FusionNodes fusion;
        Var loss;
    };
    // Layout after the stream tensors: W1, b1, W2, b2, log_sigma.
    auto build = [fx, x, y](Graph& g, std::span<const Var> in) {
        const Var pre = ad::affine(g.constant(*x), in[6], in[7]);
        const Var h = ad::affine(ad::relu(pre), in[8], in[9]);
        const Var h_discrete = ad::slice(h, 0, kDiscreteEmotions);
        const Var y_emotion = ad::concat(ad::logistic(h_discrete),
                                         ad::slice(h, kDiscreteEmotions, kContinuousEmotions));
        FusionNodes f = run_fusion(*fx, in, y_emotion);
        const Var loss = total_loss(g.constant(*y), f.fused, h_discrete, in[10], kBeta);
        return Out{pre, f, loss};
    };

    Check c;
    c.name = "network_end_to_end";
    c.sample = [](std::mt19937_64& r) {
        Point p = fusion_stream_point(r);
        p.push_back(normal(r, {kIn, kHidden}, 0.6));
        p.push_back(normal(r, {kHidden}, 0.3));
        p.push_back(normal(r, {kHidden, kEmotionDims}, 0.5));
        p.push_back(normal(r, {kEmotionDims}, 0.3));
        p.push_back(normal(r, {}, 0.3));
        return p;
    };
    c.f = [build](Graph& g, std::span<const Var> in) { return build(g, in).loss; };
    c.smooth = [build, fx](const Point& p) {
        Graph g;
        std::vector<Var> in;
        for (const Tensor& t : p) in.push_back(g.constant(t));
        const Out o = build(g, in);
        return away_from(o.hidden_pre.value(), 0.0) && fusion_smooth(o.fusion, fx->settings);
    };
    return c;
}

std::vector<Check> all_checks(std::uint64_t seed) {
    std::vector<Check> checks;
    checks.push_back({"affine",
                      [](std::mt19937_64& r) {
                          return Point{normal(r, {4}), normal(r, {4, 3}), normal(r, {3})};
                      },
                      [](Graph&, std::span<const Var> in) {
                          return readout(ad::affine(in[0], in[1], in[2]));
                      }});
    checks.push_back({"affine_no_bias",
                      [](std::mt19937_64& r) { return Point{normal(r, {4}), normal(r, {4, 3})}; },
                      [](Graph&, std::span<const Var> in) {
                          return readout(ad::affine(in[0], in[1]));
                      }});
    {
        Check c = unary("relu", 6, [](Var x) { return ad::relu(x); });
        c.smooth = [](const Point& p) { return away_from(p[0], 0.0); };
        checks.push_back(std::move(c));
    }
    checks.push_back(unary("logistic", 6, [](Var x) { return ad::logistic(x); }));
    checks.push_back(unary("softmax", 6, [](Var x) { return ad::softmax(x); }));
    checks.push_back({"row_max", [](std::mt19937_64& r) { return Point{normal(r, {3, 5})}; },
                      [](Graph&, std::span<const Var> in) { return readout(ad::row_max(in[0])); },
                      [](const Point& p) { return distinct_column_max(p[0]); }});
    checks.push_back(binary("add", 5, [](Var a, Var b) { return ad::add(a, b); }));
    checks.push_back(binary("sub", 5, [](Var a, Var b) { return ad::sub(a, b); }));
    checks.push_back(binary("mul", 5, [](Var a, Var b) { return ad::mul(a, b); }));
    checks.push_back(
        unary("scale_shift", 5, [](Var x) { return ad::scale_shift(x, -1.7, 0.3); }));
    checks.push_back({"clamp",
                      [](std::mt19937_64& r) { return Point{uniform(r, {6}, -0.5, 1.5)}; },
                      [](Graph&, std::span<const Var> in) {
                          return readout(ad::clamp(in[0], 0.0, 1.0));
                      },
                      [](const Point& p) { return away_from(p[0], 0.0) && away_from(p[0], 1.0); }});
    checks.push_back({"temper",
                      [](std::mt19937_64& r) { return Point{normal(r, {6}), normal(r, {}, 0.5)}; },
                      [](Graph&, std::span<const Var> in) {
                          return readout(ad::temper(in[0], in[1]));
                      }});
    checks.push_back({"softmax_cross_entropy",
                      [](std::mt19937_64& r) { return Point{normal(r, {6})}; },
                      [](Graph&, std::span<const Var> in) {
                          return ad::softmax_cross_entropy(in[0], 2);
                      }});
    checks.push_back(binary("squared_distance", 5,
                            [](Var a, Var b) { return ad::squared_distance(a, b); }));
    checks.push_back(unary("sum", 5, [](Var x) { return ad::sum(x); }));
    checks.push_back(binary("dot", 5, [](Var a, Var b) { return ad::dot(a, b); }));
    checks.push_back({"concat",
                      [](std::mt19937_64& r) { return Point{normal(r, {3}), normal(r, {4})}; },
                      [](Graph&, std::span<const Var> in) {
                          return readout(ad::concat(in[0], in[1]));
                      }});
    checks.push_back(unary("slice", 7, [](Var x) { return ad::slice(x, 2, 3); }));
    checks.push_back(binary("stack_rows", 4, [](Var a, Var b) { return ad::stack_rows(a, b); }));
    checks.push_back({"row", [](std::mt19937_64& r) { return Point{normal(r, {3, 4})}; },
                      [](Graph&, std::span<const Var> in) { return readout(ad::row(in[0], 1)); }});
    checks.push_back({"col_mean", [](std::mt19937_64& r) { return Point{normal(r, {3, 4})}; },
                      [](Graph&, std::span<const Var> in) {
                          return readout(ad::col_mean(in[0]));
                      }});
    checks.push_back({"tempered_cross_entropy",
                      [](std::mt19937_64& r) {
                          return Point{normal(r, {kDiscreteEmotions}), normal(r, {}, 0.5)};
                      },
                      [](Graph&, std::span<const Var> in) {
                          return tempered_cross_entropy(in[0], in[1], 7);
                      }});
    {
        std::mt19937_64 rng(seed ^ 0x5eedULL);
        auto y = std::make_shared<Tensor>(uniform(rng, {kEmotionDims}, 0.0, 1.0));
        checks.push_back({"total_loss",
                          [](std::mt19937_64& r) {
                              return Point{uniform(r, {kEmotionDims}, 0.0, 1.0),
                                           normal(r, {kDiscreteEmotions}), normal(r, {}, 0.5)};
                          },
                          [y](Graph& g, std::span<const Var> in) {
                              return total_loss(g.constant(*y), in[0], in[1], in[2], 0.5);
                          }});
    }
    checks.push_back(fusion_check("fusion_convex_mean",
                                  {0.2, FusionRule::Convex, Collapse::Mean}, seed + 11));
    checks.push_back(fusion_check("fusion_convex_max",
                                  {0.2, FusionRule::Convex, Collapse::Max}, seed + 12));
    checks.push_back(fusion_check("fusion_reciprocal",
                                  {0.2, FusionRule::Reciprocal, Collapse::Mean}, seed + 13));
    checks.push_back(fusion_check("fusion_q_plus_only",
                                  {0.2, FusionRule::QPlusOnly, Collapse::Mean}, seed + 14));
    checks.push_back(network_check(seed + 15));
    return checks;
}

}  // namespace

bool GradCheckReport::passed() const {
    return !entries.empty() && std::all_of(entries.begin(), entries.end(),
                                           [](const GradCheckEntry& e) { return e.passed; });
}

std::vector<std::string> gradcheck_names() {
    std::vector<std::string> names;
    for (const Check& c : all_checks(0)) names.push_back(c.name);
    return names;
}

GradCheckReport run_gradcheck_suite(const GradCheckSuiteOptions& options) {
    if (options.points < 1) throw ParameterError("gradcheck needs at least one point");
    if (!(options.tolerance > 0.0)) throw ParameterError("gradcheck tolerance must be positive");
    ad::GradCheckOptions gc;
    gc.eps = options.eps;
    gc.flip_backward_of = options.inject_fault;

    GradCheckReport report;
    report.tolerance = options.tolerance;
    std::uint64_t salt = 0;
    for (const Check& check : all_checks(options.seed)) {
        std::mt19937_64 rng(options.seed * 1000003ULL + ++salt);
        GradCheckEntry e;
        e.name = check.name;
        for (std::size_t p = 0; p < options.points; ++p) {
            Point point;
            std::size_t attempts = 0;
            do {
                if (++attempts > kMaxAttempts) {
                    throw NumericError("gradcheck '" + check.name + "': no smooth point found");
                }
                point = check.sample(rng);
            } while (!check.smooth(point));
            e.max_error = std::max(e.max_error, ad::grad_check(check.f, point, gc));
            ++e.points;
        }
        e.passed = e.max_error < options.tolerance;
        report.entries.push_back(std::move(e));
    }
    return report;
}

void write_gradcheck_report(const GradCheckReport& r, std::ostream& out) {
    const auto old = out.precision(3);
    for (const GradCheckEntry& e : r.entries) {
        out << (e.passed ? "PASS " : "FAIL ") << e.name << "  points=" << e.points
            << "  max_rel_error=" << std::scientific << e.max_error << std::defaultfloat << '\n';
    }
    out << (r.passed() ? "all checks passed" : "gradient check FAILED") << " (tolerance "
        << r.tolerance << ")\n";
    out.precision(old);
}

nlohmann::json gradcheck_report_to_json(const GradCheckReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const GradCheckEntry& e : r.entries) {
        entries.push_back({{"name", e.name},
                           {"points", e.points},
                           {"max_error", e.max_error},
                           {"passed", e.passed}});
    }
    return {{"tolerance", r.tolerance}, {"passed", r.passed()}, {"checks", entries}};
}

}  // namespace cfn
