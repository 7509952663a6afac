#include "cfn/fusion.hpp"

#include "cfn/error.hpp"

namespace cfn {

using ad::Tensor;
using ad::Var;

std::string_view to_string(FusionRule rule) {
    switch (rule) {
        case FusionRule::Convex: return "convex";
        case FusionRule::Reciprocal: return "reciprocal";
        case FusionRule::QPlusOnly: return "q_plus_only";
    }
    return "convex";
}

std::string_view to_string(Collapse collapse) {
    return collapse == Collapse::Mean ? "mean" : "max";
}

FusionRule parse_fusion_rule(std::string_view s) {
    if (s == "convex") return FusionRule::Convex;
    if (s == "reciprocal") return FusionRule::Reciprocal;
    if (s == "q_plus_only") return FusionRule::QPlusOnly;
    throw ParameterError("unknown fusion rule '" + std::string(s) + "'");
}

Collapse parse_collapse(std::string_view s) {
    if (s == "mean") return Collapse::Mean;
    if (s == "max") return Collapse::Max;
    throw ParameterError("unknown collapse '" + std::string(s) + "'");
}

StreamPriors make_stream_priors(const CooccurrenceStats& stats, Stream stream,
                                std::vector<std::size_t> indices) {
    const std::size_t width = stream == Stream::Place ? stats.place_width : stats.object_width;
    const std::size_t offset = stream == Stream::Place ? 0 : stats.place_width;
    StreamPriors p;
    p.plus = Tensor::zeros({indices.size(), kDiscreteEmotions});
    p.minus = Tensor::zeros({indices.size(), kDiscreteEmotions});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= width) throw DimensionError("stream prior index out of range");
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
            p.plus.at(k, i) = stats.P_plus.at(offset + indices[k], i);
            p.minus.at(k, i) = stats.P_minus.at(offset + indices[k], i);
        }
    }
    p.indices = std::move(indices);
    return p;
}

Tensor selector_filter(std::size_t input_width, const std::vector<std::size_t>& indices,
                       double scale) {
    Tensor f = Tensor::zeros({input_width, indices.size()});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= input_width) throw DimensionError("selector index out of range");
        f.at(indices[k], k) = scale;
    }
    return f;
}

void validate_fusion_settings(std::size_t kappa, double lambda, FusionRule rule) {
    if (kappa < 1) throw ParameterError("kappa must be at least 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
    if (rule == FusionRule::Reciprocal && lambda == 0.0) {
        throw ParameterError("the reciprocal fusion rule requires lambda > 0");
    }
}

Var project_stream(Var z, Var f, Var b) { return ad::softmax(ad::affine(z, f, b)); }

Var stream_conditionals(Var w, Var M) { return ad::affine(w, M); }

Var compute_q(Var P_plus_2) { return ad::row_max(P_plus_2); }

Pooled pool(Var Q, Var P_plus_2, Var P_minus_2, Collapse collapse, bool include_minus) {
    const Var not_q = ad::one_minus(Q);
    std::array<Var, 2> rows;
    for (std::size_t j = 0; j < 2; ++j) {
        const Var available = ad::mul(Q, ad::row(P_plus_2, j));
        rows[j] = include_minus
                      ? ad::add(available, ad::mul(not_q, ad::row(P_minus_2, j)))
                      : available;
    }
    const Var P_hat = ad::stack_rows(rows[0], rows[1]);
    const Var context = collapse == Collapse::Mean ? ad::col_mean(P_hat) : ad::row_max(P_hat);
    return {P_hat, context};
}

Var fuse(Var y_emotion, Var context, double lambda, FusionRule rule) {
    if (y_emotion.value().size() != kEmotionDims) {
        throw DimensionError("fuse: emotion prediction must have " +
                             std::to_string(kEmotionDims) + " entries, got " +
                             ad::shape_string(y_emotion.shape()));
    }
    if (context.value().size() != kDiscreteEmotions) {
        throw DimensionError("fuse: context must have " + std::to_string(kDiscreteEmotions) +
                             " entries, got " + ad::shape_string(context.shape()));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
    const Var continuous = ad::slice(y_emotion, kDiscreteEmotions, kContinuousEmotions);
    Var discrete;
    if (rule == FusionRule::Reciprocal) {
        if (lambda == 0.0) throw ParameterError("the reciprocal fusion rule requires lambda > 0");
        discrete = ad::clamp(ad::scale(context, 1.0 / lambda), 0.0, 1.0);
    } else {
        discrete = ad::add(ad::scale(ad::slice(y_emotion, 0, kDiscreteEmotions), 1.0 - lambda),
                           ad::scale(context, lambda));
    }
    return ad::concat(discrete, continuous);
}

namespace {

struct StreamRows {
    Var w;
    Var plus;
    Var minus;
};

StreamRows stream_rows(const StreamInput& in) {
    if (in.priors == nullptr) throw Error("fusion stream without priors");
    ad::Graph& g = *in.z.graph;
    const Var w = project_stream(in.z, in.f, in.b);
    const Var plus = stream_conditionals(w, g.constant(in.priors->plus));
    const Var minus = stream_conditionals(w, g.constant(in.priors->minus));
    return {w, plus, minus};
}

}  // namespace

FusionNodes fusion_forward(const std::optional<StreamInput>& place,
                           const std::optional<StreamInput>& object, Var y_emotion,
                           const FusionSettings& settings) {
    if (!place && !object) throw ParameterError("fusion needs at least one context stream");
    FusionNodes out;
    std::optional<StreamRows> p;
    std::optional<StreamRows> o;
    if (place) {
        p = stream_rows(*place);
        out.w_place = p->w;
    }
    if (object) {
        o = stream_rows(*object);
        out.w_object = o->w;
    }
    const StreamRows& first = p ? *p : *o;
    const StreamRows& second = o ? *o : *p;
    out.P_plus_2 = ad::stack_rows(first.plus, second.plus);
    out.P_minus_2 = ad::stack_rows(first.minus, second.minus);
    out.Q = compute_q(out.P_plus_2);
    const Pooled pooled = pool(out.Q, out.P_plus_2, out.P_minus_2, settings.collapse,
                               settings.rule != FusionRule::QPlusOnly);
    out.P_hat = pooled.P_hat;
    out.context = pooled.context;
    out.fused = fuse(y_emotion, out.context, settings.lambda, settings.rule);
    return out;
}

FusionTrace trace_of(const FusionNodes& nodes) {
    FusionTrace t;
    if (nodes.w_place) t.w_place = nodes.w_place->value().values;
    if (nodes.w_object) t.w_object = nodes.w_object->value().values;
    t.P_plus_2 = nodes.P_plus_2.value();
    t.P_minus_2 = nodes.P_minus_2.value();
    t.Q = nodes.Q.value().values;
    t.P_hat = nodes.P_hat.value();
    t.context = nodes.context.value().values;
    t.fused = nodes.fused.value().values;
    return t;
}

namespace {

nlohmann::json matrix_json(const Tensor& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        rows.push_back(std::vector<double>(
            t.values.begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
            t.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())));
    }
    return rows;
}

}  // namespace

nlohmann::json trace_to_json(const FusionTrace& t) {
    return nlohmann::json{{"w_place", t.w_place},     {"w_object", t.w_object},
                          {"P_plus_2", matrix_json(t.P_plus_2)},
                          {"P_minus_2", matrix_json(t.P_minus_2)},
                          {"Q", t.Q},                 {"P_hat", matrix_json(t.P_hat)},
                          {"context", t.context},     {"fused", t.fused}};
}

}  // namespace cfn
