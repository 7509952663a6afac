#include "cfn/stats.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "cfn/error.hpp"

namespace cfn {

using nlohmann::json;

std::vector<bool> binarize(std::span<const double> raw, double threshold) {
    if (threshold < 0.0) throw ParameterError("binarize: threshold must be non-negative");
    std::vector<bool> out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) out[k] = raw[k] >= threshold;
    return out;
}

CooccurrenceCounts::CooccurrenceCounts(std::size_t place, std::size_t object)
    : place_width(place),
      object_width(object),
      emotion_count(kDiscreteEmotions, 0),
      attribute_count(place + object, 0),
      joint_count((place + object) * kDiscreteEmotions, 0) {}

void CooccurrenceCounts::add(const Sample& s, const CooccurrenceOptions& options) {
    if (s.place_attrs.size() != place_width || s.object_attrs.size() != object_width) {
        throw SchemaError("sample '" + s.id + "': attribute widths do not match the counter");
    }
    if (s.emotions_discrete.size() != kDiscreteEmotions) {
        throw SchemaError("sample '" + s.id + "': wrong number of discrete emotions");
    }
    const auto emotions = binarize(s.emotions_discrete, options.threshold_emo);
    std::vector<double> attrs(s.place_attrs);
    attrs.insert(attrs.end(), s.object_attrs.begin(), s.object_attrs.end());
    const auto present = binarize(attrs, options.threshold_attr);

    ++n;
    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) emotion_count[i] += emotions[i];
    for (std::size_t a = 0; a < present.size(); ++a) {
        if (!present[a]) continue;
        ++attribute_count[a];
        std::uint64_t* row = &joint_count[a * kDiscreteEmotions];
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) row[i] += emotions[i];
    }
}

void CooccurrenceCounts::merge(const CooccurrenceCounts& other) {
    if (other.place_width != place_width || other.object_width != object_width) {
        throw SchemaError("cannot merge co-occurrence counts of different widths");
    }
    n += other.n;
    for (std::size_t i = 0; i < emotion_count.size(); ++i) emotion_count[i] += other.emotion_count[i];
    for (std::size_t a = 0; a < attribute_count.size(); ++a) {
        attribute_count[a] += other.attribute_count[a];
    }
    for (std::size_t k = 0; k < joint_count.size(); ++k) joint_count[k] += other.joint_count[k];
}

CooccurrenceStats finalize(const CooccurrenceCounts& counts, const CooccurrenceOptions& options) {
    if (counts.n == 0) throw InputError("empty dataset: no samples were counted");
    if (options.smoothing < 0.0) throw ParameterError("smoothing must be non-negative");

    const std::size_t attrs = counts.attributes();
    const double n = static_cast<double>(counts.n);
    const double alpha = options.smoothing;

    CooccurrenceStats s;
    s.n = counts.n;
    s.place_width = counts.place_width;
    s.object_width = counts.object_width;
    s.threshold_attr = options.threshold_attr;
    s.threshold_emo = options.threshold_emo;
    s.smoothing = alpha;
    s.emotion_count = counts.emotion_count;
    s.attribute_count = counts.attribute_count;
    s.p_i.resize(kDiscreteEmotions);
    s.p_j.resize(attrs);
    s.C = ad::Tensor::zeros({attrs, kDiscreteEmotions});
    s.P_plus = ad::Tensor::zeros({attrs, kDiscreteEmotions});
    s.P_minus = ad::Tensor::zeros({attrs, kDiscreteEmotions});

    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
        s.p_i[i] = static_cast<double>(counts.emotion_count[i]) / n;
    }
    for (std::size_t a = 0; a < attrs; ++a) {
        const std::uint64_t na = counts.attribute_count[a];
        s.p_j[a] = static_cast<double>(na) / n;
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
            const std::uint64_t nai = counts.joint_count[a * kDiscreteEmotions + i];
            const double c = static_cast<double>(nai) / n;
            s.C.at(a, i) = c;
            if (alpha > 0.0) {
                s.P_plus.at(a, i) = (static_cast<double>(nai) + alpha) /
                                    (static_cast<double>(na) + 2.0 * alpha);
                s.P_minus.at(a, i) =
                    (static_cast<double>(counts.emotion_count[i] - nai) + alpha) /
                    (static_cast<double>(counts.n - na) + 2.0 * alpha);
                continue;
            }
            s.P_plus.at(a, i) = na == 0 ? s.p_i[i] : std::min(1.0, c / s.p_j[a]);
            s.P_minus.at(a, i) =
                na == counts.n ? s.p_i[i]
                               : std::clamp((s.p_i[i] - c) / (1.0 - s.p_j[a]), 0.0, 1.0);
        }
    }
    return s;
}

CooccurrenceStats build_cooccurrence(const Dataset& d, const CooccurrenceOptions& options) {
    if (d.empty()) throw InputError("empty dataset");
    if (options.threshold_attr < 0.0 || options.threshold_emo < 0.0) {
        throw ParameterError("thresholds must be non-negative");
    }
    CooccurrenceCounts counts(d.place_width(), d.object_width());
    for (const Sample& s : d) counts.add(s, options);
    return finalize(counts, options);
}

namespace {

json matrix_json(const ad::Tensor& t) {
    return json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.values}};
}

ad::Tensor matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
    const auto r = j.at("rows").get<std::size_t>();
    const auto c = j.at("cols").get<std::size_t>();
    if (r != rows || c != cols) {
        throw SchemaError(std::string("stats: matrix '") + name + "' has unexpected dims");
    }
    return ad::Tensor::matrix(r, c, j.at("data").get<std::vector<double>>());
}

}  // namespace

json stats_to_json(const CooccurrenceStats& s) {
    return json{{"n", s.n},
                {"threshold_attr", s.threshold_attr},
                {"threshold_emo", s.threshold_emo},
                {"smoothing", s.smoothing},
                {"place_width", s.place_width},
                {"object_width", s.object_width},
                {"emotion_count", s.emotion_count},
                {"attribute_count", s.attribute_count},
                {"p_i", s.p_i},
                {"p_j", s.p_j},
                {"C", matrix_json(s.C)},
                {"P_plus", matrix_json(s.P_plus)},
                {"P_minus", matrix_json(s.P_minus)}};
}

CooccurrenceStats stats_from_json(const json& j) {
    try {
        CooccurrenceStats s;
        s.n = j.at("n").get<std::size_t>();
        if (s.n == 0) throw SchemaError("stats: n must be positive");
        s.threshold_attr = j.at("threshold_attr").get<double>();
        s.threshold_emo = j.at("threshold_emo").get<double>();
        s.smoothing = j.value("smoothing", 0.0);
        s.place_width = j.at("place_width").get<std::size_t>();
        s.object_width = j.at("object_width").get<std::size_t>();
        s.emotion_count = j.value("emotion_count", std::vector<std::uint64_t>{});
        s.attribute_count = j.value("attribute_count", std::vector<std::uint64_t>{});
        s.p_i = j.at("p_i").get<std::vector<double>>();
        s.p_j = j.at("p_j").get<std::vector<double>>();
        const std::size_t attrs = s.attributes();
        if (s.p_i.size() != kDiscreteEmotions || s.p_j.size() != attrs) {
            throw SchemaError("stats: marginal vectors have unexpected lengths");
        }
        s.C = matrix_from_json(j.at("C"), attrs, kDiscreteEmotions, "C");
        s.P_plus = matrix_from_json(j.at("P_plus"), attrs, kDiscreteEmotions, "P_plus");
        s.P_minus = matrix_from_json(j.at("P_minus"), attrs, kDiscreteEmotions, "P_minus");
        return s;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("stats: ") + e.what());
    }
}

void write_p_plus_csv(const CooccurrenceStats& s, std::ostream& out) {
    out << "attribute";
    for (auto name : kDiscreteEmotionNames) out << ',' << name;
    out << '\n';
    for (std::size_t a = 0; a < s.attributes(); ++a) {
        if (a < s.place_width) {
            out << "place_" << a;
        } else {
            out << "object_" << (a - s.place_width);
        }
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) out << ',' << s.P_plus.at(a, i);
        out << '\n';
    }
}

MeanActivations mean_activations(const Dataset& d) {
    MeanActivations m;
    m.place.assign(d.place_width(), 0.0);
    m.object.assign(d.object_width(), 0.0);
    if (d.empty()) return m;
    for (const Sample& s : d) {
        for (std::size_t a = 0; a < m.place.size(); ++a) m.place[a] += s.place_attrs[a];
        for (std::size_t a = 0; a < m.object.size(); ++a) m.object[a] += s.object_attrs[a];
    }
    const double n = static_cast<double>(d.size());
    for (double& v : m.place) v /= n;
    for (double& v : m.object) v /= n;
    return m;
}

std::vector<std::size_t> top_k(std::span<const double> means, std::size_t k) {
    if (k < 1) throw ParameterError("kappa must be at least 1");
    if (k > means.size()) {
        throw ParameterError("kappa " + std::to_string(k) + " exceeds attribute width " +
                             std::to_string(means.size()));
    }
    std::vector<std::size_t> order(means.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

TopAttributes select_top_attributes(const MeanActivations& means, std::size_t k) {
    if (k < 1) throw ParameterError("kappa must be at least 1");
    TopAttributes top;
    if (!means.place.empty()) top.place = top_k(means.place, k);
    if (!means.object.empty()) top.object = top_k(means.object, k);
    return top;
}

}  // namespace cfn
