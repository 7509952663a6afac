#include "cfn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "cfn/error.hpp"

namespace cfn {

using nlohmann::json;

std::array<double, kContinuousEmotions> Sample::continuous_normalized() const {
    std::array<double, kContinuousEmotions> out{};
    for (std::size_t k = 0; k < kContinuousEmotions && k < emotions_continuous.size(); ++k) {
        out[k] = normalize_continuous(emotions_continuous[k]);
    }
    return out;
}

std::vector<double> Sample::target() const {
    std::vector<double> y(emotions_discrete);
    const auto c = continuous_normalized();
    y.insert(y.end(), c.begin(), c.end());
    return y;
}

namespace {

void check_range(const Sample& s, const std::vector<double>& v, double lo, double hi,
                 const char* field) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= lo && v[i] <= hi)) {
            std::ostringstream os;
            os << "sample '" << s.id << "': " << field << "[" << i << "] = " << v[i]
               << " outside [" << lo << ", " << hi << "]";
            throw ValidationError(os.str());
        }
    }
}

}  // namespace

void validate_sample(const Sample& s) {
    if (s.id.empty()) throw ValidationError("sample with empty id");
    if (s.emotions_discrete.size() != kDiscreteEmotions) {
        throw SchemaError("sample '" + s.id + "': emotions_discrete must have " +
                          std::to_string(kDiscreteEmotions) + " entries, got " +
                          std::to_string(s.emotions_discrete.size()));
    }
    if (s.emotions_continuous.size() != kContinuousEmotions) {
        throw SchemaError("sample '" + s.id + "': emotions_continuous must have " +
                          std::to_string(kContinuousEmotions) + " entries, got " +
                          std::to_string(s.emotions_continuous.size()));
    }
    for (double x : s.features) {
        if (!std::isfinite(x)) throw ValidationError("sample '" + s.id + "': non-finite feature");
    }
    check_range(s, s.emotions_discrete, 0.0, 1.0, "emotions_discrete");
    check_range(s, s.emotions_continuous, 1.0, 10.0, "emotions_continuous");
    check_range(s, s.place_attrs, 0.0, 1.0, "place_attrs");
    check_range(s, s.object_attrs, 0.0, 1.0, "object_attrs");
}

Dataset::Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) return;
    feature_width_ = samples_.front().features.size();
    place_width_ = samples_.front().place_attrs.size();
    object_width_ = samples_.front().object_attrs.size();
    for (const Sample& s : samples_) {
        validate_sample(s);
        if (s.features.size() != feature_width_ || s.place_attrs.size() != place_width_ ||
            s.object_attrs.size() != object_width_) {
            throw SchemaError("sample '" + s.id +
                              "': feature/attribute widths differ from the first sample");
        }
    }
}

json sample_to_json(const Sample& s) {
    return json{{"id", s.id},
                {"features", s.features},
                {"emotions_discrete", s.emotions_discrete},
                {"emotions_continuous", s.emotions_continuous},
                {"place_attrs", s.place_attrs},
                {"object_attrs", s.object_attrs}};
}

Sample sample_from_json(const json& j) {
    static constexpr std::array<const char*, 6> kFields = {
        "id", "features", "emotions_discrete", "emotions_continuous", "place_attrs",
        "object_attrs"};
    if (!j.is_object()) throw ParseError("sample must be a JSON object");
    for (const char* f : kFields) {
        if (!j.contains(f)) throw ParseError(std::string("missing field '") + f + "'");
    }
    for (const auto& item : j.items()) {
        if (std::find_if(kFields.begin(), kFields.end(), [&](const char* f) {
                return item.key() == f;
            }) == kFields.end()) {
            throw ParseError("unknown field '" + item.key() + "'");
        }
    }
    try {
        Sample s;
        s.id = j.at("id").get<std::string>();
        s.features = j.at("features").get<std::vector<double>>();
        s.emotions_discrete = j.at("emotions_discrete").get<std::vector<double>>();
        s.emotions_continuous = j.at("emotions_continuous").get<std::vector<double>>();
        s.place_attrs = j.at("place_attrs").get<std::vector<double>>();
        s.object_attrs = j.at("object_attrs").get<std::vector<double>>();
        return s;
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
}

Dataset read_dataset(std::istream& in) {
    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            samples.push_back(sample_from_json(j));
            validate_sample(samples.back());
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (samples.empty()) throw InputError("empty dataset");
    return Dataset(std::move(samples));
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset '" + path.string() + "'");
    return read_dataset(in);
}

void write_dataset(const Dataset& d, std::ostream& out) {
    for (const Sample& s : d) out << sample_to_json(s).dump() << '\n';
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write dataset '" + path.string() + "'");
    write_dataset(d, out);
}

std::size_t dominant_emotion(const Sample& s) {
    const auto& v = s.emotions_discrete;
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::array<std::size_t, 3> allocate_stratum(std::size_t count, const SplitSpec& spec) {
    const std::array<double, 3> fractions = {spec.train, spec.test, spec.val};
    std::array<std::size_t, 3> alloc{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = static_cast<double>(count) * fractions[k];
        // Snap values within rounding noise of an integer before flooring.
        const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact)
                                                                          : exact;
        alloc[k] = static_cast<std::size_t>(std::floor(snapped));
        remainder[k] = snapped - static_cast<double>(alloc[k]);
        assigned += alloc[k];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainder[a] > remainder[b] + 1e-9;
    });
    for (std::size_t k = 0; assigned < count; ++k, ++assigned) ++alloc[order[k % 3]];
    return alloc;
}

Splits split(const Dataset& d, const SplitSpec& spec) {
    if (spec.train < 0.0 || spec.test < 0.0 || spec.val < 0.0 ||
        std::abs(spec.train + spec.test + spec.val - 1.0) > 1e-9) {
        throw ParameterError("split fractions must be non-negative and sum to 1");
    }
    std::map<std::size_t, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < d.size(); ++i) strata[dominant_emotion(d[i])].push_back(i);

    std::mt19937_64 rng(spec.seed);
    std::array<std::vector<Sample>, 3> parts;
    for (auto& [key, members] : strata) {
        std::shuffle(members.begin(), members.end(), rng);
        const auto alloc = allocate_stratum(members.size(), spec);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t c = 0; c < alloc[k]; ++c) parts[k].push_back(d[members[pos++]]);
        }
    }
    return Splits{Dataset(std::move(parts[0])), Dataset(std::move(parts[1])),
                  Dataset(std::move(parts[2]))};
}

// ---------------------------------------------------------------------------

PlantedTable default_planted_table(std::size_t clusters) {
    if (clusters == 0) throw ParameterError("planted table needs at least one cluster");
    constexpr std::size_t kPerCluster = 4;
    PlantedTable table(clusters);
    for (std::size_t c = 0; c < clusters; ++c) {
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
            const std::size_t offset = (i + kDiscreteEmotions - (c * kPerCluster) % kDiscreteEmotions) %
                                       kDiscreteEmotions;
            table[c][i] = offset < kPerCluster ? 0.9 : 0.05;
        }
    }
    return table;
}

void validate_planted_table(const PlantedTable& table) {
    if (table.empty()) throw ParameterError("planted table has no rows");
    for (std::size_t c = 0; c < table.size(); ++c) {
        for (double p : table[c]) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ParameterError("planted table row " + std::to_string(c) +
                                     " has an entry outside [0, 1]");
            }
        }
    }
}

json planted_table_to_json(const PlantedTable& table) {
    json rows = json::array();
    for (const auto& r : table) rows.push_back(r);
    return json{{"clusters", table.size()}, {"emotions", kDiscreteEmotions}, {"table", rows}};
}

PlantedTable planted_table_from_json(const json& j) {
    try {
        const json& rows = j.at("table");
        if (!rows.is_array()) throw ParameterError("planted table: 'table' must be an array");
        PlantedTable table;
        for (const json& r : rows) {
            const auto v = r.get<std::vector<double>>();
            if (v.size() != kDiscreteEmotions) {
                throw ParameterError("planted table rows must have " +
                                     std::to_string(kDiscreteEmotions) + " entries");
            }
            std::array<double, kDiscreteEmotions> a{};
            std::copy(v.begin(), v.end(), a.begin());
            table.push_back(a);
        }
        validate_planted_table(table);
        return table;
    } catch (const json::exception& e) {
        throw ParameterError(std::string("planted table: ") + e.what());
    }
}

namespace {

// Attribute `a` belongs to cluster a % clusters; later ranks fire more weakly.
void fill_stream(std::vector<double>& attrs, std::size_t width, std::size_t cluster,
                 std::size_t clusters, double noise, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    attrs.assign(width, 0.0);
    for (std::size_t a = 0; a < width; ++a) {
        const double jitter = gauss(rng);
        if (a % clusters == cluster) {
            const double intensity = 0.9 * std::pow(0.8, static_cast<double>(a / clusters));
            attrs[a] = std::clamp(intensity * (1.0 + noise * jitter), 0.02, 1.0);
        } else {
            attrs[a] = std::min(0.009, 0.005 * noise * std::abs(jitter));
        }
    }
}

double continuous_weight(std::size_t k, std::size_t i) {
    return std::sin(0.7 * static_cast<double>((i + 1) * (k + 1)) + static_cast<double>(k));
}

}  // namespace

SynthResult synth_generate(const SynthConfig& config) {
    if (config.n == 0) throw InputError("empty dataset: synthetic sample count is zero");
    PlantedTable table = config.table ? *config.table : default_planted_table(config.clusters);
    validate_planted_table(table);
    const std::size_t clusters = table.size();
    if (config.noise < 0.0 || config.feature_noise < 0.0) {
        throw ParameterError("noise levels must be non-negative");
    }
    for (double s : {config.place_signal, config.object_signal}) {
        if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("stream signal must lie in [0, 1]");
    }

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_cluster(0, clusters - 1);

    const std::size_t embed_in = kDiscreteEmotions + clusters;
    std::vector<double> embedding(config.feature_width * embed_in);
    const double embed_scale = 1.0 / std::sqrt(static_cast<double>(kDiscreteEmotions) / 4.0);
    for (double& w : embedding) w = gauss(rng) * embed_scale;

    SynthResult result;
    result.table = table;
    std::vector<Sample> samples;
    samples.reserve(config.n);
    const int width = static_cast<int>(std::to_string(config.n - 1).size());
    for (std::size_t s = 0; s < config.n; ++s) {
        const std::size_t c = pick_cluster(rng);
        result.clusters.push_back(c);

        Sample smp;
        std::ostringstream id;
        id << 's' << std::setw(std::max(width, 5)) << std::setfill('0') << s;
        smp.id = id.str();

        const std::size_t place_cluster = unit(rng) < config.place_signal ? c : pick_cluster(rng);
        const std::size_t object_cluster =
            unit(rng) < config.object_signal ? c : pick_cluster(rng);
        fill_stream(smp.place_attrs, config.place_width, place_cluster, clusters, config.noise,
                    rng);
        fill_stream(smp.object_attrs, config.object_width, object_cluster, clusters,
                    config.noise, rng);

        smp.emotions_discrete.resize(kDiscreteEmotions);
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
            const bool present = unit(rng) < table[c][i];
            const double jitter = std::min(0.49, config.noise * std::abs(gauss(rng)));
            smp.emotions_discrete[i] = present ? 1.0 - jitter : jitter;
        }

        smp.emotions_continuous.resize(kContinuousEmotions);
        for (std::size_t k = 0; k < kContinuousEmotions; ++k) {
            double z = 0.0;
            for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
                z += continuous_weight(k, i) * (smp.emotions_discrete[i] - 0.5);
            }
            const double normalized = 1.0 / (1.0 + std::exp(-0.5 * z));
            smp.emotions_continuous[k] = 1.0 + 9.0 * normalized;
        }

        smp.features.assign(config.feature_width, 0.0);
        for (std::size_t f = 0; f < config.feature_width; ++f) {
            const double* row = &embedding[f * embed_in];
            double v = row[kDiscreteEmotions + c];
            for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
                v += row[i] * smp.emotions_discrete[i];
            }
            smp.features[f] = v + config.feature_noise * gauss(rng);
        }
        samples.push_back(std::move(smp));
    }
    result.dataset = Dataset(std::move(samples));
    return result;
}

}  // namespace cfn
