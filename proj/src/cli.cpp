#include "cfn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "cfn/error.hpp"
#include "cfn/log.hpp"
#include "cfn/loss.hpp"

namespace cfn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
void for_each_key(const json& j, const std::string& section, F&& handle) {
    if (!j.is_object()) throw SchemaError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!handle(key, value)) {
            throw SchemaError("unknown config key '" + (section.empty() ? key : section + "." + key) +
                              "'");
        }
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

PlantedTable table_from_config(const json& v) {
    if (v.is_string()) return planted_table_from_json(read_json_file(v.get<std::string>()));
    if (v.is_array()) return planted_table_from_json(json{{"table", v}});
    return planted_table_from_json(v);
}

void parse_synth(const json& j, SynthConfig& s) {
    for_each_key(j, "synth", [&](const std::string& k, const json& v) {
        if (k == "n") s.n = v.get<std::size_t>();
        else if (k == "feature_width") s.feature_width = v.get<std::size_t>();
        else if (k == "place_width") s.place_width = v.get<std::size_t>();
        else if (k == "object_width") s.object_width = v.get<std::size_t>();
        else if (k == "clusters") s.clusters = v.get<std::size_t>();
        else if (k == "noise") s.noise = v.get<double>();
        else if (k == "feature_noise") s.feature_noise = v.get<double>();
        else if (k == "place_signal") s.place_signal = v.get<double>();
        else if (k == "object_signal") s.object_signal = v.get<double>();
        else if (k == "table") s.table = v.is_null() ? std::nullopt
                                                     : std::optional(table_from_config(v));
        else return false;
        return true;
    });
}

json synth_to_json(const SynthConfig& s) {
    json table = nullptr;
    if (s.table) table = planted_table_to_json(*s.table).at("table");
    return json{{"n", s.n},
                {"feature_width", s.feature_width},
                {"place_width", s.place_width},
                {"object_width", s.object_width},
                {"clusters", s.clusters},
                {"noise", s.noise},
                {"feature_noise", s.feature_noise},
                {"place_signal", s.place_signal},
                {"object_signal", s.object_signal},
                {"table", table}};
}

F1Mode parse_f1_mode(const std::string& s) {
    if (s == "threshold") return F1Mode::Threshold;
    if (s == "argmax") return F1Mode::Argmax;
    throw ParameterError("unknown F1 mode '" + s + "'");
}

std::string f1_mode_name(F1Mode m) { return m == F1Mode::Threshold ? "threshold" : "argmax"; }

ad::Op parse_op(const std::string& s) {
    const auto op = ad::op_from_name(s);
    if (!op) throw ParameterError("unknown op '" + s + "'");
    return *op;
}

}  // namespace

RunConfig run_config_from_json(const json& j, RunConfig c) {
    try {
        for_each_key(j, "", [&](const std::string& k, const json& v) {
            if (k == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (k == "out") {
                c.out = v.get<std::string>();
            } else if (k == "jobs") {
                c.jobs = v.get<std::size_t>();
            } else if (k == "dataset") {
                c.dataset = v.is_null() ? std::nullopt
                                        : std::optional<fs::path>(v.get<std::string>());
            } else if (k == "synth") {
                parse_synth(v, c.synth);
            } else if (k == "stats") {
                for_each_key(v, k, [&](const std::string& s, const json& x) {
                    if (s == "threshold_attr") c.stats.threshold_attr = x.get<double>();
                    else if (s == "threshold_emo") c.stats.threshold_emo = x.get<double>();
                    else if (s == "smoothing") c.stats.smoothing = x.get<double>();
                    else return false;
                    return true;
                });
            } else if (k == "splits") {
                for_each_key(v, k, [&](const std::string& s, const json& x) {
                    if (s == "train") c.splits.train = x.get<double>();
                    else if (s == "test") c.splits.test = x.get<double>();
                    else if (s == "val") c.splits.val = x.get<double>();
                    else return false;
                    return true;
                });
            } else if (k == "train") {
                if (v.is_object() && v.contains("seed")) {
                    throw SchemaError("unknown config key 'train.seed' (use the top-level seed)");
                }
                c.train = train_config_from_json(v, c.train);
            } else if (k == "gradcheck") {
                for_each_key(v, k, [&](const std::string& s, const json& x) {
                    if (s == "points") c.gradcheck.points = x.get<std::size_t>();
                    else if (s == "eps") c.gradcheck.eps = x.get<double>();
                    else if (s == "tolerance") c.gradcheck.tolerance = x.get<double>();
                    else if (s == "inject_fault") {
                        c.gradcheck.inject_fault =
                            x.is_null() ? std::nullopt
                                        : std::optional(parse_op(x.get<std::string>()));
                    } else return false;
                    return true;
                });
            } else if (k == "eval") {
                for_each_key(v, k, [&](const std::string& s, const json& x) {
                    if (s == "label_threshold") c.eval.label_threshold = x.get<double>();
                    else if (s == "prediction_threshold") {
                        c.eval.prediction_threshold = x.get<double>();
                    } else if (s == "f1_mode") c.eval.f1_mode = parse_f1_mode(x.get<std::string>());
                    else return false;
                    return true;
                });
            } else if (k == "ablate") {
                for_each_key(v, k, [&](const std::string& s, const json& x) {
                    if (s == "variants") {
                        c.variants.clear();
                        for (const auto& name : x.get<std::vector<std::string>>()) {
                            c.variants.push_back(parse_variant(name));
                        }
                    } else if (s == "seeds") {
                        c.ablate_seeds = x.get<std::vector<std::uint64_t>>();
                    } else return false;
                    return true;
                });
            } else {
                return false;
            }
            return true;
        });
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json train = train_config_to_json(c.train);
    train.erase("seed");
    std::vector<std::string> variants;
    for (Variant v : c.variants) variants.emplace_back(to_string(v));
    return json{
        {"seed", c.seed},
        {"out", c.out.string()},
        {"jobs", c.jobs},
        {"dataset", c.dataset ? json(c.dataset->string()) : json(nullptr)},
        {"synth", synth_to_json(c.synth)},
        {"stats",
         {{"threshold_attr", c.stats.threshold_attr},
          {"threshold_emo", c.stats.threshold_emo},
          {"smoothing", c.stats.smoothing}}},
        {"splits", {{"train", c.splits.train}, {"test", c.splits.test}, {"val", c.splits.val}}},
        {"train", train},
        {"gradcheck",
         {{"points", c.gradcheck.points},
          {"eps", c.gradcheck.eps},
          {"tolerance", c.gradcheck.tolerance},
          {"inject_fault", c.gradcheck.inject_fault
                               ? json(std::string(ad::op_name(*c.gradcheck.inject_fault)))
                               : json(nullptr)}}},
        {"eval",
         {{"label_threshold", c.eval.label_threshold},
          {"prediction_threshold", c.eval.prediction_threshold},
          {"f1_mode", f1_mode_name(c.eval.f1_mode)}}},
        {"ablate", {{"variants", variants}, {"seeds", c.ablate_seeds}}}};
}

// ---------------------------------------------------------------------------

namespace {

struct Common {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
    std::optional<std::string> data;
};

void add_common(CLI::App* sub, Common& c, bool with_data) {
    sub->add_option("--config", c.config, "JSON run configuration");
    sub->add_option("--seed", c.seed, "Seed for generation, splitting and training");
    sub->add_option("--out", c.out, "Output directory (created if missing)");
    sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    if (with_data) {
        sub->add_option("--data", c.data,
                        "Dataset JSONL; when absent a synthetic set is generated from the "
                        "synth config");
    }
}

RunConfig resolve(const Common& c) {
    RunConfig rc;
    if (c.config) rc = run_config_from_json(read_json_file(*c.config));
    if (c.seed) rc.seed = *c.seed;
    if (c.out) rc.out = *c.out;
    if (c.jobs) rc.jobs = *c.jobs;
    if (c.data) rc.dataset = fs::path(*c.data);
    rc.synth.seed = rc.seed;
    rc.splits.seed = rc.seed;
    rc.train.seed = rc.seed;
    rc.gradcheck.seed = rc.seed;
    return rc;
}

void prepare_output(const RunConfig& rc, const std::string& command) {
    fs::create_directories(rc.out);
    write_json(rc.out / "resolved_config.json",
               json{{"command", command}, {"config", run_config_to_json(rc)}});
}

Dataset obtain_dataset(const RunConfig& rc) {
    if (rc.dataset) {
        log::info("loading " + rc.dataset->string());
        return load_dataset(*rc.dataset);
    }
    log::info("no --data given; generating " + std::to_string(rc.synth.n) +
              " synthetic samples (seed " + std::to_string(rc.synth.seed) + ")");
    return synth_generate(rc.synth).dataset;
}

template <typename T>
void override_with(const std::optional<T>& flag, T& target) {
    if (flag) target = *flag;
}

struct TrainFlags {
    std::optional<std::size_t> max_epochs;
    std::optional<double> lr0;
    std::optional<std::size_t> batch_size;
    std::optional<double> lambda;
    std::optional<std::size_t> kappa;
    std::optional<std::string> rule;
    std::optional<std::string> collapse;
    std::optional<double> beta;
    std::optional<std::string> variant;
};

void add_train_flags(CLI::App* sub, TrainFlags& f, bool with_variant) {
    sub->add_option("--max-epochs", f.max_epochs, "Training epochs (default 90)");
    sub->add_option("--lr0", f.lr0, "Initial learning rate (default 1e-2)");
    sub->add_option("--batch-size", f.batch_size, "Mini-batch size (default 8)");
    sub->add_option("--lambda", f.lambda, "Fusion weight in [0, 1] (default 0.2)");
    sub->add_option("--kappa", f.kappa, "Attributes kept per context stream (default 56)");
    sub->add_option("--rule", f.rule, "Fusion rule: convex, reciprocal, q_plus_only");
    sub->add_option("--collapse", f.collapse, "Row collapse: mean or max");
    sub->add_option("--beta", f.beta, "Weight of the tempered cross-entropy term (default 0)");
    if (with_variant) {
        sub->add_option("--variant", f.variant,
                        "full, no_place, no_object, q_plus_only, intermediate_concat, "
                        "emotion_only");
    }
}

void apply_train_flags(const TrainFlags& f, TrainConfig& t) {
    override_with(f.max_epochs, t.max_epochs);
    override_with(f.lr0, t.lr0);
    override_with(f.batch_size, t.batch_size);
    override_with(f.lambda, t.lambda);
    override_with(f.kappa, t.kappa);
    override_with(f.beta, t.beta);
    if (f.rule) t.rule = parse_fusion_rule(*f.rule);
    if (f.collapse) t.collapse = parse_collapse(*f.collapse);
    if (f.variant) t.variant = parse_variant(*f.variant);
}

std::string fmt(double v, int precision = 6) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

// ---------------------------------------------------------------------------

int cmd_synth(RunConfig rc, const std::optional<std::string>& table_path) {
    if (table_path) rc.synth.table = table_from_config(json(*table_path));
    prepare_output(rc, "synth");
    const SynthResult r = synth_generate(rc.synth);
    save_dataset(r.dataset, rc.out / "dataset.jsonl");
    write_json(rc.out / "planted_table.json", planted_table_to_json(r.table));
    std::cout << "wrote " << r.dataset.size() << " samples to "
              << (rc.out / "dataset.jsonl").string() << " and the planted table to "
              << (rc.out / "planted_table.json").string() << '\n';
    return 0;
}

int cmd_stats(const RunConfig& rc) {
    prepare_output(rc, "stats");
    const Dataset d = obtain_dataset(rc);
    const CooccurrenceStats s = build_cooccurrence(d, rc.stats);
    write_json(rc.out / "stats.json", stats_to_json(s));
    std::ofstream csv(rc.out / "p_plus.csv");
    write_p_plus_csv(s, csv);
    std::cout << "n=" << s.n << " attributes=" << s.attributes()
              << " threshold_attr=" << s.threshold_attr << " threshold_emo=" << s.threshold_emo
              << '\n';
    return 0;
}

int cmd_gradcheck(const RunConfig& rc) {
    prepare_output(rc, "gradcheck");
    const GradCheckReport r = run_gradcheck_suite(rc.gradcheck);
    write_gradcheck_report(r, std::cout);
    write_json(rc.out / "gradcheck.json", gradcheck_report_to_json(r));
    return r.passed() ? 0 : 1;
}

int cmd_train(const RunConfig& rc) {
    prepare_output(rc, "train");
    const Dataset d = obtain_dataset(rc);
    const Splits splits = split(d, rc.splits);
    log::info("split sizes train/test/val = " + std::to_string(splits.train.size()) + "/" +
              std::to_string(splits.test.size()) + "/" + std::to_string(splits.val.size()));
    const TrainResult r = train(init_model(splits.train, rc.train), splits, rc.train);
    write_text(rc.out / "checkpoint.json", checkpoint_to_json(r.model, rc.train).dump() + "\n");
    std::ofstream history(rc.out / "history.csv");
    write_history_csv(r.history, history);
    std::cout << "variant=" << to_string(rc.train.variant) << " epochs=" << r.history.epochs.size()
              << " best_epoch=" << r.model.epoch;
    if (!r.history.epochs.empty()) {
        std::cout << " final_train_loss=" << fmt(r.history.epochs.back().train_loss)
                  << " best_val_loss=" << fmt(mean_loss(r.model, splits.val, rc.train));
    }
    if (!splits.test.empty()) {
        std::cout << " test_mse=" << fmt(mean_squared_error(r.model, splits.test));
    }
    std::cout << '\n';
    return 0;
}

struct EvalFlags {
    std::optional<std::string> checkpoint;
    std::optional<std::string> predictions;
    std::vector<double> ers_only;
    std::string convention = "mixed";
    bool trace = false;
    std::optional<std::string> f1_mode;
    std::string split = "test";
};

void read_prediction_fixture(const fs::path& path, std::vector<std::vector<double>>& targets,
                             std::vector<std::vector<double>>& outputs) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            for (const auto& [k, v] : j.items()) {
                if (k != "id" && k != "target" && k != "prediction") {
                    throw ParseError("unknown field '" + k + "'");
                }
            }
            targets.push_back(j.at("target").get<std::vector<double>>());
            outputs.push_back(j.at("prediction").get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (targets.back().size() != kEmotionDims || outputs.back().size() != kEmotionDims) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": rows need " +
                              std::to_string(kEmotionDims) + " values");
        }
    }
    if (targets.empty()) throw InputError("empty predictions file");
}

int cmd_eval(RunConfig rc, const EvalFlags& f) {
    if (f.f1_mode) rc.eval.f1_mode = parse_f1_mode(*f.f1_mode);
    prepare_output(rc, "eval");

    if (!f.ers_only.empty()) {
        if (f.ers_only.size() != 3) throw ParameterError("--ers-only takes R2 MAP MRA");
        const ErsConvention convention = parse_ers_convention(f.convention);
        const double value = ers(f.ers_only[0], f.ers_only[1], f.ers_only[2], convention);
        write_json(rc.out / "ers.json", json{{"r2", f.ers_only[0]},
                                             {"map", f.ers_only[1]},
                                             {"mra", f.ers_only[2]},
                                             {"convention", to_string(convention)},
                                             {"ers", value}});
        std::cout << "ERS (" << to_string(convention) << ") = " << std::fixed
                  << std::setprecision(4) << value << '\n';
        return 0;
    }

    std::vector<std::vector<double>> targets, outputs;
    if (f.predictions) {
        if (f.trace) throw ParameterError("--trace needs --checkpoint");
        read_prediction_fixture(*f.predictions, targets, outputs);
    } else if (f.checkpoint) {
        TrainConfig trained;
        const ModelState model = checkpoint_from_json(read_json_file(*f.checkpoint), &trained);
        const Dataset d = obtain_dataset(rc);
        const Dataset* part = &d;
        std::optional<Splits> splits;
        if (f.split != "all") {
            SplitSpec spec = rc.splits;
            spec.seed = trained.seed;
            splits = split(d, spec);
            if (f.split == "test") part = &splits->test;
            else if (f.split == "val") part = &splits->val;
            else if (f.split == "train") part = &splits->train;
            else throw ParameterError("unknown split '" + f.split + "'");
        }
        const auto predictions = predict_all(model, *part, {}, rc.jobs);
        std::ofstream traces;
        if (f.trace) traces.open(rc.out / "traces.jsonl");
        for (std::size_t i = 0; i < part->size(); ++i) {
            targets.push_back((*part)[i].target());
            outputs.push_back(predictions[i].y_tilde);
            if (f.trace) {
                json line{{"id", (*part)[i].id}, {"y_emotion", predictions[i].y_emotion}};
                if (predictions[i].trace) line["fusion"] = trace_to_json(*predictions[i].trace);
                traces << line.dump() << '\n';
            }
        }
    } else {
        throw ParameterError("eval needs --checkpoint, --predictions or --ers-only");
    }

    const MetricsReport r = evaluate(targets, outputs, rc.eval);
    write_json(rc.out / "metrics.json", report_to_json(r));
    write_text(rc.out / "metrics.csv", report_csv_header() + "\n" + report_csv_row(r) + "\n");
    std::ofstream per_class(rc.out / "per_class.csv");
    write_per_class_csv(r, per_class);
    std::cout << "samples=" << r.samples << " mR2=" << fmt(r.mean_r2) << " mAP=" << fmt(r.mean_ap)
              << " mRA=" << fmt(r.mean_ra) << " mF1=" << fmt(r.mean_f1)
              << " ERS(mixed)=" << fmt(r.ers_mixed) << " ERS(uniform)=" << fmt(r.ers_uniform)
              << " E=" << fmt(r.entropy_bits) << " MI=" << fmt(r.mi_bits) << '\n';
    return 0;
}

int cmd_ablate(const RunConfig& rc) {
    prepare_output(rc, "ablate");
    const Dataset d = obtain_dataset(rc);
    const std::vector<std::uint64_t> seeds =
        rc.ablate_seeds.empty() ? std::vector<std::uint64_t>{rc.seed} : rc.ablate_seeds;

    struct Job {
        Variant variant;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::uint64_t seed : seeds) {
        for (Variant v : rc.variants) jobs.push_back({v, seed});
    }
    std::vector<AblationResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::size_t next = 0;
    std::mutex mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mutex);
                if (next == jobs.size()) return;
                i = next++;
            }
            try {
                TrainConfig c = rc.train;
                c.seed = jobs[i].seed;
                results[i] = ablate(jobs[i].variant, d, c);
                log::info("finished " + std::string(to_string(jobs[i].variant)) + " seed " +
                          std::to_string(jobs[i].seed) +
                          " test_mse=" + fmt(results[i].test_mse));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t workers = std::max<std::size_t>(1, std::min(rc.jobs, jobs.size()));
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::ostringstream csv;
    csv << "variant,seed,test_mse," << report_csv_header() << '\n';
    for (const AblationResult& r : results) {
        csv << to_string(r.variant) << ',' << r.seed << ',' << fmt(r.test_mse, 10) << ','
            << report_csv_row(r.metrics) << '\n';
    }
    write_text(rc.out / "ablation.csv", csv.str());
    std::cout << csv.str();
    return 0;
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Context-aware emotion recognition with probabilistic late fusion"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;
    TrainFlags train_flags;
    EvalFlags eval_flags;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted structure");
    add_common(synth, common, false);
    std::optional<std::size_t> n, clusters;
    std::optional<double> noise, feature_noise, place_signal, object_signal;
    std::optional<std::string> table;
    synth->add_option("--n", n, "Number of samples (default 5000)");
    synth->add_option("--clusters", clusters, "Context clusters when no table is given");
    synth->add_option("--noise", noise, "Label and attribute noise (default 0.1)");
    synth->add_option("--feature-noise", feature_noise, "Feature noise (default 1.5)");
    synth->add_option("--place-signal", place_signal, "Place stream reliability in [0, 1]");
    synth->add_option("--object-signal", object_signal, "Object stream reliability in [0, 1]");
    synth->add_option("--table", table, "Planted table JSON");

    auto* stats = app.add_subcommand("stats", "Build co-occurrence statistics");
    add_common(stats, common, true);
    std::optional<double> threshold, threshold_emo, smoothing;
    stats->add_option("--threshold", threshold, "Attribute presence threshold (default 0.01)");
    stats->add_option("--threshold-emo", threshold_emo, "Emotion presence threshold (default 0.5)");
    stats->add_option("--smoothing", smoothing, "Additive smoothing (default 0)");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    add_common(gradcheck, common, false);
    std::optional<std::size_t> points;
    std::optional<double> eps, tol;
    std::optional<std::string> fault;
    gradcheck->add_option("--points", points, "Random points per check (default 100)");
    gradcheck->add_option("--eps", eps, "Central-difference step (default 1e-5)");
    gradcheck->add_option("--tol", tol, "Relative error tolerance (default 1e-4)");
    gradcheck->add_option("--inject-fault", fault, "Negate the backward rule of OP");

    auto* train_cmd = app.add_subcommand("train", "Train a model");
    add_common(train_cmd, common, true);
    add_train_flags(train_cmd, train_flags, true);

    auto* eval = app.add_subcommand("eval", "Evaluate predictions");
    add_common(eval, common, true);
    eval->add_option("--checkpoint", eval_flags.checkpoint, "Model checkpoint JSON");
    eval->add_option("--predictions", eval_flags.predictions,
                     "JSONL with 'target' and 'prediction' rows");
    eval->add_option("--ers-only", eval_flags.ers_only, "Compute ERS from R2 MAP MRA")
        ->expected(3);
    eval->add_option("--convention", eval_flags.convention, "ERS units: mixed or uniform");
    eval->add_flag("--trace", eval_flags.trace, "Write per-sample fusion traces");
    eval->add_option("--f1-mode", eval_flags.f1_mode, "threshold or argmax");
    eval->add_option("--split", eval_flags.split, "test, val, train or all (default test)");

    auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare ablation variants");
    add_common(ablate_cmd, common, true);
    add_train_flags(ablate_cmd, train_flags, false);
    std::vector<std::string> variants;
    std::vector<std::uint64_t> seeds;
    ablate_cmd->add_option("--variants", variants, "Variants to run (default all six)");
    ablate_cmd->add_option("--seeds", seeds, "Seeds to run (default --seed)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunConfig rc = resolve(common);
    apply_train_flags(train_flags, rc.train);

    if (synth->parsed()) {
        override_with(n, rc.synth.n);
        override_with(clusters, rc.synth.clusters);
        override_with(noise, rc.synth.noise);
        override_with(feature_noise, rc.synth.feature_noise);
        override_with(place_signal, rc.synth.place_signal);
        override_with(object_signal, rc.synth.object_signal);
        return cmd_synth(rc, table);
    }
    if (stats->parsed()) {
        override_with(threshold, rc.stats.threshold_attr);
        override_with(threshold_emo, rc.stats.threshold_emo);
        override_with(smoothing, rc.stats.smoothing);
        return cmd_stats(rc);
    }
    if (gradcheck->parsed()) {
        override_with(points, rc.gradcheck.points);
        override_with(eps, rc.gradcheck.eps);
        override_with(tol, rc.gradcheck.tolerance);
        if (fault) rc.gradcheck.inject_fault = parse_op(*fault);
        return cmd_gradcheck(rc);
    }
    if (train_cmd->parsed()) return cmd_train(rc);
    if (eval->parsed()) return cmd_eval(rc, eval_flags);
    if (!variants.empty()) {
        rc.variants.clear();
        for (const auto& v : variants) rc.variants.push_back(parse_variant(v));
    }
    if (!seeds.empty()) rc.ablate_seeds = seeds;
    return cmd_ablate(rc);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const Error& e) {
        log::error(e.what());
        return e.is_input_error() ? 2 : 1;
    } catch (const json::exception& e) {
        log::error(e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        log::error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log::error(std::string("internal error: ") + e.what());
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace cfn
