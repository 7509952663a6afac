// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfn/autodiff.hpp"
#include "cfn/data.hpp"
#include "cfn/error.hpp"
#include "cfn/fusion.hpp"
#include "cfn/gradcheck_suite.hpp"
#include "cfn/log.hpp"
#include "cfn/loss.hpp"
#include "cfn/metrics.hpp"
#include "cfn/model.hpp"
#include "cfn/stats.hpp"
#include "oracles.hpp"

using namespace cfn;
using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (!pass) detail << "; ";
            else detail.str("");
            pass = false;
            detail << what;
        }
    }
};

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome ers_table() {
    Outcome o;
    struct Row { const char* name; double r2, map, mra, expected; };
    const Row rows[] = {{"Chance", 0.0, 11.75, 50.0, 61.75},
                        {"Luo", 0.0947, 17.48, 62.59, 64.08},
                        {"Wang", 0.0760, 14.02, 57.65, 62.24},
                        {"Carreira", 0.1007, 17.33, 61.2, 64.26},
                        {"BEE-NET", 0.1493, 23.18, 71.56, 66.33}};
    double worst = 0.0;
    for (const Row& r : rows) {
        const double got = ers(r.r2, r.map, r.mra, ErsConvention::Mixed);
        worst = std::max(worst, std::abs(got - r.expected));
        o.require(std::abs(got - r.expected) <= 0.02,
                  std::string(r.name) + " mixed " + fmt(got) + " vs " + fmt(r.expected));
    }
    const double uniform = ers(0.1493, 0.2318, 0.7156, ErsConvention::Uniform);
    o.require(std::abs(uniform - 83.64) <= 0.05, "uniform " + fmt(uniform) + " vs 83.64");
    if (o.pass) o.detail << "max mixed deviation " << fmt(worst, 3) << " pp, uniform " << fmt(uniform);
    return o;
}

Outcome cooccurrence_oracle() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> pick_n(1, 1000), pick_w(1, 12);
    double worst_identity = 0.0;
    std::size_t cells = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto d = oracle::random_dataset(rng, pick_n(rng), pick_w(rng), pick_w(rng));
        const auto s = build_cooccurrence(d);
        const auto ref = oracle::brute_force_cooccurrence(d, 0.01, 0.5);
        for (std::size_t a = 0; a < s.attributes(); ++a) {
            for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
                ++cells;
                if (s.P_plus.at(a, i) != ref.plus[a][i] || s.P_minus.at(a, i) != ref.minus[a][i]) {
                    o.require(false, "dataset " + std::to_string(trial) + " cell (" +
                                         std::to_string(a) + "," + std::to_string(i) +
                                         ") differs from brute force");
                }
                const double total = s.P_plus.at(a, i) * s.p_j[a] +
                                      s.P_minus.at(a, i) * (1.0 - s.p_j[a]);
                worst_identity = std::max(worst_identity, std::abs(total - s.p_i[i]));
            }
        }
    }
    o.require(worst_identity <= 1e-12, "total-probability deviation " + fmt(worst_identity));
    if (o.pass) {
        o.detail << "50 datasets, " << cells << " cells bitwise equal, identity deviation "
                 << fmt(worst_identity, 3);
    }
    return o;
}

Outcome gradient_suite() {
    Outcome o;
    GradCheckSuiteOptions opt;  // 100 points, eps 1e-5, tolerance 1e-4
    const auto report = run_gradcheck_suite(opt);
    double worst = 0.0;
    for (const auto& e : report.entries) {
        worst = std::max(worst, e.max_error);
        o.require(e.passed && e.points == 100, e.name + " error " + fmt(e.max_error));
    }
    GradCheckSuiteOptions faulty = opt;
    faulty.points = 5;
    faulty.inject_fault = ad::Op::Softmax;
    o.require(!run_gradcheck_suite(faulty).passed(), "injected softmax fault went unnoticed");
    if (o.pass) {
        o.detail << report.entries.size() << " checks x 100 points, max relative error "
                 << fmt(worst, 3) << "; injected fault detected";
    }
    return o;
}

Outcome pooling_algebra() {
    Outcome o;
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> U(0.0, 1.0), W(-3.0, 3.0);
    auto mat = [&](std::size_t r, std::size_t c, bool wide = false) {
        std::vector<double> v(r * c);
        for (double& x : v) x = wide ? W(rng) : U(rng);
        return Tensor::matrix(r, c, v);
    };
    auto vec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = U(rng);
        return Tensor::vector(v);
    };
    const std::size_t trials = 500;
    for (std::size_t t = 0; t < trials && o.pass; ++t) {
        const std::size_t kp = 1 + t % 7, ko = 1 + (t / 7) % 5;
        StreamPriors pp{{}, mat(kp, kDiscreteEmotions), mat(kp, kDiscreteEmotions)};
        StreamPriors op{{}, mat(ko, kDiscreteEmotions), mat(ko, kDiscreteEmotions)};
        for (std::size_t k = 0; k < kp; ++k) pp.indices.push_back(k);
        for (std::size_t k = 0; k < ko; ++k) op.indices.push_back(k);
        Graph g;
        StreamInput place{g.constant(vec(kp + 2)), g.constant(mat(kp + 2, kp, true)),
                          g.constant(Tensor::vector(mat(1, kp, true).values)), &pp};
        StreamInput object{g.constant(vec(ko + 1)), g.constant(mat(ko + 1, ko, true)),
                           g.constant(Tensor::vector(mat(1, ko, true).values)), &op};
        const Tensor y = vec(kEmotionDims);
        const Collapse col = t % 2 ? Collapse::Max : Collapse::Mean;

        const auto nodes = fusion_forward(place, object, g.constant(y), {U(rng), FusionRule::Convex, col});
        const Tensor& P = nodes.P_plus_2.value();
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
            o.require(nodes.Q.value()[i] == std::max(P.at(0, i), P.at(1, i)), "Q is not the column max");
        }
        for (double v : nodes.fused.value().values) o.require(v >= 0.0 && v <= 1.0, "convex output outside [0,1]");
        for (double v : nodes.P_hat.value().values) o.require(v >= 0.0 && v <= 1.0, "P_hat outside [0,1]");

        const auto off = fusion_forward(place, object, g.constant(y), {0.0, FusionRule::Convex, col});
        o.require(off.fused.value() == y, "lambda = 0 is not the identity");

        const Tensor Pp = mat(2, kDiscreteEmotions), Pm = mat(2, kDiscreteEmotions);
        const auto ones = Tensor::vector(std::vector<double>(kDiscreteEmotions, 1.0));
        o.require(pool(g.constant(ones), g.constant(Pp), g.constant(Pm), col).P_hat.value() == Pp,
                  "Q = 1 does not give P_hat = P+");
        const auto same = pool(g.constant(vec(kDiscreteEmotions)), g.constant(Pp), g.constant(Pp), col);
        for (std::size_t k = 0; k < Pp.size(); ++k) {
            o.require(std::abs(same.P_hat.value()[k] - Pp[k]) <= 1e-15, "P- = P+ does not give P_hat = P+");
        }
    }
    if (o.pass) o.detail << trials << " random configurations, all properties hold";
    return o;
}

Outcome tempered_identity() {
    Outcome o;
    std::mt19937_64 rng(55);
    std::normal_distribution<double> N(0.0, 2.0);
    double worst = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> h(2 + t % 30);
        for (double& v : h) v = N(rng);
        const auto tempered = tempered_softmax(h, 1.0);
        double m = *std::max_element(h.begin(), h.end()), z = 0.0;
        std::vector<double> plain(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) z += plain[i] = std::exp(h[i] - m);
        for (std::size_t i = 0; i < h.size(); ++i) {
            worst = std::max(worst, std::abs(tempered[i] - plain[i] / z));
        }
        o.require(tempered_partition_gap(h, 1.0) == 0.0, "gap not zero at sigma = 1");
        for (double side : {1.0, -1.0}) {
            double prev = 0.0;
            for (int k = 1; k <= 18; ++k) {
                const double sigma = 1.0 + side * 0.05 * k;
                const double gap = std::abs(tempered_partition_gap(h, sigma));
                o.require(gap > prev, "gap not monotone at sigma " + fmt(sigma));
                prev = gap;
            }
        }
    }
    o.require(worst <= 1e-15, "sigma = 1 deviates from softmax by " + fmt(worst));
    if (o.pass) {
        o.detail << trials << " logit vectors; max deviation at sigma=1 " << fmt(worst, 3)
                 << "; gap 0 at sigma=1 and monotone on sigma in [0.1, 1.9]";
    }
    return o;
}

Outcome metric_cases() {
    Outcome o;
    const std::vector<double> s = {0.9, 0.4, 0.2};
    const std::vector<bool> l = {true, false, true};
    o.require(std::abs(average_precision(s, l) - 5.0 / 6.0) <= 1e-12, "AP fixture");
    o.require(roc_auc(s, l) == 0.5, "AUC fixture");
    o.require(f1_score({true, true, false}, {true, false, true}) == 0.5, "F1 fixture");
    const std::vector<double> y = {1, 2, 3};
    o.require(r2_score(y, y) == 1.0, "R2 perfect");
    o.require(r2_score(y, std::vector<double>{2, 2, 2}) == 0.0, "R2 mean predictor");
    o.require(std::abs(r2_score(y, std::vector<double>{1, 2, 4}) - 0.5) <= 1e-12, "R2 half");

    std::mt19937_64 rng(100);
    std::normal_distribution<double> N(0.0, 1.0);
    for (std::size_t n : {2u, 10u, 29u, 100u, 500u}) {
        for (int t = 0; t < 5; ++t) {
            std::vector<double> a(n), b(n);
            for (double& v : a) v = N(rng);
            for (double& v : b) v = a[&v - &b[0]] + N(rng);
            const double bound = std::log2(static_cast<double>(n));
            const double e = entropy_kde(a);
            const double mi = mutual_information_kde(a, b);
            o.require(e >= 0.0 && e <= bound, "entropy outside [0, log2 n] at n=" + std::to_string(n));
            o.require(mi >= 0.0 && mi <= bound, "MI outside [0, log2 n] at n=" + std::to_string(n));
        }
    }

    std::vector<double> x(100);
    for (double& v : x) v = N(rng);
    const double hx = entropy_kde(x);
    const double self = mutual_information_kde(x, x);
    o.require(std::abs(self - hx) <= 0.1,
              "MI(X,X)=" + fmt(self, 4) + " vs H(X)=" + fmt(hx, 4) + " at n=100 (needs within 0.1 bit)");

    std::mt19937_64 fixed(1000);
    std::vector<double> a(1000), b(1000);
    for (double& v : a) v = N(fixed);
    for (double& v : b) v = N(fixed);
    const double indep = mutual_information_kde(a, b);
    o.require(std::abs(indep) < 0.1, "MI(independent)=" + fmt(indep, 4) + " at n=1000");
    if (o.pass) {
        o.detail << "fixtures exact; MI(X,X)=" << fmt(self, 4) << " H(X)=" << fmt(hx, 4)
                 << "; MI(indep)=" << fmt(indep, 4);
    } else {
        o.detail << " [MI(indep)=" << fmt(indep, 4) << " at n=1000]";
    }
    return o;
}

// ---------------------------------------------------------------------------
// Synthetic experiments. All runs use the library defaults (90 epochs, batch 8,
// kappa 56 clamped per stream, lambda 0.2) on n = 5000 samples.

constexpr std::uint64_t kDataSeed = 7;

Dataset planted(double object_signal = 1.0) {
    SynthConfig c;
    c.n = 5000;
    c.seed = kDataSeed;
    c.object_signal = object_signal;
    return synth_generate(c).dataset;
}

TrainConfig defaults(std::uint64_t seed) {
    TrainConfig c;
    c.seed = seed;
    return c;
}

struct Job {
    const Dataset* data;
    Variant variant;
    std::uint64_t seed;
};

std::vector<AblationResult> run_all(const std::vector<Job>& jobs) {
    std::vector<std::future<AblationResult>> futures;
    for (const Job& j : jobs) {
        futures.push_back(std::async(std::launch::async, [j] {
            return ablate(j.variant, *j.data, defaults(j.seed));
        }));
    }
    std::vector<AblationResult> out;
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct TrainedRun {
    std::string history;
    std::string checkpoint;
};

TrainedRun train_once(const Dataset& d, std::uint64_t seed) {
    const TrainConfig c = defaults(seed);
    SplitSpec spec;
    spec.seed = seed;
    const Splits s = split(d, spec);
    const auto r = train(init_model(s.train, c), s, c);
    std::ostringstream h;
    write_history_csv(r.history, h);
    return {h.str(), checkpoint_to_json(r.model, c).dump()};
}

}  // namespace

int main() {
    log::set_level(log::Level::Error);
    std::vector<std::pair<int, Outcome>> results;
    auto report = [&](int id, Outcome o, double seconds) {
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << ": "
                  << o.detail.str() << " (" << fmt(seconds, 3) << " s)" << std::endl;
        results.emplace_back(id, std::move(o));
    };
    auto timed = [&](int id, const std::function<Outcome()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        report(id, std::move(o),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };

    timed(1, ers_table);
    timed(2, cooccurrence_oracle);
    timed(3, gradient_suite);
    timed(4, pooling_algebra);
    timed(5, tempered_identity);
    timed(6, metric_cases);

    const auto t0 = std::chrono::steady_clock::now();
    Outcome c7, c8, c9;
    try {
        const Dataset base = planted();
        const Dataset place_heavy = planted(0.5);
        std::vector<Job> jobs = {{&base, Variant::Full, kDataSeed},
                                 {&base, Variant::EmotionOnly, kDataSeed},
                                 {&place_heavy, Variant::NoPlace, kDataSeed},
                                 {&place_heavy, Variant::NoObject, kDataSeed}};
        for (std::uint64_t seed : {1, 2, 3}) {
            jobs.push_back({&base, Variant::Full, seed});
            jobs.push_back({&base, Variant::QPlusOnly, seed});
        }
        auto repeat = std::async(std::launch::async, [&] {
            return std::make_pair(train_once(base, kDataSeed), train_once(base, kDataSeed));
        });
        const auto r = run_all(jobs);

        const double full = r[0].test_mse, emo = r[1].test_mse;
        const double gain = (emo - full) / emo;
        c7.require(gain >= 0.10, "full MSE " + fmt(full, 5) + " only " + fmt(100 * gain, 3) +
                                     "% below emotion_only " + fmt(emo, 5));
        const double no_place = r[2].test_mse, no_object = r[3].test_mse;
        c7.require(no_place > no_object, "no_place MSE " + fmt(no_place, 5) +
                                             " not worse than no_object " + fmt(no_object, 5));
        if (c7.pass) {
            c7.detail << "full " << fmt(full, 5) << " vs emotion_only " << fmt(emo, 5) << " ("
                      << fmt(100 * gain, 3) << "% lower); object signal 0.5: no_place "
                      << fmt(no_place, 5) << " > no_object " << fmt(no_object, 5);
        }

        std::vector<double> e_full, e_q, mi_full, mi_q;
        for (std::size_t k = 4; k < r.size(); k += 2) {
            e_full.push_back(r[k].metrics.entropy_bits);
            mi_full.push_back(r[k].metrics.mi_bits);
            e_q.push_back(r[k + 1].metrics.entropy_bits);
            mi_q.push_back(r[k + 1].metrics.mi_bits);
        }
        const double ef = median(e_full), eq = median(e_q), mf = median(mi_full), mq = median(mi_q);
        const std::string numbers = "median entropy full " + fmt(ef, 7) + " vs q_plus_only " +
                                    fmt(eq, 7) + ", median MI full " + fmt(mf, 5) +
                                    " vs q_plus_only " + fmt(mq, 5) + " (seeds 1,2,3)";
        c8.require(ef <= eq, "entropy ordering violated");
        c8.require(mf >= mq, "MI ordering violated");
        if (c8.pass) c8.detail << numbers;
        else c8.detail << ": " << numbers;

        const auto [first, second] = repeat.get();
        c9.require(first.history == second.history, "history CSV differs between runs");
        c9.require(first.checkpoint == second.checkpoint, "checkpoint differs between runs");
        if (c9.pass) {
            c9.detail << "history (" << first.history.size() << " bytes) and checkpoint ("
                      << first.checkpoint.size() << " bytes) identical";
        }
    } catch (const std::exception& e) {
        for (Outcome* o : {&c7, &c8, &c9}) o->require(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(7, std::move(c7), seconds);
    report(8, std::move(c8), seconds);
    report(9, std::move(c9), seconds);

    std::size_t failed = 0;
    for (const auto& [id, o] : results) failed += o.pass ? 0 : 1;
    std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
