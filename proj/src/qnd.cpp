// Copyright 2026 The qtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qtwin/qnd.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "qtwin/constants.hpp"
#include "qtwin/error.hpp"

namespace qtwin {

namespace {

double uniform01(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int poisson(std::mt19937_64 &rng, double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 50.0) throw DomainError("thermal background mean above 50 photons is not supported");
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = uniform01(rng);
    while (prod > limit) {
        ++k;
        prod *= uniform01(rng);
    }
    return k;
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

// Probability the qubit is in |1> right before readout, for a clean start.
double qubit_one_probability(int n, const QndProtocol &protocol, const QubitNoise &noise) {
    const double contrast = std::isinf(noise.t2) ? 1.0 : std::exp(-protocol.parity_time() / noise.t2);
    return 0.5 * (1.0 - contrast * std::cos(parity_phase(n, protocol)));
}

double readout_survival(const QubitNoise &noise) {
    if (noise.readout_duration <= 0.0 || std::isinf(noise.t1)) return 1.0;
    return std::exp(-noise.readout_duration / noise.t1);
}

double clamp_probability(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

// Scores of `trials` independent runs; trial i uses stream
// trial_seed(seed, stride * i + offset).
std::vector<double> run_scores(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                               long trials, std::uint64_t seed, std::uint64_t stride, std::uint64_t offset) {
    std::vector<double> scores(static_cast<std::size_t>(trials));
    const unsigned hw = std::max(1u, std::min(16u, std::thread::hardware_concurrency()));
    const long workers = std::min<long>(hw, std::max<long>(1, trials / 256));
    auto work = [&](long begin, long end) {
        for (long i = begin; i < end; ++i) {
            const QndRun run = simulate_qnd_run(protocol, cavity, noise,
                                                trial_seed(seed, stride * static_cast<std::uint64_t>(i) + offset));
            scores[static_cast<std::size_t>(i)] = decision_score(run.bits, protocol, noise);
        }
    };
    std::vector<std::thread> pool;
    const long chunk = (trials + workers - 1) / workers;
    for (long w = 0; w < workers; ++w) {
        const long b = w * chunk;
        const long e = std::min(trials, b + chunk);
        if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto &t : pool) t.join();
    return scores;
}

DetectionStats summarize(long trials, long hits, std::uint64_t seed) {
    DetectionStats s;
    s.trials = trials;
    s.detections = hits;
    s.estimate = static_cast<double>(hits) / static_cast<double>(trials);
    s.std_error = std::sqrt(s.estimate * (1.0 - s.estimate) / static_cast<double>(trials));
    s.ci = wilson_interval(hits, trials);
    s.seed = seed;
    return s;
}

void check_trials(long trials) {
    if (trials < 1000) throw DomainError("at least 1000 trials are required");
}

void validate_all(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise) {
    protocol.validate();
    cavity.validate();
    noise.validate();
}

}  // namespace

double StorageCavity::tau() const { return q_s / (kTwoPi * f_s); }

void StorageCavity::validate() const {
    if (!(f_s > 0.0) || !(q_s > 0.0) || !std::isfinite(f_s))
        throw DomainError("storage cavity needs positive frequency and quality factor");
    if (n_init < 0) throw DomainError("initial photon number must be >= 0");
    if (!(thermal_mean >= 0.0)) throw DomainError("thermal mean must be >= 0");
}

QubitNoise QubitNoise::symmetric(double readout_error) {
    QubitNoise n;
    n.p_read1_given0 = readout_error;
    n.p_read0_given1 = readout_error;
    return n;
}

void QubitNoise::validate() const {
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw DomainError("T1 and T2 must be positive");
    if (std::isfinite(t2) && t2 > 2.0 * t1 * (1.0 + 1e-12)) throw DomainError("T2 may not exceed 2 T1");
    if (!is_probability(p_read1_given0) || !is_probability(p_read0_given1) || !is_probability(reset_error))
        throw DomainError("error probabilities must lie in [0, 1]");
    if (!(readout_duration >= 0.0)) throw DomainError("readout duration must be >= 0");
}

std::string to_string(DecisionRule rule) { return rule == DecisionRule::majority ? "majority" : "log-likelihood"; }

DecisionRule decision_rule_from_string(const std::string &name) {
    if (name == "majority") return DecisionRule::majority;
    if (name == "log-likelihood" || name == "log_likelihood") return DecisionRule::log_likelihood;
    throw InputError("unknown decision rule '" + name + "'");
}

double QndProtocol::parity_time() const { return t_parity > 0.0 ? t_parity : pi_phase_time(xi, m); }

double QndProtocol::interval() const { return repeat_interval > 0.0 ? repeat_interval : parity_time(); }

void QndProtocol::validate() const {
    if (!(xi > 0.0) || !std::isfinite(xi)) throw DomainError("xi must be positive");
    if (t_parity < 0.0 || repeat_interval < 0.0) throw DomainError("times must be >= 0");
    if (n_repeats < 1) throw DomainError("at least one repeat is required");
    if (m < 1) throw DomainError("GHZ size must be >= 1");
}

double parity_phase(int n, const QndProtocol &protocol) {
    if (n < 0) throw DomainError("photon number must be >= 0");
    return 2.0 * n * protocol.m * kTwoPi * protocol.xi * protocol.parity_time();
}

double pi_phase_time(double xi, int m) {
    if (!(xi > 0.0) || m < 1) throw DomainError("pi_phase_time needs xi > 0 and m >= 1");
    return 1.0 / (4.0 * m * xi);
}

double bit_one_probability(int n, const QndProtocol &protocol, const QubitNoise &noise) {
    const double q1 = qubit_one_probability(n, protocol, noise) * readout_survival(noise);
    return q1 * (1.0 - noise.p_read0_given1) + (1.0 - q1) * noise.p_read1_given0;
}

QndRun simulate_qnd_run(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                        std::uint64_t seed) {
    validate_all(protocol, cavity, noise);
    std::mt19937_64 rng(seed);
    QndRun run;
    run.bits.reserve(static_cast<std::size_t>(protocol.n_repeats));
    run.photons.reserve(static_cast<std::size_t>(protocol.n_repeats));
    int n = cavity.n_init + poisson(rng, cavity.thermal_mean);
    const double survive = std::exp(-protocol.interval() / cavity.tau());
    const double relax_keep = readout_survival(noise);
    bool reset_failed = false;
    for (int k = 0; k < protocol.n_repeats; ++k) {
        run.photons.push_back(n);
        double q1 = qubit_one_probability(n, protocol, noise);
        if (reset_failed) q1 = 1.0 - q1;
        bool one = uniform01(rng) < q1;
        if (one && relax_keep < 1.0 && uniform01(rng) >= relax_keep) one = false;
        const double flip = one ? noise.p_read0_given1 : noise.p_read1_given0;
        const bool bit = (uniform01(rng) < flip) ? !one : one;
        run.bits.push_back(bit ? 1 : 0);
        reset_failed = noise.reset_error > 0.0 && uniform01(rng) < noise.reset_error;
        int survivors = 0;
        for (int p = 0; p < n; ++p)
            if (uniform01(rng) < survive) ++survivors;
        n = survivors;
    }
    return run;
}

double decision_score(std::span<const std::uint8_t> bits, const QndProtocol &protocol, const QubitNoise &noise) {
    if (bits.empty()) throw DomainError("decision needs at least one bit");
    if (protocol.rule == DecisionRule::majority) {
        double ones = 0.0;
        for (auto b : bits) ones += b ? 1.0 : 0.0;
        return ones;
    }
    const double p1 = clamp_probability(bit_one_probability(1, protocol, noise));
    const double p0 = clamp_probability(bit_one_probability(0, protocol, noise));
    const double w1 = std::log(p1 / p0);
    const double w0 = std::log((1.0 - p1) / (1.0 - p0));
    double llr = 0.0;
    for (auto b : bits) llr += b ? w1 : w0;
    return llr;
}

double default_threshold(const QndProtocol &protocol) {
    return protocol.rule == DecisionRule::majority ? 0.5 * protocol.n_repeats : 0.0;
}

bool detect(std::span<const std::uint8_t> bits, const QndProtocol &protocol, const QubitNoise &noise) {
    return decision_score(bits, protocol, noise) > default_threshold(protocol);
}

BinomialInterval wilson_interval(long successes, long trials, double z) {
    if (trials <= 0 || successes < 0 || successes > trials) throw DomainError("wilson_interval: invalid counts");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (trial + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

DetectionStats dark_count_rate(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                               long trials, std::uint64_t seed) {
    check_trials(trials);
    StorageCavity empty = cavity;
    empty.n_init = 0;
    validate_all(protocol, empty, noise);
    const auto scores = run_scores(protocol, empty, noise, trials, seed, 1, 0);
    const double thr = default_threshold(protocol);
    const long hits = std::count_if(scores.begin(), scores.end(), [thr](double s) { return s > thr; });
    return summarize(trials, hits, seed);
}

DetectionStats efficiency(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                          long trials, std::uint64_t seed) {
    check_trials(trials);
    if (cavity.n_init < 1) throw DomainError("efficiency needs at least one photon in the cavity");
    validate_all(protocol, cavity, noise);
    const auto scores = run_scores(protocol, cavity, noise, trials, seed, 1, 0);
    const double thr = default_threshold(protocol);
    const long hits = std::count_if(scores.begin(), scores.end(), [thr](double s) { return s > thr; });
    return summarize(trials, hits, seed);
}

std::vector<RocPoint> roc_curve(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                                long trials, std::uint64_t seed, std::span<const double> thresholds) {
    check_trials(trials);
    if (cavity.n_init < 1) throw DomainError("roc_curve needs at least one photon in the cavity");
    StorageCavity empty = cavity;
    empty.n_init = 0;
    validate_all(protocol, cavity, noise);
    const auto dark = run_scores(protocol, empty, noise, trials, seed, 2, 0);
    const auto bright = run_scores(protocol, cavity, noise, trials, seed, 2, 1);
    std::vector<RocPoint> out;
    for (double thr : thresholds) {
        const long fp = std::count_if(dark.begin(), dark.end(), [thr](double s) { return s > thr; });
        const long tp = std::count_if(bright.begin(), bright.end(), [thr](double s) { return s > thr; });
        out.push_back({thr, static_cast<double>(fp) / trials, static_cast<double>(tp) / trials});
    }
    return out;
}

double majority_false_positive(int n_repeats, double p) {
    if (n_repeats < 1 || !is_probability(p)) throw DomainError("majority_false_positive: invalid arguments");
    double total = 0.0;
    for (int k = n_repeats / 2 + 1; k <= n_repeats; ++k) {
        const double log_c = std::lgamma(n_repeats + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_repeats - k + 1.0);
        total += std::exp(log_c) * std::pow(p, k) * std::pow(1.0 - p, n_repeats - k);
    }
    return total;
}

double rabi_decay_time(const QubitNoise &noise) {
    const double rate = (std::isinf(noise.t1) ? 0.0 : 1.0 / noise.t1) + (std::isinf(noise.t2) ? 0.0 : 1.0 / noise.t2);
    return rate > 0.0 ? 2.0 / rate : std::numeric_limits<double>::infinity();
}

double direct_detection_prob(double omega, double delta, double t, const QubitNoise &noise) {
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw DomainError("Rabi frequency must be finite and >= 0");
    if (!std::isfinite(delta) || !(t >= 0.0)) throw DomainError("detuning must be finite and t >= 0");
    if (omega == 0.0) return 0.0;
    const double w2 = omega * omega + delta * delta;
    const double amp = omega * omega / w2;
    const double tr = rabi_decay_time(noise);
    const double env = std::isinf(tr) ? 1.0 : std::exp(-t / tr);
    return amp * (0.5 - 0.5 * env * std::cos(kTwoPi * std::sqrt(w2) * t));
}

}  // namespace qtwin
