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

#pragma once

// Monte-Carlo model of repeated QND parity measurements of a storage
// cavity, and the weak-drive direct-detection excitation probability.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace qtwin {

struct StorageCavity {
    double f_s = 8e9;         // Hz
    double q_s = 1e7;
    int n_init = 0;           // photons present at the start of a run
    double thermal_mean = 0;  // Poisson background added at the start of a run

    /// Photon lifetime Q_s / (2 pi f_s).
    double tau() const;
    void validate() const;
};

struct QubitNoise {
    double t1 = std::numeric_limits<double>::infinity();  // s
    double t2 = std::numeric_limits<double>::infinity();  // s
    double p_read1_given0 = 0.0;                          // readout error for |0>
    double p_read0_given1 = 0.0;                          // readout error for |1>
    double reset_error = 0.0;          // probability the qubit is left in |1>
    double readout_duration = 0.0;     // s, |1> may relax during readout

    static QubitNoise symmetric(double readout_error);
    /// Throws DomainError for probabilities outside [0, 1], non-positive
    /// times or T2 > 2 T1.
    void validate() const;
};

enum class DecisionRule { majority, log_likelihood };

std::string to_string(DecisionRule rule);
DecisionRule decision_rule_from_string(const std::string &name);

struct QndProtocol {
    double xi = 350e3;        // dispersive precession rate, Hz
    double t_parity = 0.0;    // s; zero selects the single-photon pi time
    int n_repeats = 1;
    int m = 1;                // GHZ size
    DecisionRule rule = DecisionRule::majority;
    double repeat_interval = 0.0;  // s between repeats; zero means t_parity

    double parity_time() const;
    double interval() const;
    void validate() const;
};

/// Accumulated qubit phase 2 n m (2 pi xi) t_parity.
double parity_phase(int n, const QndProtocol &protocol);

/// Smallest t giving a phase of pi for one photon: 1 / (4 m xi).
double pi_phase_time(double xi, int m);

/// Probability that one repeat reads 1 given n photons and the qubit
/// starting in |0> (the reset-error branch inverts it).
double bit_one_probability(int n, const QndProtocol &protocol, const QubitNoise &noise);

struct QndRun {
    std::vector<std::uint8_t> bits;
    std::vector<int> photons;  // photon number during each repeat
};

/// Deterministic for a fixed seed. Per repeat: every photon survives the
/// interval with probability exp(-dt / tau); the Ramsey contrast is
/// exp(-t_parity / T2); |1> relaxes during readout with T1; the result is
/// misclassified with the readout error; a failed reset inverts the next
/// repeat.
QndRun simulate_qnd_run(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                        std::uint64_t seed);

/// Decision statistic: number of ones (majority) or log-likelihood ratio
/// of one photon versus none.
double decision_score(std::span<const std::uint8_t> bits, const QndProtocol &protocol, const QubitNoise &noise);

/// Threshold separating present from absent: N/2 ones for majority, zero
/// log-likelihood ratio otherwise. Scores equal to it count as absent.
double default_threshold(const QndProtocol &protocol);

bool detect(std::span<const std::uint8_t> bits, const QndProtocol &protocol, const QubitNoise &noise);

struct BinomialInterval {
    double low = 0.0;
    double high = 0.0;
};

/// Wilson score interval; z = 1.96 gives 95% coverage.
BinomialInterval wilson_interval(long successes, long trials, double z = 1.96);

struct DetectionStats {
    long trials = 0;
    long detections = 0;
    double estimate = 0.0;
    double std_error = 0.0;  // sqrt(p (1 - p) / trials) at the estimate
    BinomialInterval ci;     // Wilson 95%
    std::uint64_t seed = 0;
};

/// Per-trial stream seed derived from the master seed by splitmix64.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial);

/// False-positive rate with an empty cavity (thermal background kept).
DetectionStats dark_count_rate(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                               long trials, std::uint64_t seed);
/// Detection probability with cavity.n_init photons (must be >= 1).
DetectionStats efficiency(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                          long trials, std::uint64_t seed);

struct RocPoint {
    double threshold = 0.0;
    double false_positive = 0.0;
    double true_positive = 0.0;
};

/// Sweep of the decision threshold with the same simulated runs at every point.
std::vector<RocPoint> roc_curve(const QndProtocol &protocol, const StorageCavity &cavity, const QubitNoise &noise,
                                long trials, std::uint64_t seed, std::span<const double> thresholds);

/// Exact majority-vote false-positive probability for N independent bits
/// that each read 1 with probability p.
double majority_false_positive(int n_repeats, double p);

/// Driven two-level excitation with Rabi frequency omega and detuning delta
/// (Hz): P = A [1/2 - 1/2 exp(-t / T_R) cos(2 pi W t)], W = sqrt(omega^2 +
/// delta^2), A = omega^2 / W^2, T_R = 2 / (1/T1 + 1/T2). Without decay this
/// is A sin^2(pi W t); with decay it relaxes to A / 2.
double direct_detection_prob(double omega, double delta, double t, const QubitNoise &noise);

/// Decay time of the Rabi envelope, 2 / (1/T1 + 1/T2).
double rabi_decay_time(const QubitNoise &noise);

}  // namespace qtwin
