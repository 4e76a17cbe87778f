#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/money.hpp"
#include "incentive_lab/random.hpp"

namespace incentive_lab {

enum class Arm { Treatment, Control };
enum class Gender { Female, Male };

constexpr std::string_view to_string(Arm a) { return a == Arm::Treatment ? "treatment" : "control"; }
constexpr std::string_view to_string(Gender g) { return g == Gender::Female ? "female" : "male"; }

inline Arm parse_arm(std::string_view s) {
    if (s == "treatment") return Arm::Treatment;
    if (s == "control") return Arm::Control;
    fail(ErrorCode::ParseError, "bad arm: " + std::string(s));
}

/// Daily perceived-difficulty draw. Reported on a 1..5 scale where higher
/// means easier.
struct DifficultyProcess {
    double ease_base = 3.3;
    double within_sd = 0.9;
};

struct AgentParams {
    std::string participant_id;
    Gender gender = Gender::Female;
    int age_years = 30;
    double grit = 2.75;
    int pre_logging_days = 0;

    double alpha = 0.0;        // subject intercept
    double beta_time = 0.0;    // per-day drift
    double beta_loss = 0.0;    // per unit of perceived disutility
    double beta_ease = 0.0;    // per point of ease above the scale midpoint
    double lambda = 2.0;       // loss aversion
    double kappa = 0.15;       // pessimism weight on the worst-case loss
    double habituation_gamma = 0.8;   // per-deduction decay for predictable losses
    DifficultyProcess difficulty;
    double survey_completion_prob = 0.9;

    void validate() const {
        if (!(lambda >= 1.0)) fail(ErrorCode::InvalidSpec, "lambda must be >= 1");
        if (!(kappa >= 0.0 && kappa <= 1.0)) fail(ErrorCode::InvalidSpec, "kappa must be in [0,1]");
        if (!(habituation_gamma > 0.0 && habituation_gamma <= 1.0))
            fail(ErrorCode::InvalidSpec, "habituation_gamma must be in (0,1]");
    }
};

/// Population generator settings. Covariate defaults follow the enrolled
/// sample (74% female, age buckets, grit 2.75 +/- 0.58, 10.2% prior
/// loggers averaging 1.3 logged days overall). Behavioral defaults are
/// calibration choices.
struct PopulationSpec {
    int n = 245;
    double arm_split = 135.0 / 245.0;
    double female_prob = 0.7402;
    // 18-24, 25-34, 35-44, 45-54, 55-64, 65+
    std::array<double, 6> age_bucket_weights = {41, 95, 35, 12, 3, 1};
    double grit_mean = 2.75;
    double grit_sd = 0.58;
    double prelog_logger_prob = 0.102;
    double prelog_mean = 1.3;

    double alpha_mean = 0.4;
    double alpha_sd = 2.1;
    double grit_effect = 0.0;
    double beta_time_mean = -0.07;
    double beta_time_sd = 0.03;
    double beta_loss = 0.007;
    double beta_ease = 0.35;
    double lambda = 2.0;
    double kappa = 0.15;
    double habituation_gamma = 0.8;
    double ease_mean = 3.3;
    double ease_between_sd = 0.6;
    double ease_within_sd = 0.9;
    double survey_completion_prob = 0.9;

    std::uint64_t seed = 42;

    void validate() const {
        auto prob = [](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0))
                fail(ErrorCode::InvalidSpec, std::string(what) + " must be in [0,1]");
        };
        if (n < 2) fail(ErrorCode::InvalidSpec, "population needs n >= 2");
        prob(arm_split, "arm_split");
        prob(female_prob, "female_prob");
        prob(prelog_logger_prob, "prelog_logger_prob");
        prob(survey_completion_prob, "survey_completion_prob");
        if (std::any_of(age_bucket_weights.begin(), age_bucket_weights.end(),
                        [](double w) { return w < 0.0; }) ||
            std::accumulate(age_bucket_weights.begin(), age_bucket_weights.end(), 0.0) <= 0.0)
            fail(ErrorCode::InvalidSpec, "age bucket weights must be non-negative, not all zero");
        if (grit_sd < 0 || alpha_sd < 0 || beta_time_sd < 0 || ease_between_sd < 0 ||
            ease_within_sd < 0)
            fail(ErrorCode::InvalidSpec, "spreads must be non-negative");
        if (prelog_mean < 0.0) fail(ErrorCode::InvalidSpec, "prelog_mean must be >= 0");
        if (prelog_logger_prob > 0.0 && prelog_mean / prelog_logger_prob > 30.0)
            fail(ErrorCode::InvalidSpec, "prelog_mean too large for 30-day window");
        if (prelog_logger_prob == 0.0 && prelog_mean > 0.0)
            fail(ErrorCode::InvalidSpec, "prelog_mean > 0 requires loggers");
        if (!(lambda >= 1.0)) fail(ErrorCode::InvalidSpec, "lambda must be >= 1");
        prob(kappa, "kappa");
        if (!(habituation_gamma > 0.0 && habituation_gamma <= 1.0))
            fail(ErrorCode::InvalidSpec, "habituation_gamma must be in (0,1]");
    }
};

inline std::string participant_id_for(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%04d", index + 1);
    return buf;
}

/// Zero-inflated count of logged days in a 30-day window.
inline int draw_logging_days(const PopulationSpec& spec, RandomStream& rng) {
    if (!rng.bernoulli(spec.prelog_logger_prob)) return 0;
    const double logger_mean = spec.prelog_mean / spec.prelog_logger_prob;
    const double p = std::clamp((logger_mean - 1.0) / 29.0, 0.0, 1.0);
    return 1 + rng.binomial(29, p);
}

/// Agent `index` is drawn from its own sub-stream, so any subset of the
/// population can be regenerated independently.
inline AgentParams sample_agent(const PopulationSpec& spec, int index) {
    RandomStream rng = RandomStream::derive(spec.seed, "population", static_cast<std::uint64_t>(index));
    AgentParams a;
    a.participant_id = participant_id_for(index);
    a.gender = rng.bernoulli(spec.female_prob) ? Gender::Female : Gender::Male;

    static constexpr std::array<int, 7> kAgeEdges = {18, 25, 35, 45, 55, 65, 75};
    const double total = std::accumulate(spec.age_bucket_weights.begin(),
                                         spec.age_bucket_weights.end(), 0.0);
    double u = rng.uniform01() * total;
    std::size_t bucket = 0;
    while (bucket + 1 < spec.age_bucket_weights.size() && u >= spec.age_bucket_weights[bucket]) {
        u -= spec.age_bucket_weights[bucket];
        ++bucket;
    }
    a.age_years = static_cast<int>(rng.uniform_int(kAgeEdges[bucket], kAgeEdges[bucket + 1] - 1));

    // Truncated normal by rejection.
    do {
        a.grit = rng.normal(spec.grit_mean, spec.grit_sd);
    } while (a.grit < 1.0 || a.grit > 5.0);

    a.pre_logging_days = draw_logging_days(spec, rng);

    a.alpha = spec.alpha_mean + spec.grit_effect * (a.grit - spec.grit_mean) +
              rng.normal(0.0, spec.alpha_sd);
    a.beta_time = rng.normal(spec.beta_time_mean, spec.beta_time_sd);
    a.beta_loss = spec.beta_loss;
    a.beta_ease = spec.beta_ease;
    a.lambda = spec.lambda;
    a.kappa = spec.kappa;
    a.habituation_gamma = spec.habituation_gamma;
    a.difficulty.ease_base = rng.normal(spec.ease_mean, spec.ease_between_sd);
    a.difficulty.within_sd = spec.ease_within_sd;
    a.survey_completion_prob = spec.survey_completion_prob;
    return a;
}

inline std::vector<AgentParams> sample_population(const PopulationSpec& spec) {
    spec.validate();
    std::vector<AgentParams> out;
    out.reserve(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) out.push_back(sample_agent(spec, i));
    return out;
}

/// What an agent knows about the deduction for a missed day: treatment
/// agents know only the announced range, never their pre-generated
/// schedule.
struct ScheduleInfo {
    Cents expected{100};
    Cents max{300};
};

/// Loss-averse disutility of missing a day. Predictable (control) losses
/// habituate with every deduction experienced; unpredictable (treatment)
/// losses keep their salience and overweight the worst case.
inline double perceived_loss(const AgentParams& agent, Arm arm, ScheduleInfo info,
                             int prior_deductions) {
    const auto expected = static_cast<double>(info.expected.value);
    const auto worst = static_cast<double>(info.max.value);
    if (arm == Arm::Control)
        return agent.lambda * expected * std::pow(agent.habituation_gamma, prior_deductions);
    return agent.lambda * ((1.0 - agent.kappa) * expected + agent.kappa * worst);
}

inline double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double compliance_probability(const AgentParams& agent, int day, Arm arm, ScheduleInfo info,
                                     int prior_deductions, int ease) {
    const double eta = agent.alpha + agent.beta_time * day +
                       agent.beta_loss * perceived_loss(agent, arm, info, prior_deductions) +
                       agent.beta_ease * (ease - 3);
    return logistic(eta);
}

inline int draw_ease(const AgentParams& agent, RandomStream& rng) {
    const double raw = agent.difficulty.ease_base + rng.normal(0.0, agent.difficulty.within_sd);
    return static_cast<int>(std::clamp(std::round(raw), 1.0, 5.0));
}

struct ComplianceDecision {
    bool complied = false;
    int perceived_difficulty = 3;  // 1..5, higher = easier
    double probability = 0.0;
};

inline ComplianceDecision decide_compliance(const AgentParams& agent, int day, Arm arm,
                                            ScheduleInfo info, int prior_deductions,
                                            RandomStream& rng) {
    if (day < 1) fail(ErrorCode::DayOutOfRange, "day must be >= 1");
    ComplianceDecision d;
    d.perceived_difficulty = draw_ease(agent, rng);
    d.probability = compliance_probability(agent, day, arm, info, prior_deductions,
                                           d.perceived_difficulty);
    d.complied = rng.uniform01() < d.probability;
    return d;
}

/// `participant_id,arm,gender,age,grit,pre_logging_days,alpha_i,beta_time,beta_loss,lambda,kappa,habituation_gamma,ease_base`
inline void write_population_header(std::ostream& os) {
    csv::write_row(os, "participant_id", "arm", "gender", "age", "grit", "pre_logging_days",
                   "alpha_i", "beta_time", "beta_loss", "lambda", "kappa", "habituation_gamma",
                   "ease_base");
}

inline std::string fmt_real(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline void write_population_row(std::ostream& os, const AgentParams& a, Arm arm) {
    csv::write_row(os, a.participant_id, to_string(arm), to_string(a.gender), a.age_years,
                   fmt_real(a.grit), a.pre_logging_days, fmt_real(a.alpha), fmt_real(a.beta_time),
                   fmt_real(a.beta_loss), fmt_real(a.lambda), fmt_real(a.kappa),
                   fmt_real(a.habituation_gamma), fmt_real(a.difficulty.ease_base));
}

}  // namespace incentive_lab
