#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "incentive_lab/agents.hpp"

using namespace incentive_lab;
using test_helpers::error_code;

TEST(Population, FemaleFractionDefault) {
    PopulationSpec spec;
    const auto pop = sample_population(spec);
    ASSERT_EQ(pop.size(), 245u);
    int female = 0;
    for (const auto& a : pop) female += a.gender == Gender::Female;
    const double f = female / 245.0;
    EXPECT_GE(f, 0.66);
    EXPECT_LE(f, 0.82);
}

TEST(Population, AllFemaleSpec) {
    PopulationSpec spec;
    spec.n = 2;
    spec.female_prob = 1.0;
    for (const auto& a : sample_population(spec)) EXPECT_EQ(a.gender, Gender::Female);
}

TEST(Population, GritMeanLargeSample) {
    PopulationSpec spec;
    spec.n = 10000;
    double s = 0;
    for (const auto& a : sample_population(spec)) {
        ASSERT_GE(a.grit, 1.0);
        ASSERT_LE(a.grit, 5.0);
        s += a.grit;
    }
    EXPECT_NEAR(s / 10000.0, 2.75, 0.02);
}

TEST(Population, CovariateMomentsLargeSample) {
    PopulationSpec spec;
    spec.n = 20000;
    double prelog = 0, loggers = 0;
    std::array<double, 6> buckets{};
    for (const auto& a : sample_population(spec)) {
        prelog += a.pre_logging_days;
        loggers += a.pre_logging_days > 0;
        ASSERT_GE(a.age_years, 18);
        ASSERT_LE(a.age_years, 74);
        buckets[static_cast<std::size_t>(std::min(5, (a.age_years - 15) / 10))] += 1;
    }
    EXPECT_NEAR(prelog / spec.n, 1.3, 0.1);
    EXPECT_NEAR(loggers / spec.n, 0.102, 0.01);
    // 25-34 is the modal bucket with weight 95/187
    EXPECT_NEAR(buckets[1] / spec.n, 95.0 / 187.0, 0.015);
}

TEST(Population, DeterministicPerSeedAndIndependentOfN) {
    PopulationSpec a, b;
    b.n = 300;
    const auto x = sample_population(a), y = sample_population(b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(x[i].participant_id, y[i].participant_id);
        EXPECT_EQ(x[i].alpha, y[i].alpha);
        EXPECT_EQ(x[i].age_years, y[i].age_years);
    }
    b.seed = 43;
    EXPECT_NE(sample_population(b)[0].alpha, x[0].alpha);
}

TEST(Population, InvalidSpec) {
    PopulationSpec s;
    s.n = 1;
    EXPECT_EQ(error_code([&] { sample_population(s); }), ErrorCode::InvalidSpec);
    s = {};
    s.female_prob = 1.5;
    EXPECT_EQ(error_code([&] { sample_population(s); }), ErrorCode::InvalidSpec);
    s = {};
    s.lambda = 0.5;
    EXPECT_EQ(error_code([&] { sample_population(s); }), ErrorCode::InvalidSpec);
}

TEST(PerceivedLoss, CollapsesWithoutPessimismOrHabituation) {
    AgentParams a;
    a.kappa = 0.0;
    a.habituation_gamma = 1.0;
    const ScheduleInfo info{Cents{100}, Cents{300}};
    for (int k : {0, 3, 20})
        EXPECT_DOUBLE_EQ(perceived_loss(a, Arm::Treatment, info, k),
                         perceived_loss(a, Arm::Control, {Cents{100}, Cents{100}}, k));
}

TEST(PerceivedLoss, HabituationFactor) {
    AgentParams a;
    a.habituation_gamma = 0.92;
    const ScheduleInfo info{Cents{100}, Cents{100}};
    const double ratio = perceived_loss(a, Arm::Control, info, 10) / perceived_loss(a, Arm::Control, info, 0);
    EXPECT_NEAR(ratio, std::pow(0.92, 10), 1e-12);
    EXPECT_NEAR(ratio, 0.4344, 1e-4);
}

TEST(PerceivedLoss, TreatmentArithmetic) {
    AgentParams a;
    a.kappa = 0.4;
    a.lambda = 2.0;
    EXPECT_DOUBLE_EQ(perceived_loss(a, Arm::Treatment, {Cents{100}, Cents{300}}, 0), 360.0);
    // no habituation under random loss
    EXPECT_DOUBLE_EQ(perceived_loss(a, Arm::Treatment, {Cents{100}, Cents{300}}, 12), 360.0);
}

TEST(Decide, NeutralAgentCompliesHalfTheTime) {
    AgentParams a;
    a.beta_loss = 0;
    a.beta_time = 0;
    a.beta_ease = 0;
    a.alpha = 0;
    RandomStream rng(1);
    int yes = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) yes += decide_compliance(a, 1 + i % 30, Arm::Control, {}, 0, rng).complied;
    EXPECT_NEAR(static_cast<double>(yes) / n, 0.5, 0.01);
}

TEST(Decide, NegativeDriftLowersLaterDays) {
    PopulationSpec spec;
    for (const auto& a : sample_population(spec)) {
        if (a.beta_time >= 0) continue;
        for (int e = 1; e <= 5; ++e) {
            double prev = 2.0;
            for (int d = 1; d <= 30; ++d) {
                const double p = compliance_probability(a, d, Arm::Treatment, {}, 0, e);
                ASSERT_LE(p, prev);
                prev = p;
            }
            EXPECT_LT(compliance_probability(a, 30, Arm::Control, {Cents{100}, Cents{100}}, 0, e),
                      compliance_probability(a, 1, Arm::Control, {Cents{100}, Cents{100}}, 0, e));
        }
    }
}

TEST(Decide, DifficultyOnScale) {
    PopulationSpec spec;
    const auto a = sample_agent(spec, 0);
    RandomStream rng(2);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto d = decide_compliance(a, 1, Arm::Treatment, {}, 0, rng);
        ASSERT_GE(d.perceived_difficulty, 1);
        ASSERT_LE(d.perceived_difficulty, 5);
        seen.insert(d.perceived_difficulty);
    }
    EXPECT_GE(seen.size(), 3u);
}

TEST(Decide, SameStreamSameDecisions) {
    PopulationSpec spec;
    const auto a = sample_agent(spec, 7);
    RandomStream r1(5), r2(5);
    for (int d = 1; d <= 30; ++d) {
        const auto x = decide_compliance(a, d, Arm::Control, {Cents{100}, Cents{100}}, d / 2, r1);
        const auto y = decide_compliance(a, d, Arm::Control, {Cents{100}, Cents{100}}, d / 2, r2);
        EXPECT_EQ(x.complied, y.complied);
        EXPECT_EQ(x.perceived_difficulty, y.perceived_difficulty);
    }
}

TEST(PopulationCsv, HeaderAndRow) {
    AgentParams a;
    a.participant_id = "P0001";
    std::ostringstream os;
    write_population_header(os);
    write_population_row(os, a, Arm::Control);
    EXPECT_EQ(os.str().substr(0, 34), "participant_id,arm,gender,age,grit");
    EXPECT_NE(os.str().find("\nP0001,control,female,30,2.750000,0,"), std::string::npos);
}
