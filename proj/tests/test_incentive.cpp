#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "incentive_lab/incentive.hpp"

using namespace incentive_lab;

namespace {

ScheduleSpec random_spec(int m = 30, std::int64_t p = 3000, std::int64_t cap = 300) {
    return {m, Cents{p}, Cents{cap}, RandomLoss{}};
}

ScheduleSpec fixed_spec(int m, std::int64_t a, std::int64_t p, std::int64_t cap = 300) {
    return {m, Cents{p}, Cents{cap}, FixedLoss{Cents{a}}};
}

std::int64_t sum_of(const IncentiveSchedule& s) {
    std::int64_t t = 0;
    for (Cents c : s.entries()) t += c.value;
    return t;
}

}  // namespace

TEST(RandomLoss, DefaultSpecSumsExactlyWithinCap) {
    RandomStream rng(11);
    for (int i = 0; i < 500; ++i) {
        const auto s = generate_random_loss(random_spec(), rng);
        ASSERT_EQ(s.days(), 30);
        ASSERT_EQ(sum_of(s), 3000);
        for (Cents c : s.entries()) {
            ASSERT_GE(c.value, 0);
            ASSERT_LE(c.value, 300);
        }
    }
}

TEST(RandomLoss, ZeroBudgetGivesZeros) {
    RandomStream rng(3);
    const auto s = generate_random_loss(random_spec(30, 0, 300), rng);
    for (Cents c : s.entries()) EXPECT_EQ(c.value, 0);
}

TEST(RandomLoss, SeedSevenGolden) {
    RandomStream rng(7);
    const auto s = generate_random_loss(random_spec(3, 300, 300), rng);
    const std::vector<Cents> expect = {Cents{149}, Cents{121}, Cents{30}};
    EXPECT_EQ(std::vector<Cents>(s.entries().begin(), s.entries().end()), expect);
    EXPECT_EQ(sum_of(s), 300);
}

TEST(RandomLoss, SameSeedSameSchedule) {
    RandomStream a = RandomStream::derive(99, "schedule", 4);
    RandomStream b = RandomStream::derive(99, "schedule", 4);
    const auto x = generate_random_loss(random_spec(), a);
    const auto y = generate_random_loss(random_spec(), b);
    EXPECT_TRUE(std::equal(x.entries().begin(), x.entries().end(), y.entries().begin()));
}

TEST(RandomLoss, InfeasibleWhenCapTooSmall) {
    RandomStream rng(1);
    try {
        generate_random_loss(random_spec(10, 3000, 299), rng);
        FAIL();
    } catch (const LabError& e) {
        EXPECT_EQ(e.code(), ErrorCode::InfeasibleSpec);
    }
}

TEST(RandomLoss, TightCapForcesEqualSplit) {
    RandomStream rng(5);
    const auto s = generate_random_loss(random_spec(4, 400, 100), rng);
    for (Cents c : s.entries()) EXPECT_EQ(c.value, 100);
}

TEST(RandomLoss, RejectionRateBelowOnePercent) {
    RandomStream rng(2024);
    GenerationStats gs;
    for (int i = 0; i < 10000; ++i) generate_random_loss(random_spec(), rng, &gs);
    EXPECT_EQ(gs.draws - gs.rejected, 10000);
    EXPECT_LT(static_cast<double>(gs.rejected) / static_cast<double>(gs.draws), 0.01);
}

TEST(Apportion, LargestRemainderExact) {
    const std::vector<double> w = {1.0, 1.0, 1.0};
    const auto out = detail::apportion(w, 3.0, 100);
    EXPECT_EQ(out[0].value, 34);
    EXPECT_EQ(out[1].value, 33);
    EXPECT_EQ(out[2].value, 33);
}

TEST(FixedLoss, ThirtyDollars) {
    const auto s = generate_fixed_loss(fixed_spec(30, 100, 3000));
    EXPECT_EQ(s.days(), 30);
    for (Cents c : s.entries()) EXPECT_EQ(c.value, 100);
    EXPECT_EQ(sum_of(s), 3000);
}

TEST(FixedLoss, ZeroCase) {
    const auto s = generate_fixed_loss(fixed_spec(1, 0, 0));
    ASSERT_EQ(s.days(), 1);
    EXPECT_EQ(s.at_day(1).value, 0);
}

TEST(FixedLoss, AboveCapInfeasible) {
    try {
        generate_fixed_loss(fixed_spec(5, 600, 3000, 300));
        FAIL();
    } catch (const LabError& e) {
        EXPECT_EQ(e.code(), ErrorCode::InfeasibleSpec);
    }
}

TEST(FixedLoss, AmountTimesDaysMustMatchBudget) {
    EXPECT_THROW(generate_fixed_loss(fixed_spec(30, 100, 2999)), LabError);
}

TEST(FixedLoss, MatchesRandomInSumAndLength) {
    RandomStream rng(8);
    const auto r = generate_random_loss(random_spec(), rng);
    const auto f = generate_fixed_loss(fixed_spec(30, 100, 3000));
    EXPECT_EQ(r.days(), f.days());
    EXPECT_EQ(sum_of(r), sum_of(f));
}

TEST(ScheduleStats, PooledOverManySchedules) {
    std::vector<IncentiveSchedule> v;
    RandomStream rng(135);
    for (int i = 0; i < 135; ++i) v.push_back(generate_random_loss(random_spec(), rng));
    const auto st = schedule_stats(v);
    EXPECT_EQ(st.mean, 100.0);
    EXPECT_GE(st.sd, 50.0);
    EXPECT_LE(st.sd, 65.0);
    EXPECT_EQ(st.count, 135u * 30u);
    EXPECT_EQ(std::accumulate(st.histogram.begin(), st.histogram.end(), std::int64_t{0}), 135 * 30);
}

TEST(ScheduleStats, ConstantScheduleHasZeroSd) {
    std::vector<IncentiveSchedule> v = {generate_fixed_loss(fixed_spec(30, 100, 3000))};
    const auto st = schedule_stats(v);
    EXPECT_EQ(st.sd, 0.0);
    EXPECT_EQ(st.mean, 100.0);
}

TEST(ScheduleStats, BruteForceSdOracle) {
    std::vector<IncentiveSchedule> v;
    RandomStream rng(10);
    for (int i = 0; i < 10; ++i) v.push_back(generate_random_loss(random_spec(2, 200, 200), rng));
    std::vector<double> all;
    for (const auto& s : v)
        for (Cents c : s.entries()) all.push_back(static_cast<double>(c.value));
    double mean = 0;
    for (double x : all) mean += x;
    mean /= static_cast<double>(all.size());
    double ss = 0;
    for (double x : all) ss += (x - mean) * (x - mean);
    const auto st = schedule_stats(v);
    EXPECT_EQ(st.mean, 100.0);
    EXPECT_NEAR(st.sd, std::sqrt(ss / static_cast<double>(all.size())), 1e-9);
}

TEST(ScheduleStats, EmptyInput) {
    std::vector<IncentiveSchedule> v;
    try {
        schedule_stats(v);
        FAIL();
    } catch (const LabError& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
}

TEST(ScheduleCsv, Layout) {
    std::vector<std::pair<std::string, IncentiveSchedule>> rows;
    rows.emplace_back("P0001", generate_fixed_loss(fixed_spec(2, 100, 200)));
    std::ostringstream os;
    write_schedules_csv(os, rows);
    EXPECT_EQ(os.str(), "participant_id,day_index,deduction_cents\nP0001,1,100\nP0001,2,100\n");
}
