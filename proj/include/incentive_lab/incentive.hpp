#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/money.hpp"
#include "incentive_lab/random.hpp"

namespace incentive_lab {

struct RandomLoss {};
struct FixedLoss {
    Cents amount;
};
using LossPolicy = std::variant<RandomLoss, FixedLoss>;

/// Parameters of a daily-deduction schedule: `days` entries summing to
/// `budget`, none above `cap`.
struct ScheduleSpec {
    int days = 30;
    Cents budget{3000};
    Cents cap{300};
    LossPolicy policy = RandomLoss{};

    bool is_random() const { return std::holds_alternative<RandomLoss>(policy); }

    void validate() const {
        if (days < 1) fail(ErrorCode::InfeasibleSpec, "schedule needs at least one day");
        if (budget.value < 0 || cap.value < 0)
            fail(ErrorCode::InfeasibleSpec, "budget and cap must be non-negative");
        if (is_random()) {
            if (cap * days < budget)
                fail(ErrorCode::InfeasibleSpec,
                     "cap*days=" + std::to_string((cap * days).value) + " < budget=" +
                         std::to_string(budget.value));
        } else {
            const Cents a = std::get<FixedLoss>(policy).amount;
            if (a.value < 0) fail(ErrorCode::InfeasibleSpec, "fixed amount must be non-negative");
            if (a * days != budget)
                fail(ErrorCode::InfeasibleSpec, "fixed amount*days=" +
                                                    std::to_string((a * days).value) +
                                                    " != budget=" + std::to_string(budget.value));
            if (a > cap)
                fail(ErrorCode::InfeasibleSpec, "fixed amount " + std::to_string(a.value) +
                                                    " exceeds cap " + std::to_string(cap.value));
        }
    }
};

/// Immutable per-participant deduction schedule. Day indices are 1-based.
class IncentiveSchedule {
   public:
    IncentiveSchedule(ScheduleSpec spec, std::vector<Cents> entries)
        : spec_(std::move(spec)), entries_(std::move(entries)) {}

    const ScheduleSpec& spec() const { return spec_; }
    std::span<const Cents> entries() const { return entries_; }
    int days() const { return static_cast<int>(entries_.size()); }

    Cents at_day(int day) const {
        if (day < 1 || day > days())
            fail(ErrorCode::DayOutOfRange, "day " + std::to_string(day) + " outside schedule");
        return entries_[static_cast<std::size_t>(day - 1)];
    }

    Cents total() const {
        return std::accumulate(entries_.begin(), entries_.end(), Cents{0});
    }
    Cents max_entry() const {
        return entries_.empty() ? Cents{0} : *std::max_element(entries_.begin(), entries_.end());
    }

   private:
    ScheduleSpec spec_;
    std::vector<Cents> entries_;
};

/// Counters from random-loss generation, used to monitor the cap rejection rate.
struct GenerationStats {
    std::int64_t draws = 0;
    std::int64_t rejected = 0;
};

namespace detail {

/// Scale non-negative weights to integers summing exactly to `total` by
/// largest remainder. Ties go to the lower index.
inline std::vector<Cents> apportion(std::span<const double> weights, double weight_sum,
                                    std::int64_t total) {
    const std::size_t m = weights.size();
    std::vector<Cents> out(m);
    std::vector<double> frac(m);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double raw = weights[i] / weight_sum * static_cast<double>(total);
        const double fl = std::floor(raw);
        out[i] = Cents{static_cast<std::int64_t>(fl)};
        frac[i] = raw - fl;
        assigned += out[i].value;
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    std::int64_t remaining = total - assigned;
    // Floating error can leave |remaining| slightly off the ideal; both
    // directions are handled so the total is always exact.
    for (std::size_t k = 0; remaining > 0; k = (k + 1) % m, --remaining) out[order[k]] += Cents{1};
    for (std::size_t k = m; remaining < 0;) {
        k = (k == 0 ? m : k) - 1;
        if (out[order[k]].value > 0) {
            out[order[k]] -= Cents{1};
            ++remaining;
        }
    }
    return out;
}

}  // namespace detail

/// Random-loss schedule: normalized i.i.d. uniforms scaled to the budget,
/// rounded cent-exact, whole draw rejected when any entry exceeds the cap.
inline IncentiveSchedule generate_random_loss(const ScheduleSpec& spec, RandomStream& rng,
                                              GenerationStats* stats = nullptr) {
    if (!spec.is_random()) fail(ErrorCode::InfeasibleSpec, "spec policy is not RandomLoss");
    spec.validate();
    const auto m = static_cast<std::size_t>(spec.days);
    std::vector<double> u(m);
    for (;;) {
        double sum = 0.0;
        for (auto& x : u) {
            x = rng.uniform01();
            sum += x;
        }
        if (stats) ++stats->draws;
        if (sum <= 0.0) continue;  // DegenerateDraw, resampled
        auto entries = detail::apportion(u, sum, spec.budget.value);
        if (std::any_of(entries.begin(), entries.end(), [&](Cents c) { return c > spec.cap; })) {
            if (stats) ++stats->rejected;
            continue;
        }
        return IncentiveSchedule(spec, std::move(entries));
    }
}

inline IncentiveSchedule generate_fixed_loss(const ScheduleSpec& spec) {
    if (spec.is_random()) fail(ErrorCode::InfeasibleSpec, "spec policy is not FixedLoss");
    spec.validate();
    const Cents a = std::get<FixedLoss>(spec.policy).amount;
    return IncentiveSchedule(spec, std::vector<Cents>(static_cast<std::size_t>(spec.days), a));
}

inline IncentiveSchedule generate_schedule(const ScheduleSpec& spec, RandomStream& rng,
                                           GenerationStats* stats = nullptr) {
    return spec.is_random() ? generate_random_loss(spec, rng, stats) : generate_fixed_loss(spec);
}

struct ScheduleStats {
    double mean = 0.0;  // cents
    double sd = 0.0;    // pooled population SD, cents
    Cents min{0};
    Cents max{0};
    double mean_schedule_sd = 0.0;  // average of per-schedule population SDs
    std::int64_t bin_width = 25;
    std::vector<std::int64_t> histogram;  // bin k covers [k*w, (k+1)*w)
    std::size_t count = 0;
};

inline ScheduleStats schedule_stats(std::span<const IncentiveSchedule> schedules,
                                    std::int64_t bin_width = 25) {
    if (schedules.empty()) fail(ErrorCode::EmptyInput, "no schedules");
    if (bin_width <= 0) fail(ErrorCode::InvalidSpec, "bin width must be positive");
    ScheduleStats st;
    st.bin_width = bin_width;
    st.min = schedules.front().entries().front();
    st.max = st.min;
    // Integer sums keep the pooled mean exact.
    std::int64_t total = 0;
    for (const auto& s : schedules) {
        for (Cents c : s.entries()) {
            total += c.value;
            st.min = std::min(st.min, c);
            st.max = std::max(st.max, c);
            ++st.count;
        }
    }
    st.mean = static_cast<double>(total) / static_cast<double>(st.count);
    double ss = 0.0;
    double sd_sum = 0.0;
    st.histogram.assign(static_cast<std::size_t>(st.max.value / bin_width + 1), 0);
    for (const auto& s : schedules) {
        const auto e = s.entries();
        const double smean = static_cast<double>(s.total().value) / static_cast<double>(e.size());
        double sss = 0.0;
        for (Cents c : e) {
            const double v = static_cast<double>(c.value);
            ss += (v - st.mean) * (v - st.mean);
            sss += (v - smean) * (v - smean);
            ++st.histogram[static_cast<std::size_t>(c.value / bin_width)];
        }
        sd_sum += std::sqrt(sss / static_cast<double>(e.size()));
    }
    st.sd = std::sqrt(ss / static_cast<double>(st.count));
    st.mean_schedule_sd = sd_sum / static_cast<double>(schedules.size());
    return st;
}

/// `participant_id,day_index,deduction_cents`
inline void write_schedules_csv(std::ostream& os,
                                std::span<const std::pair<std::string, IncentiveSchedule>> rows) {
    csv::write_row(os, "participant_id", "day_index", "deduction_cents");
    for (const auto& [id, sched] : rows) {
        int day = 1;
        for (Cents c : sched.entries()) csv::write_row(os, id, day++, c.value);
    }
}

}  // namespace incentive_lab
