#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "incentive_lab/agents.hpp"
#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/incentive.hpp"
#include "incentive_lab/ledger.hpp"
#include "incentive_lab/money.hpp"
#include "incentive_lab/protocol.hpp"
#include "incentive_lab/random.hpp"
#include "incentive_lab/stats/rank_tests.hpp"

namespace incentive_lab {

/// When a compliant participant submits: the same evening with
/// `same_evening_prob`, otherwise at a uniform time on the following day.
struct CompletionTiming {
    double same_evening_prob = 0.8;
};

/// Habit carryover after incentives stop. A participant adopts the habit
/// with probability `habit_coefficient * compliance_days / study_length`;
/// adopters log each post day with `habit_rate * habit_weekly_decay^week`.
/// Without the habit, post logging repeats the pre-study level with
/// probability `persistence`, else is a fresh draw from the same
/// distribution.
struct PostPhaseSpec {
    bool enabled = false;
    int days = 30;
    double habit_coefficient = 0.15;
    double persistence = 0.6;
    double habit_rate = 0.25;
    double habit_weekly_decay = 0.85;
    int active_threshold_days = 7;
};

struct TrialConfig {
    PopulationSpec population;
    ScheduleSpec treatment{30, Cents{3000}, Cents{300}, RandomLoss{}};
    ScheduleSpec control{30, Cents{3000}, Cents{300}, FixedLoss{Cents{100}}};
    int study_length_days = 30;
    std::string study_start = "2017-07-03";
    ProtocolTimes times;
    LedgerTerms terms;
    CompletionTiming timing;
    PostPhaseSpec post_phase;
    std::uint64_t seed = 42;
    int replication_count = 1;
    int workers = 1;

    void validate() const {
        population.validate();
        treatment.validate();
        control.validate();
        if (study_length_days < 1) fail(ErrorCode::InvalidSpec, "study_length_days must be >= 1");
        if (treatment.days != study_length_days || control.days != study_length_days)
            fail(ErrorCode::InvalidSpec, "arm schedules must span study_length_days");
        for (const ScheduleSpec* s : {&treatment, &control}) {
            const Cents most = s->is_random() ? s->budget
                                              : std::get<FixedLoss>(s->policy).amount * s->days;
            if (most > terms.daily_budget)
                fail(ErrorCode::InvalidSpec, "arm schedule can exceed the daily-task budget");
        }
        if (terms.survey_penalty * static_cast<std::int64_t>(kOneTimeSurveys.size()) >
            terms.onetime_budget)
            fail(ErrorCode::InvalidSpec, "survey penalties exceed the one-time budget");
        if (terms.daily_budget + terms.onetime_budget > terms.endowment)
            fail(ErrorCode::InvalidSpec, "budgets exceed the endowment");
        if (replication_count < 1) fail(ErrorCode::InvalidSpec, "replication_count must be >= 1");
        if (workers < 1) fail(ErrorCode::InvalidSpec, "workers must be >= 1");
        if (!(timing.same_evening_prob >= 0.0 && timing.same_evening_prob <= 1.0))
            fail(ErrorCode::InvalidSpec, "same_evening_prob must be in [0,1]");
        const auto& pp = post_phase;
        if (pp.days < 1) fail(ErrorCode::InvalidSpec, "post_phase_days must be >= 1");
        for (double v : {pp.habit_coefficient, pp.persistence, pp.habit_rate, pp.habit_weekly_decay})
            if (!(v >= 0.0 && v <= 1.0))
                fail(ErrorCode::InvalidSpec, "post-phase rates must be in [0,1]");
        parse_date(study_start);
    }
};

/// Seed of replication `r`; replication 0 uses the configured seed.
inline std::uint64_t replication_seed(std::uint64_t seed, int r) {
    return r == 0 ? seed : splitmix64(seed ^ (static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ULL));
}

/// What an agent knows about the loss for a missed day under `spec`.
inline ScheduleInfo schedule_info(const ScheduleSpec& spec) {
    if (spec.is_random()) return {Cents{spec.budget.value / spec.days}, spec.cap};
    const Cents a = std::get<FixedLoss>(spec.policy).amount;
    return {a, a};
}

struct ComplianceRow {
    std::string participant_id;
    Arm arm = Arm::Control;
    int day = 0;
    bool complied = false;
    int perceived_difficulty = 3;
    Cents deduction{0};
    Cents balance_after{0};
};

struct ParticipantSummary {
    AgentParams agent;
    Arm arm = Arm::Control;
    int compliance_days = 0;
    int deduction_events = 0;
    Cents total_deducted{0};     // daily tasks
    Cents onetime_deducted{0};   // surveys
    Cents final_balance{0};
    bool mitt_included = false;
};

/// Analysis dataset: `study_length_days` rows per participant, in
/// participant then day order.
struct ComplianceDataset {
    int study_length_days = 30;
    std::vector<ComplianceRow> rows;
    std::vector<ParticipantSummary> participants;
};

struct ParticipantRun {
    ParticipantSummary summary;
    std::vector<ComplianceRow> rows;
    IncentiveSchedule schedule;
    CreditLedger ledger;
    std::vector<TrialEvent> events;
};

/// Drives one participant through the protocol. Streams are keyed by
/// `index`, so the result does not depend on which other participants run.
inline ParticipantRun simulate_participant(const TrialConfig& cfg, int index,
                                           const AgentParams& agent, Arm arm) {
    const auto idx = static_cast<std::uint64_t>(index);
    RandomStream sched_rng = RandomStream::derive(cfg.seed, "schedule", idx);
    RandomStream behavior = RandomStream::derive(cfg.seed, "behavior", idx);
    RandomStream timing = RandomStream::derive(cfg.seed, "timing", idx);
    RandomStream survey = RandomStream::derive(cfg.seed, "survey", idx);

    const ScheduleSpec& spec = arm == Arm::Treatment ? cfg.treatment : cfg.control;
    const ScheduleInfo info = schedule_info(spec);
    IncentiveSchedule schedule = generate_schedule(spec, sched_rng);
    const Timestamp start{std::chrono::sys_days{parse_date(cfg.study_start)}};
    ParticipantProtocol proto(agent.participant_id, schedule, start, cfg.times, cfg.terms);

    using Pending = std::pair<Timestamp, int>;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
    auto flush_before = [&](Timestamp t) {
        while (!pending.empty() && pending.top().first < t) {
            proto.complete_task(pending.top().second, pending.top().first);
            pending.pop();
        }
    };

    const int L = cfg.study_length_days;
    std::vector<int> difficulty(static_cast<std::size_t>(L));
    for (int day = 1; day <= L; ++day) {
        flush_before(proto.clock().day_start(day));
        const DailyTaskState& t = proto.open_day(day);
        const ComplianceDecision d =
            decide_compliance(agent, day, arm, info, proto.deductions_so_far(), behavior);
        difficulty[static_cast<std::size_t>(day - 1)] = d.perceived_difficulty;
        if (!d.complied) continue;
        Timestamp at;
        if (timing.bernoulli(cfg.timing.same_evening_prob)) {
            const auto window = (days{1} - cfg.times.reflection_opens).count() - 1;
            at = t.reflection_available_at + minutes{timing.uniform_int(0, window)};
        } else {
            at = t.opened_at + days{1} + minutes{timing.uniform_int(0, 24 * 60 - 1)};
        }
        at = std::min(at, t.deadline);
        pending.emplace(at, day);
    }
    flush_before(Timestamp::max());
    for (std::string_view s : kOneTimeSurveys)
        if (survey.bernoulli(agent.survey_completion_prob)) proto.complete_survey(s);
    proto.finish();

    ParticipantRun run{{}, {}, schedule, proto.ledger(), {}};
    run.events.assign(proto.events().begin(), proto.events().end());
    ParticipantSummary& s = run.summary;
    s.agent = agent;
    s.arm = arm;
    Cents balance = cfg.terms.endowment;
    for (int day = 1; day <= L; ++day) {
        const DailyTaskState& t = std::as_const(proto).task(day);
        ComplianceRow row;
        row.participant_id = agent.participant_id;
        row.arm = arm;
        row.day = day;
        row.complied = t.status == TaskStatus::Completed;
        row.perceived_difficulty = difficulty[static_cast<std::size_t>(day - 1)];
        if (!row.complied) {
            row.deduction = schedule.at_day(day);
            ++s.deduction_events;
        } else {
            ++s.compliance_days;
        }
        balance -= row.deduction;
        row.balance_after = balance;
        run.rows.push_back(std::move(row));
    }
    s.total_deducted = run.ledger.daily_total();
    s.onetime_deducted = run.ledger.onetime_total();
    s.final_balance = run.ledger.balance();
    s.mitt_included = s.deduction_events >= 1;
    return run;
}

/// Calls `fn(i)` for i in [0, n) on `workers` threads. Each index is
/// handled exactly once; callers write to slot i only.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed = true;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct TrialRun {
    std::uint64_t seed = 0;
    ComplianceDataset dataset;
    std::vector<ParticipantRun> participants;
};

inline Arm assign_arm(const TrialConfig& cfg, int index) {
    RandomStream rng = RandomStream::derive(cfg.seed, "arm", static_cast<std::uint64_t>(index));
    return rng.bernoulli(cfg.population.arm_split) ? Arm::Treatment : Arm::Control;
}

/// Samples the population, randomizes arms and simulates everyone.
inline TrialRun simulate_trial(const TrialConfig& cfg) {
    cfg.validate();
    PopulationSpec pop = cfg.population;
    pop.seed = cfg.seed;
    const int n = pop.n;
    TrialRun out;
    out.seed = cfg.seed;
    std::vector<std::optional<ParticipantRun>> slots(static_cast<std::size_t>(n));
    parallel_for(n, cfg.workers, [&](int i) {
        const AgentParams agent = sample_agent(pop, i);
        slots[static_cast<std::size_t>(i)].emplace(
            simulate_participant(cfg, i, agent, assign_arm(cfg, i)));
    });
    out.participants.reserve(slots.size());
    for (auto& s : slots) out.participants.push_back(std::move(*s));
    out.dataset.study_length_days = cfg.study_length_days;
    out.dataset.rows.reserve(static_cast<std::size_t>(n * cfg.study_length_days));
    for (const auto& p : out.participants) {
        out.dataset.participants.push_back(p.summary);
        out.dataset.rows.insert(out.dataset.rows.end(), p.rows.begin(), p.rows.end());
    }
    return out;
}

inline ComplianceDataset run_trial(const TrialConfig& cfg) { return simulate_trial(cfg).dataset; }

enum class SummaryScope { Mitt, All };

struct ComplianceSummary {
    int n_treatment = 0;  // in scope
    int n_control = 0;
    int excluded_treatment = 0;
    int excluded_control = 0;
    double median_treatment = 0.0;
    double median_control = 0.0;
    std::vector<double> daily_treatment;  // index 0 = day 1
    std::vector<double> daily_control;
    stats::TestResult mann_whitney;
};

inline double median(std::vector<double> v) {
    if (v.empty()) fail(ErrorCode::EmptyDataset, "median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Medians of compliance days and daily compliance fractions per arm, over
/// mITT participants by default.
inline ComplianceSummary compliance_summaries(const ComplianceDataset& ds,
                                              SummaryScope scope = SummaryScope::Mitt) {
    ComplianceSummary s;
    const int L = ds.study_length_days;
    s.daily_treatment.assign(static_cast<std::size_t>(L), 0.0);
    s.daily_control.assign(static_cast<std::size_t>(L), 0.0);
    std::vector<double> days_t, days_c;
    std::vector<bool> in_scope(ds.participants.size());
    for (std::size_t i = 0; i < ds.participants.size(); ++i) {
        const auto& p = ds.participants[i];
        const bool t = p.arm == Arm::Treatment;
        in_scope[i] = scope == SummaryScope::All || p.mitt_included;
        if (!in_scope[i]) {
            ++(t ? s.excluded_treatment : s.excluded_control);
            continue;
        }
        (t ? days_t : days_c).push_back(p.compliance_days);
    }
    if (days_t.empty() || days_c.empty())
        fail(ErrorCode::EmptyDataset, "an arm has no participants in scope");
    s.n_treatment = static_cast<int>(days_t.size());
    s.n_control = static_cast<int>(days_c.size());
    std::map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < ds.participants.size(); ++i)
        index.emplace(ds.participants[i].agent.participant_id, i);
    for (const ComplianceRow& row : ds.rows) {
        const auto it = index.find(row.participant_id);
        if (it == index.end()) fail(ErrorCode::InvalidState, "row for unknown participant " + row.participant_id);
        if (row.day < 1 || row.day > L) fail(ErrorCode::DayOutOfRange, "row day outside study");
        if (!in_scope[it->second] || !row.complied) continue;
        auto& daily = row.arm == Arm::Treatment ? s.daily_treatment : s.daily_control;
        daily[static_cast<std::size_t>(row.day - 1)] += 1.0;
    }
    for (auto& f : s.daily_treatment) f /= s.n_treatment;
    for (auto& f : s.daily_control) f /= s.n_control;
    s.median_treatment = median(days_t);
    s.median_control = median(days_c);
    s.mann_whitney = stats::mann_whitney_u(days_t, days_c);
    return s;
}

struct PostPhaseRow {
    std::string participant_id;
    Arm arm = Arm::Control;
    int compliance_days = 0;
    int pre_logging_days = 0;
    int post_logging_days = 0;
    bool habit_adopted = false;
    bool pre_logger() const { return pre_logging_days > 0; }
    bool post_logger() const { return post_logging_days > 0; }
};

inline PostPhaseRow simulate_post_phase(const TrialConfig& cfg, int index,
                                        const ParticipantSummary& p) {
    const PostPhaseSpec& pp = cfg.post_phase;
    RandomStream rng = RandomStream::derive(cfg.seed, "post", static_cast<std::uint64_t>(index));
    PostPhaseRow r;
    r.participant_id = p.agent.participant_id;
    r.arm = p.arm;
    r.compliance_days = p.compliance_days;
    r.pre_logging_days = p.agent.pre_logging_days;
    PopulationSpec pop = cfg.population;
    const int baseline = rng.bernoulli(pp.persistence) ? p.agent.pre_logging_days
                                                       : draw_logging_days(pop, rng);
    const double adopt = std::clamp(pp.habit_coefficient * p.compliance_days /
                                        static_cast<double>(cfg.study_length_days),
                                    0.0, 1.0);
    r.habit_adopted = rng.bernoulli(adopt);
    int habit_days = 0;
    if (r.habit_adopted)
        for (int d = 0; d < pp.days; ++d)
            habit_days += rng.bernoulli(pp.habit_rate * std::pow(pp.habit_weekly_decay, d / 7));
    r.post_logging_days = std::min(pp.days, std::max(baseline, habit_days));
    return r;
}

/// Post-study logging for every participant, in dataset order.
inline std::vector<PostPhaseRow> run_post_phase(const TrialConfig& cfg, const ComplianceDataset& ds) {
    if (!cfg.post_phase.enabled) fail(ErrorCode::PostPhaseDisabled, "post phase is disabled");
    std::vector<PostPhaseRow> out;
    out.reserve(ds.participants.size());
    for (std::size_t i = 0; i < ds.participants.size(); ++i)
        out.push_back(simulate_post_phase(cfg, static_cast<int>(i), ds.participants[i]));
    return out;
}

/// `participant_id,arm,day,complied,perceived_difficulty,deduction_cents,balance_after,male,age,grit,pre_logging_days,mitt`
inline void write_compliance_csv(std::ostream& os, const ComplianceDataset& ds) {
    csv::write_row(os, "participant_id", "arm", "day", "complied", "perceived_difficulty",
                   "deduction_cents", "balance_after", "male", "age", "grit", "pre_logging_days",
                   "mitt");
    const auto L = static_cast<std::size_t>(ds.study_length_days);
    for (std::size_t r = 0; r < ds.rows.size(); ++r) {
        const ComplianceRow& row = ds.rows[r];
        const ParticipantSummary& p = ds.participants[r / L];
        csv::write_row(os, row.participant_id, to_string(row.arm), row.day, int{row.complied},
                       row.perceived_difficulty, row.deduction.value, row.balance_after.value,
                       int{p.agent.gender == Gender::Male}, p.agent.age_years,
                       fmt_real(p.agent.grit, 4), p.agent.pre_logging_days, int{p.mitt_included});
    }
}

/// Population columns followed by per-participant outcomes.
inline void write_participants_csv(std::ostream& os, const ComplianceDataset& ds) {
    std::ostringstream head;
    write_population_header(head);
    std::string h = head.str();
    h.pop_back();
    os << h << ",compliance_days,deduction_events,daily_deducted_cents,onetime_deducted_cents,"
               "final_balance_cents,mitt_included\n";
    for (const auto& p : ds.participants) {
        std::ostringstream line;
        write_population_row(line, p.agent, p.arm);
        std::string l = line.str();
        l.pop_back();
        os << l << ',';
        csv::write_row(os, p.compliance_days, p.deduction_events, p.total_deducted.value,
                       p.onetime_deducted.value, p.final_balance.value, int{p.mitt_included});
    }
}

/// `participant_id,arm,compliance_days,pre_logging_days,post_logging_days,pre_logger,post_logger,pre_active,post_active,habit_adopted`
inline void write_post_phase_csv(std::ostream& os, const std::vector<PostPhaseRow>& rows,
                                 int active_threshold) {
    csv::write_row(os, "participant_id", "arm", "compliance_days", "pre_logging_days",
                   "post_logging_days", "pre_logger", "post_logger", "pre_active", "post_active",
                   "habit_adopted");
    for (const auto& r : rows)
        csv::write_row(os, r.participant_id, to_string(r.arm), r.compliance_days,
                       r.pre_logging_days, r.post_logging_days, int{r.pre_logger()},
                       int{r.post_logger()}, int{r.pre_logging_days >= active_threshold},
                       int{r.post_logging_days >= active_threshold}, int{r.habit_adopted});
}

}  // namespace incentive_lab
