#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "incentive_lab/error.hpp"
#include "incentive_lab/incentive.hpp"
#include "incentive_lab/ledger.hpp"
#include "incentive_lab/money.hpp"

#include <json.hpp>

namespace incentive_lab {

using Timestamp = std::chrono::sys_time<std::chrono::minutes>;
using std::chrono::days;
using std::chrono::hours;
using std::chrono::minutes;

/// `YYYY-MM-DDTHH:MM:SS`, study-local time.
inline std::string format_timestamp(Timestamp t) {
    const auto day = std::chrono::floor<days>(t);
    const std::chrono::year_month_day ymd{day};
    const std::chrono::hh_mm_ss hms{t - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()));
    return buf;
}

/// Parses `YYYY-MM-DD`.
inline std::chrono::sys_days parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(std::string(s).c_str(), "%d-%u-%u", &y, &m, &d) != 3)
        fail(ErrorCode::ParseError, "bad date: " + std::string(s));
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) fail(ErrorCode::ParseError, "bad date: " + std::string(s));
    return std::chrono::sys_days{ymd};
}

/// Clock times of the daily protocol, as offsets from local midnight.
struct ProtocolTimes {
    minutes reflection_opens = hours{17};
    minutes reminder_at = hours{19};
    minutes notice_at = hours{8};
    minutes deadline_after = hours{48};
    int max_reminders = 2;
};

class SimClock {
   public:
    SimClock(Timestamp study_start, int study_length_days)
        : study_start_(study_start), current_(study_start), length_(study_length_days) {}

    void advance_to(Timestamp t) {
        if (t < current_)
            fail(ErrorCode::ClockRegression,
                 "clock moved back from " + format_timestamp(current_) + " to " +
                     format_timestamp(t));
        current_ = t;
    }

    Timestamp now() const { return current_; }
    Timestamp study_start() const { return study_start_; }
    int study_length_days() const { return length_; }
    Timestamp day_start(int day) const { return study_start_ + days{day - 1}; }
    Timestamp study_end() const { return study_start_ + days{length_}; }

   private:
    Timestamp study_start_;
    Timestamp current_;
    int length_;
};

enum class TaskStatus { Open, Completed, Overdue };

struct DailyTaskState {
    int day = 0;
    Timestamp opened_at{};
    Timestamp reflection_available_at{};
    Timestamp deadline{};
    TaskStatus status = TaskStatus::Open;
    std::optional<Timestamp> completed_at;
    int reminders_sent = 0;
};

enum class EventKind {
    TaskOpened,
    TaskCompleted,
    ReminderSent,
    TaskOverdue,
    DeductionApplied,
    PostDeadlineNotice,
    OneTimeDeductionApplied,
};

constexpr std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::TaskOpened: return "TaskOpened";
        case EventKind::TaskCompleted: return "TaskCompleted";
        case EventKind::ReminderSent: return "ReminderSent";
        case EventKind::TaskOverdue: return "TaskOverdue";
        case EventKind::DeductionApplied: return "DeductionApplied";
        case EventKind::PostDeadlineNotice: return "PostDeadlineNotice";
        case EventKind::OneTimeDeductionApplied: return "OneTimeDeductionApplied";
    }
    return "?";
}

struct TrialEvent {
    Timestamp at;
    std::string participant_id;
    EventKind kind = EventKind::TaskOpened;
    int day = 0;               // 0 for events not tied to a day
    int reminder_number = 0;   // ReminderSent only
    Cents amount{0};           // deductions only
    std::string survey_id;     // OneTimeDeductionApplied only
    Cents balance_after{0};    // deductions only

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["at"] = format_timestamp(at);
        j["participant_id"] = participant_id;
        j["event"] = std::string(to_string(kind));
        if (day > 0) j["day"] = day;
        if (kind == EventKind::ReminderSent) j["n"] = reminder_number;
        if (kind == EventKind::DeductionApplied || kind == EventKind::OneTimeDeductionApplied) {
            if (!survey_id.empty()) j["survey_id"] = survey_id;
            j["amount_cents"] = amount.value;
            j["balance_after_cents"] = balance_after.value;
        }
        return j;
    }
};

inline void write_events_jsonl(std::ostream& os, std::span<const TrialEvent> events) {
    for (const auto& e : events) os << e.to_json().dump() << '\n';
}

/// Per-participant state machine of the study protocol on a simulated
/// minute clock. Owns the participant's ledger; deductions are applied at
/// the moment a deadline lapses, the notice follows at `notice_at` that day.
/// One-time surveys are checked once at study end.
class ParticipantProtocol {
   public:
    ParticipantProtocol(std::string participant_id, IncentiveSchedule schedule,
                        Timestamp study_start, ProtocolTimes times = {}, LedgerTerms terms = {})
        : id_(std::move(participant_id)),
          schedule_(std::move(schedule)),
          clock_(study_start, schedule_.days()),
          times_(times),
          ledger_(id_, terms) {
        agenda_.insert({clock_.study_end(), Priority::SurveyCheck, 0, 0});
    }

    const DailyTaskState& open_day(int day) {
        if (day < 1 || day > clock_.study_length_days())
            fail(ErrorCode::DayOutOfRange, "day " + std::to_string(day) + " outside study");
        if (day != static_cast<int>(tasks_.size()) + 1)
            fail(ErrorCode::InvalidState, "days must be opened in order; next is " +
                                              std::to_string(tasks_.size() + 1));
        const Timestamp open = clock_.day_start(day);
        tick(open);
        DailyTaskState t;
        t.day = day;
        t.opened_at = open;
        t.reflection_available_at = open + times_.reflection_opens;
        t.deadline = open + times_.deadline_after;
        tasks_.push_back(t);
        emit(make_event(open, EventKind::TaskOpened, day));
        for (int n = 1; n <= times_.max_reminders; ++n) {
            const Timestamp r = open + days{n - 1} + times_.reminder_at;
            if (r >= t.deadline) break;
            agenda_.insert({r, Priority::Reminder, day, n});
        }
        agenda_.insert({t.deadline, Priority::Deadline, day, 0});
        return tasks_.back();
    }

    const DailyTaskState& complete_task(int day, Timestamp at) {
        DailyTaskState& t = task(day);
        tick(at);
        if (t.status != TaskStatus::Open || at > t.deadline)
            fail(ErrorCode::PastDeadline, "day " + std::to_string(day) + " task past deadline");
        if (at < t.reflection_available_at)
            fail(ErrorCode::TooEarly, "day " + std::to_string(day) + " reflection not yet open");
        t.status = TaskStatus::Completed;
        t.completed_at = at;
        emit(make_event(at, EventKind::TaskCompleted, day));
        return t;
    }

    void complete_survey(std::string_view survey_id) {
        if (!is_known_survey(survey_id))
            fail(ErrorCode::UnknownSurvey, "unknown survey: " + std::string(survey_id));
        surveys_done_.insert(std::string(survey_id));
    }

    /// Advances the clock to `now`, firing every due action in order.
    /// Returns the events emitted by this call.
    std::vector<TrialEvent> tick(Timestamp now) {
        clock_.advance_to(now);
        const std::size_t first = events_.size();
        while (!agenda_.empty() && agenda_.begin()->at <= now) {
            const Action a = *agenda_.begin();
            agenda_.erase(agenda_.begin());
            fire(a);
        }
        return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
    }

    /// Runs the agenda dry: every task resolves, notices and the survey
    /// check fire.
    std::vector<TrialEvent> finish() {
        const std::size_t first = events_.size();
        // firing a deadline can schedule a notice later than anything queued
        while (!agenda_.empty()) tick(std::max(std::prev(agenda_.end())->at, clock_.now()));
        return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
    }

    const DailyTaskState& task(int day) const {
        if (day < 1 || day > static_cast<int>(tasks_.size()))
            fail(ErrorCode::DayOutOfRange, "day " + std::to_string(day) + " not opened");
        return tasks_[static_cast<std::size_t>(day - 1)];
    }

    const std::string& participant_id() const { return id_; }
    const IncentiveSchedule& schedule() const { return schedule_; }
    const CreditLedger& ledger() const { return ledger_; }
    const SimClock& clock() const { return clock_; }
    std::span<const TrialEvent> events() const { return events_; }
    std::span<const DailyTaskState> tasks() const { return tasks_; }
    int deductions_so_far() const { return static_cast<int>(ledger_.daily_deduction_count()); }

   private:
    // Ordering of simultaneous actions: an expiring deadline resolves
    // before anything else at that minute.
    enum class Priority { Deadline = 0, Notice = 1, SurveyCheck = 2, Reminder = 3 };

    struct Action {
        Timestamp at;
        Priority priority;
        int day;
        int n;
        auto operator<=>(const Action&) const = default;
    };

    DailyTaskState& task(int day) {
        return const_cast<DailyTaskState&>(std::as_const(*this).task(day));
    }

    TrialEvent make_event(Timestamp at, EventKind kind, int day) const {
        TrialEvent e;
        e.at = at;
        e.participant_id = id_;
        e.kind = kind;
        e.day = day;
        return e;
    }

    void emit(TrialEvent e) { events_.push_back(std::move(e)); }

    void fire(const Action& a) {
        switch (a.priority) {
            case Priority::Reminder: {
                DailyTaskState& t = task(a.day);
                if (t.status != TaskStatus::Open) return;
                ++t.reminders_sent;
                TrialEvent e = make_event(a.at, EventKind::ReminderSent, a.day);
                e.reminder_number = a.n;
                emit(std::move(e));
                return;
            }
            case Priority::Deadline: {
                DailyTaskState& t = task(a.day);
                if (t.status != TaskStatus::Open) return;
                t.status = TaskStatus::Overdue;
                emit(make_event(a.at, EventKind::TaskOverdue, a.day));
                TrialEvent d = make_event(a.at, EventKind::DeductionApplied, a.day);
                d.amount = ledger_.apply_daily_deduction(a.day, schedule_);
                d.balance_after = ledger_.balance();
                emit(std::move(d));
                const Timestamp notice = std::chrono::floor<days>(a.at) + times_.notice_at;
                agenda_.insert({std::max(notice, a.at), Priority::Notice, a.day, 0});
                return;
            }
            case Priority::Notice:
                emit(make_event(a.at, EventKind::PostDeadlineNotice, a.day));
                return;
            case Priority::SurveyCheck:
                for (std::string_view s : kOneTimeSurveys) {
                    if (surveys_done_.contains(std::string(s))) continue;
                    TrialEvent e = make_event(a.at, EventKind::OneTimeDeductionApplied, 0);
                    e.survey_id = std::string(s);
                    e.amount = ledger_.apply_onetime_deduction(s);
                    e.balance_after = ledger_.balance();
                    emit(std::move(e));
                }
                return;
        }
    }

    std::string id_;
    IncentiveSchedule schedule_;
    SimClock clock_;
    ProtocolTimes times_;
    CreditLedger ledger_;
    std::vector<DailyTaskState> tasks_;
    std::vector<TrialEvent> events_;
    std::set<Action> agenda_;
    std::set<std::string> surveys_done_;
};

}  // namespace incentive_lab
