#pragma once

#include <algorithm>
#include <array>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/incentive.hpp"
#include "incentive_lab/money.hpp"

namespace incentive_lab {

/// The five one-time surveys every participant is asked to fill out.
inline constexpr std::array<std::string_view, 5> kOneTimeSurveys = {
    "demographics", "health", "physical_activity", "personality", "grit"};

inline bool is_known_survey(std::string_view id) {
    return std::find(kOneTimeSurveys.begin(), kOneTimeSurveys.end(), id) != kOneTimeSurveys.end();
}

enum class DeductionKind { OneTimeSurvey, DailyTask };

constexpr std::string_view to_string(DeductionKind k) {
    return k == DeductionKind::OneTimeSurvey ? "OneTimeSurvey" : "DailyTask";
}

struct LedgerEntry {
    DeductionKind kind;
    std::string ref_id;  // day index or survey id
    Cents amount;
};

struct LedgerTerms {
    Cents endowment{3500};
    Cents onetime_budget{500};
    Cents daily_budget{3000};
    Cents survey_penalty{100};
};

/// Append-only deduction log over an up-front endowment. Deductions only;
/// the balance never increases and never goes negative.
class CreditLedger {
   public:
    explicit CreditLedger(std::string participant_id, LedgerTerms terms = {})
        : participant_id_(std::move(participant_id)), terms_(terms) {}

    Cents apply_daily_deduction(int day, const IncentiveSchedule& schedule) {
        if (day < 1 || day > schedule.days())
            fail(ErrorCode::DayOutOfRange, "day " + std::to_string(day) + " outside [1, " +
                                               std::to_string(schedule.days()) + "]");
        const std::string ref = std::to_string(day);
        if (has_entry(DeductionKind::DailyTask, ref))
            fail(ErrorCode::DuplicateDeduction, "day " + ref + " already deducted");
        const Cents amount = schedule.at_day(day);
        check_budget(amount, daily_total_, terms_.daily_budget, "daily");
        entries_.push_back({DeductionKind::DailyTask, ref, amount});
        daily_total_ += amount;
        return amount;
    }

    Cents apply_onetime_deduction(std::string_view survey_id) {
        if (!is_known_survey(survey_id))
            fail(ErrorCode::UnknownSurvey, "unknown survey: " + std::string(survey_id));
        if (has_entry(DeductionKind::OneTimeSurvey, survey_id))
            fail(ErrorCode::DuplicateDeduction,
                 "survey " + std::string(survey_id) + " already deducted");
        const Cents amount = terms_.survey_penalty;
        check_budget(amount, onetime_total_, terms_.onetime_budget, "one-time");
        entries_.push_back({DeductionKind::OneTimeSurvey, std::string(survey_id), amount});
        onetime_total_ += amount;
        return amount;
    }

    Cents balance() const { return terms_.endowment - daily_total_ - onetime_total_; }
    Cents daily_total() const { return daily_total_; }
    Cents onetime_total() const { return onetime_total_; }
    std::size_t daily_deduction_count() const {
        return static_cast<std::size_t>(std::count_if(
            entries_.begin(), entries_.end(),
            [](const LedgerEntry& e) { return e.kind == DeductionKind::DailyTask; }));
    }

    const std::string& participant_id() const { return participant_id_; }
    const LedgerTerms& terms() const { return terms_; }
    std::span<const LedgerEntry> entries() const { return entries_; }

   private:
    bool has_entry(DeductionKind kind, std::string_view ref) const {
        return std::any_of(entries_.begin(), entries_.end(), [&](const LedgerEntry& e) {
            return e.kind == kind && e.ref_id == ref;
        });
    }

    void check_budget(Cents amount, Cents kind_total, Cents budget, const char* what) const {
        if (kind_total + amount > budget)
            fail(ErrorCode::InvalidState, std::string(what) + " deductions would exceed budget");
        if (balance() - amount < Cents{0}) fail(ErrorCode::InvalidState, "balance would go negative");
    }

    std::string participant_id_;
    LedgerTerms terms_;
    std::vector<LedgerEntry> entries_;
    Cents daily_total_{0};
    Cents onetime_total_{0};
};

/// `participant_id,kind,ref_id,amount_cents,balance_after_cents`
inline void write_ledger_header(std::ostream& os) {
    csv::write_row(os, "participant_id", "kind", "ref_id", "amount_cents", "balance_after_cents");
}

inline void write_ledger_rows(std::ostream& os, const CreditLedger& ledger) {
    Cents bal = ledger.terms().endowment;
    for (const auto& e : ledger.entries()) {
        bal -= e.amount;
        csv::write_row(os, ledger.participant_id(), to_string(e.kind), e.ref_id, e.amount.value,
                       bal.value);
    }
}

}  // namespace incentive_lab
