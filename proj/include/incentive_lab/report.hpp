#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "incentive_lab/config.hpp"
#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/incentive.hpp"
#include "incentive_lab/stats/rank_tests.hpp"
#include "incentive_lab/svg.hpp"
#include "incentive_lab/trial.hpp"

namespace incentive_lab::report {

using json = nlohmann::ordered_json;

inline json to_json(const stats::TestResult& r) {
    return {{"statistic", r.statistic},
            {"p_value", r.p_value},
            {"method", std::string(stats::to_string(r.method))},
            {"n1", r.n1},
            {"n2", r.n2},
            {"tie_correction_applied", r.tie_correction_applied}};
}

inline json arms(double t, double c) { return {{"treatment", t}, {"control", c}}; }
inline json arms(int t, int c) { return {{"treatment", t}, {"control", c}}; }

inline json compliance_json(const ComplianceSummary& s) {
    json j;
    j["mitt_included"] = arms(s.n_treatment, s.n_control);
    j["mitt_excluded"] = arms(s.excluded_treatment, s.excluded_control);
    j["median_compliance_days"] = arms(s.median_treatment, s.median_control);
    j["mann_whitney"] = to_json(s.mann_whitney);
    j["daily_compliance"] = {{"treatment", s.daily_treatment}, {"control", s.daily_control}};
    return j;
}

/// Logger counts and the pre/post tests over all participants.
inline json post_phase_json(const std::vector<PostPhaseRow>& rows, int active_threshold) {
    int pre = 0, post = 0, pre_active = 0, post_active = 0, post_t = 0, post_c = 0;
    std::vector<std::pair<double, double>> pairs;
    for (const auto& r : rows) {
        pre += r.pre_logger();
        post += r.post_logger();
        pre_active += r.pre_logging_days >= active_threshold;
        post_active += r.post_logging_days >= active_threshold;
        (r.arm == Arm::Treatment ? post_t : post_c) += r.post_logger();
        pairs.emplace_back(r.pre_logging_days, r.post_logging_days);
    }
    const auto n = static_cast<double>(rows.size());
    json j;
    j["participants"] = rows.size();
    j["loggers"] = {{"pre", pre}, {"post", post}};
    j["active_loggers"] = {{"pre", pre_active}, {"post", post_active}};
    j["post_loggers_by_arm"] = arms(post_t, post_c);
    try {
        j["logger_chi_square"] = to_json(stats::chi_square_2x2({{{double(post), n - post}, {double(pre), n - pre}}}, false));
    } catch (const LabError&) {
        j["logger_chi_square"] = nullptr;
    }
    try {
        j["logging_days_wilcoxon"] = to_json(stats::wilcoxon_signed_rank(pairs));
    } catch (const LabError&) {
        j["logging_days_wilcoxon"] = nullptr;
    }
    return j;
}

struct ReplicationResult {
    std::uint64_t seed;
    ComplianceSummary summary;
};

/// Replications 1..count-1; replication 0 is the primary run.
inline std::vector<ReplicationResult> run_replications(const TrialConfig& cfg) {
    std::vector<ReplicationResult> out;
    for (int r = 1; r < cfg.replication_count; ++r) {
        TrialConfig c = cfg;
        c.seed = replication_seed(cfg.seed, r);
        out.push_back({c.seed, compliance_summaries(run_trial(c))});
    }
    return out;
}

inline json summary_json(const TrialConfig& cfg, const ComplianceDataset& ds,
                         const ComplianceSummary& s, const std::vector<PostPhaseRow>* post,
                         const std::vector<ReplicationResult>& reps) {
    int nt = 0, nc = 0;
    for (const auto& p : ds.participants) (p.arm == Arm::Treatment ? nt : nc)++;
    json j;
    j["seed"] = cfg.seed;
    j["config_digest"] = config::digest(cfg);
    j["participants"] = ds.participants.size();
    j["randomized"] = arms(nt, nc);
    j["study_length_days"] = ds.study_length_days;
    j["compliance"] = compliance_json(s);
    if (post) j["post_phase"] = post_phase_json(*post, cfg.post_phase.active_threshold_days);
    if (!reps.empty()) {
        auto& arr = j["replications"] = json::array();
        for (const auto& r : reps) {
            const auto& x = r.summary;
            arr.push_back({{"seed", r.seed},
                           {"median_compliance_days", arms(x.median_treatment, x.median_control)},
                           {"mann_whitney_p", x.mann_whitney.p_value},
                           {"day1", arms(x.daily_treatment.front(), x.daily_control.front())},
                           {"last_day", arms(x.daily_treatment.back(), x.daily_control.back())}});
        }
    }
    return j;
}

/// Reassembles the analysis dataset from `compliance.csv`.
inline ComplianceDataset dataset_from_csv(const csv::Table& t) {
    const auto c_id = t.column("participant_id"), c_arm = t.column("arm"), c_day = t.column("day"),
               c_ok = t.column("complied"), c_mitt = t.column("mitt");
    auto optional_column = [&](const char* name) -> std::optional<std::size_t> {
        if (!t.has_column(name)) return std::nullopt;
        return t.column(name);
    };
    const auto c_diff = optional_column("perceived_difficulty");
    const auto c_ded = optional_column("deduction_cents");
    ComplianceDataset ds;
    ds.study_length_days = 0;
    std::map<std::string, std::size_t> index;
    for (const auto& row : t.rows) {
        auto [it, fresh] = index.try_emplace(row[c_id], ds.participants.size());
        if (fresh) {
            ParticipantSummary p;
            p.agent.participant_id = row[c_id];
            p.arm = parse_arm(row[c_arm]);
            p.mitt_included = row[c_mitt] == "1";
            ds.participants.push_back(p);
        }
        ParticipantSummary& p = ds.participants[it->second];
        ComplianceRow r;
        r.participant_id = row[c_id];
        r.arm = p.arm;
        r.day = std::stoi(row[c_day]);
        r.complied = row[c_ok] == "1";
        if (c_diff) r.perceived_difficulty = std::stoi(row[*c_diff]);
        if (c_ded) r.deduction = Cents{std::stoll(row[*c_ded])};
        p.compliance_days += r.complied;
        p.deduction_events += !r.complied;
        ds.study_length_days = std::max(ds.study_length_days, r.day);
        ds.rows.push_back(std::move(r));
    }
    if (ds.participants.empty()) fail(ErrorCode::EmptyDataset, "compliance.csv has no rows");
    return ds;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) fail(ErrorCode::IoError, "missing file: " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail(ErrorCode::IoError, "cannot write: " + p.string());
    f << s;
}

inline csv::Table read_table(const std::filesystem::path& p) {
    std::istringstream ss(read_text(p));
    return csv::read(ss);
}

struct ReportFiles {
    std::vector<std::string> written;
};

/// Charts and a markdown summary from the outputs of `simulate`.
inline ReportFiles write_report(const std::filesystem::path& run_dir) {
    const csv::Table comp = read_table(run_dir / "compliance.csv");
    const csv::Table sched = read_table(run_dir / "schedules.csv");
    const csv::Table parts = read_table(run_dir / "participants.csv");

    const ComplianceDataset ds = dataset_from_csv(comp);
    const ComplianceSummary s = compliance_summaries(ds);

    std::map<std::string, Arm> arm_of;
    {
        const auto c_id = parts.column("participant_id"), c_arm = parts.column("arm");
        for (const auto& row : parts.rows) arm_of[row[c_id]] = parse_arm(row[c_arm]);
    }

    // Daily deductions of random-loss schedules.
    const std::int64_t width = 25;
    std::vector<double> ded_bins;
    {
        const auto c_id = sched.column("participant_id"), c_amt = sched.column("deduction_cents");
        for (const auto& row : sched.rows) {
            const auto it = arm_of.find(row[c_id]);
            if (it == arm_of.end() || it->second != Arm::Treatment) continue;
            const auto b = static_cast<std::size_t>(std::stoll(row[c_amt]) / width);
            if (ded_bins.size() <= b) ded_bins.resize(b + 1, 0.0);
            ded_bins[b] += 1;
        }
    }

    std::vector<double> days_t, days_c;
    for (const auto& p : ds.participants)
        if (p.mitt_included) (p.arm == Arm::Treatment ? days_t : days_c).push_back(p.compliance_days);
    const int L = ds.study_length_days;
    std::vector<double> hist_t(static_cast<std::size_t>(L / 5 + 1)), hist_c(hist_t.size());
    for (double d : days_t) hist_t[static_cast<std::size_t>(d) / 5] += 1;
    for (double d : days_c) hist_c[static_cast<std::size_t>(d) / 5] += 1;

    ReportFiles out;
    auto emit = [&](const std::string& name, const std::string& body) {
        write_text(run_dir / name, body);
        out.written.push_back(name);
    };
    emit("deductions_histogram.svg",
         svg::histogram("Daily deductions (random loss)", "Deduction (cents)", {{"treatment", ded_bins}}, 0,
                        static_cast<double>(width)));
    emit("compliance_days_histogram.svg",
         svg::histogram("Compliance days per participant", "Compliance days",
                        {{"treatment", hist_t}, {"control", hist_c}}, 0, 5));
    emit("compliance_days_boxplot.svg",
         svg::box_plot("Compliance days by arm", "Compliance days",
                       {{"treatment", days_t}, {"control", days_c}}, L));
    emit("daily_compliance.svg",
         svg::line_chart("Daily compliance users", "Days into the study", "Fraction compliant",
                         {{"treatment", s.daily_treatment}, {"control", s.daily_control}}, 1.0));

    std::ostringstream md;
    md << "# Simulation report\n\n";
    md << "| | Treatment | Control |\n|---|---|---|\n";
    md << "| Participants analysed | " << s.n_treatment << " | " << s.n_control << " |\n";
    md << "| Excluded (no deduction) | " << s.excluded_treatment << " | " << s.excluded_control << " |\n";
    md << "| Median compliance days | " << s.median_treatment << " | " << s.median_control << " |\n";
    md << "| Day 1 compliant | " << svg::num(s.daily_treatment.front(), 4) << " | "
       << svg::num(s.daily_control.front(), 4) << " |\n";
    md << "| Day " << L << " compliant | " << svg::num(s.daily_treatment.back(), 4) << " | "
       << svg::num(s.daily_control.back(), 4) << " |\n\n";
    md << "Mann-Whitney U = " << s.mann_whitney.statistic << ", p = " << svg::num(s.mann_whitney.p_value, 6)
       << " (" << stats::to_string(s.mann_whitney.method) << ").\n\n";
    for (std::size_t i = 0; i < out.written.size(); ++i)
        md << "![" << out.written[i] << "](" << out.written[i] << ")\n";
    emit("report.md", md.str());
    return out;
}

}  // namespace incentive_lab::report
