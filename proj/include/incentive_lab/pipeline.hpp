#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "incentive_lab/config.hpp"
#include "incentive_lab/ledger.hpp"
#include "incentive_lab/protocol.hpp"
#include "incentive_lab/random.hpp"
#include "incentive_lab/report.hpp"
#include "incentive_lab/trial.hpp"
#include "incentive_lab/version.hpp"

namespace incentive_lab::pipeline {

struct SimulationOutputs {
    std::vector<std::string> files;  // relative to the output directory, in write order
    ComplianceSummary summary;
};

inline std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Runs the trial for `cfg` and writes every dataset plus `manifest.json`
/// into `dir`. Output bytes depend only on the config and tool version.
inline SimulationOutputs simulate_to_directory(const TrialConfig& cfg, const std::filesystem::path& dir) {
    cfg.validate();
    std::filesystem::create_directories(dir);
    const TrialRun run = simulate_trial(cfg);
    const ComplianceDataset& ds = run.dataset;

    SimulationOutputs out;
    std::vector<std::pair<std::string, std::string>> written;
    auto emit = [&](const std::string& name, const std::string& body) {
        report::write_text(dir / name, body);
        written.emplace_back(name, body);
        out.files.push_back(name);
    };

    std::ostringstream comp, parts, sched, ledger, events;
    write_compliance_csv(comp, ds);
    write_participants_csv(parts, ds);
    std::vector<std::pair<std::string, IncentiveSchedule>> schedules;
    write_ledger_header(ledger);
    for (const auto& p : run.participants) {
        schedules.emplace_back(p.summary.agent.participant_id, p.schedule);
        write_ledger_rows(ledger, p.ledger);
        write_events_jsonl(events, p.events);
    }
    write_schedules_csv(sched, schedules);
    emit("compliance.csv", comp.str());
    emit("participants.csv", parts.str());
    emit("schedules.csv", sched.str());
    emit("ledger.csv", ledger.str());
    emit("events.jsonl", events.str());

    std::vector<PostPhaseRow> post;
    if (cfg.post_phase.enabled) {
        post = run_post_phase(cfg, ds);
        std::ostringstream pp;
        write_post_phase_csv(pp, post, cfg.post_phase.active_threshold_days);
        emit("post_phase.csv", pp.str());
    }

    out.summary = compliance_summaries(ds);
    const auto reps = report::run_replications(cfg);
    const auto summary = report::summary_json(cfg, ds, out.summary, cfg.post_phase.enabled ? &post : nullptr, reps);
    emit("summary.json", summary.dump(2) + "\n");

    nlohmann::ordered_json m;
    m["tool"] = std::string(kToolName);
    m["tool_version"] = std::string(kVersion);
    m["config_digest"] = config::digest(cfg);
    m["seed"] = cfg.seed;
    auto& settings = m["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config::to_settings(cfg)) settings[k] = v;
    auto& files = m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& [name, body] : written)
        files.push_back({{"path", name}, {"bytes", body.size()}, {"fnv1a64", hex64(fnv1a64(body))}});
    // Simulated study time, not wall-clock time, so reruns are identical.
    const Timestamp start{std::chrono::sys_days{parse_date(cfg.study_start)}};
    auto& ts = m["timestamps"];
    ts["study_start"] = format_timestamp(start);
    ts["study_end"] = format_timestamp(start + days{cfg.study_length_days});
    if (cfg.post_phase.enabled)
        ts["post_phase_end"] = format_timestamp(start + days{cfg.study_length_days + cfg.post_phase.days});
    report::write_text(dir / "manifest.json", m.dump(2) + "\n");
    out.files.push_back("manifest.json");
    return out;
}

}  // namespace incentive_lab::pipeline
