#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "incentive_lab/error.hpp"
#include "incentive_lab/trial.hpp"

namespace incentive_lab::config {

// Flat `key = value` files. `#` starts a comment; blank lines are ignored.
// Every key is optional; omitted keys keep the built-in defaults.

using Settings = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
        if (back == v) break;
    }
    return buf;
}

inline std::string fmt_clock(std::chrono::minutes m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(m.count() / 60),
                  static_cast<int>(m.count() % 60));
    return buf;
}

class Reader {
   public:
    explicit Reader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

    template <class T>
    void number(const std::string& key, T& out) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return;
        const std::string& v = it->second;
        const auto* end = v.data() + v.size();
        const auto [ptr, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc{} || ptr != end) bad(key, "a number", v);
    }

    void cents(const std::string& key, Cents& out) const { number(key, out.value); }

    void flag(const std::string& key, bool& out) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return;
        const std::string& v = it->second;
        if (v == "true" || v == "1") out = true;
        else if (v == "false" || v == "0") out = false;
        else bad(key, "true|false", v);
    }

    void text(const std::string& key, std::string& out) const {
        const auto it = kv_.find(key);
        if (it != kv_.end()) out = it->second;
    }

    void clock(const std::string& key, std::chrono::minutes& out) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return;
        int h = -1, m = -1;
        char extra = 0;
        if (std::sscanf(it->second.c_str(), "%d:%d%c", &h, &m, &extra) != 2 || h < 0 || h > 23 ||
            m < 0 || m > 59)
            bad(key, "HH:MM", it->second);
        out = std::chrono::hours{h} + std::chrono::minutes{m};
    }

    void weights(const std::string& key, std::array<double, 6>& out) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return;
        const auto parts = csv::split_line(it->second);
        if (parts.size() != out.size()) bad(key, "6 comma-separated weights", it->second);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), out[i]);
            if (ec != std::errc{} || ptr != parts[i].data() + parts[i].size())
                bad(key, "6 comma-separated weights", it->second);
        }
    }

    void schedule(const std::string& prefix, ScheduleSpec& spec) const {
        cents(prefix + "_budget_cents", spec.budget);
        cents(prefix + "_cap_cents", spec.cap);
        Cents amount = spec.is_random() ? Cents{100} : std::get<FixedLoss>(spec.policy).amount;
        cents(prefix + "_amount_cents", amount);
        std::string policy = spec.is_random() ? "random" : "fixed";
        text(prefix + "_policy", policy);
        if (policy == "random") spec.policy = RandomLoss{};
        else if (policy == "fixed") spec.policy = FixedLoss{amount};
        else bad(prefix + "_policy", "random|fixed", policy);
    }

   private:
    [[noreturn]] static void bad(const std::string& key, const char* want, const std::string& got) {
        fail(ErrorCode::ParseError, "config key " + key + ": expected " + want + ", got '" + got + "'");
    }
    const std::map<std::string, std::string>& kv_;
};

}  // namespace detail

/// Every key with its value, in documentation order.
inline Settings to_settings(const TrialConfig& c) {
    using detail::fmt_double;
    const auto& p = c.population;
    auto cents = [](Cents v) { return std::to_string(v.value); };
    auto arm = [&](const std::string& prefix, const ScheduleSpec& s, Settings& out) {
        out.emplace_back(prefix + "_policy", s.is_random() ? "random" : "fixed");
        out.emplace_back(prefix + "_budget_cents", cents(s.budget));
        out.emplace_back(prefix + "_cap_cents", cents(s.cap));
        out.emplace_back(prefix + "_amount_cents",
                         cents(s.is_random() ? Cents{100} : std::get<FixedLoss>(s.policy).amount));
    };
    std::string weights;
    for (double w : p.age_bucket_weights) weights += (weights.empty() ? "" : ",") + fmt_double(w);

    Settings s = {
        {"seed", std::to_string(c.seed)},
        {"replication_count", std::to_string(c.replication_count)},
        {"study_length_days", std::to_string(c.study_length_days)},
        {"study_start", c.study_start},
        {"n", std::to_string(p.n)},
        {"arm_split", fmt_double(p.arm_split)},
        {"female_prob", fmt_double(p.female_prob)},
        {"age_bucket_weights", weights},
        {"grit_mean", fmt_double(p.grit_mean)},
        {"grit_sd", fmt_double(p.grit_sd)},
        {"prelog_logger_prob", fmt_double(p.prelog_logger_prob)},
        {"prelog_mean", fmt_double(p.prelog_mean)},
        {"alpha_mean", fmt_double(p.alpha_mean)},
        {"alpha_sd", fmt_double(p.alpha_sd)},
        {"grit_effect", fmt_double(p.grit_effect)},
        {"beta_time_mean", fmt_double(p.beta_time_mean)},
        {"beta_time_sd", fmt_double(p.beta_time_sd)},
        {"beta_loss", fmt_double(p.beta_loss)},
        {"beta_ease", fmt_double(p.beta_ease)},
        {"lambda", fmt_double(p.lambda)},
        {"kappa", fmt_double(p.kappa)},
        {"habituation_gamma", fmt_double(p.habituation_gamma)},
        {"ease_mean", fmt_double(p.ease_mean)},
        {"ease_between_sd", fmt_double(p.ease_between_sd)},
        {"ease_within_sd", fmt_double(p.ease_within_sd)},
        {"survey_completion_prob", fmt_double(p.survey_completion_prob)},
    };
    arm("treatment", c.treatment, s);
    arm("control", c.control, s);
    const Settings rest = {
        {"endowment_cents", cents(c.terms.endowment)},
        {"onetime_budget_cents", cents(c.terms.onetime_budget)},
        {"daily_budget_cents", cents(c.terms.daily_budget)},
        {"survey_penalty_cents", cents(c.terms.survey_penalty)},
        {"reflection_opens", detail::fmt_clock(c.times.reflection_opens)},
        {"reminder_at", detail::fmt_clock(c.times.reminder_at)},
        {"notice_at", detail::fmt_clock(c.times.notice_at)},
        {"deadline_hours", std::to_string(c.times.deadline_after.count() / 60)},
        {"max_reminders", std::to_string(c.times.max_reminders)},
        {"same_evening_prob", fmt_double(c.timing.same_evening_prob)},
        {"post_phase_enabled", c.post_phase.enabled ? "true" : "false"},
        {"post_phase_days", std::to_string(c.post_phase.days)},
        {"habit_coefficient", fmt_double(c.post_phase.habit_coefficient)},
        {"post_persistence", fmt_double(c.post_phase.persistence)},
        {"habit_rate", fmt_double(c.post_phase.habit_rate)},
        {"habit_weekly_decay", fmt_double(c.post_phase.habit_weekly_decay)},
        {"active_threshold_days", std::to_string(c.post_phase.active_threshold_days)},
    };
    s.insert(s.end(), rest.begin(), rest.end());
    return s;
}

/// Applies `kv` on top of the defaults. Unknown keys are rejected.
inline TrialConfig from_settings(const std::map<std::string, std::string>& kv) {
    TrialConfig c;
    std::set<std::string> known = {"workers"};
    for (const auto& [k, v] : to_settings(c)) known.insert(k);
    for (const auto& [k, v] : kv)
        if (!known.contains(k)) fail(ErrorCode::InvalidSpec, "unknown config key: " + k);

    const detail::Reader r(kv);
    auto& p = c.population;
    r.number("seed", c.seed);
    r.number("replication_count", c.replication_count);
    r.number("workers", c.workers);
    r.number("study_length_days", c.study_length_days);
    c.treatment.days = c.control.days = c.study_length_days;
    r.text("study_start", c.study_start);
    r.number("n", p.n);
    r.number("arm_split", p.arm_split);
    r.number("female_prob", p.female_prob);
    r.weights("age_bucket_weights", p.age_bucket_weights);
    r.number("grit_mean", p.grit_mean);
    r.number("grit_sd", p.grit_sd);
    r.number("prelog_logger_prob", p.prelog_logger_prob);
    r.number("prelog_mean", p.prelog_mean);
    r.number("alpha_mean", p.alpha_mean);
    r.number("alpha_sd", p.alpha_sd);
    r.number("grit_effect", p.grit_effect);
    r.number("beta_time_mean", p.beta_time_mean);
    r.number("beta_time_sd", p.beta_time_sd);
    r.number("beta_loss", p.beta_loss);
    r.number("beta_ease", p.beta_ease);
    r.number("lambda", p.lambda);
    r.number("kappa", p.kappa);
    r.number("habituation_gamma", p.habituation_gamma);
    r.number("ease_mean", p.ease_mean);
    r.number("ease_between_sd", p.ease_between_sd);
    r.number("ease_within_sd", p.ease_within_sd);
    r.number("survey_completion_prob", p.survey_completion_prob);
    r.schedule("treatment", c.treatment);
    r.schedule("control", c.control);
    r.cents("endowment_cents", c.terms.endowment);
    r.cents("onetime_budget_cents", c.terms.onetime_budget);
    r.cents("daily_budget_cents", c.terms.daily_budget);
    r.cents("survey_penalty_cents", c.terms.survey_penalty);
    r.clock("reflection_opens", c.times.reflection_opens);
    r.clock("reminder_at", c.times.reminder_at);
    r.clock("notice_at", c.times.notice_at);
    int deadline_hours = static_cast<int>(c.times.deadline_after.count() / 60);
    r.number("deadline_hours", deadline_hours);
    c.times.deadline_after = std::chrono::hours{deadline_hours};
    r.number("max_reminders", c.times.max_reminders);
    r.number("same_evening_prob", c.timing.same_evening_prob);
    r.flag("post_phase_enabled", c.post_phase.enabled);
    r.number("post_phase_days", c.post_phase.days);
    r.number("habit_coefficient", c.post_phase.habit_coefficient);
    r.number("post_persistence", c.post_phase.persistence);
    r.number("habit_rate", c.post_phase.habit_rate);
    r.number("habit_weekly_decay", c.post_phase.habit_weekly_decay);
    r.number("active_threshold_days", c.post_phase.active_threshold_days);
    p.seed = c.seed;
    if (deadline_hours < 1) fail(ErrorCode::InvalidSpec, "deadline_hours must be >= 1");
    return c;
}

inline std::map<std::string, std::string> parse_settings(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(std::string_view(t).substr(0, eq));
        std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) fail(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            fail(ErrorCode::ParseError, "config key " + key + " given twice");
    }
    return kv;
}

inline TrialConfig parse(std::istream& is) {
    TrialConfig c = from_settings(parse_settings(is));
    c.validate();
    return c;
}

inline TrialConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::IoError, "cannot open config: " + path);
    return parse(f);
}

/// Canonical text form: every key, fixed order. Equal configs give equal
/// text.
inline std::string canonical_text(const TrialConfig& c) {
    std::string out;
    for (const auto& [k, v] : to_settings(c)) out += k + " = " + v + "\n";
    return out;
}

inline std::string digest(const TrialConfig& c) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_text(c))));
    return buf;
}

}  // namespace incentive_lab::config
