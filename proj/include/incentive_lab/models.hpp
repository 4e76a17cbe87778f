#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/stats/glmm.hpp"
#include "incentive_lab/stats/rank_tests.hpp"

namespace incentive_lab::models {

// Covariate sets of the eight daily-compliance models. Models 1-4 have a
// random subject intercept; 5-8 add a random slope for perceived
// difficulty.

inline constexpr int kModelCount = 8;

inline const char* const kIntercept = "(Intercept)";
inline const char* const kTreatment = "Treatment";
inline const char* const kDaysTreatment = "Days into the study × Treatment";
inline const char* const kMaleTreatment = "Male × Treatment";
inline const char* const kAgeTreatment = "Age × Treatment";
inline const char* const kGritTreatment = "Grit score × Treatment";
inline const char* const kDays = "Days into the study";
inline const char* const kPrelog = "Pre-treatment logging days";
inline const char* const kDifficulty = "Perceived task difficulty";
inline const char* const kMale = "Male";
inline const char* const kAge = "Age";
inline const char* const kGrit = "Grit score";
inline const char* const kSubjectIntercept = "Subjects (intercept)";
inline const char* const kDifficultySlope = "Perceived task difficulty (slope)";

/// Fixed-effect terms of `model`, in table order.
inline std::vector<std::string> fixed_terms(int model) {
    if (model < 1 || model > kModelCount)
        fail(ErrorCode::InvalidSpec, "model must be in 1.." + std::to_string(kModelCount));
    std::vector<std::string> t = {kIntercept, kTreatment};
    if (model >= 3) t.push_back(kDaysTreatment);
    if (model >= 6) t.push_back(kMaleTreatment);
    if (model >= 7) t.push_back(kAgeTreatment);
    if (model >= 8) t.push_back(kGritTreatment);
    if (model >= 2) t.push_back(kDays);
    if (model >= 4) t.push_back(kPrelog);
    if (model >= 5) t.push_back(kDifficulty);
    if (model >= 6) t.push_back(kMale);
    if (model >= 7) t.push_back(kAge);
    if (model >= 8) t.push_back(kGrit);
    return t;
}

inline bool has_difficulty_slope(int model) { return model >= 5; }

/// Columns of the compliance CSV that `model` reads.
inline std::vector<std::string> required_columns(int model) {
    std::vector<std::string> c = {"participant_id", "arm", "day", "complied"};
    if (model >= 4) c.push_back("pre_logging_days");
    if (model >= 5) c.push_back("perceived_difficulty");
    if (model >= 6) c.push_back("male");
    if (model >= 7) c.push_back("age");
    if (model >= 8) c.push_back("grit");
    return c;
}

inline double to_double(const std::string& s, const std::string& column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail(ErrorCode::ParseError, "column " + column + ": not a number: '" + s + "'");
    return v;
}

/// Builds the design for `model` from compliance rows. With `mitt_only`
/// and an `mitt` column present, rows of excluded participants are
/// dropped. Subjects keep their first-appearance order.
inline stats::GlmmData build(const csv::Table& table, int model, bool mitt_only = true) {
    const auto terms = fixed_terms(model);
    std::map<std::string, std::size_t> col;
    for (const auto& name : required_columns(model)) col[name] = table.column(name);
    const bool filter = mitt_only && table.has_column("mitt");
    const std::size_t mitt_col = filter ? table.column("mitt") : 0;

    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> by_subject;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (filter && row[mitt_col] != "1") continue;
        auto [it, fresh] = by_subject.try_emplace(row[col["participant_id"]]);
        if (fresh) order.push_back(it->first);
        it->second.push_back(r);
    }
    std::size_t n = 0;
    for (const auto& [id, rows] : by_subject) n += rows.size();
    if (order.size() < 2) fail(ErrorCode::EmptyDataset, "model needs at least 2 subjects");

    stats::GlmmData d;
    d.fixed_names = terms;
    d.random_names = {kSubjectIntercept};
    if (has_difficulty_slope(model)) d.random_names.push_back(kDifficultySlope);
    d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(terms.size()));
    d.Z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.random_names.size()));
    d.y.resize(static_cast<Eigen::Index>(n));
    d.offsets.push_back(0);
    Eigen::Index i = 0;
    for (const auto& id : order) {
        for (std::size_t r : by_subject[id]) {
            const auto& row = table.rows[r];
            auto value = [&](const char* name) { return to_double(row[col[name]], name); };
            const std::string& arm = row[col["arm"]];
            double treat = 0.0;
            if (arm == "treatment" || arm == "1") treat = 1.0;
            else if (arm != "control" && arm != "0")
                fail(ErrorCode::ParseError, "column arm: expected treatment|control, got '" + arm + "'");
            const double y = value("complied");
            if (y != 0.0 && y != 1.0) fail(ErrorCode::ParseError, "column complied must be 0/1");
            std::map<std::string, double> v;
            v[kIntercept] = 1.0;
            v[kTreatment] = treat;
            v[kDays] = value("day");
            v[kDaysTreatment] = v[kDays] * treat;
            if (model >= 4) v[kPrelog] = value("pre_logging_days");
            if (model >= 5) v[kDifficulty] = value("perceived_difficulty");
            if (model >= 6) {
                v[kMale] = value("male");
                v[kMaleTreatment] = v[kMale] * treat;
            }
            if (model >= 7) {
                v[kAge] = value("age");
                v[kAgeTreatment] = v[kAge] * treat;
            }
            if (model >= 8) {
                v[kGrit] = value("grit");
                v[kGritTreatment] = v[kGrit] * treat;
            }
            for (std::size_t k = 0; k < terms.size(); ++k)
                d.X(i, static_cast<Eigen::Index>(k)) = v.at(terms[k]);
            d.Z(i, 0) = 1.0;
            // Slope on difficulty centered at the scale midpoint.
            if (has_difficulty_slope(model)) d.Z(i, 1) = v[kDifficulty] - 3.0;
            d.y[i] = y;
            ++i;
        }
        d.offsets.push_back(i);
    }
    return d;
}

struct CoefficientRow {
    std::string term;
    double estimate;
    double std_error;
    double z;
    double p_value;
    std::string stars;
};

inline std::vector<CoefficientRow> coefficient_table(const stats::GlmmFit& fit) {
    std::vector<CoefficientRow> rows;
    for (std::size_t k = 0; k < fit.fixed_names.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const double b = fit.beta[i], se = fit.std_errors[i];
        const double z = b / se;
        const double p = std::isfinite(z) ? std::min(1.0, 2.0 * stats::normal_sf(std::abs(z)))
                                          : std::numeric_limits<double>::quiet_NaN();
        rows.push_back({fit.fixed_names[k], b, se, z, p, std::isfinite(p) ? stats::significance_stars(p) : ""});
    }
    return rows;
}

inline nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const stats::GlmmFit& fit, int model) {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["method"] = fit.method;
    j["converged"] = fit.converged;
    j["gradient_norm"] = fit.gradient_norm;
    auto& fe = j["fixed_effects"] = nlohmann::ordered_json::array();
    for (const auto& r : coefficient_table(fit))
        fe.push_back({{"term", r.term},
                      {"estimate", r.estimate},
                      {"std_error", number_or_null(r.std_error)},
                      {"z", number_or_null(r.z)},
                      {"p_value", number_or_null(r.p_value)},
                      {"stars", r.stars}});
    auto& re = j["random_effects"] = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < fit.random_names.size(); ++k) re[fit.random_names[k]] = fit.variances[k];
    j["log_likelihood"] = fit.log_likelihood;
    j["aic"] = fit.aic;
    j["bic"] = fit.bic;
    j["k"] = fit.k;
    j["n_obs"] = fit.n_obs;
    j["n_subjects"] = fit.n_subjects;
    if (model >= 3) {
        const auto orr = stats::interaction_odds_ratio(fit.coefficient(kDays), fit.coefficient(kDaysTreatment));
        j["odds_ratio_per_day"] = {{"treatment", orr.treatment_or}, {"control", orr.control_or}};
    }
    return j;
}

}  // namespace incentive_lab::models
