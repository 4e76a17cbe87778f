#pragma once

// Synthetic daily-compliance panels with a known generating model.

#include <cmath>
#include <string>
#include <vector>

#include "incentive_lab/random.hpp"
#include "incentive_lab/stats/glmm.hpp"
#include "incentive_lab/stats/logistic.hpp"

namespace synthetic {

struct Truth {
    double intercept = 1.00936;
    double treatment = 0.6077;
    double days = -0.12;
    double days_x_treatment = 0.026;
    double sigma = 3.0;
};

inline constexpr int kSubjects = 200;
inline constexpr int kDays = 30;

/// Subjects alternate arms. `model3` selects the columns
/// (1, treatment, day*treatment, day); otherwise (1, treatment).
inline incentive_lab::stats::GlmmData panel(const Truth& t, std::uint64_t seed, bool model3 = true,
                                            int subjects = kSubjects, int days = kDays) {
    using incentive_lab::RandomStream;
    incentive_lab::stats::GlmmData d;
    const int n = subjects * days;
    const int p = model3 ? 4 : 2;
    d.X.resize(n, p);
    d.Z = Eigen::MatrixXd::Ones(n, 1);
    d.y.resize(n);
    d.fixed_names = {"(Intercept)", "Treatment"};
    if (model3) d.fixed_names.insert(d.fixed_names.end(), {"Days into the study × Treatment", "Days into the study"});
    d.random_names = {"Subjects (intercept)"};
    d.offsets.push_back(0);
    RandomStream rng = RandomStream::derive(seed, "synthetic-glmm");
    int i = 0;
    for (int s = 0; s < subjects; ++s) {
        const double treat = s % 2 == 0 ? 1.0 : 0.0;
        const double b = rng.normal(0.0, t.sigma);
        for (int day = 1; day <= days; ++day, ++i) {
            d.X(i, 0) = 1.0;
            d.X(i, 1) = treat;
            if (model3) {
                d.X(i, 2) = day * treat;
                d.X(i, 3) = day;
            }
            const double eta = t.intercept + t.treatment * treat + t.days * day + t.days_x_treatment * day * treat + b;
            d.y[i] = rng.bernoulli(incentive_lab::stats::inv_logit(eta)) ? 1.0 : 0.0;
        }
        d.offsets.push_back(i);
    }
    return d;
}

/// Same responses with the Model-1 columns only.
inline incentive_lab::stats::GlmmData model1_view(const incentive_lab::stats::GlmmData& m3) {
    auto d = m3;
    d.X = m3.X.leftCols(2);
    d.fixed_names.resize(2);
    return d;
}

}  // namespace synthetic
