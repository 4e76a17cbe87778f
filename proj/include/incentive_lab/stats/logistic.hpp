#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "incentive_lab/error.hpp"

namespace incentive_lab::stats {

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double inv_logit(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Bernoulli log-likelihood of y given linear predictor eta.
inline double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
    return ll;
}

struct LogisticFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd std_errors;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct LogisticOptions {
    double tolerance = 1e-10;  // max absolute coefficient change
    int max_iterations = 100;
    double separation_eta = 30.0;
};

/// Maximum likelihood by iteratively reweighted least squares. Throws
/// Singular for collinear designs and Separation when coefficients diverge.
inline LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const LogisticOptions& opt = {}) {
    if (X.rows() != y.size()) fail(ErrorCode::InvalidSpec, "design rows != outcome length");
    if (X.rows() == 0 || X.cols() == 0) fail(ErrorCode::EmptyInput, "empty design");
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0) fail(ErrorCode::InvalidSpec, "outcomes must be 0/1");
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        if (qr.rank() < X.cols()) fail(ErrorCode::Singular, "design matrix is rank deficient");
    }

    const Eigen::Index p = X.cols();
    LogisticFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(X.rows());
    Eigen::VectorXd mu(X.rows()), w(X.rows());
    Eigen::MatrixXd info(p, p);

    for (int it = 1; it <= opt.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu[i] = inv_logit(eta[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        info.noalias() = X.transpose() * w.asDiagonal() * X;
        const Eigen::VectorXd score = X.transpose() * (y - mu);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
            if (eta.cwiseAbs().maxCoeff() > opt.separation_eta)
                fail(ErrorCode::Separation, "fitted probabilities collapsed to 0/1");
            fail(ErrorCode::Singular, "information matrix is singular");
        }
        const Eigen::VectorXd step = ldlt.solve(score);
        fit.coefficients += step;
        eta.noalias() = X * fit.coefficients;
        fit.iterations = it;
        if (step.cwiseAbs().maxCoeff() < opt.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        if (eta.cwiseAbs().maxCoeff() > opt.separation_eta)
            fail(ErrorCode::Separation, "coefficients diverge (quasi-complete separation)");
        fail(ErrorCode::NonConvergence, "IRLS did not converge");
    }
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        mu[i] = inv_logit(eta[i]);
        w[i] = mu[i] * (1.0 - mu[i]);
    }
    info.noalias() = X.transpose() * w.asDiagonal() * X;
    fit.std_errors = info.inverse().diagonal().cwiseSqrt();
    fit.log_likelihood = bernoulli_loglik(y, eta);
    return fit;
}

}  // namespace incentive_lab::stats
