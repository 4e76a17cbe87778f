#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace incentive_lab::stats {

/// Objective returning f(x) and, when `grad` is non-null, its gradient.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// Central-difference gradient of a value-only function.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double rel_step = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Symmetrized central-difference Hessian from gradients.
inline Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x,
                                       double rel_step = 1e-4) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd xp = x, gp(n), gm(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        f(xp, &gp);
        xp[i] = x[i] - h;
        f(xp, &gm);
        xp[i] = x[i];
        H.col(i) = (gp - gm) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

struct BfgsOptions {
    int max_iterations = 300;
    double gradient_tolerance = 1e-6;  // sup norm
    double max_step = 5.0;             // sup norm of a single step
    double stall_tolerance = 1e-13;    // relative decrease counted as no progress
    int stall_iterations = 5;
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

/// Quasi-Newton minimization with Armijo backtracking. `inv_hessian0` seeds
/// the inverse-Hessian approximation; pass identity if nothing better.
inline OptimResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0,
                                 Eigen::MatrixXd inv_hessian0, const BfgsOptions& opt = {}) {
    OptimResult r;
    const Eigen::Index n = x0.size();
    r.x = std::move(x0);
    r.gradient.resize(n);
    r.value = f(r.x, &r.gradient);
    Eigen::MatrixXd Hinv = std::move(inv_hessian0);
    Eigen::VectorXd g_new(n);
    int stalled = 0;
    for (int it = 0; it < opt.max_iterations; ++it) {
        r.iterations = it;
        if (r.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance) {
            r.converged = true;
            return r;
        }
        Eigen::VectorXd dir = -Hinv * r.gradient;
        double slope = dir.dot(r.gradient);
        if (!(slope < 0.0)) {
            Hinv.setIdentity();
            dir = -r.gradient;
            slope = dir.dot(r.gradient);
        }
        const double dmax = dir.cwiseAbs().maxCoeff();
        if (dmax > opt.max_step) {
            dir *= opt.max_step / dmax;
            slope = dir.dot(r.gradient);
        }
        double t = 1.0;
        Eigen::VectorXd x_new(n);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = r.x + t * dir;
            f_new = f(x_new, &g_new);
            if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // No descent possible at working precision.
            r.converged = r.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance;
            return r;
        }
        const Eigen::VectorXd s = x_new - r.x;
        const Eigen::VectorXd yv = g_new - r.gradient;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
        }
        const bool no_progress = r.value - f_new <= opt.stall_tolerance * (1.0 + std::abs(r.value));
        stalled = no_progress ? stalled + 1 : 0;
        r.x = x_new;
        r.value = f_new;
        r.gradient = g_new;
        if (stalled >= opt.stall_iterations) {
            r.iterations = it + 1;
            r.converged = r.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance;
            return r;
        }
    }
    r.iterations = opt.max_iterations;
    r.converged = r.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance;
    return r;
}

}  // namespace incentive_lab::stats
