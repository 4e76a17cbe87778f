#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "incentive_lab/error.hpp"
#include "incentive_lab/stats/logistic.hpp"
#include "incentive_lab/stats/optimize.hpp"

namespace incentive_lab::stats {

/// Gauss-Hermite rule for weight exp(-x^2). Golub-Welsch nodes polished by
/// Newton; weights from the Christoffel sum so tiny tail weights keep full
/// relative precision.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> log_weights;
};

namespace detail {
// orthonormal Hermite polynomials p_0..p_n at x; returns p_n, p_{n-1}, sum p_0^2..p_{n-1}^2
inline std::array<double, 3> hermite_orthonormal(int n, double x) {
    double prev = 0.0, cur = std::pow(std::numbers::pi, -0.25), sumsq = 0.0;
    for (int k = 1; k <= n; ++k) {
        sumsq += cur * cur;
        const double next = std::sqrt(2.0 / k) * x * cur - std::sqrt((k - 1.0) / k) * prev;
        prev = cur;
        cur = next;
    }
    return {cur, prev, sumsq};
}
}  // namespace detail

inline constexpr int kMaxQuadratureNodes = 100;

inline GaussHermite gauss_hermite(int n) {
    if (n < 1 || n > kMaxQuadratureNodes)
        fail(ErrorCode::InvalidSpec, "quadrature nodes must be in 1.." + std::to_string(kMaxQuadratureNodes));
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(k / 2.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
    GaussHermite gh;
    const auto N = static_cast<std::size_t>(n);
    gh.nodes.resize(N);
    gh.weights.resize(N);
    gh.log_weights.resize(N);
    for (int k = 0; k < n; ++k) {
        double x = es.eigenvalues()[k];
        for (int it = 0; it < 8; ++it) {
            const auto [pn, pn1, ss] = detail::hermite_orthonormal(n, x);
            (void)ss;
            const double dx = pn / (std::sqrt(2.0 * n) * pn1);
            x -= dx;
            if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        const auto i = static_cast<std::size_t>(k);
        gh.nodes[i] = x;
        gh.log_weights[i] = -std::log(detail::hermite_orthonormal(n, x)[2]);
        gh.weights[i] = std::exp(gh.log_weights[i]);
    }
    return gh;
}

/// Grouped binary-response data. Rows of each subject are contiguous;
/// `offsets[s]..offsets[s+1]` are subject s's rows. Columns of Z are the
/// random-effect covariates (e.g. 1 for an intercept).
struct GlmmData {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::MatrixXd Z;
    std::vector<Eigen::Index> offsets;
    std::vector<std::string> fixed_names;
    std::vector<std::string> random_names;

    Eigen::Index n_subjects() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }

    void validate() const {
        if (offsets.size() < 3) fail(ErrorCode::InvalidSpec, "GLMM needs at least 2 subjects");
        if (X.rows() != y.size() || Z.rows() != y.size())
            fail(ErrorCode::InvalidSpec, "X, Z and y row counts differ");
        if (offsets.front() != 0 || offsets.back() != y.size())
            fail(ErrorCode::InvalidSpec, "group offsets do not cover the data");
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
            if (offsets[s + 1] <= offsets[s])
                fail(ErrorCode::InvalidSpec, "every subject needs at least one observation");
        if (static_cast<Eigen::Index>(fixed_names.size()) != X.cols() ||
            static_cast<Eigen::Index>(random_names.size()) != Z.cols())
            fail(ErrorCode::InvalidSpec, "name lists do not match design columns");
    }
};

enum class Integration { Auto, AdaptiveGaussHermite, Laplace };

struct GlmmOptions {
    Integration integration = Integration::Auto;
    int quadrature_nodes = 15;
    BfgsOptions bfgs{};
    double report_gradient_tolerance = 1e-4;
    double boundary_log_sd = -5.0;  // below this a variance component is set to 0
};

struct GlmmFit {
    std::vector<std::string> fixed_names;
    Eigen::VectorXd beta;
    Eigen::VectorXd std_errors;
    std::vector<std::string> random_names;
    std::vector<double> variances;
    double log_likelihood = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int k = 0;  // fixed effects + variance components
    Eigen::Index n_obs = 0;
    Eigen::Index n_subjects = 0;
    bool converged = false;
    double gradient_norm = 0.0;  // sup norm of the log-likelihood gradient
    int iterations = 0;
    std::string method;

    double variance(const std::string& name) const {
        for (std::size_t i = 0; i < random_names.size(); ++i)
            if (random_names[i] == name) return variances[i];
        return 0.0;
    }
    double coefficient(const std::string& name) const {
        for (std::size_t i = 0; i < fixed_names.size(); ++i)
            if (fixed_names[i] == name) return beta[static_cast<Eigen::Index>(i)];
        fail(ErrorCode::MissingColumn, "no coefficient named " + name);
    }
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
inline constexpr Eigen::Index kMaxRandomEffects = 4;

/// Marginal log-likelihood of a GLMM with diagonal random-effect covariance
/// over the `active` columns of Z. Parameters are (beta, log sd).
class MarginalLikelihood {
   public:
    MarginalLikelihood(const GlmmData& data, std::vector<Eigen::Index> active, bool use_quadrature,
                       int nodes)
        : data_(data), active_(std::move(active)), quadrature_(use_quadrature) {
        if (static_cast<Eigen::Index>(active_.size()) > kMaxRandomEffects)
            fail(ErrorCode::InvalidSpec, "too many random effects");
        if (quadrature_) {
            if (active_.size() != 1)
                fail(ErrorCode::InvalidSpec, "quadrature supports one random effect only");
            gh_ = gauss_hermite(nodes);
        }
        Za_.resize(data_.Z.rows(), static_cast<Eigen::Index>(active_.size()));
        for (std::size_t c = 0; c < active_.size(); ++c)
            Za_.col(static_cast<Eigen::Index>(c)) = data_.Z.col(active_[c]);
        modes_.assign(static_cast<std::size_t>(data_.n_subjects()),
                      SmallVec::Zero(static_cast<Eigen::Index>(active_.size())));
    }

    Eigen::Index dim() const { return data_.X.cols() + static_cast<Eigen::Index>(active_.size()); }

    /// Log-likelihood; fills its gradient when `grad` is non-null.
    double loglik(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
        const Eigen::Index p = data_.X.cols();
        const auto q = static_cast<Eigen::Index>(active_.size());
        const SmallVec var = (2.0 * theta.tail(q)).array().exp();
        const Eigen::VectorXd eta0 = data_.X * theta.head(p);
        if (grad) grad->setZero(dim());
        double total = 0.0;
        for (Eigen::Index s = 0; s < data_.n_subjects(); ++s) {
            const Eigen::Index a = data_.offsets[static_cast<std::size_t>(s)];
            const Eigen::Index n = data_.offsets[static_cast<std::size_t>(s) + 1] - a;
            SmallVec& b = modes_[static_cast<std::size_t>(s)];
            if (!b.allFinite()) b.setZero();
            total += quadrature_ ? subject_aghq(a, n, eta0, var[0], b, grad)
                                 : subject_laplace(a, n, eta0, var, b, grad);
            if (!std::isfinite(total)) return -std::numeric_limits<double>::infinity();
        }
        return total;
    }

   private:
    double conditional(Eigen::Index a, Eigen::Index n, const Eigen::VectorXd& eta0,
                       const SmallVec& b) const {
        double ll = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double eta = eta0[a + j] + Za_.row(a + j).dot(b);
            ll += data_.y[a + j] * eta - log1pexp(eta);
        }
        return ll;
    }

    /// Posterior mode of subject effects by damped Newton, warm-started at
    /// `b`. Leaves the negative Hessian at the mode in `H`.
    void find_mode(Eigen::Index a, Eigen::Index n, const Eigen::VectorXd& eta0,
                   const SmallVec& var, SmallVec& b, SmallMat& H) const {
        const Eigen::Index q = var.size();
        const SmallVec prec = var.cwiseInverse();
        auto objective = [&](const SmallVec& bb) {
            return conditional(a, n, eta0, bb) - 0.5 * bb.dot(prec.cwiseProduct(bb));
        };
        auto curvature = [&](const SmallVec& bb, SmallVec* g) {
            H = prec.asDiagonal();
            if (g) *g = -prec.cwiseProduct(bb);
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto z = Za_.row(a + j);
                const double mu = inv_logit(eta0[a + j] + z.dot(bb));
                if (g) *g += (data_.y[a + j] - mu) * z.transpose();
                const double w = mu * (1.0 - mu);
                for (Eigen::Index r = 0; r < q; ++r)
                    for (Eigen::Index c = 0; c < q; ++c) H(r, c) += w * z[r] * z[c];
            }
        };
        double h = objective(b);
        SmallVec g(q);
        for (int it = 0; it < 100; ++it) {
            curvature(b, &g);
            const SmallVec step = H.llt().solve(g);
            double t = 1.0;
            SmallVec trial = b + step;
            double ht = objective(trial);
            while (!(ht >= h - 1e-12 * std::abs(h)) && t > 1e-8) {
                t *= 0.5;
                trial = b + t * step;
                ht = objective(trial);
            }
            b = trial;
            h = ht;
            if ((t * step).cwiseAbs().maxCoeff() < 1e-10) break;
        }
        curvature(b, nullptr);
    }

    double subject_laplace(Eigen::Index a, Eigen::Index n, const Eigen::VectorXd& eta0,
                           const SmallVec& var, SmallVec& b, Eigen::VectorXd* grad) const {
        const Eigen::Index q = var.size();
        SmallMat H;
        find_mode(a, n, eta0, var, b, H);
        const Eigen::LLT<SmallMat> llt(H);
        const double logdet_h = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double value = conditional(a, n, eta0, b) -
                             0.5 * b.dot(var.cwiseInverse().cwiseProduct(b)) -
                             0.5 * var.array().log().sum() - 0.5 * logdet_h;
        if (!grad) return value;

        // Envelope term plus the log-determinant's dependence on the mode
        // (implicit differentiation of the mode condition).
        const Eigen::Index p = data_.X.cols();
        const SmallMat Hinv = llt.solve(SmallMat::Identity(q, q));
        SmallVec u = SmallVec::Zero(q);
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd XtWZ = Eigen::MatrixXd::Zero(p, q);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto z = Za_.row(a + j);
            const auto x = data_.X.row(a + j);
            const double mu = inv_logit(eta0[a + j] + z.dot(b));
            const double w = mu * (1.0 - mu);
            const double c = z.dot(Hinv * z.transpose());
            const double aj = c * w * (1.0 - 2.0 * mu);
            gb += ((data_.y[a + j] - mu) - 0.5 * aj) * x.transpose();
            u += aj * z.transpose();
            XtWZ += w * x.transpose() * z;
        }
        const SmallVec Hu = Hinv * u;
        gb += 0.5 * XtWZ * Hu;
        grad->head(p) += gb;
        for (Eigen::Index k = 0; k < q; ++k) {
            const double s2 = var[k];
            (*grad)[p + k] += b[k] * b[k] / s2 - 1.0 - Hu[k] * b[k] / s2 + Hinv(k, k) / s2;
        }
        return value;
    }

    double subject_aghq(Eigen::Index a, Eigen::Index n, const Eigen::VectorXd& eta0, double var,
                        SmallVec& b, Eigen::VectorXd* grad) const {
        SmallMat H;
        SmallVec v(1);
        v[0] = var;
        find_mode(a, n, eta0, v, b, H);
        const double bhat = b[0];
        const double scale = std::sqrt(2.0 / H(0, 0));
        const std::size_t K = gh_.nodes.size();
        std::vector<double> terms(K);
        std::vector<double> bk(K);
        SmallVec bvec(1);
        for (std::size_t k = 0; k < K; ++k) {
            const double x = gh_.nodes[k];
            bk[k] = bhat + scale * x;
            bvec[0] = bk[k];
            terms[k] = gh_.log_weights[k] + x * x + conditional(a, n, eta0, bvec) -
                       0.5 * bk[k] * bk[k] / var;
        }
        const double lse = log_sum_exp(terms);
        if (grad) {
            // Exact derivative of the quadrature rule, nodes included: the
            // nodes move with the mode and curvature.
            const Eigen::Index p = data_.X.cols();
            Eigen::VectorXd xwz = Eigen::VectorXd::Zero(p);    // sum w z x
            Eigen::VectorXd xw3 = Eigen::VectorXd::Zero(p);    // sum w (1-2mu) z^2 x
            double w3z3 = 0.0;                                 // sum w (1-2mu) z^3
            for (Eigen::Index j = 0; j < n; ++j) {
                const double z = Za_(a + j, 0);
                const double mu = inv_logit(eta0[a + j] + z * bhat);
                const double w = mu * (1.0 - mu);
                const double t3 = w * (1.0 - 2.0 * mu);
                xwz += w * z * data_.X.row(a + j).transpose();
                xw3 += t3 * z * z * data_.X.row(a + j).transpose();
                w3z3 += t3 * z * z * z;
            }
            const double h = H(0, 0);
            Eigen::VectorXd db(p + 1);
            db.head(p) = -xwz / h;
            db[p] = 2.0 * bhat / var / h;
            Eigen::VectorXd dlog_scale(p + 1);
            dlog_scale.head(p) = -0.5 * (xw3 + w3z3 * db.head(p)) / h;
            dlog_scale[p] = -0.5 * (w3z3 * db[p] - 2.0 / var) / h;

            Eigen::VectorXd g = dlog_scale;
            for (std::size_t k = 0; k < K; ++k) {
                const double pik = std::exp(terms[k] - lse);
                if (pik < 1e-300) continue;
                double dk = -bk[k] / var;
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double z = Za_(a + j, 0);
                    const double r = data_.y[a + j] - inv_logit(eta0[a + j] + z * bk[k]);
                    g.head(p) += pik * r * data_.X.row(a + j).transpose();
                    dk += r * z;
                }
                g[p] += pik * (bk[k] * bk[k] / var - 1.0);
                g += pik * dk * (db + gh_.nodes[k] * scale * dlog_scale);
            }
            *grad += g;
        }
        return std::log(scale) + lse - 0.5 * std::log(2.0 * std::numbers::pi * var);
    }

    const GlmmData& data_;
    std::vector<Eigen::Index> active_;
    Eigen::MatrixXd Za_;
    bool quadrature_;
    GaussHermite gh_;
    mutable std::vector<SmallVec> modes_;
};

}  // namespace detail

/// Log-likelihood of the model at given parameters (variances, not log SDs).
/// Zero variances drop their component. Exposed for cross-checks.
inline double glmm_loglik(const GlmmData& data, const Eigen::VectorXd& beta,
                          const std::vector<double>& variances, Integration integration,
                          int quadrature_nodes = 15) {
    std::vector<Eigen::Index> active;
    for (std::size_t c = 0; c < variances.size(); ++c)
        if (variances[c] > 0.0) active.push_back(static_cast<Eigen::Index>(c));
    if (active.empty()) return bernoulli_loglik(data.y, data.X * beta);
    const bool quad = integration == Integration::AdaptiveGaussHermite ||
                      (integration == Integration::Auto && data.Z.cols() == 1);
    detail::MarginalLikelihood ml(data, active, quad, quadrature_nodes);
    Eigen::VectorXd theta(ml.dim());
    theta.head(beta.size()) = beta;
    for (std::size_t c = 0; c < active.size(); ++c)
        theta[beta.size() + static_cast<Eigen::Index>(c)] =
            0.5 * std::log(variances[static_cast<std::size_t>(active[c])]);
    return ml.loglik(theta, nullptr);
}

/// Mixed-effects logistic regression by maximum marginal likelihood.
/// Intercept-only structures integrate by adaptive Gauss-Hermite
/// quadrature, larger ones by Laplace; the outer problem is BFGS over
/// (beta, log sd). Variance components that collapse are fixed at 0.
inline GlmmFit glmm_logistic_fit(const GlmmData& data, const GlmmOptions& opt = {}) {
    data.validate();
    const Eigen::Index p = data.X.cols();
    const auto q_req = static_cast<std::size_t>(data.Z.cols());
    const bool quadrature = opt.integration == Integration::AdaptiveGaussHermite ||
                            (opt.integration == Integration::Auto && q_req == 1);
    if (quadrature && q_req != 1)
        fail(ErrorCode::InvalidSpec, "quadrature supports one random effect only");

    const LogisticFit glm = logistic_fit(data.X, data.y);

    GlmmFit out;
    out.fixed_names = data.fixed_names;
    out.random_names = data.random_names;
    out.n_obs = data.y.size();
    out.n_subjects = data.n_subjects();
    out.k = static_cast<int>(p + static_cast<Eigen::Index>(q_req));
    out.method = quadrature ? "aghq" + std::to_string(opt.quadrature_nodes) : "laplace";

    std::vector<Eigen::Index> active(q_req);
    for (std::size_t c = 0; c < q_req; ++c) active[c] = static_cast<Eigen::Index>(c);

    // Start: GLM coefficients, unit SDs.
    Eigen::VectorXd beta0 = glm.coefficients;
    bool have = false;
    for (;;) {
        if (active.empty()) {
            out.beta = glm.coefficients;
            out.std_errors = glm.std_errors;
            out.variances.assign(q_req, 0.0);
            out.log_likelihood = glm.log_likelihood;
            const Eigen::VectorXd mu = (data.X * glm.coefficients).unaryExpr(&inv_logit);
            out.gradient_norm = (data.X.transpose() * (data.y - mu)).cwiseAbs().maxCoeff();
            out.converged = glm.converged && out.gradient_norm < opt.report_gradient_tolerance;
            break;
        }
        detail::MarginalLikelihood ml(data, active, quadrature && active.size() == 1,
                                      opt.quadrature_nodes);
        Objective neg = [&](const Eigen::VectorXd& th, Eigen::VectorXd* g) {
            const double v = ml.loglik(th, g);
            if (g) *g = -*g;
            return -v;
        };
        Eigen::VectorXd theta0(ml.dim());
        theta0.head(p) = beta0;
        theta0.tail(static_cast<Eigen::Index>(active.size())).setZero();
        Eigen::MatrixXd H0 = numeric_hessian(neg, theta0);
        Eigen::LLT<Eigen::MatrixXd> llt(H0);
        Eigen::MatrixXd Hinv = llt.info() == Eigen::Success
                                   ? Eigen::MatrixXd(llt.solve(Eigen::MatrixXd::Identity(ml.dim(), ml.dim())))
                                   : Eigen::MatrixXd::Identity(ml.dim(), ml.dim()) * 1e-3;
        OptimResult res = bfgs_minimize(neg, theta0, Hinv, opt.bfgs);
        // Near the optimum the decrease along badly scaled columns (days
        // 1..30) drops below the resolution of the objective and BFGS
        // stalls; Newton steps on the gradient still make progress.
        for (int k = 0; k < 4 && res.gradient.cwiseAbs().maxCoeff() >= opt.bfgs.gradient_tolerance; ++k) {
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(numeric_hessian(neg, res.x));
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
            const Eigen::VectorXd x = res.x - ldlt.solve(res.gradient);
            Eigen::VectorXd g(x.size());
            const double v = neg(x, &g);
            if (!std::isfinite(v) || v > res.value + 1e-9 * (1.0 + std::abs(res.value)) ||
                g.cwiseAbs().maxCoeff() >= res.gradient.cwiseAbs().maxCoeff())
                break;
            res.x = x;
            res.value = v;
            res.gradient = g;
        }
        const double ll = -res.value;

        std::vector<Eigen::Index> keep;
        for (std::size_t c = 0; c < active.size(); ++c)
            if (res.x[p + static_cast<Eigen::Index>(c)] >= opt.boundary_log_sd) keep.push_back(active[c]);

        const bool at_boundary = keep.size() < active.size();
        if (!at_boundary || !have || ll > out.log_likelihood + 1e-6) {
            out.beta = res.x.head(p);
            out.variances.assign(q_req, 0.0);
            for (std::size_t c = 0; c < active.size(); ++c)
                out.variances[static_cast<std::size_t>(active[c])] =
                    std::exp(2.0 * res.x[p + static_cast<Eigen::Index>(c)]);
            out.log_likelihood = ll;
            out.gradient_norm = res.gradient.cwiseAbs().maxCoeff();
            out.converged = out.gradient_norm < opt.report_gradient_tolerance;
            out.iterations += res.iterations;
            const Eigen::MatrixXd H = numeric_hessian(neg, res.x);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
            out.std_errors = lu.isInvertible()
                                 ? Eigen::VectorXd(lu.inverse().diagonal().head(p).cwiseMax(0.0).cwiseSqrt())
                                 : Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
            have = true;
        }
        if (!at_boundary) break;
        // Refit with collapsed components removed; the boundary solution
        // replaces the interior one only if it is at least as likely.
        active = keep;
        beta0 = res.x.head(p);
        if (active.empty()) {
            if (glm.log_likelihood >= out.log_likelihood - 1e-6) continue;
            break;
        }
    }
    out.aic = 2.0 * out.k - 2.0 * out.log_likelihood;
    out.bic = out.k * std::log(static_cast<double>(out.n_obs)) - 2.0 * out.log_likelihood;
    return out;
}

/// Significance marker for a two-sided p-value: dagger < 0.1, * < 0.05, ** < 0.01.
inline std::string significance_stars(double p) {
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return "†";
    return "";
}

struct OddsRatios {
    double treatment_or;
    double control_or;
};

/// Per-unit odds ratios of a slope and its treatment interaction.
inline OddsRatios interaction_odds_ratio(double beta_main, double beta_interaction) {
    return {std::exp(beta_main + beta_interaction), std::exp(beta_main)};
}

}  // namespace incentive_lab::stats
