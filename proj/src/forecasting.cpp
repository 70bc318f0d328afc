#include "pocaii/forecasting.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pocaii/stats.hpp"

namespace pocaii {

namespace {
constexpr double kVarianceFloor = 1e-10;
constexpr double kFallbackShortVariance = 1e-4;
constexpr double kStationarityEdge = 0.999;
constexpr double kStationarityTarget = 0.995;

//: innovations under conditional least squares; e_t = 0 for t < max(p,q)
std::vector<double> innovations(std::span<const double> w, std::span<const double> ar,
                                std::span<const double> ma) {
    const int p = static_cast<int>(ar.size());
    const int q = static_cast<int>(ma.size());
    const int m0 = std::max(p, q);
    std::vector<double> e(w.size(), 0.0);
    for (int t = m0; t < static_cast<int>(w.size()); ++t) {
        double pred = 0.0;
        for (int l = 1; l <= p; ++l) pred += ar[l - 1] * w[t - l];
        for (int v = 1; v <= q; ++v) pred += ma[v - 1] * e[t - v];
        e[t] = w[t] - pred;
    }
    return e;
}

double css_objective(std::span<const double> w, std::span<const double> ar,
                     std::span<const double> ma) {
    const int m0 = static_cast<int>(std::max(ar.size(), ma.size()));
    const auto e = innovations(w, ar, ma);
    double s = 0.0;
    for (std::size_t t = m0; t < e.size(); ++t) s += e[t] * e[t];
    return s;
}

double max_companion_modulus(std::span<const double> ar) {
    const int p = static_cast<int>(ar.size());
    if (p == 0) return 0.0;
    if (p == 1) return std::abs(ar[0]);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
    for (int j = 0; j < p; ++j) c(0, j) = ar[j];
    for (int j = 1; j < p; ++j) c(j, j - 1) = 1.0;
    const auto eig = Eigen::EigenSolver<Eigen::MatrixXd>(c, false).eigenvalues();
    double m = 0.0;
    for (int j = 0; j < p; ++j) m = std::max(m, std::abs(eig[j]));
    return m;
}

//: shrink AR coefficients until every companion eigenvalue modulus < 0.999
void project_stationary(std::vector<double>& ar) {
    for (int pass = 0; pass < 32; ++pass) {
        const double mod = max_companion_modulus(ar);
        if (mod < kStationarityEdge) return;
        // scaling ar[l] by c^(l+1) rescales every root by c
        const double c = kStationarityTarget / mod;
        double f = 1.0;
        for (auto& a : ar) {
            f *= c;
            a *= f;
        }
    }
}

//: least squares of y on columns X (rank-deficiency tolerated)
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return X.colPivHouseholderQr().solve(y);
}

//: Hannan-Rissanen starting point for ARMA with q > 0
void init_arma(std::span<const double> w, int p, int q, std::vector<double>& ar,
               std::vector<double>& ma) {
    const int n = static_cast<int>(w.size());
    ar.assign(p, 0.0);
    ma.assign(q, 0.0);
    const int h = std::min(n / 3, p + q + 8);
    if (h < 1 || n - h < p + q + 1) return;
    Eigen::MatrixXd Xl(n - h, h);
    Eigen::VectorXd yl(n - h);
    for (int t = h; t < n; ++t) {
        yl(t - h) = w[t];
        for (int l = 1; l <= h; ++l) Xl(t - h, l - 1) = w[t - l];
    }
    const Eigen::VectorXd phi_long = solve_ls(Xl, yl);
    std::vector<double> resid(n, 0.0);
    for (int t = h; t < n; ++t) {
        double pred = 0.0;
        for (int l = 1; l <= h; ++l) pred += phi_long(l - 1) * w[t - l];
        resid[t] = w[t] - pred;
    }
    const int t0 = std::max(h + q, p);
    if (n - t0 < p + q + 1) return;
    Eigen::MatrixXd X(n - t0, p + q);
    Eigen::VectorXd y(n - t0);
    for (int t = t0; t < n; ++t) {
        y(t - t0) = w[t];
        for (int l = 1; l <= p; ++l) X(t - t0, l - 1) = w[t - l];
        for (int v = 1; v <= q; ++v) X(t - t0, p + v - 1) = resid[t - v];
    }
    const Eigen::VectorXd b = solve_ls(X, y);
    for (int l = 0; l < p; ++l) ar[l] = b(l);
    for (int v = 0; v < q; ++v) ma[v] = b(p + v);
}

//: Gauss-Newton with Levenberg damping on the CSS objective (q > 0 path)
void refine_arma(std::span<const double> w, std::vector<double>& ar, std::vector<double>& ma) {
    const int p = static_cast<int>(ar.size());
    const int q = static_cast<int>(ma.size());
    const int m0 = std::max(p, q);
    const int n = static_cast<int>(w.size());
    const int rows = n - m0;
    const int dim = p + q;
    if (rows <= dim) return;

    double lambda = 1e-3;
    double best = css_objective(w, ar, ma);
    for (int iter = 0; iter < 100; ++iter) {
        // residuals and analytic derivative recursions
        std::vector<double> e(n, 0.0);
        std::vector<std::vector<double>> de(dim, std::vector<double>(n, 0.0));
        for (int t = m0; t < n; ++t) {
            double pred = 0.0;
            for (int l = 1; l <= p; ++l) pred += ar[l - 1] * w[t - l];
            for (int v = 1; v <= q; ++v) pred += ma[v - 1] * e[t - v];
            e[t] = w[t] - pred;
            for (int j = 0; j < dim; ++j) {
                double d = j < p ? -w[t - (j + 1)] : -e[t - (j - p + 1)];
                for (int v = 1; v <= q; ++v) d -= ma[v - 1] * de[j][t - v];
                de[j][t] = d;
            }
        }
        Eigen::MatrixXd J(rows, dim);
        Eigen::VectorXd r(rows);
        for (int t = m0; t < n; ++t) {
            r(t - m0) = e[t];
            for (int j = 0; j < dim; ++j) J(t - m0, j) = de[j][t];
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd Jtr = J.transpose() * r;
        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd A = JtJ;
            for (int j = 0; j < dim; ++j) A(j, j) += lambda * std::max(JtJ(j, j), 1e-12);
            const Eigen::VectorXd step = A.ldlt().solve(Jtr);
            std::vector<double> ar2 = ar, ma2 = ma;
            for (int l = 0; l < p; ++l) ar2[l] -= step(l);
            for (int v = 0; v < q; ++v) ma2[v] -= step(p + v);
            const double cand = css_objective(w, ar2, ma2);
            if (std::isfinite(cand) && cand < best) {
                const double gain = (best - cand) / std::max(best, 1e-300);
                ar = std::move(ar2);
                ma = std::move(ma2);
                best = cand;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (gain < 1e-12) return;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) return;
    }
}

ArimaTail make_tail(std::span<const double> series, std::span<const double> w,
                    std::span<const double> resid, int p, int q, int d) {
    ArimaTail tail;
    const int keep_w = std::min<int>(p, static_cast<int>(w.size()));
    tail.diff_recent.assign(w.end() - keep_w, w.end());
    const int keep_e = std::min<int>(q, static_cast<int>(resid.size()));
    tail.resid_recent.assign(resid.end() - keep_e, resid.end());
    std::vector<double> level(series.begin(), series.end());
    for (int j = 0; j < d; ++j) {
        tail.level_tail.push_back(level.back());
        level = difference(level, 1);
    }
    return tail;
}

}  // namespace

double LossSeries::latest() const {
    if (scores.empty()) throw std::logic_error("LossSeries::latest: empty series");
    return scores.back();
}

std::vector<double> difference(std::span<const double> series, int levels) {
    if (levels < 0) throw std::invalid_argument("difference: negative level count");
    if (static_cast<std::size_t>(levels) >= series.size() && levels > 0)
        throw std::invalid_argument("difference: series too short");
    std::vector<double> w(series.begin(), series.end());
    for (int j = 0; j < levels; ++j) {
        std::vector<double> next(w.size() - 1);
        for (std::size_t i = 0; i + 1 < w.size(); ++i) next[i] = w[i + 1] - w[i];
        w = std::move(next);
    }
    return w;
}

bool fit_feasible(std::size_t series_length, const ArimaOrder& order) {
    if (series_length <= static_cast<std::size_t>(order.diff)) return false;
    const std::size_t diffed = series_length - static_cast<std::size_t>(order.diff);
    return diffed >= static_cast<std::size_t>(order.ar + order.ma + 2);
}

FittedArima fit_arima(std::span<const double> series, const ArimaOrder& order) {
    if (order.ar < 0 || order.diff < 0 || order.ma < 0)
        throw std::invalid_argument("fit_arima: negative order component");
    if (!fit_feasible(series.size(), order))
        throw std::invalid_argument("fit_arima: differenced series shorter than p+q+2");

    const auto w = difference(series, order.diff);
    const int p = order.ar;
    const int q = order.ma;
    const int n = static_cast<int>(w.size());
    const int m0 = std::max(p, q);

    // fit on the demeaned scale and keep the mean as an intercept: a nonzero
    // mean (e.g. a steady trend after differencing) would otherwise force a
    // unit root that the stationarity projection then destroys
    const double mu = mean_of(w);
    std::vector<double> wc(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) wc[i] = w[i] - mu;

    std::vector<double> ar(p, 0.0), ma(q, 0.0);
    if (q == 0 && p > 0) {
        Eigen::MatrixXd X(n - p, p);
        Eigen::VectorXd y(n - p);
        for (int t = p; t < n; ++t) {
            y(t - p) = wc[t];
            for (int l = 1; l <= p; ++l) X(t - p, l - 1) = wc[t - l];
        }
        const Eigen::VectorXd b = solve_ls(X, y);
        for (int l = 0; l < p; ++l) ar[l] = b(l);
    } else if (q > 0) {
        init_arma(wc, p, q, ar, ma);
        project_stationary(ar);
        refine_arma(wc, ar, ma);
    }
    project_stationary(ar);

    const auto resid = innovations(wc, ar, ma);
    double ss = 0.0;
    for (int t = m0; t < n; ++t) ss += resid[t] * resid[t];

    FittedArima fit;
    fit.order = order;
    fit.ar_coef = std::move(ar);
    fit.ma_coef = std::move(ma);
    fit.innovation_variance = ss / static_cast<double>(n - m0);
    fit.tail = make_tail(series, w, resid, p, q, order.diff);
    double ar_sum = 0.0;
    for (double c : fit.ar_coef) ar_sum += c;
    fit.tail.drift = mu * (1.0 - ar_sum);  // intercept form of the mean
    return fit;
}

FittedArima fit_arima(const LossSeries& series, const ArimaOrder& order) {
    return fit_arima(std::span<const double>(series.scores), order);
}

FittedArima fallback_fit(std::span<const double> series) {
    if (series.empty()) throw std::invalid_argument("fallback_fit: empty series");
    FittedArima fit;
    fit.order = {0, 1, 0};
    fit.fallback = true;
    fit.tail.level_tail.push_back(series.back());
    if (series.size() >= 2) {
        const auto d = difference(series, 1);
        fit.tail.drift = mean_of(d);
        fit.innovation_variance =
            series.size() < 3 ? kFallbackShortVariance : sample_variance(d);
    } else {
        fit.tail.drift = 0.0;
        fit.innovation_variance = kFallbackShortVariance;
    }
    return fit;
}

FittedArima fallback_fit(const LossSeries& series) {
    return fallback_fit(std::span<const double>(series.scores));
}

FittedArima fit_or_fallback(const LossSeries& series, const ArimaOrder& order) {
    if (fit_feasible(series.size(), order)) return fit_arima(series, order);
    return fallback_fit(series);
}

std::vector<double> psi_weights(const FittedArima& fit, int h) {
    if (h < 0) throw std::invalid_argument("psi_weights: negative horizon");
    const int p = static_cast<int>(fit.ar_coef.size());
    const int q = static_cast<int>(fit.ma_coef.size());
    std::vector<double> psi(h + 1, 0.0);
    psi[0] = 1.0;
    for (int j = 1; j <= h; ++j) {
        double v = j <= q ? fit.ma_coef[j - 1] : 0.0;
        for (int l = 1; l <= std::min(j, p); ++l) v += fit.ar_coef[l - 1] * psi[j - l];
        psi[j] = v;
    }
    return psi;
}

Forecast forecast(const FittedArima& fit, int h) {
    if (h < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
    const int p = static_cast<int>(fit.ar_coef.size());
    const int q = static_cast<int>(fit.ma_coef.size());

    // mean: recursive prediction on the differenced scale, then re-integrate
    std::vector<double> wlags = fit.tail.diff_recent;   // newest last
    std::vector<double> elags = fit.tail.resid_recent;  // newest last
    std::vector<double> heads = fit.tail.level_tail;    // level_tail[j], j < diff
    double mean = heads.empty() ? 0.0 : heads[0];
    for (int s = 1; s <= h; ++s) {
        double w = fit.tail.drift;
        for (int l = 1; l <= p; ++l) {
            const int idx = static_cast<int>(wlags.size()) - l;
            w += fit.ar_coef[l - 1] * (idx >= 0 ? wlags[idx] : 0.0);
        }
        for (int v = 1; v <= q; ++v) {
            const int idx = static_cast<int>(elags.size()) - v;
            // future innovations are zero; elags grows with zeros as we step
            w += fit.ma_coef[v - 1] * (idx >= 0 ? elags[idx] : 0.0);
        }
        wlags.push_back(w);
        elags.push_back(0.0);
        if (fit.order.diff == 0) {
            mean = w;
        } else {
            for (int j = fit.order.diff - 1; j >= 0; --j)
                heads[j] += j == fit.order.diff - 1 ? w : heads[j + 1];
            mean = heads[0];
        }
    }

    // variance: psi-weights of the integrated process
    std::vector<double> psi = psi_weights(fit, h - 1);
    for (int j = 0; j < fit.order.diff; ++j)
        for (std::size_t i = 1; i < psi.size(); ++i) psi[i] += psi[i - 1];
    double s2 = 0.0;
    for (double v : psi) s2 += v * v;

    Forecast f;
    f.horizon = h;
    f.mean = mean;
    f.variance = std::max(fit.innovation_variance * s2, kVarianceFloor);
    return f;
}

}  // namespace pocaii
