#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pocaii {

//! Scores of one trial on a fixed budget grid: measurement i sits at budget
//! interval*(i+1). The grid never has gaps; appends validate against it.
struct LossSeries {
    int interval = 1;  // budget units between consecutive measurements (m)
    std::vector<double> scores;

    std::size_t size() const { return scores.size(); }
    bool empty() const { return scores.empty(); }
    double latest() const;
    long long budget_at(std::size_t i) const { return static_cast<long long>(interval) * (i + 1); }
    long long last_budget() const { return static_cast<long long>(interval) * scores.size(); }
};

struct ArimaOrder {
    int ar = 3;
    int diff = 1;
    int ma = 0;
};

//! Everything forecast() needs beyond the coefficients: recent values of the
//! differenced series (newest last), recent residuals, the last value of each
//! differencing level (level_tail[j] = last value of the j-times-differenced
//! series), and the drift used by the short-series fallback.
struct ArimaTail {
    std::vector<double> diff_recent;
    std::vector<double> resid_recent;
    std::vector<double> level_tail;
    double drift = 0.0;
};

struct FittedArima {
    ArimaOrder order;
    std::vector<double> ar_coef;
    std::vector<double> ma_coef;
    double innovation_variance = 0.0;
    ArimaTail tail;
    bool fallback = false;
};

struct Forecast {
    int horizon = 1;
    double mean = 0.0;
    double variance = 0.0;
};

//! apply the lag-1 difference operator `levels` times
std::vector<double> difference(std::span<const double> series, int levels);

//! Conditional least squares: innovations before index max(p,q) of the
//! differenced series are zero; sigma^2 = mean squared residual. AR
//! coefficients are projected into the stationarity region (companion-matrix
//! eigenvalue moduli < 0.999) by scaling toward zero.
FittedArima fit_arima(std::span<const double> series, const ArimaOrder& order);
FittedArima fit_arima(const LossSeries& series, const ArimaOrder& order);

//! Random walk with drift, encoded as order (0,1,0): drift = mean first
//! difference, sigma^2 = sample variance of differences (1e-4 when the
//! series is shorter than 3 points).
FittedArima fallback_fit(std::span<const double> series);
FittedArima fallback_fit(const LossSeries& series);

//! true when the differenced series is long enough for fit_arima
bool fit_feasible(std::size_t series_length, const ArimaOrder& order);

//! fit_arima when feasible, otherwise fallback_fit
FittedArima fit_or_fallback(const LossSeries& series, const ArimaOrder& order);

//! psi_0..psi_h of the ARMA part (psi_0 = 1)
std::vector<double> psi_weights(const FittedArima& fit, int h);

//! Mean by recursive prediction re-integrated diff-many times; variance =
//! sigma^2 * sum of squared psi-weights of the integrated process over the
//! first h terms, floored at 1e-10.
Forecast forecast(const FittedArima& fit, int h);

}  // namespace pocaii
