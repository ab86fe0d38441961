#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "aegis/errors.hpp"
#include "aegis/linalg.hpp"

namespace aegis {

constexpr double kTauFloor = 1e-3;  // guard for the 1/tau_theta terms
constexpr double kTauEps = 1e-5;

template <typename S>
S softplus(S x) {
    return x > S(30) ? x : std::log1p(std::exp(x));
}

template <typename S>
S sigmoid(S x) {
    return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

/// Liquid time constant: softplus(tau_theta) * exp(-dt / tau_theta) + eps.
/// tau_theta is clamped at kTauFloor before use; strictly positive and
/// monotone decreasing in dt.
template <typename S>
S ltc_tau(S delta_t, S tau_theta) {
    S t = tau_theta < S(kTauFloor) ? S(kTauFloor) : tau_theta;
    return softplus(t) * std::exp(-delta_t / t) + S(kTauEps);
}

template <typename S>
struct LtcParams {
    Vec<S> tau_theta; // d_h
    Mat<S> w_h;       // d_h x d_h
    Mat<S> w_x;       // d_h x d
    Vec<S> b;         // d_h

    int d_h() const { return static_cast<int>(tau_theta.size()); }
};

/// One exact exponential step of dh/dt = -h/tau + f over [0, dt] with f
/// frozen at its start-of-interval value:
///   h' = h * exp(-dt/tau) + f * tau * (1 - exp(-dt/tau)),
/// f = tanh(w_h h + w_x x + b), tau per channel from ltc_tau.
template <typename S>
Vec<S> ltc_step(const Vec<S>& h_prev, const S* x, S delta_t, const LtcParams<S>& p) {
    const int d_h = p.d_h();
    Vec<S> pre(d_h);
    matvec(p.w_h, h_prev.data(), pre.data());
    Vec<S> wx(d_h);
    matvec(p.w_x, x, wx.data());
    Vec<S> h(d_h);
    for (int i = 0; i < d_h; ++i) {
        S f = std::tanh(pre[i] + wx[i] + p.b[i]);
        S tau = ltc_tau(delta_t, p.tau_theta[i]);
        S decay = std::exp(-delta_t / tau);
        h[i] = h_prev[i] * decay + f * tau * (S(1) - decay);
    }
    return h;
}

/// phi(x) = (e^x - 1)/x with the series fallback used below |x| < 1e-4.
template <typename S>
S expm1_over_x(S x) {
    if (std::abs(x) < S(1e-4)) return S(1) + x / S(2) + x * x / S(6);
    return std::expm1(x) / x;
}

/// Zero-order hold of dx/dt = a x + b u over a step delta:
///   a_bar = exp(delta a),  b_bar = (delta a)^-1 (exp(delta a) - 1) delta b.
template <typename S>
std::pair<S, S> zoh_discretize(S a, S b, S delta) {
    S x = delta * a;
    return {std::exp(x), expm1_over_x(x) * delta * b};
}

template <typename S>
struct SsmParams {
    Mat<S> a_diag;  // d_h x d_s, strictly negative
    Vec<S> w_delta; // d_h, selection weights over the hidden input
    S w_delta_t = S(0); // selection weight for the normalized IAT column
    S b_delta = S(0);
    Mat<S> w_b; // d_s x d_h
    Mat<S> w_c; // d_s x d_h

    int d_h() const { return a_diag.rows; }
    int d_s() const { return a_diag.cols; }
};

/// Per-step tape kept for the analytic backward pass.
template <typename S>
struct ScanCache {
    Mat<S> states;    // N x (d_h * d_s), post-update state at every step
    Vec<S> delta_raw; // N, pre-softplus selection
    Vec<S> delta;     // N
    Mat<S> b_sel;     // N x d_s
    Mat<S> c_sel;     // N x d_s
};

/// Input-selective diagonal SSM scan (single left-to-right pass, O(N d_h d_s)).
/// Per position k: delta_k = softplus(w_delta . u_k + w_delta_t iat_k + b),
/// B_k = w_b u_k, C_k = w_c u_k; per channel c the d_s-state follows the
/// ZOH recurrence driven by u_k[c] and the output is C_k . s_k.
template <typename S>
Mat<S> selective_scan(const Mat<S>& inputs, const Vec<S>& iat_norm, const SsmParams<S>& p,
                      ScanCache<S>* cache = nullptr, Vec<S>* final_state = nullptr) {
    const int n = inputs.rows;
    const int d_h = p.d_h();
    const int d_s = p.d_s();
    if (inputs.cols != d_h || static_cast<int>(iat_norm.size()) != n)
        throw Error(ErrorCode::DimMismatch, "selective_scan: shape mismatch");

    Mat<S> out(n, d_h);
    Vec<S> state(static_cast<size_t>(d_h) * d_s, S(0));
    Vec<S> b_sel(d_s), c_sel(d_s);

    if (cache) {
        cache->states = Mat<S>(n, d_h * d_s);
        cache->delta_raw.assign(n, S(0));
        cache->delta.assign(n, S(0));
        cache->b_sel = Mat<S>(n, d_s);
        cache->c_sel = Mat<S>(n, d_s);
    }

    for (int k = 0; k < n; ++k) {
        const S* u = inputs[k];
        S draw = dot(p.w_delta.data(), u, d_h) + p.w_delta_t * iat_norm[k] + p.b_delta;
        S delta = softplus(draw);
        matvec(p.w_b, u, b_sel.data());
        matvec(p.w_c, u, c_sel.data());

        for (int c = 0; c < d_h; ++c) {
            S* s = state.data() + static_cast<size_t>(c) * d_s;
            const S* a_row = p.a_diag[c];
            S y = S(0);
            for (int j = 0; j < d_s; ++j) {
                S x = delta * a_row[j];
                S a_bar = std::exp(x);
                S b_bar = expm1_over_x(x) * delta * b_sel[j];
                s[j] = a_bar * s[j] + b_bar * u[c];
                y += c_sel[j] * s[j];
            }
            out[k][c] = y;
        }

        if (cache) {
            std::copy(state.begin(), state.end(), cache->states[k]);
            cache->delta_raw[k] = draw;
            cache->delta[k] = delta;
            std::copy(b_sel.begin(), b_sel.end(), cache->b_sel[k]);
            std::copy(c_sel.begin(), c_sel.end(), cache->c_sel[k]);
        }
    }
    if (final_state) *final_state = state;
    return out;
}

/// Reference recurrence with frozen scalar coefficients and d_s = 1. Used by
/// diagnostics and the linearity checks, where input dependence is disabled.
template <typename S>
Mat<S> frozen_scan(const Mat<S>& inputs, S a_bar, S b_bar, S c) {
    Mat<S> out(inputs.rows, inputs.cols);
    Vec<S> state(inputs.cols, S(0));
    for (int k = 0; k < inputs.rows; ++k)
        for (int ch = 0; ch < inputs.cols; ++ch) {
            state[ch] = a_bar * state[ch] + b_bar * inputs[k][ch];
            out[k][ch] = c * state[ch];
        }
    return out;
}

/// Per-position scalar reduction feeding the entropy detector: row norms.
template <typename S>
Vec<S> reduce_scores(const Mat<S>& ssm_outputs) {
    Vec<S> scores(ssm_outputs.rows);
    for (int k = 0; k < ssm_outputs.rows; ++k) scores[k] = norm2(ssm_outputs[k], ssm_outputs.cols);
    return scores;
}

/// Hidden-state record of one window's pass through the sequence core.
template <typename S>
struct HiddenTrajectory {
    Mat<S> ltc_states;  // N x d_h
    Mat<S> ssm_outputs; // N x d_h
    Vec<S> scores;      // N, row norms of ssm_outputs
};

} // namespace aegis
