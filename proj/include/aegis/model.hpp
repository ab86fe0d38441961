#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "aegis/dynamics.hpp"
#include "aegis/errors.hpp"
#include "aegis/linalg.hpp"
#include "aegis/physics.hpp"
#include "aegis/poincare.hpp"
#include "aegis/tvd.hpp"

namespace aegis {

struct Hyper {
    int d = 16;   // ball dimension
    int d_h = 32; // hidden width
    int d_s = 8;  // SSM state per channel
    int n = 100;  // window length

    bool operator==(const Hyper&) const = default;
};

struct FocalConfig {
    double gamma = 2.0;
    double alpha = 0.75;
};

/// Freeze flags per parameter group; frozen groups get exactly zero gradient.
struct ParamMask {
    bool projection = false;
    bool ltc = false;
    bool ssm = false;
    bool head = false;
};

/// Every learnable tensor of the network plus the entropy baseline and the
/// normalization statistics it was trained with.
template <typename S>
struct ModelParams {
    Hyper hyper;
    Mat<S> w_p; // d x 6 projection
    LtcParams<S> ltc;
    SsmParams<S> ssm;
    Vec<S> head_w; // d_h
    S head_b = S(0);
    TvdConfig tvd;
    NormStats stats;

    static ModelParams zeros(const Hyper& h) {
        ModelParams p;
        p.hyper = h;
        p.w_p = Mat<S>(h.d, kDims);
        p.ltc.tau_theta.assign(h.d_h, S(0));
        p.ltc.w_h = Mat<S>(h.d_h, h.d_h);
        p.ltc.w_x = Mat<S>(h.d_h, h.d);
        p.ltc.b.assign(h.d_h, S(0));
        p.ssm.a_diag = Mat<S>(h.d_h, h.d_s);
        p.ssm.w_delta.assign(h.d_h, S(0));
        p.ssm.w_b = Mat<S>(h.d_s, h.d_h);
        p.ssm.w_c = Mat<S>(h.d_s, h.d_h);
        p.head_w.assign(h.d_h, S(0));
        p.tvd.baseline_entropy = std::log2(static_cast<double>(h.n));
        return p;
    }

    /// Seed-deterministic initialization; draws happen in tensor order.
    static ModelParams init(const Hyper& h, uint64_t seed) {
        ModelParams p = zeros(h);
        std::mt19937_64 rng(seed);
        auto fill_xavier = [&rng](Mat<S>& m, int fan_in, int fan_out) {
            double a = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-a, a);
            for (auto& v : m.a) v = static_cast<S>(dist(rng));
        };
        fill_xavier(p.w_p, kDims, h.d);
        {
            std::uniform_real_distribution<double> dist(0.5, 1.5);
            for (auto& v : p.ltc.tau_theta) v = static_cast<S>(dist(rng));
        }
        fill_xavier(p.ltc.w_h, h.d_h, h.d_h);
        fill_xavier(p.ltc.w_x, h.d, h.d_h);
        // b stays zero
        {
            std::uniform_real_distribution<double> jitter(0.0, 0.1);
            for (int c = 0; c < h.d_h; ++c)
                for (int j = 0; j < h.d_s; ++j)
                    p.ssm.a_diag[c][j] = static_cast<S>(-0.5 * (1 + j) - jitter(rng));
        }
        {
            std::uniform_real_distribution<double> dist(-0.1, 0.1);
            for (auto& v : p.ssm.w_delta) v = static_cast<S>(dist(rng));
            p.ssm.w_delta_t = static_cast<S>(dist(rng));
            p.ssm.b_delta = S(0);
        }
        fill_xavier(p.ssm.w_b, h.d_h, h.d_s);
        fill_xavier(p.ssm.w_c, h.d_h, h.d_s);
        {
            std::uniform_real_distribution<double> dist(-0.1, 0.1);
            for (auto& v : p.head_w) v = static_cast<S>(dist(rng));
        }
        return p;
    }

    struct TensorRef {
        const char* name;
        S* data;
        size_t count;
        int rank;
        int dims[2];
    };

    /// Enumerate learnable tensors in the fixed serialization order.
    template <typename F>
    void visit(F&& f) {
        f(TensorRef{"w_p", w_p.a.data(), w_p.size(), 2, {w_p.rows, w_p.cols}});
        f(TensorRef{"tau_theta", ltc.tau_theta.data(), ltc.tau_theta.size(), 1, {(int)ltc.tau_theta.size(), 0}});
        f(TensorRef{"w_h", ltc.w_h.a.data(), ltc.w_h.size(), 2, {ltc.w_h.rows, ltc.w_h.cols}});
        f(TensorRef{"w_x", ltc.w_x.a.data(), ltc.w_x.size(), 2, {ltc.w_x.rows, ltc.w_x.cols}});
        f(TensorRef{"b", ltc.b.data(), ltc.b.size(), 1, {(int)ltc.b.size(), 0}});
        f(TensorRef{"a_diag", ssm.a_diag.a.data(), ssm.a_diag.size(), 2, {ssm.a_diag.rows, ssm.a_diag.cols}});
        f(TensorRef{"w_delta", ssm.w_delta.data(), ssm.w_delta.size(), 1, {(int)ssm.w_delta.size(), 0}});
        f(TensorRef{"w_delta_t", &ssm.w_delta_t, 1, 0, {0, 0}});
        f(TensorRef{"b_delta", &ssm.b_delta, 1, 0, {0, 0}});
        f(TensorRef{"w_b", ssm.w_b.a.data(), ssm.w_b.size(), 2, {ssm.w_b.rows, ssm.w_b.cols}});
        f(TensorRef{"w_c", ssm.w_c.a.data(), ssm.w_c.size(), 2, {ssm.w_c.rows, ssm.w_c.cols}});
        f(TensorRef{"head_w", head_w.data(), head_w.size(), 1, {(int)head_w.size(), 0}});
        f(TensorRef{"head_b", &head_b, 1, 0, {0, 0}});
    }

    size_t param_count() {
        size_t total = 0;
        visit([&total](const TensorRef& t) { total += t.count; });
        return total;
    }
};

template <typename S>
struct ForwardArtifacts {
    S logit = S(0);
    S probability = S(0); // sigmoid(logit)
    HiddenTrajectory<S> trajectory;
    double entropy = 0.0; // bits
    bool finite = true;   // false flags a corrupted window (see trainer)
};

/// Tapes kept by forward for the analytic backward pass.
template <typename S>
struct ForwardCache {
    Mat<S> z;           // n x d, W_p x before ball normalization
    Vec<S> clamp_scale; // n, ball clamp rescale (1 when untouched)
    Mat<S> ball;        // n x d
    Mat<S> f;           // n x d_h, tanh drive
    Mat<S> tau;         // n x d_h
    Mat<S> decay;       // n x d_h, exp(-dt/tau)
    Vec<S> iat_raw;     // n, de-normalized seconds
    Vec<S> iat_norm;    // n, normalized feature column
    ScanCache<S> scan;
    Vec<double> probs; // n, position softmax evaluated in double
    Vec<S> pool;       // d_h
};

namespace detail {

/// Shared LTC step arithmetic; forward and the standalone op must agree
/// bit-for-bit, so both route through here.
template <typename S>
void ltc_step_tape(const S* h_prev, const S* ball, S dt, const LtcParams<S>& p, S* f_out,
                   S* tau_out, S* decay_out, S* h_out) {
    const int d_h = p.d_h();
    Vec<S> pre(d_h);
    matvec(p.w_h, h_prev, pre.data());
    Vec<S> wx(d_h);
    matvec(p.w_x, ball, wx.data());
    for (int i = 0; i < d_h; ++i) {
        S f = std::tanh(pre[i] + wx[i] + p.b[i]);
        S tau = ltc_tau(dt, p.tau_theta[i]);
        S decay = std::exp(-dt / tau);
        f_out[i] = f;
        tau_out[i] = tau;
        decay_out[i] = decay;
        h_out[i] = h_prev[i] * decay + f * tau * (S(1) - decay);
    }
}

} // namespace detail

/// Full pipeline over one normalized window: ball projection, LTC steps
/// driven by the raw-scale IAT, selective scan, mean-pool head, and the
/// entropy of the position softmax over hidden-score norms.
template <typename S>
ForwardArtifacts<S> forward(const Mat<S>& x, const ModelParams<S>& mp,
                            ForwardCache<S>* cache = nullptr) {
    const Hyper& hy = mp.hyper;
    const int n = x.rows;
    if (x.cols != kDims) throw Error(ErrorCode::DimMismatch, "forward: window must have 6 columns");
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "forward: empty window");

    ForwardArtifacts<S> art;
    art.trajectory.ltc_states = Mat<S>(n, hy.d_h);
    art.trajectory.ssm_outputs = Mat<S>(n, hy.d_h);

    ForwardCache<S> local;
    ForwardCache<S>& tape = cache ? *cache : local;
    tape.z = Mat<S>(n, hy.d);
    tape.clamp_scale.assign(n, S(1));
    tape.ball = Mat<S>(n, hy.d);
    tape.f = Mat<S>(n, hy.d_h);
    tape.tau = Mat<S>(n, hy.d_h);
    tape.decay = Mat<S>(n, hy.d_h);
    tape.iat_raw.assign(n, S(0));
    tape.iat_norm.assign(n, S(0));

    // Projection into the ball + raw IAT recovery.
    for (int k = 0; k < n; ++k) {
        const S* row = x[k];
        for (int c = 0; c < kDims; ++c)
            if (!std::isfinite(row[c]))
                throw Error(ErrorCode::NonFiniteInput, "forward: non-finite feature");
        tape.iat_norm[k] = row[COL_IAT];
        tape.iat_raw[k] =
            static_cast<S>(denormalize_scale(static_cast<double>(row[COL_IAT]), mp.stats, 1));

        matvec(mp.w_p, row, tape.z[k]);
        S r = norm2(tape.z[k], hy.d);
        S g = S(1) / (S(1) + r + S(kBallEps));
        for (int c = 0; c < hy.d; ++c) tape.ball[k][c] = tape.z[k][c] * g;
        tape.clamp_scale[k] = ball_clamp(tape.ball[k], hy.d);
    }

    // LTC steps, h_0 = 0.
    {
        Vec<S> h(hy.d_h, S(0));
        for (int k = 0; k < n; ++k) {
            detail::ltc_step_tape(h.data(), tape.ball[k], tape.iat_raw[k], mp.ltc, tape.f[k],
                                  tape.tau[k], tape.decay[k], art.trajectory.ltc_states[k]);
            std::copy(art.trajectory.ltc_states[k], art.trajectory.ltc_states[k] + hy.d_h,
                      h.begin());
        }
    }

    art.trajectory.ssm_outputs =
        selective_scan(art.trajectory.ltc_states, tape.iat_norm, mp.ssm, &tape.scan);
    art.trajectory.scores = reduce_scores(art.trajectory.ssm_outputs);

    // Head: mean pool over positions, affine, sigmoid.
    tape.pool.assign(hy.d_h, S(0));
    for (int k = 0; k < n; ++k)
        for (int c = 0; c < hy.d_h; ++c) tape.pool[c] += art.trajectory.ssm_outputs[k][c];
    for (auto& v : tape.pool) v /= static_cast<S>(n);
    art.logit = dot(mp.head_w.data(), tape.pool.data(), hy.d_h) + mp.head_b;
    art.probability = sigmoid(art.logit);

    if (!all_finite(art.trajectory.scores.data(), art.trajectory.scores.size()) ||
        !std::isfinite(static_cast<double>(art.logit))) {
        art.finite = false;
        art.entropy = std::numeric_limits<double>::quiet_NaN();
        return art;
    }
    // Entropy always runs at double precision so the distribution check and
    // the bits scale hold regardless of the network scalar type.
    Vec<double> scores_d(n);
    for (int k = 0; k < n; ++k) scores_d[k] = static_cast<double>(art.trajectory.scores[k]);
    tape.probs = position_softmax(scores_d);
    art.entropy = shannon_entropy(tape.probs);
    return art;
}

constexpr double kProbClamp = 1e-7;

/// Focal loss on the clamped probability: -alpha_t (1 - p_t)^gamma ln(p_t).
template <typename S>
S focal_loss(S p, int label, double gamma, double alpha) {
    double pc = std::min(std::max(static_cast<double>(p), kProbClamp), 1.0 - kProbClamp);
    double p_t = label == 1 ? pc : 1.0 - pc;
    double alpha_t = label == 1 ? alpha : 1.0 - alpha;
    return static_cast<S>(-alpha_t * std::pow(1.0 - p_t, gamma) * std::log(p_t));
}

/// Focal term plus the benign-scoped entropy term.
template <typename S>
double total_loss(const ForwardArtifacts<S>& art, int label, const TvdConfig& tvd,
                  const FocalConfig& fc) {
    return static_cast<double>(focal_loss(art.probability, label, fc.gamma, fc.alpha)) +
           thermo_loss(art.entropy, label, tvd);
}

/// Exact reverse-mode gradients of
///   focal_weight * focal + thermo_weight * (lambda baseline - H)
/// with respect to every learnable tensor, accumulated into `grads`.
/// thermo_weight already carries the benign-only scoping. Frozen groups in
/// `mask` receive exactly zero.
template <typename S>
void backward(const Mat<S>& x, int label, const ModelParams<S>& mp,
              const ForwardArtifacts<S>& art, const ForwardCache<S>& tape, const FocalConfig& fc,
              S focal_weight, S thermo_weight, ModelParams<S>& grads,
              const ParamMask* mask = nullptr) {
    const Hyper& hy = mp.hyper;
    const int n = x.rows;
    const double ln2 = std::log(2.0);

    // Head path: d loss / d logit through the clamped focal term.
    S dlogit = S(0);
    {
        double p = static_cast<double>(art.probability);
        if (p > kProbClamp && p < 1.0 - kProbClamp) {
            double p_t = label == 1 ? p : 1.0 - p;
            double alpha_t = label == 1 ? fc.alpha : 1.0 - fc.alpha;
            double q = 1.0 - p_t;
            // d/dp_t [-a q^g ln p_t] = a g q^(g-1) ln p_t - a q^g / p_t
            double dfocal_dpt = (fc.gamma == 0.0 ? 0.0
                                                 : alpha_t * fc.gamma * std::pow(q, fc.gamma - 1.0) *
                                                       std::log(p_t)) -
                                alpha_t * std::pow(q, fc.gamma) / p_t;
            double dpt_dp = label == 1 ? 1.0 : -1.0;
            dlogit = static_cast<S>(static_cast<double>(focal_weight) * dfocal_dpt * dpt_dp * p *
                                    (1.0 - p));
        }
    }

    // Entropy path: d loss / d H in bits.
    const double dH = label == 0 ? -static_cast<double>(thermo_weight) : 0.0;

    // dY: gradient on the SSM outputs from the pooled head and from the
    // softmax-entropy over score norms.
    Mat<S> dY(n, hy.d_h);
    {
        const S pool_scale = dlogit / static_cast<S>(n);
        for (int k = 0; k < n; ++k)
            for (int c = 0; c < hy.d_h; ++c) dY[k][c] = pool_scale * mp.head_w[c];
        grads.head_b += dlogit;
        for (int c = 0; c < hy.d_h; ++c) grads.head_w[c] += dlogit * tape.pool[c];

        if (dH != 0.0) {
            const double H = art.entropy;
            for (int k = 0; k < n; ++k) {
                double pk = static_cast<double>(tape.probs[k]);
                if (pk <= 0.0) continue;
                // dH/ds_k = -P_k (log2 P_k + H); H is already in bits.
                double dscore = dH * (-pk * (std::log(pk) / ln2 + H));
                S sk = art.trajectory.scores[k];
                if (sk > S(0)) {
                    S scale = static_cast<S>(dscore) / sk;
                    for (int c = 0; c < hy.d_h; ++c)
                        dY[k][c] += scale * art.trajectory.ssm_outputs[k][c];
                }
            }
        }
    }

    // Selective-scan backward; dV collects gradients on the LTC states.
    Mat<S> dV(n, hy.d_h);
    {
        const int d_h = hy.d_h, d_s = hy.d_s;
        Vec<S> ds_carry(static_cast<size_t>(d_h) * d_s, S(0));
        Vec<S> dB(d_s), dC(d_s);
        const Vec<S> zero_state(static_cast<size_t>(d_h) * d_s, S(0));
        for (int k = n - 1; k >= 0; --k) {
            const S* u = art.trajectory.ltc_states[k];
            const S* s_now = tape.scan.states[k];
            const S* s_prev = k > 0 ? tape.scan.states[k - 1] : zero_state.data();
            const S delta = tape.scan.delta[k];
            const S* b_sel = tape.scan.b_sel[k];
            const S* c_sel = tape.scan.c_sel[k];

            std::fill(dB.begin(), dB.end(), S(0));
            std::fill(dC.begin(), dC.end(), S(0));
            S ddelta = S(0);

            for (int c = 0; c < d_h; ++c) {
                const S* a_row = mp.ssm.a_diag[c];
                const S dy = dY[k][c];
                S dv_c = S(0);
                for (int j = 0; j < d_s; ++j) {
                    const size_t idx = static_cast<size_t>(c) * d_s + j;
                    dC[j] += dy * s_now[idx];
                    const S g = ds_carry[idx] + c_sel[j] * dy;

                    const S a = a_row[j];
                    const S xx = delta * a;
                    const S a_bar = std::exp(xx);
                    S phi, dphi;
                    if (std::abs(xx) < S(1e-4)) {
                        phi = S(1) + xx / S(2) + xx * xx / S(6);
                        dphi = S(0.5) + xx / S(3);
                    } else {
                        phi = std::expm1(xx) / xx;
                        dphi = (a_bar * (xx - S(1)) + S(1)) / (xx * xx);
                    }
                    const S b_bar = phi * delta * b_sel[j];

                    const S da_bar = g * s_prev[idx];
                    const S db_bar = g * u[c];
                    dv_c += g * b_bar;

                    grads.ssm.a_diag[c][j] += da_bar * delta * a_bar + db_bar * dphi * delta * delta * b_sel[j];
                    ddelta += da_bar * a * a_bar + db_bar * (dphi * a * delta + phi) * b_sel[j];
                    dB[j] += db_bar * phi * delta;
                    ds_carry[idx] = g * a_bar;
                }
                dV[k][c] = dv_c;
            }

            const S ddraw = ddelta * sigmoid(tape.scan.delta_raw[k]);
            grads.ssm.b_delta += ddraw;
            grads.ssm.w_delta_t += ddraw * tape.iat_norm[k];
            for (int c = 0; c < d_h; ++c) {
                grads.ssm.w_delta[c] += ddraw * u[c];
                dV[k][c] += ddraw * mp.ssm.w_delta[c];
            }
            add_outer(grads.ssm.w_b, dB.data(), u);
            matvec_t_add(mp.ssm.w_b, dB.data(), dV[k]);
            add_outer(grads.ssm.w_c, dC.data(), u);
            matvec_t_add(mp.ssm.w_c, dC.data(), dV[k]);
        }
    }

    // LTC backward through time; dU collects gradients on the ball points.
    Mat<S> dU(n, hy.d);
    {
        const int d_h = hy.d_h;
        Vec<S> carry(d_h, S(0));
        Vec<S> dpre(d_h);
        const Vec<S> h0(d_h, S(0));
        for (int k = n - 1; k >= 0; --k) {
            const S* h_prev = k > 0 ? art.trajectory.ltc_states[k - 1] : h0.data();
            const S dt = tape.iat_raw[k];
            for (int i = 0; i < d_h; ++i) {
                const S g = dV[k][i] + carry[i];
                const S f = tape.f[k][i];
                const S tau = tape.tau[k][i];
                const S dec = tape.decay[k][i];

                const S df = g * tau * (S(1) - dec);
                const S dtau =
                    g * ((h_prev[i] - f * tau) * dec * dt / (tau * tau) + f * (S(1) - dec));
                carry[i] = g * dec; // direct h_{k-1} path

                // tau -> tau_theta, honoring the clamp at kTauFloor
                const S t_raw = mp.ltc.tau_theta[i];
                if (t_raw >= S(kTauFloor)) {
                    const S e = std::exp(-dt / t_raw);
                    const S dtau_dtheta =
                        e * (sigmoid(t_raw) + softplus(t_raw) * dt / (t_raw * t_raw));
                    grads.ltc.tau_theta[i] += dtau * dtau_dtheta;
                }
                dpre[i] = df * (S(1) - f * f);
            }
            for (int i = 0; i < d_h; ++i) grads.ltc.b[i] += dpre[i];
            add_outer(grads.ltc.w_h, dpre.data(), h_prev);
            add_outer(grads.ltc.w_x, dpre.data(), tape.ball[k]);
            matvec_t_add(mp.ltc.w_h, dpre.data(), carry.data());
            std::fill(dU[k], dU[k] + hy.d, S(0));
            matvec_t_add(mp.ltc.w_x, dpre.data(), dU[k]);
        }
    }

    // Projection backward: through the ball clamp (rarely active) and the
    // 1/(1 + r + eps) normalization.
    {
        Vec<S> du_pre(hy.d);
        for (int k = 0; k < n; ++k) {
            const S cs = tape.clamp_scale[k];
            const S* u_final = tape.ball[k];
            if (cs == S(1)) {
                std::copy(dU[k], dU[k] + hy.d, du_pre.begin());
            } else {
                // u_final = C u_pre / |u_pre|; cs = C / |u_pre|
                const S r_u = S(kBallMaxNorm) / cs;
                S udot = S(0);
                Vec<S> u_pre(hy.d);
                for (int c = 0; c < hy.d; ++c) {
                    u_pre[c] = u_final[c] / cs;
                    udot += u_pre[c] * dU[k][c];
                }
                for (int c = 0; c < hy.d; ++c)
                    du_pre[c] = cs * dU[k][c] - S(kBallMaxNorm) * udot * u_pre[c] / (r_u * r_u * r_u);
            }

            const S* z = tape.z[k];
            const S r = norm2(z, hy.d);
            const S g = S(1) / (S(1) + r + S(kBallEps));
            S zdot = dot(z, du_pre.data(), hy.d);
            Vec<S> dz(hy.d);
            if (r > S(0)) {
                const S coef = -g * g * zdot / r;
                for (int c = 0; c < hy.d; ++c) dz[c] = g * du_pre[c] + coef * z[c];
            } else {
                for (int c = 0; c < hy.d; ++c) dz[c] = g * du_pre[c];
            }
            add_outer(grads.w_p, dz.data(), x[k]);
        }
    }

    if (mask) {
        auto zero_vec = [](auto& v) { std::fill(v.begin(), v.end(), S(0)); };
        if (mask->projection) grads.w_p.zero();
        if (mask->ltc) {
            zero_vec(grads.ltc.tau_theta);
            grads.ltc.w_h.zero();
            grads.ltc.w_x.zero();
            zero_vec(grads.ltc.b);
        }
        if (mask->ssm) {
            grads.ssm.a_diag.zero();
            zero_vec(grads.ssm.w_delta);
            grads.ssm.w_delta_t = S(0);
            grads.ssm.b_delta = S(0);
            grads.ssm.w_b.zero();
            grads.ssm.w_c.zero();
        }
        if (mask->head) {
            zero_vec(grads.head_w);
            grads.head_b = S(0);
        }
    }
}

/// Per-window decision: classifier (probability >= 0.5) OR Class-1 entropy
/// flag. Both sub-signals are reported.
struct DetectionVerdict {
    uint64_t flow_id = 0;
    double logit = 0;
    double probability = 0;
    double entropy = 0;
    bool tvd_flag = false;
    bool malicious = false;
};

template <typename S>
DetectionVerdict classify_window(const FlowWindow& w, const ModelParams<S>& mp) {
    Mat<S> x(w.data.rows, w.data.cols);
    for (size_t i = 0; i < w.data.a.size(); ++i) x.a[i] = static_cast<S>(w.data.a[i]);
    ForwardArtifacts<S> art = forward(x, mp);
    DetectionVerdict v;
    v.flow_id = w.flow_id;
    v.logit = static_cast<double>(art.logit);
    v.probability = static_cast<double>(art.probability);
    v.entropy = art.entropy;
    if (art.finite) {
        TvdResult t = classify_entropy(art.entropy, mp.tvd);
        v.tvd_flag = t.anomaly;
    }
    v.malicious = v.probability >= 0.5 || v.tvd_flag;
    return v;
}

template <typename S>
std::vector<DetectionVerdict> infer_batch(const std::vector<FlowWindow>& windows,
                                          const ModelParams<S>& mp) {
    std::vector<DetectionVerdict> out;
    out.reserve(windows.size());
    for (const FlowWindow& w : windows) out.push_back(classify_window(w, mp));
    return out;
}

} // namespace aegis
