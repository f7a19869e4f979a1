"""Hot per-bin tracking loops with a numba fast path and a numpy fallback.

The recursive predict/update sweeps over (frames x bins) dominate runtime.
Each tracker exists twice with identical arithmetic:

* ``*_loops`` -- scalar loops, compiled with ``numba.njit`` when available;
* ``*_numpy`` -- the same per-bin recursion vectorised across bins.

Set ``MODKAL_NO_NUMBA=1`` to force the numpy fallback.  The two-state
trackers are bin-parallel, so their fallback is fully vectorised; the
three-state tracker couples adjacent bins within a frame and falls back to
the interpreted loops.  ``benchmarks/bench_kernels.py`` compares the paths.
"""

from __future__ import annotations

import os

import numpy as np

PSD_EIG_FLOOR = 1e-10
_UT_W0 = 1.0 / 3.0
_UT_WI = 1.0 / 6.0
_UT_SPREAD = 3.0  # sigma-point scale: dimension + kappa with kappa = 3 - dim
UKF_MAX_ITERATIONS = 4
# Relinearise around the posterior only while the observation is sharp
# relative to the projected prior; one pass is accurate otherwise.
UKF_RELIN_GATE = 0.25

_flag = os.environ.get("MODKAL_NO_NUMBA", "").strip().lower()
_want_numba = _flag not in ("1", "true", "yes")
try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
USE_NUMBA = _want_numba and HAVE_NUMBA


def _jit(fn):
    if USE_NUMBA:
        return njit(cache=True)(fn)
    return fn


def _obs_scalar_impl(x, n, alpha, gamma, use_gamma):
    u = n - x
    if use_gamma:
        if u * gamma > 0.0:
            return n + np.log1p(np.exp(-gamma * u)) / gamma
        return x + np.log1p(np.exp(gamma * u)) / gamma
    if u > 0.0:
        arg = np.exp(-u) + 2.0 * alpha * np.exp(-0.5 * u)
        base = n
    else:
        arg = np.exp(u) + 2.0 * alpha * np.exp(0.5 * u)
        base = x
    if arg <= -1.0:
        raise ValueError("invalid phase configuration")
    return base + np.log1p(arg)


_obs_scalar = _jit(_obs_scalar_impl)


def obs_numpy(x, n, alpha, gamma, use_gamma):
    """Vectorised observation map from (speech, noise) log-powers to noisy."""
    x = np.asarray(x, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    u = n - x
    if use_gamma:
        pos = gamma * u > 0
        safe = np.where(pos, -gamma * u, gamma * u)
        return np.where(pos, n, x) + np.log1p(np.exp(safe)) / gamma
    pos = u > 0
    safe = np.where(pos, -u, u)
    arg = np.exp(safe) + 2.0 * alpha * np.exp(0.5 * safe)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(pos, n, x) + np.log1p(arg)
    return out


def _joint_slr_impl(m0, p00, nm, vn, y, r, alpha, gamma, use_gamma):
    """Iterated sigma-point linearisation of the observation over (x0, n).

    Runs the unscented transform around the running joint posterior and
    refits ``y ~ ax*x + an*n + b`` each round, which keeps the update honest
    when the observation is much sharper than the prior.  Returns the final
    linearisation ``(ax, an, b, omega)`` with its residual variance.
    """
    zx, zn = m0, nm
    pxx, pxn, pnn = p00, 0.0, vn
    ax, an, b, omega = 0.0, 0.0, y, 0.0
    s3 = np.sqrt(_UT_SPREAD)
    for _ in range(UKF_MAX_ITERATIONS):
        if pxx > 1e-300:
            l11 = np.sqrt(pxx)
            l21 = pxn / l11
            rest = pnn - l21 * l21
            l22 = np.sqrt(rest) if rest > 0.0 else 0.0
        else:
            l11 = 0.0
            l21 = 0.0
            l22 = np.sqrt(pnn) if pnn > 0.0 else 0.0
        y0 = _obs_scalar(zx, zn, alpha, gamma, use_gamma)
        y1 = _obs_scalar(zx + s3 * l11, zn + s3 * l21, alpha, gamma, use_gamma)
        y2 = _obs_scalar(zx - s3 * l11, zn - s3 * l21, alpha, gamma, use_gamma)
        y3 = _obs_scalar(zx, zn + s3 * l22, alpha, gamma, use_gamma)
        y4 = _obs_scalar(zx, zn - s3 * l22, alpha, gamma, use_gamma)
        yb = _UT_W0 * y0 + _UT_WI * (y1 + y2 + y3 + y4)
        d0 = y0 - yb
        d1 = y1 - yb
        d2 = y2 - yb
        d3 = y3 - yb
        d4 = y4 - yb
        vy = _UT_W0 * d0 * d0 + _UT_WI * (d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4)
        cx = _UT_WI * s3 * l11 * (d1 - d2)
        cn = _UT_WI * (s3 * l21 * (d1 - d2) + s3 * l22 * (d3 - d4))
        det = pxx * pnn - pxn * pxn
        scale = pxx + pnn
        if det > 1e-14 * scale * scale + 1e-300:
            ax = (pnn * cx - pxn * cn) / det
            an = (pxx * cn - pxn * cx) / det
        else:
            ax = cx / pxx if pxx > 1e-300 else 0.0
            an = cn / pnn if pnn > 1e-300 else 0.0
        omega = vy - (ax * cx + an * cn)
        if omega < 0.0:
            omega = 0.0
        b = yb - ax * zx - an * zn
        s = ax * ax * p00 + an * an * vn + r + omega
        if not np.isfinite(s) or s <= 0.0:
            return 0.0, 0.0, y, 0.0
        innov = y - (ax * m0 + an * nm + b)
        kx = p00 * ax / s
        kn = vn * an / s
        zx = m0 + kx * innov
        zn = nm + kn * innov
        pxx = p00 - kx * kx * s
        pxn = -kx * kn * s
        pnn = vn - kn * kn * s
        if r + omega >= UKF_RELIN_GATE * (ax * ax * p00 + an * an * vn):
            break
    return ax, an, b, omega


_joint_slr = _jit(_joint_slr_impl)


def joint_slr_numpy(m0, p00, nm, vn, y, r, alpha, gamma, use_gamma):
    """Vectorised twin of the iterated joint linearisation (arrays over bins)."""
    zx = m0.copy()
    zn = nm.copy()
    pxx = p00.copy()
    pxn = np.zeros_like(p00)
    pnn = vn.copy()
    ax = np.zeros_like(p00)
    an = np.zeros_like(p00)
    b = y.copy()
    omega = np.zeros_like(p00)
    active = np.ones(p00.shape, dtype=bool)
    s3 = np.sqrt(_UT_SPREAD)
    for _ in range(UKF_MAX_ITERATIONS):
        if not active.any():
            break
        okx = pxx > 1e-300
        l11 = np.sqrt(np.maximum(pxx, 0.0))
        l21 = np.where(okx, pxn / np.where(okx, l11, 1.0), 0.0)
        rest = np.where(okx, pnn - l21 * l21, pnn)
        l22 = np.sqrt(np.maximum(rest, 0.0))
        y0 = obs_numpy(zx, zn, alpha, gamma, use_gamma)
        y1 = obs_numpy(zx + s3 * l11, zn + s3 * l21, alpha, gamma, use_gamma)
        y2 = obs_numpy(zx - s3 * l11, zn - s3 * l21, alpha, gamma, use_gamma)
        y3 = obs_numpy(zx, zn + s3 * l22, alpha, gamma, use_gamma)
        y4 = obs_numpy(zx, zn - s3 * l22, alpha, gamma, use_gamma)
        yb = _UT_W0 * y0 + _UT_WI * (y1 + y2 + y3 + y4)
        d0 = y0 - yb
        d1 = y1 - yb
        d2 = y2 - yb
        d3 = y3 - yb
        d4 = y4 - yb
        vy = _UT_W0 * d0 * d0 + _UT_WI * (d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4)
        cx = _UT_WI * s3 * l11 * (d1 - d2)
        cn = _UT_WI * (s3 * l21 * (d1 - d2) + s3 * l22 * (d3 - d4))
        det = pxx * pnn - pxn * pxn
        scale = pxx + pnn
        solvable = det > 1e-14 * scale * scale + 1e-300
        safe_det = np.where(solvable, det, 1.0)
        new_ax = np.where(solvable, (pnn * cx - pxn * cn) / safe_det,
                          np.where(okx, cx / np.where(okx, pxx, 1.0), 0.0))
        okn = pnn > 1e-300
        new_an = np.where(solvable, (pxx * cn - pxn * cx) / safe_det,
                          np.where(okn, cn / np.where(okn, pnn, 1.0), 0.0))
        new_omega = np.maximum(vy - (new_ax * cx + new_an * cn), 0.0)
        new_b = yb - new_ax * zx - new_an * zn
        s = new_ax * new_ax * p00 + new_an * new_an * vn + r + new_omega
        dead = ~np.isfinite(s) | (s <= 0.0)
        new_ax = np.where(dead, 0.0, new_ax)
        new_an = np.where(dead, 0.0, new_an)
        new_b = np.where(dead, y, new_b)
        new_omega = np.where(dead, 0.0, new_omega)
        s = np.where(dead, 1.0, s)
        take = active
        ax = np.where(take, new_ax, ax)
        an = np.where(take, new_an, an)
        b = np.where(take, new_b, b)
        omega = np.where(take, new_omega, omega)
        innov = y - (new_ax * m0 + new_an * nm + new_b)
        kx = p00 * new_ax / s
        kn = vn * new_an / s
        zx = np.where(take, m0 + kx * innov, zx)
        zn = np.where(take, nm + kn * innov, zn)
        pxx = np.where(take, p00 - kx * kx * s, pxx)
        pxn = np.where(take, -kx * kn * s, pxn)
        pnn = np.where(take, vn - kn * kn * s, pnn)
        sharp = (r + new_omega) < UKF_RELIN_GATE * (new_ax * new_ax * p00
                                                    + new_an * new_an * vn)
        active = active & sharp & ~dead
    return ax, an, b, omega


def _track2_log_loops_impl(y, a, q, mu, widx, alpha, gamma, use_gamma, r_obs,
                           nm0, nv0, nq, vf, track_noise, m_init, p_init):
    T, K = y.shape
    xhat = np.empty((T, K))
    pvar = np.empty((T, K))
    for k in range(K):
        m0 = m_init[k]
        m1 = m_init[k]
        p00 = p_init
        p01 = 0.0
        p11 = p_init
        nm = nm0[k]
        nv = nv0
        for t in range(T):
            w = widx[t]
            a1 = a[w, k, 0]
            a2 = a[w, k, 1]
            muw = mu[w, k]
            f0 = muw + a1 * (m0 - muw) + a2 * (m1 - muw)
            tp00 = a1 * a1 * p00 + 2.0 * a1 * a2 * p01 + a2 * a2 * p11 + q[w, k]
            tp01 = a1 * p00 + a2 * p01
            p11 = p00
            p00 = tp00
            p01 = tp01
            m1 = m0
            m0 = f0
            if track_noise:
                nv += nq
            vn = nv + vf
            ax, an, bb, omega = _joint_slr(m0, p00, nm, vn, y[t, k], r_obs,
                                           alpha, gamma, use_gamma)
            s = ax * ax * p00 + an * an * vn + r_obs + omega
            if np.isfinite(s) and s > 0.0:
                innov = y[t, k] - (ax * m0 + an * nm + bb)
                g0 = ax * p00 / s
                g1 = ax * p01 / s
                m0 += g0 * innov
                m1 += g1 * innov
                fac = ax * ax / s
                t00 = p00 - fac * p00 * p00
                t01 = p01 - fac * p00 * p01
                t11 = p11 - fac * p01 * p01
                p00, p01, p11 = t00, t01, t11
                if track_noise:
                    gl = an * nv / s
                    nm += gl * innov
                    nv = max(nv - gl * gl * s, 0.0)
            if p00 < 0.0:
                p00 = PSD_EIG_FLOOR
            if p11 < 0.0:
                p11 = PSD_EIG_FLOOR
            lim = np.sqrt(p00 * p11)
            if p01 > lim:
                p01 = lim
            elif p01 < -lim:
                p01 = -lim
            xhat[t, k] = m0
            pvar[t, k] = p00
    return xhat, pvar


_track2_log_loops = _jit(_track2_log_loops_impl)


def _track2_log_numpy(y, a, q, mu, widx, alpha, gamma, use_gamma, r_obs,
                      nm0, nv0, nq, vf, track_noise, m_init, p_init):
    T, K = y.shape
    xhat = np.empty((T, K))
    pvar = np.empty((T, K))
    m0 = m_init.copy()
    m1 = m_init.copy()
    p00 = np.full(K, p_init)
    p01 = np.zeros(K)
    p11 = np.full(K, p_init)
    nm = nm0.copy()
    nv = np.full(K, nv0)
    for t in range(T):
        w = widx[t]
        a1 = a[w, :, 0]
        a2 = a[w, :, 1]
        muw = mu[w]
        f0 = muw + a1 * (m0 - muw) + a2 * (m1 - muw)
        tp00 = a1 * a1 * p00 + 2.0 * a1 * a2 * p01 + a2 * a2 * p11 + q[w]
        tp01 = a1 * p00 + a2 * p01
        p11 = p00
        p00 = tp00
        p01 = tp01
        m1 = m0
        m0 = f0
        if track_noise:
            nv = nv + nq
        vn = nv + vf
        ax, an, bb, omega = joint_slr_numpy(m0, p00, nm, vn, y[t], r_obs,
                                            alpha, gamma, use_gamma)
        s = ax * ax * p00 + an * an * vn + r_obs + omega
        live = np.isfinite(s) & (s > 0.0)
        safe_s = np.where(live, s, 1.0)
        innov = np.where(live, y[t] - (ax * m0 + an * nm + bb), 0.0)
        g0 = np.where(live, ax * p00 / safe_s, 0.0)
        g1 = np.where(live, ax * p01 / safe_s, 0.0)
        m0 = m0 + g0 * innov
        m1 = m1 + g1 * innov
        fac = np.where(live, ax * ax / safe_s, 0.0)
        t00 = p00 - fac * p00 * p00
        t01 = p01 - fac * p00 * p01
        t11 = p11 - fac * p01 * p01
        p00 = np.where(t00 < 0.0, PSD_EIG_FLOOR, t00)
        p11 = np.where(t11 < 0.0, PSD_EIG_FLOOR, t11)
        lim = np.sqrt(p00 * p11)
        p01 = np.clip(t01, -lim, lim)
        if track_noise:
            gl = np.where(live, an * nv / safe_s, 0.0)
            nm = nm + gl * innov
            nv = np.maximum(nv - gl * gl * safe_s, 0.0)
        xhat[t] = m0
        pvar[t] = p00
    return xhat, pvar


def _psd_repair3_impl(P):
    for i in range(3):
        for j in range(i + 1, 3):
            s = 0.5 * (P[i, j] + P[j, i])
            P[i, j] = s
            P[j, i] = s
    tol = -1e-12 * (1.0 + abs(P[0, 0]) + abs(P[1, 1]) + abs(P[2, 2]))
    m1 = P[0, 0]
    m2 = P[0, 0] * P[1, 1] - P[0, 1] * P[0, 1]
    m3 = (P[0, 0] * (P[1, 1] * P[2, 2] - P[1, 2] * P[1, 2])
          - P[0, 1] * (P[0, 1] * P[2, 2] - P[1, 2] * P[0, 2])
          + P[0, 2] * (P[0, 1] * P[1, 2] - P[1, 1] * P[0, 2]))
    if (m1 < tol or P[1, 1] < tol or P[2, 2] < tol
            or m2 < tol or m3 < tol):
        vals, vecs = np.linalg.eigh(P)
        for i in range(3):
            if vals[i] < 0.0:
                vals[i] = PSD_EIG_FLOOR
        R = (vecs * vals) @ vecs.T
        for i in range(3):
            for j in range(3):
                P[i, j] = R[i, j]
    return P


_psd_repair3 = _jit(_psd_repair3_impl)


def _track3_log_loops_impl(y, a, q, mu, widx, alpha, gamma, use_gamma, r_obs,
                           nm0, nv0, nq, vf, track_noise,
                           w_intra, b1w, iqw, m_init, p_init):
    T, K = y.shape
    xhat = np.empty((T, K))
    pvar = np.empty((T, K))
    m = np.zeros((K, 3))
    P = np.zeros((K, 3, 3))
    for k in range(K):
        m[k, 0] = m_init[k]
        m[k, 1] = m_init[k]
        P[k, 0, 0] = p_init
        P[k, 1, 1] = p_init
        P[k, 2, 2] = 1.0
    nm = nm0.copy()
    nv = np.full(K, nv0)
    for t in range(T):
        w = widx[t]
        for k in range(K):
            a1 = a[w, k, 0]
            a2 = a[w, k, 1]
            muw = mu[w, k]
            Pk = P[k]
            f0 = muw + a1 * (m[k, 0] - muw) + a2 * (m[k, 1] - muw)
            q00 = (a1 * a1 * Pk[0, 0] + 2.0 * a1 * a2 * Pk[0, 1]
                   + a2 * a2 * Pk[1, 1] + q[w, k])
            q01 = a1 * Pk[0, 0] + a2 * Pk[0, 1]
            q02 = a1 * Pk[0, 2] + a2 * Pk[1, 2]
            q11 = Pk[0, 0]
            q12 = Pk[0, 2]
            q22 = Pk[2, 2]
            m[k, 1] = m[k, 0]
            m[k, 0] = f0
            if k > 0 and w_intra > 0.0:
                # spectral prediction from the lower bin's fresh posterior;
                # the blended variance takes the correlated-errors upper
                # bound so fusing a weak predictor cannot fake certainty
                sp_res = b1w[w] * (xhat[t, k - 1] - mu[w, k - 1])
                sp_full = muw + sp_res
                wi = w_intra
                iq = iqw[w]
                m[k, 0] = (1.0 - wi) * f0 + wi * sp_full
                m[k, 2] = sp_res
                q00 = ((1.0 - wi) * np.sqrt(max(q00, 0.0))
                       + wi * np.sqrt(iq)) ** 2
                q01 = (1.0 - wi) * q01
                q02 = wi * iq
                q12 = 0.0
                q22 = iq
            Pk[0, 0] = q00
            Pk[0, 1] = q01
            Pk[1, 0] = q01
            Pk[0, 2] = q02
            Pk[2, 0] = q02
            Pk[1, 1] = q11
            Pk[1, 2] = q12
            Pk[2, 1] = q12
            Pk[2, 2] = q22
            if track_noise:
                nv[k] += nq
            vn = nv[k] + vf
            p00 = Pk[0, 0]
            m0 = m[k, 0]
            ax, an, bb, omega = _joint_slr(m0, p00, nm[k], vn, y[t, k], r_obs,
                                           alpha, gamma, use_gamma)
            s = ax * ax * p00 + an * an * vn + r_obs + omega
            if np.isfinite(s) and s > 0.0:
                innov = y[t, k] - (ax * m0 + an * nm[k] + bb)
                fac = ax * ax / s
                c0 = Pk[0, 0]
                c1 = Pk[1, 0]
                c2 = Pk[2, 0]
                m[k, 0] += (ax * c0 / s) * innov
                m[k, 1] += (ax * c1 / s) * innov
                m[k, 2] += (ax * c2 / s) * innov
                Pk[0, 0] -= fac * c0 * c0
                Pk[0, 1] -= fac * c0 * c1
                Pk[0, 2] -= fac * c0 * c2
                Pk[1, 0] -= fac * c1 * c0
                Pk[1, 1] -= fac * c1 * c1
                Pk[1, 2] -= fac * c1 * c2
                Pk[2, 0] -= fac * c2 * c0
                Pk[2, 1] -= fac * c2 * c1
                Pk[2, 2] -= fac * c2 * c2
                if track_noise:
                    gl = an * nv[k] / s
                    nm[k] += gl * innov
                    nv[k] = max(nv[k] - gl * gl * s, 0.0)
            _psd_repair3(Pk)
            xhat[t, k] = m[k, 0]
            pvar[t, k] = Pk[0, 0]
    return xhat, pvar


_track3_log_loops = _jit(_track3_log_loops_impl)


def _track2_amp_loops_impl(y_amp, y_lp, a, q, mu, widx,
                           nm0, nv0, nq, vf, n_obs_var, track_noise,
                           m_init, p_init):
    T, K = y_amp.shape
    xhat = np.empty((T, K))
    pvar = np.empty((T, K))
    for k in range(K):
        m0 = m_init[k]
        m1 = m_init[k]
        p00 = p_init
        p01 = 0.0
        p11 = p_init
        nm = nm0[k]
        nv = nv0
        for t in range(T):
            w = widx[t]
            a1 = a[w, k, 0]
            a2 = a[w, k, 1]
            muw = mu[w, k]
            f0 = muw + a1 * (m0 - muw) + a2 * (m1 - muw)
            tp00 = a1 * a1 * p00 + 2.0 * a1 * a2 * p01 + a2 * a2 * p11 + q[w, k]
            tp01 = a1 * p00 + a2 * p01
            p11 = p00
            p00 = tp00
            p01 = tp01
            m1 = m0
            m0 = f0
            if track_noise:
                presence = 1.0 / (1.0 + np.exp(-2.0 * (y_lp[t, k] - nm - 3.0)))
                nv += nq
                r_eff = n_obs_var / max(1.0 - presence, 1e-6)
                kg = nv / (nv + r_eff)
                nm += kg * (y_lp[t, k] - nm)
                nv = (1.0 - kg) * nv
            vtot = nv + vf
            na_mean = np.exp(0.5 * nm + vtot / 8.0)
            na_var = np.exp(nm + vtot / 4.0) * np.expm1(vtot / 4.0)
            s = p00 + na_var
            if p00 > 1e-300 and s > 0.0:
                innov = y_amp[t, k] - (m0 + na_mean)
                ratio = p01 / p00
                k0 = p00 / s
                m0 += k0 * innov
                m1 += ratio * k0 * innov
                t00 = p00 - p00 * p00 / s
                t01 = p01 - p00 * p01 / s
                t11 = p11 - p01 * p01 / s
                p00, p01, p11 = t00, t01, t11
            if p00 < 0.0:
                p00 = PSD_EIG_FLOOR
            if p11 < 0.0:
                p11 = PSD_EIG_FLOOR
            lim = np.sqrt(p00 * p11)
            if p01 > lim:
                p01 = lim
            elif p01 < -lim:
                p01 = -lim
            xhat[t, k] = m0
            pvar[t, k] = p00
    return xhat, pvar


_track2_amp_loops = _jit(_track2_amp_loops_impl)


def _track2_amp_numpy(y_amp, y_lp, a, q, mu, widx,
                      nm0, nv0, nq, vf, n_obs_var, track_noise,
                      m_init, p_init):
    T, K = y_amp.shape
    xhat = np.empty((T, K))
    pvar = np.empty((T, K))
    m0 = m_init.copy()
    m1 = m_init.copy()
    p00 = np.full(K, p_init)
    p01 = np.zeros(K)
    p11 = np.full(K, p_init)
    nm = nm0.copy()
    nv = np.full(K, nv0)
    for t in range(T):
        w = widx[t]
        a1 = a[w, :, 0]
        a2 = a[w, :, 1]
        muw = mu[w]
        f0 = muw + a1 * (m0 - muw) + a2 * (m1 - muw)
        tp00 = a1 * a1 * p00 + 2.0 * a1 * a2 * p01 + a2 * a2 * p11 + q[w]
        tp01 = a1 * p00 + a2 * p01
        p11 = p00
        p00 = tp00
        p01 = tp01
        m1 = m0
        m0 = f0
        if track_noise:
            presence = 1.0 / (1.0 + np.exp(-2.0 * (y_lp[t] - nm - 3.0)))
            nv = nv + nq
            r_eff = n_obs_var / np.maximum(1.0 - presence, 1e-6)
            kg = nv / (nv + r_eff)
            nm = nm + kg * (y_lp[t] - nm)
            nv = (1.0 - kg) * nv
        vtot = nv + vf
        na_mean = np.exp(0.5 * nm + vtot / 8.0)
        na_var = np.exp(nm + vtot / 4.0) * np.expm1(vtot / 4.0)
        s = p00 + na_var
        live = (p00 > 1e-300) & (s > 0.0)
        safe00 = np.where(live, p00, 1.0)
        safe_s = np.where(live, s, 1.0)
        innov = y_amp[t] - (m0 + na_mean)
        k0 = np.where(live, p00 / safe_s, 0.0)
        ratio = np.where(live, p01 / safe00, 0.0)
        m0 = m0 + k0 * innov
        m1 = m1 + ratio * k0 * innov
        inv_s = np.where(live, 1.0 / safe_s, 0.0)
        t00 = p00 - p00 * p00 * inv_s
        t01 = p01 - p00 * p01 * inv_s
        t11 = p11 - p01 * p01 * inv_s
        p00 = np.where(t00 < 0.0, PSD_EIG_FLOOR, t00)
        p11 = np.where(t11 < 0.0, PSD_EIG_FLOOR, t11)
        lim = np.sqrt(p00 * p11)
        p01 = np.clip(t01, -lim, lim)
        xhat[t] = m0
        pvar[t] = p00
    return xhat, pvar


def run_logpower_tracker(y_lp, coeffs, resid, mu, widx, *, alpha=0.0,
                         gamma=0.0, use_gamma=False, obs_noise_var=0.5,
                         noise_mean0=None, noise_var0=1.0, noise_q=1e-3,
                         noise_fluct_var=np.pi ** 2 / 6.0, track_noise=True,
                         w_intra=0.0, intra_coeff=None, intra_resid=None,
                         init_mean=None, init_var=1.0, backend=None):
    """Dispatch a whole-utterance log-power tracking run to a backend."""
    y_lp = np.ascontiguousarray(y_lp, dtype=np.float64)
    T, K = y_lp.shape
    widx = np.ascontiguousarray(widx, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    resid = np.ascontiguousarray(resid, dtype=np.float64)
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    nm0 = (y_lp[0].copy() if noise_mean0 is None
           else np.full(K, noise_mean0, dtype=np.float64)
           if np.isscalar(noise_mean0)
           else np.ascontiguousarray(noise_mean0, dtype=np.float64))
    m_init = (y_lp[0].copy() if init_mean is None
              else np.full(K, init_mean, dtype=np.float64)
              if np.isscalar(init_mean)
              else np.ascontiguousarray(init_mean, dtype=np.float64))
    use_fast = USE_NUMBA if backend is None else backend == "numba"
    if w_intra > 0.0:
        b1w = np.ascontiguousarray(intra_coeff, dtype=np.float64)
        iqw = np.ascontiguousarray(intra_resid, dtype=np.float64)
        fn = _track3_log_loops if use_fast else _track3_log_loops_impl
        return fn(y_lp, coeffs, resid, mu, widx, float(alpha), float(gamma),
                  bool(use_gamma), float(obs_noise_var), nm0, float(noise_var0),
                  float(noise_q), float(noise_fluct_var), bool(track_noise),
                  float(w_intra), b1w, iqw, m_init, float(init_var))
    fn = _track2_log_loops if use_fast else _track2_log_numpy
    return fn(y_lp, coeffs, resid, mu, widx, float(alpha), float(gamma),
              bool(use_gamma), float(obs_noise_var), nm0, float(noise_var0),
              float(noise_q), float(noise_fluct_var), bool(track_noise),
              m_init, float(init_var))


def run_amplitude_tracker(y_amp, y_lp, coeffs, resid, mu, widx, *,
                          noise_mean0=None, noise_var0=1.0, noise_q=1e-3,
                          noise_fluct_var=np.pi ** 2 / 6.0,
                          noise_obs_var=np.pi ** 2 / 6.0, track_noise=True,
                          init_mean=None, init_var=1.0, backend=None):
    """Dispatch a whole-utterance amplitude tracking run to a backend."""
    y_amp = np.ascontiguousarray(y_amp, dtype=np.float64)
    y_lp = np.ascontiguousarray(y_lp, dtype=np.float64)
    K = y_amp.shape[1]
    widx = np.ascontiguousarray(widx, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    resid = np.ascontiguousarray(resid, dtype=np.float64)
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    nm0 = (y_lp[0].copy() if noise_mean0 is None
           else np.full(K, noise_mean0, dtype=np.float64)
           if np.isscalar(noise_mean0)
           else np.ascontiguousarray(noise_mean0, dtype=np.float64))
    m_init = (y_amp[0].copy() if init_mean is None
              else np.full(K, init_mean, dtype=np.float64)
              if np.isscalar(init_mean)
              else np.ascontiguousarray(init_mean, dtype=np.float64))
    use_fast = USE_NUMBA if backend is None else backend == "numba"
    fn = _track2_amp_loops if use_fast else _track2_amp_numpy
    return fn(y_amp, y_lp, coeffs, resid, mu, widx, nm0, float(noise_var0),
              float(noise_q), float(noise_fluct_var), float(noise_obs_var),
              bool(track_noise), m_init, float(init_var))
