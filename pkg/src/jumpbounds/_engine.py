"""Compiled single-trajectory kernels.

The waiting-time Gillespie sampler and the monitoring-operator updates run
inside numba-jitted functions on packed complex arrays.

No-jump survival probabilities |U(t) psi|^2 are evaluated through a complex
Schur form H_eff = Q T Q†: the triangular exponential exp(-i T t) has a
closed form for d <= 3 (and trivially for diagonal T) built from divided
differences of exp, and unitary Q keeps the evaluation well conditioned even
at exceptional points where H_eff is defective.  The segment propagator and
its parameter derivatives come from the block-triangular augmented generator
[[-iH_eff, -i dH_eff], [0, -iH_eff]], whose exponential is computed with a
shifted, scaled-and-squared Taylor recurrence in d x d blocks; the top-right
block is the exact derivative dU(t).

Randomness is counter-based: trajectory i draws from xoshiro256++ seeded by
splitmix64 hashes of (master_seed, i), so ensembles are bit-identical for a
fixed master seed regardless of worker count or scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# trajectory status codes
STATUS_OK = 0
STATUS_MAX_JUMPS = 1
STATUS_UNDERFLOW = 2
STATUS_STALLED_RATE = 3

# triangular-exponential kinds
TRI_DIAGONAL = 0
TRI_D2 = 1
TRI_D3 = 2

_U64 = np.uint64
_MIX_GAMMA = _U64(0x9E3779B97F4A7C15)
_MIX_MUL1 = _U64(0xBF58476D1CE4E5B9)
_MIX_MUL2 = _U64(0x94D049BB133111EB)
_STREAM_SALT = _U64(0xD6E8FEB86659FD93)


def _splitmix_finalize(x: np.ndarray) -> np.ndarray:
    z = x.copy()
    z ^= z >> _U64(30)
    z *= _MIX_MUL1
    z ^= z >> _U64(27)
    z *= _MIX_MUL2
    z ^= z >> _U64(31)
    return z


def trajectory_seeds(master_seed: int, count: int, stream: int = 0) -> np.ndarray:
    """Per-trajectory 64-bit seeds, a pure function of (master_seed, stream, index)."""
    with np.errstate(over="ignore"):
        base = _U64(master_seed & 0xFFFFFFFFFFFFFFFF) + _U64(stream & 0xFFFFFFFFFFFFFFFF) * _STREAM_SALT
        idx = np.arange(1, count + 1, dtype=np.uint64)
        return _splitmix_finalize(base + idx * _MIX_GAMMA)


@njit(inline="always")
def _splitmix_next(state):
    state = state + _MIX_GAMMA
    z = state
    z = (z ^ (z >> _U64(30))) * _MIX_MUL1
    z = (z ^ (z >> _U64(27))) * _MIX_MUL2
    z = z ^ (z >> _U64(31))
    return state, z


@njit(inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_U64(64) - k))


@njit(inline="always")
def _rng_init(seed, s):
    st = seed
    nonzero = False
    for j in range(4):
        st, z = _splitmix_next(st)
        s[j] = z
        if z != _U64(0):
            nonzero = True
    if not nonzero:
        s[0] = _U64(1)


@njit(inline="always")
def _rng_next(s):
    result = _rotl(s[0] + s[3], _U64(23)) + s[0]
    t = s[1] << _U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U64(45))
    return result


@njit(inline="always")
def _uniform(s):
    return float(_rng_next(s) >> _U64(11)) * 1.1102230246251565e-16  # 2^-53


@njit(inline="always")
def _dd1(x, y):
    # first divided difference of exp: (e^x - e^y)/(x - y), smooth at x = y
    h = 0.5 * (x - y)
    if abs(h) < 1e-3:
        h2 = h * h
        sinhc = 1.0 + h2 / 6.0 + h2 * h2 / 120.0 + h2 * h2 * h2 / 5040.0
    else:
        sinhc = (np.exp(h) - np.exp(-h)) / (2.0 * h)
    return np.exp(0.5 * (x + y)) * sinhc


@njit(inline="always")
def _dd2(x0, x1, x2):
    # second divided difference of exp, symmetric in its arguments
    g01 = abs(x0 - x1)
    g02 = abs(x0 - x2)
    g12 = abs(x1 - x2)
    if g01 >= g02 and g01 >= g12:
        a, b, r, gap = x0, x1, x2, g01
    elif g02 >= g12:
        a, b, r, gap = x0, x2, x1, g02
    else:
        a, b, r, gap = x1, x2, x0, g12
    if gap > 2e-2:
        return (_dd1(a, r) - _dd1(r, b)) / (a - b)
    m = (x0 + x1 + x2) / 3.0
    u0 = x0 - m
    u1 = x1 - m
    u2 = x2 - m
    total = 0.0 + 0.0j
    fact = 2.0  # (n+2)! for n = 0
    for n in range(9):
        h = 0.0 + 0.0j
        for aa in range(n + 1):
            for bb in range(n - aa + 1):
                cc = n - aa - bb
                h += u0**aa * u1**bb * u2**cc
        total += h / fact
        fact *= n + 3
    return np.exp(m) * total


@njit(inline="always")
def _tri_exp_apply(tmat, tri_kind, t, w, out):
    """out = exp(-i T t) @ w for upper-triangular T (d <= 3 or diagonal)."""
    d = w.shape[0]
    if tri_kind == TRI_DIAGONAL:
        for i in range(d):
            out[i] = np.exp(-1j * tmat[i, i] * t) * w[i]
        return
    if tri_kind == TRI_D2:
        x0 = -1j * tmat[0, 0] * t
        x1 = -1j * tmat[1, 1] * t
        e01 = (-1j * tmat[0, 1] * t) * _dd1(x0, x1)
        out[0] = np.exp(x0) * w[0] + e01 * w[1]
        out[1] = np.exp(x1) * w[1]
        return
    x0 = -1j * tmat[0, 0] * t
    x1 = -1j * tmat[1, 1] * t
    x2 = -1j * tmat[2, 2] * t
    n01 = -1j * tmat[0, 1] * t
    n02 = -1j * tmat[0, 2] * t
    n12 = -1j * tmat[1, 2] * t
    e01 = n01 * _dd1(x0, x1)
    e12 = n12 * _dd1(x1, x2)
    e02 = n02 * _dd1(x0, x2) + n01 * n12 * _dd2(x0, x1, x2)
    out[0] = np.exp(x0) * w[0] + e01 * w[1] + e02 * w[2]
    out[1] = np.exp(x1) * w[1] + e12 * w[2]
    out[2] = np.exp(x2) * w[2]


@njit(inline="always")
def _survival(tmat, tri_kind, w0, t, ek):
    # |exp(-i T t) w0|^2; the unitary Schur factor drops out of the norm
    _tri_exp_apply(tmat, tri_kind, t, w0, ek)
    s = 0.0
    for i in range(w0.shape[0]):
        s += ek[i].real * ek[i].real + ek[i].imag * ek[i].imag
    return s


@njit(inline="always")
def _matvec(a, x, out):
    d = x.shape[0]
    for i in range(d):
        acc = 0.0 + 0.0j
        for j in range(d):
            acc += a[i, j] * x[j]
        out[i] = acc


@njit(inline="always")
def _matmul(a, b, out):
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for m in range(d):
                acc += a[i, m] * b[m, j]
            out[i, j] = acc


@njit(inline="always")
def _sandwich(k, xi, out, tmp):
    # out = K xi K†
    d = xi.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for m in range(d):
                acc += k[i, m] * xi[m, j]
            tmp[i, j] = acc
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for m in range(d):
                acc += tmp[i, m] * np.conj(k[j, m])
            out[i, j] = acc


@njit
def _segment_propagators(h_eff, dh_eff, t, u_out, du_out):
    """Exact U(t) = exp(-i H_eff t) and dU per parameter from the augmented generator.

    Shifted, scaled-and-squared Taylor series carried in d x d blocks:
    U_k = A^k / k!, F_k = (A F_{k-1} + B U_{k-1}) / k accumulate exp(A) and
    the Frechet derivative in direction B for A = -i H_eff t, B = -i dH t.
    """
    d = h_eff.shape[0]
    n_par = dh_eff.shape[0]

    mu = 0.0 + 0.0j
    for i in range(d):
        mu += -1j * h_eff[i, i] * t
    mu /= d

    a = np.empty((d, d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            a[i, j] = -1j * h_eff[i, j] * t
        a[i, i] -= mu

    nrm = 0.0
    for j in range(d):
        col = 0.0
        for i in range(d):
            col += abs(a[i, j])
        if col > nrm:
            nrm = col
    s = 0
    while nrm > 0.5:
        nrm *= 0.5
        s += 1
    scale = 0.5**s
    for i in range(d):
        for j in range(d):
            a[i, j] *= scale

    b = np.empty((n_par, d, d), dtype=np.complex128)
    for p in range(n_par):
        for i in range(d):
            for j in range(d):
                b[p, i, j] = -1j * dh_eff[p, i, j] * t * scale

    # Taylor accumulation
    term_u = np.zeros((d, d), dtype=np.complex128)
    for i in range(d):
        term_u[i, i] = 1.0
        for j in range(d):
            u_out[i, j] = 0.0
        u_out[i, i] = 1.0
    term_f = np.zeros((n_par, d, d), dtype=np.complex128)
    for p in range(n_par):
        for i in range(d):
            for j in range(d):
                du_out[p, i, j] = 0.0
    tmp = np.empty((d, d), dtype=np.complex128)
    tmp2 = np.empty((d, d), dtype=np.complex128)
    for k in range(1, 40):
        for p in range(n_par):
            _matmul(a, term_f[p], tmp)
            _matmul(b[p], term_u, tmp2)
            mx = 0.0
            for i in range(d):
                for j in range(d):
                    term_f[p, i, j] = (tmp[i, j] + tmp2[i, j]) / k
                    du_out[p, i, j] += term_f[p, i, j]
                    m = abs(term_f[p, i, j])
                    if m > mx:
                        mx = m
        _matmul(a, term_u, tmp)
        mxu = 0.0
        for i in range(d):
            for j in range(d):
                term_u[i, j] = tmp[i, j] / k
                u_out[i, j] += term_u[i, j]
                m = abs(term_u[i, j])
                if m > mxu:
                    mxu = m
        if mxu < 1e-18 and (n_par == 0 or mx < 1e-18):
            break

    # undo the scaling: square s times, derivative blocks first
    for _ in range(s):
        for p in range(n_par):
            _matmul(u_out, du_out[p], tmp)
            _matmul(du_out[p], u_out, tmp2)
            for i in range(d):
                for j in range(d):
                    du_out[p, i, j] = tmp[i, j] + tmp2[i, j]
        _matmul(u_out, u_out, tmp)
        for i in range(d):
            for j in range(d):
                u_out[i, j] = tmp[i, j]

    phase = np.exp(mu)
    for i in range(d):
        for j in range(d):
            u_out[i, j] *= phase
            for p in range(n_par):
                du_out[p, i, j] *= phase


@njit
def _no_jump_update(h_eff, dh_eff, t, psi, xi, work):
    """Advance psi and all monitoring operators through a no-jump interval.

    Returns the segment probability p = |U psi|^2 (0.0 signals underflow).
    """
    u, du, psi_new, dpsi, m1, m2 = work
    d = psi.shape[0]
    n_par = dh_eff.shape[0]
    _segment_propagators(h_eff, dh_eff, t, u, du)

    _matvec(u, psi, psi_new)
    p = 0.0
    for i in range(d):
        p += psi_new[i].real ** 2 + psi_new[i].imag ** 2
    if p < 1e-300:
        return 0.0

    for a in range(n_par):
        _matvec(du[a], psi, dpsi)
        _sandwich(u, xi[a], m1, m2)
        for i in range(d):
            for j in range(d):
                xi[a, i, j] = (
                    m1[i, j] + dpsi[i] * np.conj(psi_new[j]) + psi_new[i] * np.conj(dpsi[j])
                ) / p

    inv_norm = 1.0 / np.sqrt(p)
    for i in range(d):
        psi[i] = psi_new[i] * inv_norm
    return p


@njit
def _jump_update(l_ops, cjump, k, psi, xi, work):
    """Apply jump channel k to psi and the monitoring operators; returns p."""
    u, du, psi_new, dpsi, m1, m2 = work
    d = psi.shape[0]
    n_par = cjump.shape[0]
    _matvec(l_ops[k], psi, psi_new)
    p = 0.0
    for i in range(d):
        p += psi_new[i].real ** 2 + psi_new[i].imag ** 2
    if p < 1e-300:
        return 0.0
    for a in range(n_par):
        c2 = 2.0 * cjump[a, k]
        _sandwich(l_ops[k], xi[a], m1, m2)
        for i in range(d):
            for j in range(d):
                xi[a, i, j] = (m1[i, j] + c2 * psi_new[i] * np.conj(psi_new[j])) / p
    inv_norm = 1.0 / np.sqrt(p)
    for i in range(d):
        psi[i] = psi_new[i] * inv_norm
    return p


@njit(inline="always")
def _channel_rates(l_ops, psi, rates, tmp):
    total = 0.0
    n_ch = l_ops.shape[0]
    for k in range(n_ch):
        _matvec(l_ops[k], psi, tmp)
        acc = 0.0
        for i in range(psi.shape[0]):
            acc += tmp[i].real ** 2 + tmp[i].imag ** 2
        rates[k] = acc
        total += acc
    return total


@njit
def _simulate_one(
    seed,
    init_cum,
    init_vecs,
    h_eff,
    tmat,
    qh,
    tri_kind,
    dh_eff,
    l_ops,
    cjump,
    tau,
    bracket_step,
    root_tol,
    max_jumps,
    scores,
    counts,
    ev_t,
    ev_k,
):
    """One Gillespie trajectory with monitoring; fills scores/counts, returns (status, n_events)."""
    d = h_eff.shape[0]
    n_par = dh_eff.shape[0]
    n_ch = l_ops.shape[0]
    cap = ev_t.shape[0]

    rng = np.empty(4, dtype=np.uint64)
    _rng_init(seed, rng)

    psi = np.empty(d, dtype=np.complex128)
    pick = _uniform(rng)
    sel = init_cum.shape[0] - 1
    for i in range(init_cum.shape[0]):
        if pick < init_cum[i]:
            sel = i
            break
    for i in range(d):
        psi[i] = init_vecs[sel, i]

    xi = np.zeros((n_par, d, d), dtype=np.complex128)
    work = (
        np.empty((d, d), dtype=np.complex128),
        np.empty((n_par, d, d), dtype=np.complex128),
        np.empty(d, dtype=np.complex128),
        np.empty(d, dtype=np.complex128),
        np.empty((d, d), dtype=np.complex128),
        np.empty((d, d), dtype=np.complex128),
    )
    w0 = np.empty(d, dtype=np.complex128)
    ek = np.empty(d, dtype=np.complex128)
    rates = np.empty(n_ch, dtype=np.float64)
    rtmp = np.empty(d, dtype=np.complex128)

    t_now = 0.0
    n_events = 0
    while True:
        rem = tau - t_now
        r = _uniform(rng)
        _matvec(qh, psi, w0)
        if _survival(tmat, tri_kind, w0, rem, ek) >= r:
            if _no_jump_update(h_eff, dh_eff, rem, psi, xi, work) == 0.0:
                return STATUS_UNDERFLOW, n_events
            break
        # bracket the jump time; survival is monotone decreasing in t
        lo = 0.0
        hi = bracket_step if bracket_step < rem else rem
        while _survival(tmat, tri_kind, w0, hi, ek) >= r:
            lo = hi
            hi = hi + bracket_step
            if hi >= rem:
                hi = rem
                break
        it = 0
        while (hi - lo) > root_tol * hi and it < 128:
            mid = 0.5 * (lo + hi)
            if _survival(tmat, tri_kind, w0, mid, ek) >= r:
                lo = mid
            else:
                hi = mid
            it += 1
        t_star = 0.5 * (lo + hi)

        if _no_jump_update(h_eff, dh_eff, t_star, psi, xi, work) == 0.0:
            return STATUS_UNDERFLOW, n_events
        t_now += t_star

        total = _channel_rates(l_ops, psi, rates, rtmp)
        if total < 1e-280:
            return STATUS_STALLED_RATE, n_events
        pick = _uniform(rng) * total
        k_sel = n_ch - 1
        acc = 0.0
        for k in range(n_ch):
            acc += rates[k]
            if pick < acc:
                k_sel = k
                break
        if _jump_update(l_ops, cjump, k_sel, psi, xi, work) == 0.0:
            return STATUS_UNDERFLOW, n_events
        counts[k_sel] += 1
        if n_events < cap:
            ev_t[n_events] = t_now
            ev_k[n_events] = k_sel
        n_events += 1
        if n_events > max_jumps:
            return STATUS_MAX_JUMPS, n_events

    for a in range(n_par):
        tr = 0.0
        for i in range(d):
            tr += xi[a, i, i].real
        scores[a] = tr
    return STATUS_OK, n_events


@njit(parallel=True)
def _ensemble_gillespie(
    seeds,
    init_cum,
    init_vecs,
    h_eff,
    tmat,
    qh,
    tri_kind,
    dh_eff,
    l_ops,
    cjump,
    tau,
    bracket_step,
    root_tol,
    max_jumps,
    scores,
    counts,
    status,
    n_events,
    ev_t,
    ev_k,
):
    m = seeds.shape[0]
    for i in prange(m):
        st, ne = _simulate_one(
            seeds[i],
            init_cum,
            init_vecs,
            h_eff,
            tmat,
            qh,
            tri_kind,
            dh_eff,
            l_ops,
            cjump,
            tau,
            bracket_step,
            root_tol,
            max_jumps,
            scores[i],
            counts[i],
            ev_t[i],
            ev_k[i],
        )
        status[i] = st
        n_events[i] = ne


@njit
def _simulate_one_fixed_dt(
    seed,
    init_cum,
    init_vecs,
    u_dt,
    du_dt,
    l_ops,
    cjump,
    dt,
    n_steps,
    max_jumps,
    scores,
    counts,
    ev_t,
    ev_k,
):
    """Fixed-step sampler: per step, jump k with probability dt |L_k psi|^2."""
    d = u_dt.shape[0]
    n_par = du_dt.shape[0]
    n_ch = l_ops.shape[0]
    cap = ev_t.shape[0]

    rng = np.empty(4, dtype=np.uint64)
    _rng_init(seed, rng)

    psi = np.empty(d, dtype=np.complex128)
    pick = _uniform(rng)
    sel = init_cum.shape[0] - 1
    for i in range(init_cum.shape[0]):
        if pick < init_cum[i]:
            sel = i
            break
    for i in range(d):
        psi[i] = init_vecs[sel, i]

    xi = np.zeros((n_par, d, d), dtype=np.complex128)
    work = (
        np.empty((d, d), dtype=np.complex128),
        np.empty((n_par, d, d), dtype=np.complex128),
        np.empty(d, dtype=np.complex128),
        np.empty(d, dtype=np.complex128),
        np.empty((d, d), dtype=np.complex128),
        np.empty((d, d), dtype=np.complex128),
    )
    rates = np.empty(n_ch, dtype=np.float64)
    rtmp = np.empty(d, dtype=np.complex128)
    psi_new = np.empty(d, dtype=np.complex128)
    dpsi = np.empty(d, dtype=np.complex128)
    m1 = np.empty((d, d), dtype=np.complex128)
    m2 = np.empty((d, d), dtype=np.complex128)

    n_events = 0
    for step in range(n_steps):
        total = _channel_rates(l_ops, psi, rates, rtmp)
        u = _uniform(rng)
        if u < dt * total:
            pick = u / dt
            k_sel = n_ch - 1
            acc = 0.0
            for k in range(n_ch):
                acc += rates[k]
                if pick < acc:
                    k_sel = k
                    break
            if _jump_update(l_ops, cjump, k_sel, psi, xi, work) == 0.0:
                return STATUS_UNDERFLOW, n_events
            counts[k_sel] += 1
            if n_events < cap:
                ev_t[n_events] = (step + 1) * dt
                ev_k[n_events] = k_sel
            n_events += 1
            if n_events > max_jumps:
                return STATUS_MAX_JUMPS, n_events
        else:
            # no-jump step with the cached propagator
            _matvec(u_dt, psi, psi_new)
            p = 0.0
            for i in range(d):
                p += psi_new[i].real ** 2 + psi_new[i].imag ** 2
            if p < 1e-300:
                return STATUS_UNDERFLOW, n_events
            for a in range(n_par):
                _matvec(du_dt[a], psi, dpsi)
                _sandwich(u_dt, xi[a], m1, m2)
                for i in range(d):
                    for j in range(d):
                        xi[a, i, j] = (
                            m1[i, j]
                            + dpsi[i] * np.conj(psi_new[j])
                            + psi_new[i] * np.conj(dpsi[j])
                        ) / p
            inv_norm = 1.0 / np.sqrt(p)
            for i in range(d):
                psi[i] = psi_new[i] * inv_norm

    for a in range(n_par):
        tr = 0.0
        for i in range(d):
            tr += xi[a, i, i].real
        scores[a] = tr
    return STATUS_OK, n_events


@njit(parallel=True)
def _ensemble_fixed_dt(
    seeds,
    init_cum,
    init_vecs,
    u_dt,
    du_dt,
    l_ops,
    cjump,
    dt,
    n_steps,
    max_jumps,
    scores,
    counts,
    status,
    n_events,
    ev_t,
    ev_k,
):
    m = seeds.shape[0]
    for i in prange(m):
        st, ne = _simulate_one_fixed_dt(
            seeds[i],
            init_cum,
            init_vecs,
            u_dt,
            du_dt,
            l_ops,
            cjump,
            dt,
            n_steps,
            max_jumps,
            scores[i],
            counts[i],
            ev_t[i],
            ev_k[i],
        )
        status[i] = st
        n_events[i] = ne


@njit(parallel=True)
def _first_jump_times(seeds, psi0, tmat, qh, tri_kind, horizon, bracket_step, root_tol, out):
    """Waiting time of the first jump from a fixed state; +inf when censored at horizon."""
    m = seeds.shape[0]
    d = psi0.shape[0]
    for i in prange(m):
        rng = np.empty(4, dtype=np.uint64)
        _rng_init(seeds[i], rng)
        w0 = np.empty(d, dtype=np.complex128)
        ek = np.empty(d, dtype=np.complex128)
        _matvec(qh, psi0, w0)
        r = _uniform(rng)
        if _survival(tmat, tri_kind, w0, horizon, ek) >= r:
            out[i] = np.inf
            continue
        lo = 0.0
        hi = bracket_step if bracket_step < horizon else horizon
        while _survival(tmat, tri_kind, w0, hi, ek) >= r:
            lo = hi
            hi = hi + bracket_step
            if hi >= horizon:
                hi = horizon
                break
        it = 0
        while (hi - lo) > root_tol * hi and it < 128:
            mid = 0.5 * (lo + hi)
            if _survival(tmat, tri_kind, w0, mid, ek) >= r:
                lo = mid
            else:
                hi = mid
            it += 1
        out[i] = 0.5 * (lo + hi)
