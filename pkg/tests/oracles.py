"""Independent slow-path oracles used by several test modules.

Everything here integrates the (possibly deformed) master equation directly
with dense matrix exponentials and Simpson quadrature; none of it shares code
with the fast paths it checks.
"""

import numpy as np
import scipy.linalg

from jumpbounds.operators import (
    commutator_superoperator,
    dissipator_superoperator,
    spectral_data,
    unvectorize,
    vectorize,
)
from jumpbounds.monitoring import rate_asymmetries


def deformed_observable_means(model, defs, values, tau, rho0=None, kind="kur", n=8192):
    """<Phi_alpha> over [0, tau] under the deformed dynamics.

    kind "kur": group-alpha rates scaled by (1 + values[alpha]); kind "tur":
    scaled by (1 + l_k values[alpha]) with steady-state asymmetries.  The
    Hamiltonian always carries (1 + sum(values)).
    """
    from jumpbounds.operators import build_liouvillian, steady_state

    liouv = build_liouvillian(model)
    rss = steady_state(liouv.total)
    if rho0 is None:
        rho0 = np.asarray(rss.entries)
    labels = sorted(model.groups)
    gen = commutator_superoperator((1.0 + sum(values)) * model.hamiltonian.entries)
    if kind == "tur":
        ls = rate_asymmetries(model, rss)
    else:
        ls = np.ones(len(model.channels))
    channel_factors = []
    for lk, ch in zip(ls, model.channels):
        a = labels.index(ch.group)
        factor = 1.0 + lk * values[a]
        channel_factors.append(factor)
        gen = gen + factor * dissipator_superoperator(ch.operator.entries)

    d = model.dim
    # dual (Heisenberg) vectors so the integrand is one dot product per state
    duals = []
    for obs in defs:
        op = np.zeros((d, d), complex)
        for wk, factor, ch in zip(obs.weight_vector(model), channel_factors, model.channels):
            if wk != 0.0:
                l = ch.operator.entries
                op += wk * factor * (l.conj().T @ l)
        duals.append(vectorize(op).conj())
    duals = np.stack(duals)

    h = tau / n
    eh = scipy.linalg.expm(gen * h)
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    rhos = np.empty((n + 1, d * d), complex)
    rhos[0] = vectorize(rho0)
    for i in range(n):
        rhos[i + 1] = eh @ rhos[i]
    vals = np.real(rhos @ duals.T)  # (n+1, 2)
    return (weights[:, None] * vals).sum(axis=0) * h / 3.0


def correction_star_fd(model, defs, tau, kind="kur", eps=1e-4):
    """Finite-difference star means over a window [tau, 2 tau].

    The two-point difference cancels the constant-in-tau transient, isolating
    the tau-linear part that the long-time formulas compute.
    """
    def stars(T):
        base = deformed_observable_means(model, defs, [0.0, 0.0], T, kind=kind)
        out = np.zeros(2)
        for a in range(2):
            vals = [0.0, 0.0]
            vals[a] = eps
            up = deformed_observable_means(model, defs, vals, T, kind=kind)
            vals[a] = -eps
            dn = deformed_observable_means(model, defs, vals, T, kind=kind)
            out[a] = (up[a] - dn[a]) / (2.0 * eps) - base[a]
        return out

    return stars(2.0 * tau) - stars(tau)


def liouvillian_gap(model):
    from jumpbounds.operators import build_liouvillian

    sd = spectral_data(build_liouvillian(model).total)
    return -max(
        sd.eigenvalues[j].real for j in range(len(sd.eigenvalues)) if j != sd.zero_index
    )


def classical_rate_generator(rates):
    """Classical master-equation generator W with W[s, s'] = R[s, s'] - delta Gamma."""
    r = np.asarray(rates, dtype=float)
    return r - np.diag(r.sum(axis=0))


def finite_time_moments(model, defs, rho0, tau, n=8192):
    """Exact means and covariance of two counting observables over [0, tau].

    Second moments combine the same-channel coincidence term with the ordered
    two-time jump correlation   tr{J_a exp(L (t-t')) J_b rho(t')},  integrated
    by trapezoid in both time arguments (the lag sum is a convolution).
    """
    from jumpbounds.operators import build_liouvillian, jump_superoperator, trace_functional

    liouv = build_liouvillian(model)
    lmat = liouv.total.matrix
    d = model.dim
    h = tau / n
    eh = scipy.linalg.expm(lmat * h)
    tv = trace_functional(d)
    ops = [c.operator.entries for c in model.channels]
    jmats = [jump_superoperator(ops, obs.weight_vector(model)).matrix for obs in defs]
    wvecs = [obs.weight_vector(model) for obs in defs]

    rhos = np.empty((n + 1, d * d), complex)
    rhos[0] = vectorize(np.asarray(rho0, complex))
    for i in range(n):
        rhos[i + 1] = eh @ rhos[i]
    wt = np.ones(n + 1)
    wt[0] = wt[-1] = 0.5

    rates = np.array(
        [[float(np.real(tv @ (jmats[a] @ rhos[i]))) for i in range(n + 1)] for a in range(2)]
    )
    means = (rates * wt).sum(axis=1) * h

    coincidence = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            jab = jump_superoperator(ops, wvecs[a] * wvecs[b]).matrix
            vals = np.array([float(np.real(tv @ (jab @ rhos[i]))) for i in range(n + 1)])
            coincidence[a, b] = (vals * wt).sum() * h

    ordered = np.zeros((2, 2))
    for a in range(2):
        u = np.empty((n + 1, d * d), complex)
        u[0] = tv @ jmats[a]
        for m in range(n):
            u[m + 1] = u[m] @ eh
        for b in range(2):
            v = (jmats[b] @ rhos.T).T
            conv = np.zeros(n + 1)
            for c in range(d * d):
                conv += np.real(np.convolve(u[:, c], v[:, c])[: n + 1])
            inner = conv - 0.5 * np.real(u @ v[0]) - 0.5 * np.real(v @ u[0])
            ordered[a, b] = (inner * wt).sum() * h * h

    second = coincidence + ordered + ordered.T
    return means, second - np.outer(means, means)
