"""Parameter imprintings and monitoring-operator evolution.

A fictitious parameter per channel group rescales the dynamics: for the
activity-type (kur) imprinting the group-alpha jump amplitudes scale as
sqrt(1 + phi_alpha) and the Hamiltonian as (1 + sum_alpha phi_alpha); the
current-type (tur) imprinting scales each jump amplitude by
sqrt(1 + l_k theta_alpha), where l_k is the steady-state rate asymmetry of
the reversed pair.  Both are linear in the parameters, so a scheme is fully
described by the effective-Hamiltonian derivative per parameter and a
per-channel jump coefficient c_k with dL_k/dparam = c_k L_k.

Along a trajectory, each parameter carries a monitoring operator xi whose
trace is the log-likelihood derivative (the score).  For a step with Kraus
element K and derivative dK the exact update is

    xi <- (K xi K† + (dK psi)(K psi)† + (K psi)(dK psi)†) / p,   p = |K psi|^2,

with psi the normalized pre-step state.  Averaging products of scores over
trajectories estimates the Fisher information matrix of the imprinted
parameters at zero deformation.

This module is the plain-numpy reference path; the compiled kernels in
``_engine`` implement the same updates and are cross-checked against it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, ImprintingError, MonitoringUnderflowError
from .models import LindbladModel
from .operators import Operator

PROPAGATOR_NORM_CAP = 1e3


@dataclass(frozen=True)
class ImprintingScheme:
    """Linear parameter deformation of a model.

    ``dh_eff[a]`` is the derivative of the effective Hamiltonian with respect
    to parameter a; ``jump_coeffs[a, k]`` is the coefficient c with
    dL_k = c L_k.  Invariants by construction: for kind "kur",
    c in {0, 1/2} selecting the parameter's group; for kind "tur",
    c = l_k/2 on the parameter's group with l_k the steady-state rate
    asymmetry.
    """

    kind: str
    labels: tuple[str, ...]
    dh_eff: np.ndarray  # (P, d, d)
    jump_coeffs: np.ndarray  # (P, K)

    def __post_init__(self):
        if self.kind not in ("kur", "tur"):
            raise ValueError(f"unknown imprinting kind {self.kind!r}")
        dh = np.asarray(self.dh_eff, dtype=np.complex128)
        c = np.asarray(self.jump_coeffs, dtype=np.float64)
        if dh.ndim != 3 or dh.shape[0] != len(self.labels) or c.shape[0] != len(self.labels):
            raise DimensionMismatchError("scheme arrays must carry one slot per parameter")
        object.__setattr__(self, "dh_eff", dh)
        object.__setattr__(self, "jump_coeffs", c)

    @property
    def parameter_count(self) -> int:
        return len(self.labels)


def rate_asymmetries(model: LindbladModel, rho) -> np.ndarray:
    """Per-channel (r_k - r_k') / (r_k + r_k') at the given state; NaN when unpaired."""
    rho = np.asarray(getattr(rho, "entries", rho), dtype=np.complex128)
    rates = {}
    for ch in model.channels:
        l = ch.operator.entries
        rates[ch.id] = float(np.trace(l @ rho @ l.conj().T).real)
    out = np.full(len(model.channels), np.nan)
    for i, ch in enumerate(model.channels):
        if ch.reverse_id is None:
            continue
        denom = rates[ch.id] + rates[ch.reverse_id]
        out[i] = (rates[ch.id] - rates[ch.reverse_id]) / denom if denom > 0 else 0.0
    return out


def _dh_eff_from_coeffs(model: LindbladModel, coeffs: np.ndarray) -> np.ndarray:
    h = np.array(model.hamiltonian.entries, dtype=np.complex128)
    acc = np.zeros_like(h)
    for c, ch in zip(coeffs, model.channels):
        l = ch.operator.entries
        acc += 2.0 * c * (l.conj().T @ l)
    return h - 0.5j * acc


def _tur_coeff_table(model: LindbladModel, rho_ss) -> np.ndarray:
    if rho_ss is None:
        raise ImprintingError("the current-type imprinting needs the steady state")
    ls = rate_asymmetries(model, rho_ss)
    for ch, l in zip(model.channels, ls):
        if ch.reverse_id is None:
            raise ImprintingError(
                f"channel {ch.id} has no reverse partner; current-type imprinting undefined"
            )
        if model.channel(ch.reverse_id).group != ch.group:
            raise ImprintingError(
                f"channels {ch.id},{ch.reverse_id} straddle two groups; "
                "current-type imprinting requires pairs inside one group"
            )
    return ls


def make_scheme(model: LindbladModel, kind: str, rho_ss=None) -> ImprintingScheme:
    """Two-parameter scheme, one parameter per channel group."""
    kind = kind.lower()
    group_labels = sorted(model.groups)
    if len(group_labels) != 2:
        raise ImprintingError(f"two-parameter schemes need exactly 2 groups, model has {len(group_labels)}")
    n_ch = len(model.channels)
    coeffs = np.zeros((2, n_ch))
    if kind == "kur":
        for a, g in enumerate(group_labels):
            for i, ch in enumerate(model.channels):
                if ch.group == g:
                    coeffs[a, i] = 0.5
        labels = ("phi1", "phi2")
    elif kind == "tur":
        ls = _tur_coeff_table(model, rho_ss)
        for a, g in enumerate(group_labels):
            for i, ch in enumerate(model.channels):
                if ch.group == g:
                    coeffs[a, i] = 0.5 * ls[i]
        labels = ("theta1", "theta2")
    else:
        raise ValueError(f"unknown imprinting kind {kind!r}")
    dh = np.stack([_dh_eff_from_coeffs(model, coeffs[a]) for a in range(2)])
    return ImprintingScheme(kind=kind, labels=labels, dh_eff=dh, jump_coeffs=coeffs)


def make_single_parameter_scheme(model: LindbladModel, kind: str, rho_ss=None) -> ImprintingScheme:
    """One parameter rescaling every channel (the single-observable construction)."""
    kind = kind.lower()
    n_ch = len(model.channels)
    if kind == "kur":
        coeffs = np.full((1, n_ch), 0.5)
        labels = ("phi",)
    elif kind == "tur":
        ls = _tur_coeff_table(model, rho_ss)
        coeffs = (0.5 * ls)[None, :]
        labels = ("theta",)
    else:
        raise ValueError(f"unknown imprinting kind {kind!r}")
    dh = _dh_eff_from_coeffs(model, coeffs[0])[None, :, :]
    return ImprintingScheme(kind=kind, labels=labels, dh_eff=dh, jump_coeffs=coeffs)


def propagator_and_derivative(h_eff, dh_eff, t: float) -> tuple[np.ndarray, np.ndarray]:
    """No-jump propagator U(t) = exp(-i H_eff t) and its parameter derivative.

    dU = -i int_0^t U(t-s) dH_eff U(s) ds, obtained exactly as the top-right
    block of exp(G t) with the block-triangular augmented generator
    G = [[-i H_eff, -i dH_eff], [0, -i H_eff]].
    """
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    h = np.asarray(h_eff, dtype=np.complex128)
    dh = np.asarray(dh_eff, dtype=np.complex128)
    d = h.shape[0]
    if t * np.linalg.norm(h, 2) > PROPAGATOR_NORM_CAP:
        raise ValueError("t * |H_eff| too large for a stable augmented exponential")
    aug = np.zeros((2 * d, 2 * d), dtype=np.complex128)
    aug[:d, :d] = -1j * h
    aug[d:, d:] = -1j * h
    aug[:d, d:] = -1j * dh
    full = scipy.linalg.expm(aug * t)
    return full[:d, :d], full[:d, d:]


@dataclass(frozen=True)
class MonitoringState:
    """Conditional state plus one monitoring operator per parameter."""

    psi: np.ndarray  # (d,), normalized
    xi: np.ndarray  # (P, d, d)
    t: float = 0.0

    def scores(self) -> np.ndarray:
        """Real part of tr(xi) per parameter (the imaginary part must vanish)."""
        traces = np.trace(self.xi, axis1=1, axis2=2)
        return traces.real


class MonitoringRun:
    """Reference (uncompiled) monitoring evolution for a model and scheme set."""

    def __init__(self, model: LindbladModel, schemes: Sequence[ImprintingScheme]):
        self.model = model
        self.h_eff = model.effective_hamiltonian()
        if schemes:
            self.dh_eff = np.concatenate([s.dh_eff for s in schemes], axis=0)
            self.cjump = np.concatenate([s.jump_coeffs for s in schemes], axis=0)
            self.labels = tuple(l for s in schemes for l in s.labels)
        else:
            self.dh_eff = np.zeros((0, model.dim, model.dim), dtype=np.complex128)
            self.cjump = np.zeros((0, len(model.channels)))
            self.labels = ()
        self._channel_index = {c.id: i for i, c in enumerate(model.channels)}

    @property
    def parameter_count(self) -> int:
        return self.dh_eff.shape[0]

    def initial_state(self, psi0) -> MonitoringState:
        psi = np.asarray(psi0, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        xi = np.zeros((self.parameter_count, self.model.dim, self.model.dim), dtype=np.complex128)
        return MonitoringState(psi=psi, xi=xi, t=0.0)

    def _kraus_step(self, state: MonitoringState, k: np.ndarray, dks: np.ndarray, dt: float) -> MonitoringState:
        q = k @ state.psi
        p = float(np.vdot(q, q).real)
        if p < 1e-300:
            raise MonitoringUnderflowError("segment probability underflowed")
        xi = np.empty_like(state.xi)
        for a in range(self.parameter_count):
            r = dks[a] @ state.psi
            term = np.outer(r, q.conj())
            xi[a] = (k @ state.xi[a] @ k.conj().T + term + term.conj().T) / p
        return MonitoringState(psi=q / np.sqrt(p), xi=xi, t=state.t + dt)

    def no_jump(self, state: MonitoringState, dt: float) -> MonitoringState:
        dks = np.empty((self.parameter_count, self.model.dim, self.model.dim), dtype=np.complex128)
        u = None
        for a in range(self.parameter_count):
            u, dks[a] = propagator_and_derivative(self.h_eff, self.dh_eff[a], dt)
        if u is None:
            u = scipy.linalg.expm(-1j * self.h_eff * dt)
        return self._kraus_step(state, u, dks, dt)

    def jump(self, state: MonitoringState, channel_id: int) -> MonitoringState:
        i = self._channel_index[channel_id]
        l = self.model.channels[i].operator.entries
        dks = np.stack([self.cjump[a, i] * l for a in range(self.parameter_count)]) if self.parameter_count else np.zeros((0,) + l.shape, dtype=np.complex128)
        return self._kraus_step(state, np.asarray(l), dks, 0.0)


def evolve_monitoring(state: MonitoringState, segment, run: MonitoringRun) -> MonitoringState:
    """Advance through one segment: ("no_jump", dt) or ("jump", channel_id)."""
    tag, value = segment
    if tag == "no_jump":
        return run.no_jump(state, float(value))
    if tag == "jump":
        return run.jump(state, int(value))
    raise ValueError(f"unknown segment tag {tag!r}")


def score_trajectory(model: LindbladModel, schemes: Sequence[ImprintingScheme], record, psi0) -> np.ndarray:
    """Replay a jump record and return the per-parameter scores at tau."""
    run = MonitoringRun(model, schemes)
    state = run.initial_state(psi0)
    t_prev = 0.0
    for t, k in record.events:
        state = run.no_jump(state, t - t_prev)
        state = run.jump(state, k)
        t_prev = t
    state = run.no_jump(state, record.tau - t_prev)
    traces = np.trace(state.xi, axis1=1, axis2=2)
    if traces.size and np.max(np.abs(traces.imag)) > 1e-9:
        raise MonitoringUnderflowError("monitoring trace developed an imaginary part")
    return traces.real


def log_likelihood(
    model: LindbladModel,
    schemes: Sequence[ImprintingScheme],
    record,
    psi0,
    values: Sequence[float],
) -> float:
    """ln p of a fixed record under the deformed dynamics at the given parameter values.

    The deformation is linear: H_eff -> H_eff + sum_a values[a] dh_eff[a] and
    each jump amplitude scales by sqrt(1 + 2 c_k values[a]).  Used to verify
    scores against finite differences.
    """
    run = MonitoringRun(model, schemes)
    values = np.asarray(values, dtype=float)
    if values.size != run.parameter_count:
        raise DimensionMismatchError("one value per imprinted parameter required")
    h_def = run.h_eff + np.tensordot(values, run.dh_eff, axes=(0, 0))
    logp = 0.0
    psi = np.asarray(psi0, dtype=np.complex128).ravel().copy()
    t_prev = 0.0
    idx = {c.id: i for i, c in enumerate(model.channels)}
    for t, k in record.events:
        psi = scipy.linalg.expm(-1j * h_def * (t - t_prev)) @ psi
        i = idx[k]
        factor = 1.0 + 2.0 * float(values @ run.cjump[:, i])
        if factor <= 0:
            raise ValueError("deformation too large: jump factor went non-positive")
        psi = np.sqrt(factor) * (model.channels[i].operator.entries @ psi)
        nrm = np.linalg.norm(psi)
        if nrm < 1e-300:
            raise MonitoringUnderflowError("deformed amplitude underflowed")
        logp += 2.0 * np.log(nrm)
        psi = psi / nrm
        t_prev = t
    psi = scipy.linalg.expm(-1j * h_def * (record.tau - t_prev)) @ psi
    nrm = np.linalg.norm(psi)
    logp += 2.0 * np.log(nrm)
    return float(logp)


@dataclass(frozen=True)
class FisherMatrixEstimate:
    """Sample Fisher matrix <s_a s_b> with bootstrap standard errors."""

    values: np.ndarray  # (2, 2)
    std_errors: np.ndarray  # (2, 2)
    score_means: np.ndarray  # (2,)
    score_mean_ses: np.ndarray  # (2,)
    sample_count: int


@dataclass(frozen=True)
class FisherScalarEstimate:
    value: float
    std_error: float
    score_mean: float
    score_mean_se: float
    sample_count: int


def bootstrap_indices(sample_count: int, n_boot: int, seed: int) -> np.ndarray:
    """Shared resample index stream so different estimators get joint error bars."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, sample_count, size=(n_boot, sample_count), dtype=np.int64)


def estimate_fisher(
    scores: np.ndarray,
    n_boot: int = 200,
    seed: int = 0,
    indices: Optional[np.ndarray] = None,
) -> FisherMatrixEstimate:
    """Fisher matrix estimate from per-trajectory score pairs.

    The estimator is the plain second moment (scores have zero mean at the
    true parameter); ``indices`` can inject a shared bootstrap stream.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise DimensionMismatchError("estimate_fisher expects (M, 2) scores")
    m = s.shape[0]
    if m < 100:
        raise ValueError("at least 100 trajectories are required")
    if indices is None:
        indices = bootstrap_indices(m, n_boot, seed)
    f_hat = (s.T @ s) / m
    boots = np.empty((indices.shape[0], 2, 2))
    mean_boots = np.empty((indices.shape[0], 2))
    for b, idx in enumerate(indices):
        sb = s[idx]
        boots[b] = (sb.T @ sb) / m
        mean_boots[b] = sb.mean(axis=0)
    return FisherMatrixEstimate(
        values=f_hat,
        std_errors=boots.std(axis=0, ddof=1),
        score_means=s.mean(axis=0),
        score_mean_ses=mean_boots.std(axis=0, ddof=1),
        sample_count=m,
    )


def estimate_fisher_scalar(
    scores: np.ndarray,
    n_boot: int = 200,
    seed: int = 0,
    indices: Optional[np.ndarray] = None,
) -> FisherScalarEstimate:
    s = np.asarray(scores, dtype=float).ravel()
    m = s.size
    if m < 100:
        raise ValueError("at least 100 trajectories are required")
    if indices is None:
        indices = bootstrap_indices(m, n_boot, seed)
    boots = np.array([(s[idx] ** 2).mean() for idx in indices])
    mean_boots = np.array([s[idx].mean() for idx in indices])
    return FisherScalarEstimate(
        value=float((s**2).mean()),
        std_error=float(boots.std(ddof=1)),
        score_mean=float(s.mean()),
        score_mean_se=float(mean_boots.std(ddof=1)),
        sample_count=m,
    )
