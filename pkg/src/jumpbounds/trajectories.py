"""Quantum-jump trajectory sampling over a fixed window [0, tau].

The default sampler inverts the exact no-jump survival probability
|U(t) psi|^2 per segment (bracketing plus bisection), so jump times carry no
step-size bias; a fixed-step sampler is provided as a cross-check.  Both run
inside compiled kernels (see ``_engine``) and update per-parameter monitoring
operators alongside the conditional state when an imprinting scheme is
supplied.

Sampling is embarrassingly parallel and counter-seeded: trajectory i of an
ensemble depends only on (master_seed, i), never on worker count.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numba
import scipy.linalg

from . import _engine
from .errors import (
    DimensionMismatchError,
    DivergingRateError,
    JumpBoundsError,
    MonitoringUnderflowError,
)
from .models import LindbladModel
from .monitoring import ImprintingScheme, propagator_and_derivative
from .operators import matrix_exponential


@dataclass(frozen=True)
class SamplerConfig:
    """How trajectories are drawn.

    ``root_tol`` is the relative tolerance on inverted waiting times
    (gillespie method); ``dt`` only applies to the fixed-step method.
    """

    method: str = "gillespie"
    dt: float = 1e-3
    root_tol: float = 1e-10
    max_jumps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("gillespie", "fixed_dt"):
            raise ValueError(f"unknown sampler method {self.method!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0.0 < self.root_tol <= 1e-3):
            raise ValueError("root_tol must lie in (0, 1e-3]")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Ordered jump record of one stochastic realization."""

    events: tuple[tuple[float, int], ...]
    tau: float
    seed: int
    final_state: np.ndarray

    def __post_init__(self):
        last = 0.0
        for t, _k in self.events:
            if t <= last:
                raise ValueError("event times must be strictly increasing and positive")
            if t > self.tau:
                raise ValueError("event beyond the trajectory window")
            last = t

    @property
    def jump_count(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class InitialEnsemble:
    """Pure states and selection probabilities for the trajectory start."""

    vectors: np.ndarray  # (n, d), rows normalized
    cumulative: np.ndarray  # (n,)

    @staticmethod
    def pure(psi) -> "InitialEnsemble":
        v = np.asarray(psi, dtype=np.complex128).ravel()
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"initial state must be normalized (norm {norm:.6f})")
        return InitialEnsemble(v[None, :] / norm, np.array([1.0]))

    @staticmethod
    def from_density_matrix(rho) -> "InitialEnsemble":
        """Eigen-ensemble of a (possibly mixed) density matrix."""
        m = np.asarray(getattr(rho, "entries", rho), dtype=np.complex128)
        w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
        keep = w > 1e-12
        w, u = w[keep], u[:, keep]
        w = w / w.sum()
        order = np.argsort(-w)
        w, u = w[order], u[:, order]
        return InitialEnsemble(np.ascontiguousarray(u.T), np.cumsum(w))


@dataclass(frozen=True)
class EngineContext:
    """Packed arrays for the compiled kernels, built once per (model, schemes)."""

    model: LindbladModel
    l_ops: np.ndarray  # (K, d, d)
    h_eff: np.ndarray  # (d, d)
    tmat: np.ndarray  # upper-triangular Schur factor of H_eff
    qh: np.ndarray  # Q† with H_eff = Q T Q†
    tri_kind: int
    cjump: np.ndarray  # (P, K)
    dh_eff: np.ndarray  # (P, d, d)
    bracket_step: float
    parameter_labels: tuple[str, ...] = ()

    @property
    def channel_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.model.channels)


def build_engine_context(
    model: LindbladModel, schemes: Sequence[ImprintingScheme] = ()
) -> EngineContext:
    """Schur-factor H_eff and pack jump/imprinting arrays for the kernels.

    The triangular exponential used for waiting-time inversion has closed
    forms for d <= 3 and for diagonal Schur factors (classical networks of
    any dimension); other models must use the fixed-step sampler.
    """
    d = model.dim
    h_eff = np.ascontiguousarray(model.effective_hamiltonian())
    tmat, q = scipy.linalg.schur(h_eff, output="complex")
    offdiag = np.max(np.abs(np.triu(tmat, 1))) if d > 1 else 0.0
    scale = max(1.0, float(np.max(np.abs(tmat))))
    if offdiag < 1e-13 * scale:
        tri_kind = _engine.TRI_DIAGONAL
    elif d == 2:
        tri_kind = _engine.TRI_D2
    elif d == 3:
        tri_kind = _engine.TRI_D3
    else:
        raise JumpBoundsError(
            "waiting-time inversion supports d <= 3 (or diagonal effective Hamiltonians); "
            "use the fixed_dt sampler for this model"
        )
    l_ops = np.ascontiguousarray(model.jump_matrices())

    labels: list[str] = []
    dh_blocks: list[np.ndarray] = []
    c_blocks: list[np.ndarray] = []
    for scheme in schemes:
        if scheme.dh_eff.shape[1] != d:
            raise DimensionMismatchError("scheme dimension does not match the model")
        labels.extend(scheme.labels)
        dh_blocks.append(scheme.dh_eff)
        c_blocks.append(scheme.jump_coeffs)
    if dh_blocks:
        dh_eff = np.concatenate(dh_blocks, axis=0)
        cjump = np.concatenate(c_blocks, axis=0)
    else:
        dh_eff = np.zeros((0, d, d), dtype=np.complex128)
        cjump = np.zeros((0, l_ops.shape[0]))

    gamma_tot = np.zeros((d, d), dtype=np.complex128)
    for k in range(l_ops.shape[0]):
        gamma_tot += l_ops[k].conj().T @ l_ops[k]
    gamma_max = float(np.linalg.eigvalsh(gamma_tot).max())
    bracket_step = 0.05 / gamma_max if gamma_max > 0 else 1.0

    return EngineContext(
        model=model,
        l_ops=l_ops,
        h_eff=h_eff,
        tmat=np.ascontiguousarray(tmat),
        qh=np.ascontiguousarray(q.conj().T),
        tri_kind=tri_kind,
        cjump=np.ascontiguousarray(np.asarray(cjump, dtype=np.float64)),
        dh_eff=np.ascontiguousarray(dh_eff),
        bracket_step=bracket_step,
        parameter_labels=tuple(labels),
    )


@dataclass(frozen=True)
class EnsembleResult:
    """Per-trajectory outputs of a kernel run, ordered by trajectory index."""

    scores: np.ndarray  # (M, P)
    counts: np.ndarray  # (M, K) jump counts per channel
    n_events: np.ndarray  # (M,)
    seeds: np.ndarray  # (M,) uint64
    tau: float
    parameter_labels: tuple[str, ...] = ()
    event_times: Optional[np.ndarray] = None  # (M, cap) when recorded
    event_channels: Optional[np.ndarray] = None

    def record(self, i: int, model: LindbladModel, final_state=None) -> TrajectoryRecord:
        if self.event_times is None:
            raise ValueError("ensemble was run without event recording")
        n = int(self.n_events[i])
        ids = tuple(c.id for c in model.channels)
        # fixed-step event times are step multiples of dt; clamp roundoff past tau
        events = tuple(
            (min(float(self.event_times[i, j]), self.tau), ids[int(self.event_channels[i, j])])
            for j in range(n)
        )
        fs = final_state if final_state is not None else np.zeros(model.dim, dtype=np.complex128)
        return TrajectoryRecord(events=events, tau=self.tau, seed=int(self.seeds[i]), final_state=fs)


def _raise_for_status(status: np.ndarray, seeds: np.ndarray):
    bad = np.flatnonzero(status != _engine.STATUS_OK)
    if bad.size == 0:
        return
    i = int(bad[0])
    code = int(status[i])
    msg = f"trajectory {i} (seed {int(seeds[i])})"
    if code == _engine.STATUS_MAX_JUMPS:
        raise DivergingRateError(f"{msg}: jump count exceeded the safety cap")
    if code == _engine.STATUS_UNDERFLOW:
        raise MonitoringUnderflowError(f"{msg}: segment probability underflowed")
    raise JumpBoundsError(f"{msg}: total jump rate vanished at a scheduled jump")


def run_monitored_ensemble(
    model: LindbladModel,
    init: InitialEnsemble,
    tau: float,
    count: int,
    master_seed: int,
    schemes: Sequence[ImprintingScheme] = (),
    sampler: SamplerConfig = SamplerConfig(),
    workers: Optional[int] = None,
    record_cap: int = 0,
    context: Optional[EngineContext] = None,
) -> EnsembleResult:
    """Sample ``count`` trajectories, evolving one monitoring operator per parameter.

    Results are bit-identical for fixed (master_seed, count) regardless of
    ``workers``; trajectory i uses a counter-derived seed.
    """
    if count < 1:
        raise ValueError("trajectory count must be >= 1")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if init.vectors.shape[1] != model.dim:
        raise DimensionMismatchError("initial state dimension does not match the model")
    if workers is not None:
        numba.set_num_threads(min(max(1, int(workers)), numba.config.NUMBA_NUM_THREADS))

    ctx = context if context is not None else build_engine_context(model, schemes)
    seeds = _engine.trajectory_seeds(master_seed, count)
    n_par = ctx.dh_eff.shape[0]
    n_ch = ctx.l_ops.shape[0]

    cap = int(record_cap)
    while True:
        scores = np.zeros((count, n_par))
        counts = np.zeros((count, n_ch), dtype=np.int64)
        status = np.zeros(count, dtype=np.int64)
        n_events = np.zeros(count, dtype=np.int64)
        ev_t = np.zeros((count, cap))
        ev_k = np.zeros((count, cap), dtype=np.int32)
        if sampler.method == "gillespie":
            _engine._ensemble_gillespie(
                seeds,
                init.cumulative,
                np.ascontiguousarray(init.vectors),
                ctx.h_eff,
                ctx.tmat,
                ctx.qh,
                ctx.tri_kind,
                ctx.dh_eff,
                ctx.l_ops,
                ctx.cjump,
                float(tau),
                ctx.bracket_step,
                sampler.root_tol,
                sampler.max_jumps,
                scores,
                counts,
                status,
                n_events,
                ev_t,
                ev_k,
            )
        else:
            n_steps = int(round(tau / sampler.dt))
            u_dt = matrix_exponential(model.effective_hamiltonian(), sampler.dt)
            du_dt = np.zeros((n_par, model.dim, model.dim), dtype=np.complex128)
            for a in range(n_par):
                _, du_dt[a] = propagator_and_derivative(
                    model.effective_hamiltonian(), ctx.dh_eff[a], sampler.dt
                )
            _engine._ensemble_fixed_dt(
                seeds,
                init.cumulative,
                np.ascontiguousarray(init.vectors),
                np.ascontiguousarray(u_dt),
                du_dt,
                ctx.l_ops,
                ctx.cjump,
                sampler.dt,
                n_steps,
                sampler.max_jumps,
                scores,
                counts,
                status,
                n_events,
                ev_t,
                ev_k,
            )
        _raise_for_status(status, seeds)
        if cap == 0 or int(n_events.max(initial=0)) <= cap:
            break
        cap = max(cap * 4, int(n_events.max()))  # recording overflowed; rerun larger

    return EnsembleResult(
        scores=scores,
        counts=counts,
        n_events=n_events,
        seeds=seeds,
        tau=float(tau),
        parameter_labels=ctx.parameter_labels,
        event_times=ev_t if cap > 0 else None,
        event_channels=ev_k if cap > 0 else None,
    )


def run_ensemble(
    model: LindbladModel,
    psi0,
    tau: float,
    count: int,
    master_seed: int,
    sampler: SamplerConfig = SamplerConfig(),
    workers: Optional[int] = None,
) -> list[TrajectoryRecord]:
    """Sample an ensemble and return full jump records (no monitoring)."""
    init = psi0 if isinstance(psi0, InitialEnsemble) else InitialEnsemble.pure(psi0)
    result = run_monitored_ensemble(
        model,
        init,
        tau,
        count,
        master_seed,
        schemes=(),
        sampler=sampler,
        workers=workers,
        record_cap=256,
    )
    records = []
    for i in range(count):
        final = replay_final_state(model, init.vectors, init.cumulative, result, i)
        records.append(result.record(i, model, final_state=final))
    return records


def sample_trajectory(
    model: LindbladModel,
    psi0,
    tau: float,
    seed: int,
    sampler: SamplerConfig = SamplerConfig(),
) -> TrajectoryRecord:
    """Draw a single trajectory; ``seed`` is used as the master seed of a 1-ensemble."""
    records = run_ensemble(model, psi0, tau, 1, seed, sampler=sampler)
    return records[0]


def _initial_vector_for(result: EnsembleResult, vectors, cumulative, i: int) -> np.ndarray:
    # reproduce the kernel's initial draw: first uniform of the trajectory stream
    rng_state = np.empty(4, dtype=np.uint64)
    seed = result.seeds[i]
    st = seed
    for j in range(4):
        st, z = _py_splitmix(st)
        rng_state[j] = z
    if not rng_state.any():
        rng_state[0] = np.uint64(1)
    pick = _py_xoshiro_uniform(rng_state)
    sel = int(np.searchsorted(cumulative, pick, side="right"))
    sel = min(sel, vectors.shape[0] - 1)
    return vectors[sel]


def _py_splitmix(state):
    with np.errstate(over="ignore"):
        state = np.uint64(state) + _engine._MIX_GAMMA
        z = np.uint64(state)
        z = np.uint64((z ^ (z >> np.uint64(30))) * _engine._MIX_MUL1)
        z = np.uint64((z ^ (z >> np.uint64(27))) * _engine._MIX_MUL2)
        z = np.uint64(z ^ (z >> np.uint64(31)))
    return state, z


def _py_xoshiro_uniform(s) -> float:
    with np.errstate(over="ignore"):
        result = _py_rotl(np.uint64(s[0] + s[3]), 23) + s[0]
        t = np.uint64(s[1] << np.uint64(17))
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _py_rotl(s[3], 45)
    return float(result >> np.uint64(11)) * 1.1102230246251565e-16


def _py_rotl(x, k):
    with np.errstate(over="ignore"):
        return np.uint64((x << np.uint64(k)) | (x >> np.uint64(64 - k)))


def replay_final_state(
    model: LindbladModel, vectors, cumulative, result: EnsembleResult, i: int
) -> np.ndarray:
    """Rebuild the normalized conditional state at tau from a recorded trajectory."""
    psi = _initial_vector_for(result, vectors, cumulative, i).copy()
    h_eff = model.effective_hamiltonian()
    ids = {c.id: c for c in model.channels}
    order = [c.id for c in model.channels]
    t_prev = 0.0
    n = int(result.n_events[i])
    for j in range(n):
        t = float(result.event_times[i, j])
        k = order[int(result.event_channels[i, j])]
        psi = matrix_exponential(h_eff, t - t_prev) @ psi
        psi = ids[k].operator.entries @ psi
        psi = psi / np.linalg.norm(psi)
        t_prev = t
    psi = matrix_exponential(h_eff, result.tau - t_prev) @ psi
    return psi / np.linalg.norm(psi)


def conditional_states(
    model: LindbladModel, record: TrajectoryRecord, psi0, times: Sequence[float]
) -> np.ndarray:
    """Normalized conditional states of one record at the requested times."""
    h_eff = model.effective_hamiltonian()
    ids = {c.id: c for c in model.channels}
    out = np.zeros((len(times), model.dim), dtype=np.complex128)
    psi = np.asarray(psi0, dtype=np.complex128).copy()
    t_prev = 0.0
    events = list(record.events) + [(record.tau + 1.0, -1)]
    ti = 0
    times = list(times)
    for t_ev, k in events:
        while ti < len(times) and times[ti] <= min(t_ev, record.tau):
            seg = matrix_exponential(h_eff, times[ti] - t_prev) @ psi
            out[ti] = seg / np.linalg.norm(seg)
            ti += 1
        if k == -1 or t_ev > record.tau:
            break
        psi = matrix_exponential(h_eff, t_ev - t_prev) @ psi
        psi = ids[k].operator.entries @ psi
        psi = psi / np.linalg.norm(psi)
        t_prev = t_ev
    return out


def sample_waiting_times(
    model: LindbladModel,
    psi,
    count: int,
    master_seed: int,
    horizon: float = 200.0,
    root_tol: float = 1e-12,
) -> np.ndarray:
    """First-jump waiting times from a fixed state (inf where censored at horizon)."""
    ctx = build_engine_context(model, ())
    seeds = _engine.trajectory_seeds(master_seed, count, stream=2)
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    out = np.empty(count)
    _engine._first_jump_times(
        seeds, psi, ctx.tmat, ctx.qh, ctx.tri_kind, float(horizon), ctx.bracket_step, root_tol, out
    )
    return out


def dump_records(records: Sequence[TrajectoryRecord], fh: io.TextIOBase) -> None:
    """One record per line: seed then (t_j, k_j) pairs as decimal text."""
    for rec in records:
        parts = [str(rec.seed)]
        for t, k in rec.events:
            parts.append(f"{t:.12g}")
            parts.append(str(k))
        fh.write(" ".join(parts) + "\n")


def load_records(fh: io.TextIOBase, tau: float, dim: int) -> list[TrajectoryRecord]:
    """Inverse of :func:`dump_records` (final states are not stored in dumps)."""
    records = []
    for line in fh:
        tokens = line.split()
        if not tokens:
            continue
        seed = int(tokens[0])
        pairs = tokens[1:]
        events = tuple(
            (float(pairs[2 * j]), int(pairs[2 * j + 1])) for j in range(len(pairs) // 2)
        )
        records.append(
            TrajectoryRecord(
                events=events, tau=tau, seed=seed, final_state=np.zeros(dim, dtype=np.complex128)
            )
        )
    return records
