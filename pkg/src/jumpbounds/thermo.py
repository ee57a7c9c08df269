"""Deterministic bound ingredients and assembly of the precision bounds.

Dynamical activities and entropy-production components are time integrals
along the master-equation flow, evaluated by Simpson quadrature on a
uniformly refined grid (states advanced with a cached exp(L h) per
refinement).  Long-time correction terms come from the deflated
(Drazin-style) inverse of the Liouvillian evaluated at the steady state; a
slow time-integral form is kept alongside as an independent cross-check.

Bound assembly combines these deterministic pieces with the Monte Carlo
Fisher and covariance estimates.  The main-denominator convention: the
products (A_a + Q_a) resp. (Sigma_a/2 + Q'_a) are evaluated directly as
Fisher-matrix entries, which is algebraically identical to re-adding the
activity/entropy pieces but avoids doubling the Monte Carlo noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    CorrectionUndefinedError,
    ModelValidationError,
    SingularStateError,
)
from .models import LindbladModel, ObservableDef
from .monitoring import (
    FisherMatrixEstimate,
    FisherScalarEstimate,
    bootstrap_indices,
    rate_asymmetries,
)
from .operators import (
    Liouvillian,
    Operator,
    Superoperator,
    build_liouvillian,
    commutator_superoperator,
    dissipator_superoperator,
    drazin_inverse,
    jump_superoperator,
    matrix_log,
    spectral_data,
    steady_state,
    trace_functional,
    unvectorize,
    vectorize,
    von_neumann_entropy,
)
from .statistics import CovarianceEstimate

QUADRATURE_RTOL = 1e-8
QUADRATURE_MAX_POINTS = 1 << 15


def _simpson_flow(liouv_matrix, rho0_vec, t_lo, t_hi, integrand, rtol=QUADRATURE_RTOL):
    """Integrate vector-valued ``integrand(rho)`` along exp(L t) rho0 over [t_lo, t_hi].

    The grid is refined (doubled) until every component changes by less than
    ``rtol`` relatively; states are stepped with one cached exp(L h).
    """
    span = t_hi - t_lo
    if span <= 0:
        probe = np.atleast_1d(np.asarray(integrand(unvectorize(rho0_vec)), dtype=float))
        return np.zeros_like(probe)
    start = rho0_vec
    if t_lo > 0:
        start = scipy.linalg.expm(liouv_matrix * t_lo) @ rho0_vec
    n = 32
    prev = None
    while True:
        h = span / n
        eh = scipy.linalg.expm(liouv_matrix * h)
        weights = np.ones(n + 1)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        vec = start
        acc = None
        for w in weights:
            rho = unvectorize(vec)
            rho = 0.5 * (rho + rho.conj().T)
            vals = np.atleast_1d(np.asarray(integrand(rho), dtype=float))
            acc = w * vals if acc is None else acc + w * vals
            vec = eh @ vec
        total = acc * (h / 3.0)
        if prev is not None:
            scale = np.maximum(np.abs(total), 1e-12)
            if np.all(np.abs(total - prev) <= rtol * scale):
                return total
        if n >= QUADRATURE_MAX_POINTS:
            return total
        prev = total
        n *= 2


def _group_rate_operators(model: LindbladModel) -> dict[int, np.ndarray]:
    """O_g = sum_{k in group g} L_k† L_k, so tr(O_g rho) is the group jump rate."""
    out: dict[int, np.ndarray] = {}
    for ch in model.channels:
        l = ch.operator.entries
        out.setdefault(ch.group, np.zeros((model.dim, model.dim), dtype=np.complex128))
        out[ch.group] += l.conj().T @ l
    return out


def dynamical_activity(
    model: LindbladModel,
    rho0,
    tau: float,
    group: Optional[int] = None,
    liouv: Optional[Liouvillian] = None,
    rtol: float = QUADRATURE_RTOL,
) -> float:
    """Expected jump count in [0, tau] for one group (or all channels)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    liouv = liouv or build_liouvillian(model)
    ops = _group_rate_operators(model)
    if group is None:
        op = sum(ops.values())
    else:
        if group not in ops:
            raise ModelValidationError(f"model has no group {group}")
        op = ops[group]
    val = _simpson_flow(
        liouv.total.matrix,
        vectorize(rho0),
        0.0,
        tau,
        lambda rho: float(np.trace(op @ rho).real),
        rtol=rtol,
    )
    return float(val[0])


@dataclass(frozen=True)
class EntropyBreakdown:
    sigma: Mapping[int, float]
    delta_s: float
    delta_s_env: float
    flags: tuple[str, ...] = ()

    @property
    def sigma_total(self) -> float:
        return float(sum(self.sigma.values()))


def entropy_production_components(
    model: LindbladModel,
    rho0,
    tau: float,
    liouv: Optional[Liouvillian] = None,
    rtol: float = QUADRATURE_RTOL,
) -> EntropyBreakdown:
    """Per-group entropy production plus system and environment entropy changes.

    Each group's component integrates
    tr{L_k rho (ds_k L_k† - [L_k†, ln rho])}; the sum over groups equals
    delta_s + delta_s_env.  A rank-deficient initial state makes ln rho
    undefined at t = 0; the integration grid then starts at 1e-3 tau and the
    omission is flagged.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    missing = [c.id for c in model.channels if c.entropy_jump is None and not c.inert]
    if missing:
        raise ModelValidationError(f"channels {missing} lack entropy jumps; entropy production undefined")
    liouv = liouv or build_liouvillian(model)
    labels = sorted(model.groups)
    per_channel = [
        (labels.index(c.group), c.operator.entries, 0.0 if c.entropy_jump is None else c.entropy_jump)
        for c in model.channels
    ]

    def integrand(rho):
        w, u = np.linalg.eigh(rho)
        if w.min() <= 1e-12:
            raise SingularStateError("state not strictly positive on the entropy grid")
        logr = (u * np.log(w)) @ u.conj().T
        out = np.zeros(len(labels) + 1)
        for gi, l, ds in per_channel:
            ldag = l.conj().T
            rate = float(np.trace(l @ rho @ ldag).real)
            comm = ldag @ logr - logr @ ldag
            sig = ds * rate - float(np.trace(l @ rho @ comm).real)
            out[gi] += sig
            out[-1] += ds * rate
        return out

    rho0_m = np.asarray(getattr(rho0, "entries", rho0), dtype=np.complex128)
    rho0_vec = vectorize(rho0_m)
    flags: tuple[str, ...] = ()
    try:
        vals = _simpson_flow(liouv.total.matrix, rho0_vec, 0.0, tau, integrand, rtol=rtol)
    except SingularStateError:
        t0 = 1e-3 * tau
        vals = _simpson_flow(liouv.total.matrix, rho0_vec, t0, tau, integrand, rtol=rtol)
        flags = (f"entropy-grid-shifted:t0={t0:.3g}",)

    rho_tau = unvectorize(scipy.linalg.expm(liouv.total.matrix * tau) @ rho0_vec)
    delta_s = von_neumann_entropy(rho_tau) - von_neumann_entropy(rho0_m)
    sigma = {g: float(vals[i]) for i, g in enumerate(labels)}
    return EntropyBreakdown(sigma=sigma, delta_s=float(delta_s), delta_s_env=float(vals[-1]), flags=flags)


def _observable_jump_super(model: LindbladModel, obs: ObservableDef) -> Superoperator:
    ops = [c.operator.entries for c in model.channels]
    return jump_superoperator(ops, obs.weight_vector(model))


def _weighted_group_generator(model: LindbladModel, group: int, channel_weights) -> np.ndarray:
    """Commutator part plus per-channel-weighted group dissipators (vectorized matrix)."""
    gen = commutator_superoperator(model.hamiltonian.entries)
    for w, ch in zip(channel_weights, model.channels):
        if ch.group == group and w != 0.0:
            gen = gen + w * dissipator_superoperator(ch.operator.entries)
    return gen


def steady_observable_means(model: LindbladModel, defs: Sequence[ObservableDef], rho_ss, tau: float) -> np.ndarray:
    """tau * sum_k w_k tr(L_k rho_ss L_k†) per observable."""
    rho = np.asarray(getattr(rho_ss, "entries", rho_ss), dtype=np.complex128)
    out = np.zeros(len(defs))
    for i, obs in enumerate(defs):
        for w, ch in zip(obs.weight_vector(model), model.channels):
            if w != 0.0:
                l = ch.operator.entries
                out[i] += w * float(np.trace(l @ rho @ l.conj().T).real)
    return tau * out


@dataclass(frozen=True)
class CorrectionTerms:
    """Long-time corrections: star means and the dimensionless ratios."""

    star_means: np.ndarray  # (2,)
    ratios: np.ndarray  # (2,)
    observable_means: np.ndarray  # (2,), steady-state means over [0, tau]
    undefined: tuple[int, ...] = ()  # observable indices with vanishing mean


def _correction_core(
    model: LindbladModel,
    rho_ss,
    defs: Sequence[ObservableDef],
    tau: float,
    generators: Sequence[np.ndarray],
    liouv: Liouvillian,
    drazin: Optional[Superoperator] = None,
) -> CorrectionTerms:
    dz = drazin or drazin_inverse(liouv.total, rho_ss)
    tvec = trace_functional(model.dim)
    rho_vec = vectorize(rho_ss)
    stars = np.zeros(len(defs))
    for i, obs in enumerate(defs):
        j_op = _observable_jump_super(model, obs)
        val = tvec @ (j_op.matrix @ (dz.matrix @ (generators[i] @ rho_vec)))
        stars[i] = -tau * float(np.real(val))
    means = steady_observable_means(model, defs, rho_ss, tau)
    undefined = tuple(i for i in range(len(defs)) if abs(means[i]) < 1e-12 * max(tau, 1.0))
    ratios = np.array(
        [stars[i] / means[i] if i not in undefined else np.nan for i in range(len(defs))]
    )
    return CorrectionTerms(star_means=stars, ratios=ratios, observable_means=means, undefined=undefined)


def correction_term_kur(
    model: LindbladModel,
    rho_ss,
    defs: Sequence[ObservableDef],
    tau: float,
    liouv: Optional[Liouvillian] = None,
    drazin: Optional[Superoperator] = None,
) -> CorrectionTerms:
    """Activity-bound corrections: star_a = -tau <1| J_a L+ L_a |rho_ss>.

    L_a is the group-restricted generator (commutator plus the group's
    dissipators) for the group supporting observable a.
    """
    liouv = liouv or build_liouvillian(model)
    fallback = sorted(model.groups)[0]  # zero-weight observables have J = 0, any generator works
    gens = [
        liouv.group_parts[
            obs.support_group(model) if any(w != 0.0 for w in obs.weights.values()) else fallback
        ].matrix
        for obs in defs
    ]
    return _correction_core(model, rho_ss, defs, tau, gens, liouv, drazin)


def correction_term_tur(
    model: LindbladModel,
    rho_ss,
    defs: Sequence[ObservableDef],
    tau: float,
    liouv: Optional[Liouvillian] = None,
    drazin: Optional[Superoperator] = None,
) -> CorrectionTerms:
    """Current-bound corrections; the group generator carries the steady-state
    rate asymmetries as dissipator weights, and observables must be currents."""
    liouv = liouv or build_liouvillian(model)
    ls = rate_asymmetries(model, rho_ss)
    if np.any(np.isnan(ls)):
        raise ModelValidationError("current-type corrections need fully reverse-paired channels")
    gens = []
    for obs in defs:
        if not obs.is_current(model):
            raise ModelValidationError(f"observable {obs.name!r} is not a current (weights not antisymmetric)")
        g = obs.support_group(model)
        gens.append(_weighted_group_generator(model, g, ls))
    terms = _correction_core(model, rho_ss, defs, tau, gens, liouv, drazin)
    if terms.undefined:
        raise CorrectionUndefinedError(
            f"observables {terms.undefined} have zero mean current at the steady state"
        )
    return terms


def single_parameter_corrections(
    model: LindbladModel,
    rho_ss,
    defs: Sequence[ObservableDef],
    tau: float,
    kind: str,
    liouv: Optional[Liouvillian] = None,
    drazin: Optional[Superoperator] = None,
) -> CorrectionTerms:
    """Corrections entering the per-observable bounds (full channel set imprinted).

    For the activity kind the generator is the full Liouvillian, which kills
    the steady state, so these ratios vanish identically at stationarity.
    """
    liouv = liouv or build_liouvillian(model)
    if kind == "kur":
        gen = liouv.total.matrix
    elif kind == "tur":
        ls = rate_asymmetries(model, rho_ss)
        if np.any(np.isnan(ls)):
            raise ModelValidationError("current-type corrections need fully reverse-paired channels")
        gen = commutator_superoperator(model.hamiltonian.entries)
        for l_w, ch in zip(ls, model.channels):
            gen = gen + l_w * dissipator_superoperator(ch.operator.entries)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return _correction_core(model, rho_ss, defs, tau, [gen] * len(defs), liouv, drazin)


def correction_term_kur_time_integral(
    model: LindbladModel,
    rho_ss,
    defs: Sequence[ObservableDef],
    tau: float,
    liouv: Optional[Liouvillian] = None,
    horizon: Optional[float] = None,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Slow commutator/Heisenberg form of the activity corrections.

    star_a = -(tau/2) sum_{k not in group a} \\int_0^inf
             <[L_k†, W_a(t)] L_k + L_k† [W_a(t), L_k]>_ss dt,
    with W_a = sum_k w_k L_k† L_k evolved in the Heisenberg picture.  Kept as
    an independent cross-check of :func:`correction_term_kur`.
    """
    liouv = liouv or build_liouvillian(model)
    if horizon is None:
        sd = spectral_data(liouv.total)
        gap = -max(
            sd.eigenvalues[j].real for j in range(len(sd.eigenvalues)) if j != sd.zero_index
        )
        horizon = 40.0 / gap
    rho = np.asarray(getattr(rho_ss, "entries", rho_ss), dtype=np.complex128)
    adjoint = liouv.total.matrix.conj().T
    out = np.zeros(len(defs))
    for i, obs in enumerate(defs):
        g = obs.support_group(model)
        w_op = np.zeros((model.dim, model.dim), dtype=np.complex128)
        for w, ch in zip(obs.weight_vector(model), model.channels):
            w_op += w * (ch.operator.entries.conj().T @ ch.operator.entries)
        other = [ch.operator.entries for ch in model.channels if ch.group != g]

        def integrand(t):
            wt = unvectorize(scipy.linalg.expm(adjoint * t) @ vectorize(w_op))
            acc = 0.0
            for l in other:
                ld = l.conj().T
                expr = (ld @ wt - wt @ ld) @ l + ld @ (wt @ l - l @ wt)
                acc += float(np.trace(expr @ rho).real)
            return acc

        n = 64
        prev = None
        while True:
            ts = np.linspace(0.0, horizon, n + 1)
            vals = np.array([integrand(t) for t in ts])
            weights = np.ones(n + 1)
            weights[1:-1:2] = 4.0
            weights[2:-1:2] = 2.0
            total = float(np.sum(weights * vals) * (horizon / n) / 3.0)
            if prev is not None and abs(total - prev) <= rtol * max(abs(total), 1e-12):
                break
            if n >= 1 << 14:
                break
            prev = total
            n *= 2
        out[i] = -(tau / 2.0) * total
    return out


@dataclass(frozen=True)
class ThermoReport:
    """Deterministic bound ingredients for one run."""

    kind: str
    tau: float
    activity: Mapping[int, float]
    activity_total: float
    sigma: Optional[Mapping[int, float]]
    sigma_total: Optional[float]
    delta_s: Optional[float]
    delta_s_env: Optional[float]
    l_ss: Optional[np.ndarray]
    correction_means: np.ndarray
    corrections: np.ndarray
    single_correction_means: np.ndarray
    single_corrections: np.ndarray
    observable_means_ss: np.ndarray
    flags: tuple[str, ...] = ()

    @property
    def activity_pair(self) -> np.ndarray:
        return np.array([self.activity[g] for g in sorted(self.activity)])

    @property
    def sigma_pair(self) -> Optional[np.ndarray]:
        if self.sigma is None:
            return None
        return np.array([self.sigma[g] for g in sorted(self.sigma)])


def compute_thermo_report(
    model: LindbladModel,
    defs: Sequence[ObservableDef],
    kind: str,
    rho0,
    tau: float,
    rho_ss: Optional[Operator] = None,
    liouv: Optional[Liouvillian] = None,
    include_entropy: Optional[bool] = None,
) -> ThermoReport:
    """Activities, entropy components and corrections for a bound run.

    The activities (and entropy components) follow the run's actual initial
    state; the corrections use the long-time steady-state formulas, which is
    flagged when the run starts away from stationarity.  Entropy components
    are computed by default only for current-type (tur) runs, where they
    enter the bound; pass ``include_entropy=True`` to force them.
    """
    kind = kind.lower()
    liouv = liouv or build_liouvillian(model)
    rho_ss = rho_ss if rho_ss is not None else steady_state(liouv.total)
    rho0_m = np.asarray(getattr(rho0, "entries", rho0), dtype=np.complex128)
    flags: list[str] = []

    ops = _group_rate_operators(model)
    labels = sorted(model.groups)

    def activity_integrand(rho):
        return np.array([float(np.trace(ops[g] @ rho).real) for g in labels])

    acts = _simpson_flow(liouv.total.matrix, vectorize(rho0_m), 0.0, tau, activity_integrand)
    activity = {g: float(a) for g, a in zip(labels, acts)}

    sigma = sigma_total = delta_s = delta_s_env = None
    if include_entropy is None:
        include_entropy = kind == "tur"
    have_entropy = all(c.entropy_jump is not None or c.inert for c in model.channels)
    if include_entropy and have_entropy:
        breakdown = entropy_production_components(model, rho0_m, tau, liouv=liouv)
        sigma = dict(breakdown.sigma)
        sigma_total = breakdown.sigma_total
        delta_s = breakdown.delta_s
        delta_s_env = breakdown.delta_s_env
        flags.extend(breakdown.flags)
    elif kind == "tur":
        raise ModelValidationError("current-type bounds need entropy jumps on every channel")

    away_from_ss = float(np.max(np.abs(rho0_m - rho_ss.entries))) > 1e-9
    if away_from_ss:
        flags.append("transient-correction-neglected")

    drazin = drazin_inverse(liouv.total, rho_ss)
    if kind == "kur":
        corr = correction_term_kur(model, rho_ss, defs, tau, liouv=liouv, drazin=drazin)
        l_ss = None
    elif kind == "tur":
        corr = correction_term_tur(model, rho_ss, defs, tau, liouv=liouv, drazin=drazin)
        l_ss = rate_asymmetries(model, rho_ss)
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    if corr.undefined:
        flags.append('corrections-undefined:' + ','.join(str(i) for i in corr.undefined))
    single = single_parameter_corrections(model, rho_ss, defs, tau, kind, liouv=liouv, drazin=drazin)

    return ThermoReport(
        kind=kind,
        tau=tau,
        activity=activity,
        activity_total=float(sum(activity.values())),
        sigma=sigma,
        sigma_total=sigma_total,
        delta_s=delta_s,
        delta_s_env=delta_s_env,
        l_ss=l_ss,
        correction_means=corr.star_means,
        corrections=corr.ratios,
        single_correction_means=single.star_means,
        single_corrections=single.ratios,
        observable_means_ss=corr.observable_means,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class BoundReport:
    """Left-hand fluctuation products, bound values and their components."""

    kind: str
    tau: float
    sample_count: int
    lhs_det: float
    lhs_det_se: float
    lhs_half_cov: float
    lhs_half_cov_se: float
    rhs_main: float
    rhs_main_se: float
    rhs_half_product: float
    rhs_half_product_se: float
    single_bounds: tuple[float, float]
    # the inequality in its pre-rearranged form: Var product vs rhs_main plus
    # the covariance term; their ratio is how "saturated" a plot looks
    saturation_ratio: float
    saturation_ratio_se: float
    margin_main: float
    margin_main_se: float
    gap_difference: float
    gap_difference_se: float
    corr_coeff: float
    corr_coeff_se: float
    components: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def to_flat_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "tau": self.tau,
            "sample_count": self.sample_count,
            "lhs_det": self.lhs_det,
            "lhs_det_se": self.lhs_det_se,
            "lhs_half_cov": self.lhs_half_cov,
            "lhs_half_cov_se": self.lhs_half_cov_se,
            "rhs_main": self.rhs_main,
            "rhs_main_se": self.rhs_main_se,
            "rhs_half_product": self.rhs_half_product,
            "rhs_half_product_se": self.rhs_half_product_se,
            "single_bound_1": self.single_bounds[0],
            "single_bound_2": self.single_bounds[1],
            "saturation_ratio": self.saturation_ratio,
            "saturation_ratio_se": self.saturation_ratio_se,
            "margin_main": self.margin_main,
            "margin_main_se": self.margin_main_se,
            "gap_difference": self.gap_difference,
            "gap_difference_se": self.gap_difference_se,
            "corr_coeff": self.corr_coeff,
            "corr_coeff_se": self.corr_coeff_se,
            "flags": ";".join(self.flags),
        }
        out.update({k: (float(v) if np.isscalar(v) else v) for k, v in self.components.items()})
        return out


def _bound_values(kind, f11, f22, f12, f_single, corr, single_corr):
    """(rhs_main, rhs_half) from Fisher entries and deterministic corrections."""
    if kind == "kur":
        numer = (1.0 + corr[0]) ** 2 * (1.0 + corr[1]) ** 2
        denom = f11 * f22 - f12**2
        k1 = (1.0 + single_corr[0]) ** 2 / f_single if f_single > 0 else np.nan
        k2 = (1.0 + single_corr[1]) ** 2 / f_single if f_single > 0 else np.nan
        half = 0.5 * k1 * k2
    else:
        numer = 2.0 * (1.0 + corr[0]) ** 2 * (1.0 + corr[1]) ** 2
        denom = 4.0 * f11 * f22 - 2.0 * f12**2
        k1 = (1.0 + single_corr[0]) ** 2 / f_single if f_single > 0 else np.nan
        k2 = (1.0 + single_corr[1]) ** 2 / f_single if f_single > 0 else np.nan
        half = 0.5 * k1 * k2
    rhs = numer / denom if denom > 0 else np.nan
    return rhs, half, (k1, k2), denom


def assemble_bounds(
    kind: str,
    thermo: ThermoReport,
    fisher: FisherMatrixEstimate,
    stats: CovarianceEstimate,
    tau: float,
    single_fisher: Optional[FisherScalarEstimate] = None,
    scores: Optional[np.ndarray] = None,
    single_scores: Optional[np.ndarray] = None,
    phi_values: Optional[np.ndarray] = None,
    indices: Optional[np.ndarray] = None,
    n_boot: int = 200,
    bootstrap_seed: int = 0,
) -> BoundReport:
    """Combine deterministic and sampled ingredients into a bound report.

    When the raw per-trajectory arrays are provided, every derived quantity
    (including bound margins and the tightness-gap difference) is
    bootstrapped on one shared index stream; otherwise standard errors that
    need resampling are reported as NaN.
    """
    kind = kind.lower()
    if kind not in ("kur", "tur"):
        raise ValueError(f"unknown bound kind {kind!r}")
    if thermo.kind != kind:
        raise ValueError("thermo report was computed for a different bound kind")
    flags = list(thermo.flags)

    f = fisher.values
    fs = single_fisher.value if single_fisher is not None else np.nan
    corr = thermo.corrections
    single_corr = thermo.single_corrections

    rhs_main, rhs_half, singles, denom = _bound_values(
        kind, f[0, 0], f[1, 1], f[0, 1], fs, corr, single_corr
    )
    if not np.isfinite(rhs_main):
        flags.append("bound-inapplicable:main-denominator")
    if not np.isfinite(rhs_half):
        flags.append("bound-inapplicable:single-fisher")

    rel = stats.var_over_mean2
    covr = stats.cov_over_meanprod
    lhs_det = rel[0] * rel[1] - covr**2
    lhs_half = rel[0] * rel[1] - 0.5 * covr**2
    sat_ratio = rel[0] * rel[1] / (rhs_main + covr**2)

    margin = lhs_det - rhs_main
    gap_diff = (lhs_half - rhs_half) - margin

    se = dict.fromkeys(
        ("lhs_det", "lhs_half", "rhs_main", "rhs_half", "margin", "gap_diff", "sat_ratio"), np.nan
    )
    if scores is not None and phi_values is not None:
        m = phi_values.shape[0]
        if indices is None:
            indices = bootstrap_indices(m, n_boot, bootstrap_seed)
        n_b = indices.shape[0]
        b = {k: np.empty(n_b) for k in se}
        for bi, idx in enumerate(indices):
            sb = scores[idx]
            fb = (sb.T @ sb) / m
            fsb = float((single_scores[idx] ** 2).mean()) if single_scores is not None else np.nan
            pb = phi_values[idx]
            means = pb.mean(axis=0)
            cov = np.cov(pb.T, ddof=1)
            relb = np.array([cov[0, 0] / means[0] ** 2, cov[1, 1] / means[1] ** 2])
            covrb = cov[0, 1] / (means[0] * means[1])
            lhs_det_b = relb[0] * relb[1] - covrb**2
            lhs_half_b = relb[0] * relb[1] - 0.5 * covrb**2
            rhs_main_b, rhs_half_b, _, _ = _bound_values(
                kind, fb[0, 0], fb[1, 1], fb[0, 1], fsb, corr, single_corr
            )
            b["lhs_det"][bi] = lhs_det_b
            b["lhs_half"][bi] = lhs_half_b
            b["rhs_main"][bi] = rhs_main_b
            b["rhs_half"][bi] = rhs_half_b
            b["margin"][bi] = lhs_det_b - rhs_main_b
            b["gap_diff"][bi] = (lhs_half_b - rhs_half_b) - (lhs_det_b - rhs_main_b)
            b["sat_ratio"][bi] = relb[0] * relb[1] / (rhs_main_b + covrb**2)
        for k in se:
            vals = b[k]
            vals = vals[np.isfinite(vals)]
            se[k] = float(vals.std(ddof=1)) if vals.size > 1 else np.nan

    act = thermo.activity_pair
    components = {
        "F11": float(f[0, 0]),
        "F22": float(f[1, 1]),
        "F12": float(f[0, 1]),
        "F12_se": float(fisher.std_errors[0, 1]),
        "F_single": float(fs),
        "A1": float(act[0]),
        "A2": float(act[1]),
        "A_total": float(thermo.activity_total),
        "phi1": float(corr[0]),
        "phi2": float(corr[1]),
        "phi_single_1": float(single_corr[0]),
        "phi_single_2": float(single_corr[1]),
        "mean_phi1": float(stats.means[0]),
        "mean_phi2": float(stats.means[1]),
        "rel_var_product": float(rel[0] * rel[1]),
        "cov_term": float(covr**2),
        "denominator_main": float(denom),
        "score_mean_1": float(fisher.score_means[0]),
        "score_mean_2": float(fisher.score_means[1]),
    }
    if kind == "kur":
        components["Q1"] = float(f[0, 0] - act[0])
        components["Q2"] = float(f[1, 1] - act[1])
    else:
        sig = thermo.sigma_pair
        components["sigma1"] = float(sig[0])
        components["sigma2"] = float(sig[1])
        components["sigma_total"] = float(thermo.sigma_total)
        components["Q1"] = float(f[0, 0] - 0.5 * sig[0])
        components["Q2"] = float(f[1, 1] - 0.5 * sig[1])

    return BoundReport(
        kind=kind,
        tau=tau,
        sample_count=stats.sample_count,
        lhs_det=float(lhs_det),
        lhs_det_se=se["lhs_det"] if np.isfinite(se["lhs_det"]) else stats.det_ratio_se,
        lhs_half_cov=float(lhs_half),
        lhs_half_cov_se=se["lhs_half"],
        rhs_main=float(rhs_main),
        rhs_main_se=se["rhs_main"],
        rhs_half_product=float(rhs_half),
        rhs_half_product_se=se["rhs_half"],
        single_bounds=(float(singles[0]), float(singles[1])),
        saturation_ratio=float(sat_ratio),
        saturation_ratio_se=se["sat_ratio"],
        margin_main=float(margin),
        margin_main_se=se["margin"],
        gap_difference=float(gap_diff),
        gap_difference_se=se["gap_diff"],
        corr_coeff=stats.corr_coeff,
        corr_coeff_se=stats.corr_coeff_se,
        components=components,
        flags=tuple(flags),
    )
