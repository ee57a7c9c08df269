"""Counting-observable evaluation and moment estimation over ensembles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, ModelValidationError, RelativeFluctuationUndefined
from .models import LindbladModel, ObservableDef
from .monitoring import bootstrap_indices


@dataclass(frozen=True)
class ObservableSample:
    """Per-trajectory observable values and per-group jump counts."""

    phi1: float
    phi2: float
    n1: int
    n2: int


def evaluate_observables(record, defs: Sequence[ObservableDef], model: LindbladModel) -> ObservableSample:
    """Weighted jump sums of one record for two group-supported observables."""
    if len(defs) != 2:
        raise ModelValidationError("exactly two observables are expected")
    g1, g2 = (d.support_group(model) for d in defs)
    if g1 == g2:
        raise ModelValidationError("observables must be supported on disjoint groups")
    known = {c.id for c in model.channels}
    phis = [0.0, 0.0]
    counts = [0, 0]
    group_of = {c.id: c.group for c in model.channels}
    for _t, k in record.events:
        if k not in known:
            raise ModelValidationError(f"record contains unknown channel id {k}")
        for i, (d, g) in enumerate(zip(defs, (g1, g2))):
            if group_of[k] == g:
                counts[i] += 1
            phis[i] += float(d.weights.get(k, 0.0))
    return ObservableSample(phi1=phis[0], phi2=phis[1], n1=counts[0], n2=counts[1])


def observable_values(counts: np.ndarray, defs: Sequence[ObservableDef], model: LindbladModel) -> np.ndarray:
    """(M, 2) observable values from per-channel jump counts (kernel output)."""
    w = np.stack([d.weight_vector(model) for d in defs], axis=1)  # (K, 2)
    return np.asarray(counts, dtype=float) @ w


def group_counts(counts: np.ndarray, model: LindbladModel) -> np.ndarray:
    """(M, G) jump totals per group label (sorted labels)."""
    labels = sorted(model.groups)
    sel = np.zeros((len(model.channels), len(labels)))
    for i, c in enumerate(model.channels):
        sel[i, labels.index(c.group)] = 1.0
    return np.asarray(counts, dtype=float) @ sel


@dataclass(frozen=True)
class CovarianceEstimate:
    """Means, unbiased covariance and the derived relative-fluctuation ratios.

    All standard errors come from one bootstrap stream so that derived
    differences keep honest joint error bars.
    """

    means: np.ndarray  # (2,)
    cov: np.ndarray  # (2, 2), M-1 denominator
    mean_ses: np.ndarray
    cov_ses: np.ndarray
    var_over_mean2: np.ndarray  # (2,)
    var_over_mean2_ses: np.ndarray
    cov_over_meanprod: float
    cov_over_meanprod_se: float
    det_ratio: float  # det(cov) / (mean1 mean2)^2
    det_ratio_se: float
    corr_coeff: float
    corr_coeff_se: float
    sample_count: int

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.cov)


def _moments(phi: np.ndarray):
    means = phi.mean(axis=0)
    cov = np.cov(phi.T, ddof=1)
    var1, var2 = cov[0, 0], cov[1, 1]
    m2 = means**2
    rel = np.array([var1 / m2[0], var2 / m2[1]])
    covr = cov[0, 1] / (means[0] * means[1])
    det_ratio = rel[0] * rel[1] - covr**2
    denom = np.sqrt(var1 * var2)
    corr = cov[0, 1] / denom if denom > 0 else (1.0 if var1 == var2 else 0.0)
    return means, cov, rel, covr, det_ratio, corr


def estimate_statistics(
    samples,
    n_boot: int = 200,
    seed: int = 0,
    indices: Optional[np.ndarray] = None,
) -> CovarianceEstimate:
    """Moment estimates for a pair of observables.

    ``samples`` is an (M, 2) array of per-trajectory values or a sequence of
    :class:`ObservableSample`.  Raises
    :class:`~jumpbounds.errors.RelativeFluctuationUndefined` when either mean
    is consistent with zero at three standard errors.
    """
    if len(samples) and isinstance(samples[0], ObservableSample):
        phi = np.array([[s.phi1, s.phi2] for s in samples], dtype=float)
    else:
        phi = np.asarray(samples, dtype=float)
    if phi.ndim != 2 or phi.shape[1] != 2:
        raise DimensionMismatchError("estimate_statistics expects (M, 2) samples")
    m = phi.shape[0]
    if m < 100:
        raise ValueError("at least 100 trajectories are required")

    means = phi.mean(axis=0)
    mean_se = phi.std(axis=0, ddof=1) / np.sqrt(m)
    for i in range(2):
        if abs(means[i]) < 3.0 * mean_se[i]:
            raise RelativeFluctuationUndefined(
                f"observable {i + 1} mean {means[i]:.3g} is within 3 standard errors of zero"
            )

    if indices is None:
        indices = bootstrap_indices(m, n_boot, seed)
    n_b = indices.shape[0]
    b_means = np.empty((n_b, 2))
    b_cov = np.empty((n_b, 2, 2))
    b_rel = np.empty((n_b, 2))
    b_covr = np.empty(n_b)
    b_det = np.empty(n_b)
    b_corr = np.empty(n_b)
    for b, idx in enumerate(indices):
        res = _moments(phi[idx])
        b_means[b], b_cov[b], b_rel[b], b_covr[b], b_det[b], b_corr[b] = res

    means, cov, rel, covr, det_ratio, corr = _moments(phi)
    return CovarianceEstimate(
        means=means,
        cov=cov,
        mean_ses=b_means.std(axis=0, ddof=1),
        cov_ses=b_cov.std(axis=0, ddof=1),
        var_over_mean2=rel,
        var_over_mean2_ses=b_rel.std(axis=0, ddof=1),
        cov_over_meanprod=float(covr),
        cov_over_meanprod_se=float(b_covr.std(ddof=1)),
        det_ratio=float(det_ratio),
        det_ratio_se=float(b_det.std(ddof=1)),
        corr_coeff=float(corr),
        corr_coeff_se=float(b_corr.std(ddof=1)),
        sample_count=m,
    )
