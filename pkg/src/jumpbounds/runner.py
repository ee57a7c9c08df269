"""Run orchestration: configs, experiments, sweeps, artifact files.

A run configuration is a nested mapping (YAML or JSON on disk; YAML's
parser accepts both).  All randomness funnels through ``master_seed``:
trajectory seeds are counter-derived from it and the bootstrap stream uses a
fixed offset, so identical configs give byte-identical artifacts regardless
of worker count.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, JumpBoundsError, ModelValidationError
from .models import (
    LindbladModel,
    ObservableDef,
    build_classical_network,
    build_driven_qubit,
    build_three_level_maser,
    validate,
)
from .monitoring import (
    bootstrap_indices,
    estimate_fisher,
    estimate_fisher_scalar,
    make_scheme,
    make_single_parameter_scheme,
    rate_asymmetries,
)
from .operators import build_liouvillian, steady_state
from .statistics import estimate_statistics, group_counts, observable_values
from .thermo import BoundReport, assemble_bounds, compute_thermo_report, dynamical_activity
from .trajectories import InitialEnsemble, SamplerConfig, run_monitored_ensemble

OUTPUT_DIR_ENV = "JUMPBOUNDS_OUTPUT_DIR"

SWEEP_CSV_COLUMNS = (
    "sweep_value",
    "lhs_det",
    "lhs_se",
    "k12",
    "k12_se",
    "half_k1k2",
    "corr_coeff",
    "A1",
    "A2",
    "Q1",
    "Q2",
    "F12",
    "phi1",
    "phi2",
    "flags",
)

SAMPLES_CSV_COLUMNS = ("index", "s1", "s2", "s_single", "N1", "N2", "Phi1", "Phi2")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class RunConfig:
    """Validated run description (see README for the file grammar)."""

    model: dict
    observables: tuple[ObservableDef, ...]
    bound_kind: str = "kur"
    tau: float = 10.0
    trajectories: int = 50_000
    master_seed: int = 2024
    initial_state: Optional[str] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    sweep: Optional[dict] = None
    output_dir: Optional[str] = None
    workers: Optional[int] = None
    bootstrap_resamples: int = 200

    def __post_init__(self):
        if self.bound_kind not in ("kur", "tur"):
            raise ConfigError(f"bound_kind must be kur or tur, got {self.bound_kind!r}")
        if self.trajectories < 100:
            raise ConfigError("trajectories must be at least 100")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.sweep is not None:
            vals = self.sweep.get("values", [])
            if not vals:
                raise ConfigError("sweep requires a non-empty values list")
            arr = np.asarray(vals, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ConfigError("sweep values must be finite")
            if not np.all(np.diff(arr) > 0):
                raise ConfigError("sweep values must be sorted and strictly increasing")
            if "parameter" not in self.sweep:
                raise ConfigError("sweep requires a parameter path")


def _coerce_weights(raw) -> dict[int, float]:
    try:
        return {int(k): float(v) for k, v in dict(raw).items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"observable weights must map channel ids to numbers: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    raw = copy.deepcopy(raw)
    try:
        model = dict(raw.pop("model"))
        obs_raw = raw.pop("observables")
    except KeyError as exc:
        raise ConfigError(f"config is missing required section {exc}") from exc
    if len(obs_raw) != 2:
        raise ConfigError("exactly two observables are required")
    observables = tuple(
        ObservableDef(name=str(o.get("name", f"obs{i + 1}")), weights=_coerce_weights(o["weights"]))
        for i, o in enumerate(obs_raw)
    )
    sampler_raw = raw.pop("sampler", {}) or {}
    try:
        sampler = SamplerConfig(**sampler_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sampler section: {exc}") from exc
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(model=model, observables=observables, sampler=sampler, **raw)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_dict(raw)


def build_model(spec: dict) -> LindbladModel:
    spec = dict(spec)
    kind = spec.pop("type", None)
    try:
        if kind == "qubit":
            return build_driven_qubit(
                delta=float(spec.pop("delta", 0.0)),
                omega=float(spec.pop("omega", 1.0)),
                gamma=float(spec.pop("gamma", 1.0)),
                n=float(spec.pop("n", 1.0)),
            )
        if kind == "maser":
            return build_three_level_maser(
                delta=float(spec.pop("delta", 0.0)),
                omega=float(spec.pop("omega", 1.0)),
                gamma1=float(spec.pop("gamma1", 1.0)),
                gamma2=float(spec.pop("gamma2", 1.0)),
                n1=float(spec.pop("n1", 1.0)),
                n2=float(spec.pop("n2", 0.0)),
            )
        if kind == "classical":
            return build_classical_network(spec.pop("rates"), spec.pop("groups"))
    except KeyError as exc:
        raise ConfigError(f"model section missing {exc}") from exc
    raise ConfigError(f"unknown model type {kind!r}")


def _initial_state(cfg: RunConfig, model: LindbladModel, rho_ss) -> tuple[InitialEnsemble, np.ndarray]:
    """Resolve the configured initial state to (sampling ensemble, density matrix)."""
    spec = cfg.initial_state
    if spec is None:
        if cfg.bound_kind == "tur" or model.classical_flag:
            spec = "steady"
        elif model.name == "three-level-maser":
            spec = "basis:1"
        else:
            spec = "basis:0"
    if spec == "steady":
        rho0 = np.asarray(rho_ss.entries)
        return InitialEnsemble.from_density_matrix(rho0), rho0
    if spec.startswith("basis:"):
        i = int(spec.split(":", 1)[1])
        if not 0 <= i < model.dim:
            raise ConfigError(f"basis state {i} out of range for dimension {model.dim}")
        psi = np.zeros(model.dim, dtype=np.complex128)
        psi[i] = 1.0
        return InitialEnsemble.pure(psi), np.outer(psi, psi.conj())
    raise ConfigError(f"unknown initial_state {spec!r} (use 'steady' or 'basis:<i>')")


def bootstrap_seed_for(master_seed: int) -> int:
    return (int(master_seed) * 0x9E3779B9 + 0x1234567) % (1 << 63)


@dataclass(frozen=True)
class ExperimentResult:
    config: RunConfig
    report: BoundReport
    scores: np.ndarray
    phi_values: np.ndarray
    group_jumps: np.ndarray
    seeds: np.ndarray

    def samples_rows(self):
        m = self.phi_values.shape[0]
        for i in range(m):
            yield (
                i,
                self.scores[i, 0],
                self.scores[i, 1],
                self.scores[i, 2],
                int(self.group_jumps[i, 0]),
                int(self.group_jumps[i, 1]),
                self.phi_values[i, 0],
                self.phi_values[i, 1],
            )


def run_experiment(cfg: RunConfig) -> ExperimentResult:
    """Full pipeline: sample, estimate, assemble the bound report."""
    model = build_model(cfg.model)
    vr = validate(model)
    if not vr.ok:
        raise ModelValidationError("model failed validation: " + "; ".join(vr.violations))
    for obs in cfg.observables:
        obs.support_group(model)
    liouv = build_liouvillian(model)
    rho_ss = steady_state(liouv.total)
    init, rho0 = _initial_state(cfg, model, rho_ss)

    schemes = [
        make_scheme(model, cfg.bound_kind, rho_ss),
        make_single_parameter_scheme(model, cfg.bound_kind, rho_ss),
    ]
    res = run_monitored_ensemble(
        model,
        init,
        cfg.tau,
        cfg.trajectories,
        cfg.master_seed,
        schemes=schemes,
        sampler=cfg.sampler,
        workers=cfg.workers,
    )
    phi = observable_values(res.counts, cfg.observables, model)
    grp = group_counts(res.counts, model)
    indices = bootstrap_indices(
        cfg.trajectories, cfg.bootstrap_resamples, bootstrap_seed_for(cfg.master_seed)
    )
    stats = estimate_statistics(phi, indices=indices)
    fisher = estimate_fisher(res.scores[:, :2], indices=indices)
    fsingle = estimate_fisher_scalar(res.scores[:, 2], indices=indices)
    thermo = compute_thermo_report(
        model, cfg.observables, cfg.bound_kind, rho0, cfg.tau, rho_ss=rho_ss, liouv=liouv
    )
    report = assemble_bounds(
        cfg.bound_kind,
        thermo,
        fisher,
        stats,
        cfg.tau,
        single_fisher=fsingle,
        scores=res.scores[:, :2],
        single_scores=res.scores[:, 2],
        phi_values=phi,
        indices=indices,
    )
    return ExperimentResult(
        config=cfg, report=report, scores=res.scores, phi_values=phi, group_jumps=grp, seeds=res.seeds
    )


def config_as_dict(cfg: RunConfig, with_workers: bool = True) -> dict:
    out = {
        "model": dict(cfg.model),
        "observables": [{"name": o.name, "weights": dict(o.weights)} for o in cfg.observables],
        "bound_kind": cfg.bound_kind,
        "tau": cfg.tau,
        "trajectories": cfg.trajectories,
        "master_seed": cfg.master_seed,
        "initial_state": cfg.initial_state,
        "sampler": dataclasses.asdict(cfg.sampler),
        "sweep": cfg.sweep,
        "bootstrap_resamples": cfg.bootstrap_resamples,
    }
    if with_workers:
        out["workers"] = cfg.workers
    return out


def provenance_block(cfg: RunConfig) -> dict:
    # worker count is scheduling, not physics: identical configs must hash identically
    echo = config_as_dict(cfg, with_workers=False)
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":")).encode()
    return {
        "config": echo,
        "content_hash": hashlib.sha256(blob).hexdigest(),
        "master_seed": cfg.master_seed,
        "package_version": __version__,
    }


def resolve_output_dir(cfg: RunConfig, override=None) -> Path:
    out = override or cfg.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_run_artifacts(result: ExperimentResult, out_dir: Path) -> dict:
    summary = dict(result.report.to_flat_dict())
    summary["provenance"] = provenance_block(result.config)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "samples.csv", "w", newline="") as fh:
        fh.write(",".join(SAMPLES_CSV_COLUMNS) + "\n")
        for row in result.samples_rows():
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return summary


def _set_path(raw: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(raw)
    node = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"sweep parameter path {dotted!r} not found in config")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"sweep parameter path {dotted!r} not found in config")
    node[parts[-1]] = value
    return out


def sweep_rows(report: BoundReport, sweep_value: float) -> tuple:
    c = report.components
    return (
        sweep_value,
        report.lhs_det,
        report.lhs_det_se,
        report.rhs_main,
        report.rhs_main_se,
        report.rhs_half_product,
        report.corr_coeff,
        c.get("A1", np.nan),
        c.get("A2", np.nan),
        c.get("Q1", np.nan),
        c.get("Q2", np.nan),
        c.get("F12", np.nan),
        c.get("phi1", np.nan),
        c.get("phi2", np.nan),
        ";".join(report.flags) or "ok",
    )


def run_sweep(cfg: RunConfig, out_dir: Path) -> list[dict]:
    """One experiment per sweep value; partial failures become marked rows."""
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    parameter = cfg.sweep["parameter"]
    values = [float(v) for v in cfg.sweep["values"]]
    base = config_as_dict(cfg)
    base.pop("sweep")
    base.pop("workers")
    summaries: list[dict] = []
    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(SWEEP_CSV_COLUMNS) + "\n")
        for value in values:
            point_cfg = config_from_dict(_set_path(base, parameter, value))
            point_cfg = dataclasses.replace(point_cfg, workers=cfg.workers)
            try:
                result = run_experiment(point_cfg)
            except JumpBoundsError as exc:
                row = [value] + [np.nan] * (len(SWEEP_CSV_COLUMNS) - 2) + [f"failed:{type(exc).__name__}"]
                fh.write(",".join(_fmt(x) if not isinstance(x, str) else x for x in row) + "\n")
                fh.flush()
                continue
            row = sweep_rows(result.report, value)
            fh.write(",".join(x if isinstance(x, str) else _fmt(x) for x in row) + "\n")
            fh.flush()
            summary = dict(result.report.to_flat_dict())
            summary["sweep_value"] = value
            summaries.append(summary)
    prov = provenance_block(cfg)
    (out_dir / "sweep_provenance.json").write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n")
    return summaries


def classical_check(cfg: RunConfig) -> dict:
    """Fisher diagonality audit for classical models.

    Estimates the two-parameter Fisher matrix with the activity imprinting
    and compares: the off-diagonal against zero and each diagonal against
    the deterministic group activity.  Returns z-scores; callers fail the
    check when any |z| exceeds 4.
    """
    model = build_model(cfg.model)
    if not model.classical_flag:
        raise ModelValidationError("classical-check requires a classical model")
    vr = validate(model)
    if not vr.ok:
        raise ModelValidationError("model failed validation: " + "; ".join(vr.violations))
    liouv = build_liouvillian(model)
    rho_ss = steady_state(liouv.total)
    init, rho0 = _initial_state(cfg, model, rho_ss)
    scheme = make_scheme(model, "kur", rho_ss)
    res = run_monitored_ensemble(
        model,
        init,
        cfg.tau,
        cfg.trajectories,
        cfg.master_seed,
        schemes=[scheme],
        sampler=cfg.sampler,
        workers=cfg.workers,
    )
    indices = bootstrap_indices(
        cfg.trajectories, cfg.bootstrap_resamples, bootstrap_seed_for(cfg.master_seed)
    )
    fisher = estimate_fisher(res.scores, indices=indices)
    labels = sorted(model.groups)
    activities = [dynamical_activity(model, rho0, cfg.tau, g, liouv=liouv) for g in labels]
    z_offdiag = fisher.values[0, 1] / fisher.std_errors[0, 1]
    z_diag = [
        (fisher.values[a, a] - activities[a]) / fisher.std_errors[a, a] for a in range(2)
    ]
    z_all = [z_offdiag] + z_diag
    return {
        "fisher": fisher.values.tolist(),
        "fisher_se": fisher.std_errors.tolist(),
        "activities": activities,
        "z_offdiagonal": float(z_offdiag),
        "z_diagonal": [float(z) for z in z_diag],
        "max_abs_z": float(max(abs(z) for z in z_all)),
        "passed": bool(max(abs(z) for z in z_all) <= 4.0),
        "sample_count": cfg.trajectories,
    }


def steady_state_report(cfg: RunConfig) -> dict:
    model = build_model(cfg.model)
    liouv = build_liouvillian(model)
    rho_ss = steady_state(liouv.total)
    ls = rate_asymmetries(model, rho_ss)
    return {
        "rho_ss_real": rho_ss.entries.real.tolist(),
        "rho_ss_imag": rho_ss.entries.imag.tolist(),
        "l_ss": [None if np.isnan(x) else float(x) for x in ls],
        "channel_ids": [c.id for c in model.channels],
    }


def validation_report(cfg: RunConfig) -> dict:
    model = build_model(cfg.model)
    vr = validate(model)
    return {
        "ok": vr.ok,
        "violations": list(vr.violations),
        "warnings": list(vr.warnings),
        "inert_channels": list(vr.inert_channels),
        "tur_ready": vr.tur_ready,
        "detailed_balance_residuals": {
            f"{a},{b}": v for (a, b), v in vr.detailed_balance_residuals.items()
        },
    }
