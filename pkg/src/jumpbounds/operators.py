"""Dense complex linear algebra over Hilbert and Liouville space.

Vectorization is column-stacking throughout: ``vec(X)[i + d*j] = X[i, j]``,
i.e. ``X.flatten(order="F")``.  With this convention

    vec(A X B) = (B^T kron A) vec(X),

and every superoperator in the package is assembled through
:func:`sandwich_superoperator` so the Kronecker convention lives in exactly
one place.  The dual of the trace is ``vec(identity)``: for any operator X,
``trace(X) == trace_functional(d) @ vectorize(X)``.

Hilbert dimensions are tiny (d = 2 or 3 for the built-in models), so all
routines are dense and direct; no attempt is made at sparse or large-d
scalability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, TYPE_CHECKING

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, NonErgodicModelError, SingularStateError

if TYPE_CHECKING:  # pragma: no cover
    from .models import LindbladModel

HERMITICITY_TOL = 1e-12
TRACE_ANNIHILATION_TOL = 1e-10
ZERO_EIGENVALUE_TOL = 1e-9
BIORTHOGONALITY_TOL = 1e-8


def _as_complex_matrix(a, name: str = "operator") -> np.ndarray:
    m = np.ascontiguousarray(getattr(a, "entries", a), dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be a square matrix, got shape {m.shape}")
    if not (np.all(np.isfinite(m.real)) and np.all(np.isfinite(m.imag))):
        raise DimensionMismatchError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class Operator:
    """A finite complex d x d operator (d >= 2).

    Parameters
    ----------
    entries : array_like
        Square complex matrix.
    hermitian : bool
        When asserted, Hermiticity is verified to ``HERMITICITY_TOL``
        in max-norm at construction time.
    """

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = _as_complex_matrix(self.entries)
        if m.shape[0] < 2:
            raise DimensionMismatchError("operators must have dimension >= 2")
        if self.hermitian:
            asym = np.max(np.abs(m - m.conj().T))
            if asym > HERMITICITY_TOL:
                raise DimensionMismatchError(
                    f"operator asserted Hermitian but max asymmetry is {asym:.3e}"
                )
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.entries.conj().T, hermitian=self.hermitian)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class Superoperator:
    """A d^2 x d^2 matrix acting on column-stacked operators.

    ``kind`` labels the role: ``liouvillian``, ``jump-super``,
    ``dissipator-part``, ``drazin`` or ``propagator``.  Matrices of kind
    ``liouvillian`` must annihilate the trace functional.
    """

    matrix: np.ndarray
    kind: str = "liouvillian"

    _KINDS = ("liouvillian", "jump-super", "dissipator-part", "drazin", "propagator")

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix, "superoperator")
        d = int(round(np.sqrt(m.shape[0])))
        if d * d != m.shape[0]:
            raise DimensionMismatchError(f"superoperator size {m.shape[0]} is not a perfect square")
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown superoperator kind {self.kind!r}")
        if self.kind == "liouvillian":
            residual = np.max(np.abs(trace_functional(d) @ m))
            if residual > TRACE_ANNIHILATION_TOL:
                raise DimensionMismatchError(
                    f"liouvillian does not annihilate the trace functional (residual {residual:.3e})"
                )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def hilbert_dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, op) -> np.ndarray:
        """Apply the map to an operator and return the resulting matrix."""
        return unvectorize(self.matrix @ vectorize(op))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition of a Liouvillian with biorthogonal left/right vectors.

    ``right[:, j]`` and ``left[j, :]`` satisfy ``left[j] @ right[:, k] = delta_jk``.
    ``zero_index`` marks the unique stationary eigenvalue.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    zero_index: int


def vectorize(op) -> np.ndarray:
    """Column-stack an operator into a d^2 vector."""
    m = _as_complex_matrix(op)
    return m.flatten(order="F")


def unvectorize(vec) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(vec, dtype=np.complex128).ravel()
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatchError(f"vector of length {v.size} is not a vectorized operator")
    return v.reshape((d, d), order="F")


def trace_functional(dim: int) -> np.ndarray:
    """Row vector t with t @ vec(X) = trace(X)."""
    return vectorize(np.eye(dim)).conj()


def sandwich_superoperator(a, b) -> np.ndarray:
    """Matrix of the map rho -> A rho B (the single Kronecker helper)."""
    a = _as_complex_matrix(a)
    b = _as_complex_matrix(b)
    return np.kron(b.T, a)


def left_multiplication(a) -> np.ndarray:
    a = _as_complex_matrix(a)
    return sandwich_superoperator(a, np.eye(a.shape[0]))


def right_multiplication(b) -> np.ndarray:
    b = _as_complex_matrix(b)
    return sandwich_superoperator(np.eye(b.shape[0]), b)


def commutator_superoperator(h) -> np.ndarray:
    """Matrix of rho -> -i [H, rho]."""
    return -1j * (left_multiplication(h) - right_multiplication(h))


def dissipator_superoperator(l) -> np.ndarray:
    """Matrix of the Lindblad dissipator rho -> L rho L† - 1/2 {L†L, rho}."""
    l = _as_complex_matrix(l, "jump operator")
    ldl = l.conj().T @ l
    return (
        sandwich_superoperator(l, l.conj().T)
        - 0.5 * left_multiplication(ldl)
        - 0.5 * right_multiplication(ldl)
    )


def jump_superoperator(ops, weights) -> Superoperator:
    """Weighted jump map rho -> sum_k w_k L_k rho L_k†."""
    ops = [np.asarray(_as_complex_matrix(o, "jump operator")) for o in ops]
    weights = np.asarray(weights, dtype=float)
    if len(ops) != weights.size:
        raise DimensionMismatchError("one weight per jump operator required")
    d = ops[0].shape[0]
    m = np.zeros((d * d, d * d), dtype=np.complex128)
    for w, l in zip(weights, ops):
        if l.shape[0] != d:
            raise DimensionMismatchError("jump operators must share one dimension")
        if w != 0.0:
            m += w * sandwich_superoperator(l, l.conj().T)
    return Superoperator(m, kind="jump-super")


@dataclass(frozen=True)
class Liouvillian:
    """Full generator of a Lindblad model plus its per-group restrictions.

    ``group_parts[g]`` is the Hamiltonian commutator plus only the group-g
    dissipators; ``dissipator_parts[g]`` holds the dissipators alone.
    """

    total: Superoperator
    group_parts: Mapping[int, Superoperator] = field(default_factory=dict)
    dissipator_parts: Mapping[int, Superoperator] = field(default_factory=dict)

    @property
    def hilbert_dim(self) -> int:
        return self.total.hilbert_dim


def build_liouvillian(model: "LindbladModel") -> Liouvillian:
    """Assemble the vectorized generator of a model, with group-restricted parts."""
    if not model.channels:
        raise DimensionMismatchError("model has no jump channels")
    h = _as_complex_matrix(model.hamiltonian, "hamiltonian")
    d = h.shape[0]
    comm = commutator_superoperator(h)
    dissipators: dict[int, np.ndarray] = {}
    for ch in model.channels:
        l = _as_complex_matrix(ch.operator, "jump operator")
        if l.shape[0] != d:
            raise DimensionMismatchError(
                f"channel {ch.id} has dimension {l.shape[0]}, expected {d}"
            )
        dissipators.setdefault(ch.group, np.zeros((d * d, d * d), dtype=np.complex128))
        dissipators[ch.group] += dissipator_superoperator(l)
    total = comm + sum(dissipators.values())
    return Liouvillian(
        total=Superoperator(total, kind="liouvillian"),
        group_parts={
            g: Superoperator(comm + dg, kind="liouvillian") for g, dg in dissipators.items()
        },
        dissipator_parts={
            g: Superoperator(dg, kind="dissipator-part") for g, dg in dissipators.items()
        },
    )


def _liouvillian_matrix(liouvillian) -> np.ndarray:
    if isinstance(liouvillian, Liouvillian):
        return np.asarray(liouvillian.total.matrix)
    if isinstance(liouvillian, Superoperator):
        return np.asarray(liouvillian.matrix)
    return _as_complex_matrix(liouvillian, "superoperator")


def steady_state(liouvillian) -> Operator:
    """Unique trace-one stationary state of an ergodic Liouvillian.

    Solves the kernel by SVD and verifies trace, Hermiticity, positivity
    and the residual ``L rho_ss = 0`` to 1e-10.

    Raises
    ------
    NonErgodicModelError
        If the stationary subspace is degenerate (or empty).
    """
    m = _liouvillian_matrix(liouvillian)
    _, s, vh = np.linalg.svd(m)
    if s[-1] > ZERO_EIGENVALUE_TOL:
        raise NonErgodicModelError(f"no stationary state: smallest singular value {s[-1]:.3e}")
    if s.size > 1 and s[-2] < ZERO_EIGENVALUE_TOL:
        raise NonErgodicModelError("degenerate stationary subspace (multiple steady states)")
    rho = unvectorize(vh[-1].conj())
    tr = np.trace(rho)
    if abs(tr) < 1e-12:
        raise NonErgodicModelError("stationary vector is traceless; kernel is not a state")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.linalg.norm(m @ vectorize(rho))
    if residual > 1e-10:
        raise NonErgodicModelError(f"steady-state residual {residual:.3e} exceeds 1e-10")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < -1e-10:
        raise NonErgodicModelError(f"steady state not positive semidefinite (min eig {eigs.min():.3e})")
    return Operator(rho, hermitian=True)


def spectral_data(liouvillian) -> SpectralData:
    """Diagonalize a Liouvillian into biorthogonal left/right eigenvectors."""
    m = _liouvillian_matrix(liouvillian)
    evals, right = np.linalg.eig(m)
    zero_mask = np.abs(evals) < ZERO_EIGENVALUE_TOL
    if zero_mask.sum() != 1:
        raise NonErgodicModelError(
            f"expected exactly one stationary eigenvalue, found {int(zero_mask.sum())}"
        )
    zero_index = int(np.flatnonzero(zero_mask)[0])
    decaying = np.delete(evals.real, zero_index)
    if decaying.size and decaying.max() >= 0:
        raise NonErgodicModelError("non-stationary eigenvalue with non-negative real part")
    # Scale the stationary column to trace one so its left partner is the trace functional.
    tr = trace_functional(int(round(np.sqrt(m.shape[0])))) @ right[:, zero_index]
    if abs(tr) < 1e-12:
        raise NonErgodicModelError("stationary eigenvector is traceless")
    right = right.copy()
    right[:, zero_index] /= tr
    left = np.linalg.inv(right)
    gram = left @ right
    max_offdiag = np.max(np.abs(gram - np.eye(gram.shape[0])))
    if max_offdiag > BIORTHOGONALITY_TOL:
        raise NonErgodicModelError(
            f"left/right eigenvectors not biorthogonal to tolerance ({max_offdiag:.3e}); "
            "Liouvillian may be defective"
        )
    return SpectralData(eigenvalues=evals, right=right, left=left, zero_index=zero_index)


def propagator_from_spectrum(sd: SpectralData, t: float) -> np.ndarray:
    """Reconstruct exp(L t) from the spectral decomposition."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    return (sd.right * np.exp(sd.eigenvalues * t)) @ sd.left


def drazin_inverse(liouvillian, rho_ss) -> Superoperator:
    """Inverse of the Liouvillian on the complement of the stationary pair.

    Computed by a deflated solve: with P = |rho_ss><1|, the matrix L + P is
    regular and ``L+ = (L + P)^{-1} (I - P)``, which satisfies
    ``L+ L = L L+ = I - P``, ``L+ |rho_ss> = 0`` and ``<1| L+ = 0``.
    """
    m = _liouvillian_matrix(liouvillian)
    rho_vec = vectorize(rho_ss)
    d = int(round(np.sqrt(m.shape[0])))
    proj = np.outer(rho_vec, trace_functional(d))
    deflated = np.linalg.solve(m + proj, np.eye(m.shape[0]) - proj)
    return Superoperator(deflated, kind="drazin")


def drazin_inverse_time_integral(liouvillian, rho_ss, horizon: float, steps: int = 4096) -> np.ndarray:
    """Quadrature form -int_0^inf exp(L t)(I - |rho_ss><1|) dt, truncated at ``horizon``.

    Slow reference used to cross-check :func:`drazin_inverse`; Simpson rule
    on a uniform grid, so ``steps`` must be even.
    """
    m = _liouvillian_matrix(liouvillian)
    d = int(round(np.sqrt(m.shape[0])))
    proj = np.eye(m.shape[0]) - np.outer(vectorize(rho_ss), trace_functional(d))
    if steps % 2:
        steps += 1
    h = horizon / steps
    eh = scipy.linalg.expm(m * h)
    weights = np.ones(steps + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    acc = np.zeros_like(m)
    cur = proj.copy()
    for w in weights:
        acc += w * cur
        cur = eh @ cur
    return -acc * (h / 3.0)


def propagate(superop, state, t: float) -> Operator:
    """Evolve a state: rho(t) = exp(L t) rho."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    m = _liouvillian_matrix(superop)
    rho_t = unvectorize(scipy.linalg.expm(m * t) @ vectorize(state))
    return Operator(0.5 * (rho_t + rho_t.conj().T))


def matrix_exponential(h_eff, t: float) -> np.ndarray:
    """Non-unitary no-jump propagator U(t) = exp(-i H_eff t)."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    return scipy.linalg.expm(-1j * _as_complex_matrix(h_eff, "effective hamiltonian") * t)


def matrix_log(rho) -> Operator:
    """Hermitian logarithm of a strictly positive density matrix.

    Raises
    ------
    SingularStateError
        If any eigenvalue is at or below 1e-12.
    """
    m = _as_complex_matrix(rho, "state")
    asym = np.max(np.abs(m - m.conj().T))
    if asym > 1e-10:
        raise DimensionMismatchError(f"matrix_log requires a Hermitian input (asymmetry {asym:.3e})")
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() <= 1e-12:
        raise SingularStateError(f"state has eigenvalue {w.min():.3e} <= 1e-12; logarithm undefined")
    logm = (u * np.log(w)) @ u.conj().T
    return Operator(0.5 * (logm + logm.conj().T), hermitian=True)


def von_neumann_entropy(rho) -> float:
    """-tr(rho ln rho) with the 0 ln 0 = 0 convention."""
    w = np.linalg.eigvalsh(_as_complex_matrix(rho, "state"))
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))
