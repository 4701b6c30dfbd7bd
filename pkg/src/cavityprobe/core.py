"""Truncated qubit (x) Fock Hilbert space and dense operator algebra.

Basis ordering is (QD level) (x) (Fock level) with the QD ground state
first: basis index = q * (n_max_fock + 1) + n, where q = 0 labels the
ground state, q = 1 the excited state, and n the photon number. All
operators are dense complex matrices; the truncations used here keep
dim <= 16, so sparse storage would be pointless complexity.

Angular frequencies are expressed in rad/ns throughout the dynamical
modules (so a rate quoted as nu GHz enters as 2*pi*nu); any consistent
unit system works for the pure algebra in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-12
DENSITY_HERM_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
DENSITY_POS_TOL = 1e-8


@dataclass(frozen=True)
class HilbertSpace:
    """Two-level emitter tensored with a Fock ladder truncated at n_max_fock."""

    n_max_fock: int

    def __post_init__(self):
        if self.n_max_fock < 1:
            raise ValueError(
                f"n_max_fock must be >= 1 (the cavity needs at least one "
                f"excitation to emit), got {self.n_max_fock}"
            )

    @property
    def n_fock(self) -> int:
        return self.n_max_fock + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max_fock + 1)

    @property
    def ordering(self) -> str:
        """Documented basis convention."""
        return "qubit (x) fock, ground state first"


def make_space(n_max_fock: int) -> HilbertSpace:
    """Build the truncated product space; dim = 2 * (n_max_fock + 1)."""
    return HilbertSpace(int(n_max_fock))


@dataclass
class Operator:
    """Dense operator on the truncated product space."""

    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError(f"operator must be square, got shape {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("operator entries must be finite")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, label=f"{self.label}^dag" if self.label else "")

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) < tol

    def __matmul__(self, other: "Operator") -> "Operator":
        return compose(self, other, "product")

    def __add__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries - other.entries)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.entries * scalar, label=self.label)

    __rmul__ = __mul__


def _check_dims(a: Operator, b: Operator) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def identity(space: HilbertSpace) -> Operator:
    return Operator(np.eye(space.dim, dtype=complex), label="I")


def annihilation(space: HilbertSpace) -> Operator:
    """Cavity annihilation a = I_qd (x) a_fock, a_fock[n-1, n] = sqrt(n)."""
    nf = space.n_fock
    a = np.zeros((nf, nf), dtype=complex)
    for n in range(1, nf):
        a[n - 1, n] = np.sqrt(n)
    return Operator(np.kron(np.eye(2), a), label="a")


def creation(space: HilbertSpace) -> Operator:
    return Operator(annihilation(space).entries.conj().T, label="a^dag")


def number_op(space: HilbertSpace) -> Operator:
    a = annihilation(space)
    return Operator(a.entries.conj().T @ a.entries, label="a^dag a")


def qd_lowering(space: HilbertSpace) -> Operator:
    """Emitter lowering sigma = |g><e| (x) I_fock."""
    s = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # row g, column e
    return Operator(np.kron(s, np.eye(space.n_fock)), label="sigma")


def qd_raising(space: HilbertSpace) -> Operator:
    return Operator(qd_lowering(space).entries.conj().T, label="sigma^dag")


def qd_population(space: HilbertSpace) -> Operator:
    s = qd_lowering(space).entries
    return Operator(s.conj().T @ s, label="sigma^dag sigma")


def qd_sigma_x(space: HilbertSpace) -> Operator:
    s = qd_lowering(space).entries
    return Operator(s + s.conj().T, label="sigma_x")


def basis_vector(space: HilbertSpace, qd_level: int, n_photons: int) -> np.ndarray:
    """Column vector |q, n> in the fixed ordering."""
    if qd_level not in (0, 1):
        raise ValueError("qd_level must be 0 (ground) or 1 (excited)")
    if not 0 <= n_photons <= space.n_max_fock:
        raise ValueError(f"n_photons out of range [0, {space.n_max_fock}]")
    v = np.zeros(space.dim, dtype=complex)
    v[qd_level * space.n_fock + n_photons] = 1.0
    return v


def compose(A: Operator, B: Operator, kind: str = "product") -> Operator:
    """Combine two operators: plain product, commutator AB - BA, or kron."""
    if kind == "kron":
        return Operator(np.kron(A.entries, B.entries))
    _check_dims(A, B)
    if kind == "product":
        return Operator(A.entries @ B.entries)
    if kind == "commutator":
        return Operator(A.entries @ B.entries - B.entries @ A.entries)
    raise ValueError(f"unknown composition kind {kind!r}")


@dataclass
class DensityMatrix:
    """Dense density matrix with the usual physicality checks."""

    entries: np.ndarray
    herm_tol: float = field(default=DENSITY_HERM_TOL, repr=False)
    trace_tol: float = field(default=DENSITY_TRACE_TOL, repr=False)
    pos_tol: float = field(default=DENSITY_POS_TOL, repr=False)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("density matrix must be square")
        self.validate()

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def validate(self) -> None:
        r = self.entries
        herm_err = float(np.max(np.abs(r - r.conj().T)))
        if herm_err > self.herm_tol:
            raise ValueError(f"density matrix not Hermitian: max|rho - rho^dag| = {herm_err:.3e}")
        tr = np.trace(r)
        if abs(tr.imag) > self.trace_tol or abs(tr.real - 1.0) > self.trace_tol:
            raise ValueError(f"density matrix trace {tr} is not 1 within {self.trace_tol}")
        evals = np.linalg.eigvalsh(0.5 * (r + r.conj().T))
        if evals.min() < -self.pos_tol:
            raise ValueError(f"density matrix has negative eigenvalue {evals.min():.3e}")

    def expect(self, A: Operator) -> complex:
        return expectation(A, self)


def expectation(A: Operator, rho: DensityMatrix | np.ndarray) -> complex:
    """tr(A rho)."""
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if A.dim != r.shape[0]:
        raise ValueError(f"dimension mismatch: {A.dim} vs {r.shape[0]}")
    return complex(np.trace(A.entries @ r))


def ground_vacuum(space: HilbertSpace) -> DensityMatrix:
    """|g, 0><g, 0|."""
    v = basis_vector(space, 0, 0)
    return DensityMatrix(np.outer(v, v.conj()))


def maximally_mixed(space: HilbertSpace) -> DensityMatrix:
    return DensityMatrix(np.eye(space.dim, dtype=complex) / space.dim)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) * sum of singular values of rho - sigma."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return 0.5 * float(np.sum(np.linalg.svd(diff, compute_uv=False)))


# Column-stacking vectorization: vec(A rho B) = (B^T kron A) vec(rho).
def vec(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((d, d), order="F")
