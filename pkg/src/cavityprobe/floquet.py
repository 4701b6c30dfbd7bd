"""Quasi-steady state of the bichromatically driven system.

With the probe sideband written as L(t) = L0 + Lplus e^{+i delta t}
+ Lminus e^{-i delta t}, the long-time state is periodic and expands as
rho(t) = sum_n rho_n e^{i n delta t}. The Fourier components obey the
three-term recursion

    (L0 - i n delta I) rho_n + Lplus rho_{n-1} + Lminus rho_{n+1} = 0,

which is closed by matrix continued fractions: upward ratio matrices
S_n with rho_n = S_n rho_{n-1} and downward T_n with rho_{-n} =
T_n rho_{-(n-1)}, both anchored at zero beyond the truncation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import DensityMatrix, unvec, vec
from .errors import DegenerateSteadyStateError, HarmonicTailError, NumericalError
from .lindblad import Superoperator

RESIDUAL_TOL = 1e-8
TAIL_TOL = 1e-6


@dataclass
class FloquetHarmonics:
    """Fourier components rho_n, n = -n_max..+n_max, of the periodic state."""

    n_max_harmonics: int
    harmonics: np.ndarray  # shape (2*n_max+1, dim^2), row k holds n = k - n_max
    delta: float

    def __post_init__(self):
        self.harmonics = np.asarray(self.harmonics, dtype=complex)
        expected = 2 * self.n_max_harmonics + 1
        if self.harmonics.shape[0] != expected:
            raise ValueError(
                f"expected {expected} harmonics, got {self.harmonics.shape[0]}"
            )

    @property
    def hilbert_dim(self) -> int:
        return int(round(np.sqrt(self.harmonics.shape[1])))

    def component(self, n: int) -> np.ndarray:
        """rho_n as a vectorized column."""
        if abs(n) > self.n_max_harmonics:
            raise ValueError(f"harmonic index {n} beyond truncation {self.n_max_harmonics}")
        return self.harmonics[n + self.n_max_harmonics]

    def matrix(self, n: int) -> np.ndarray:
        return unvec(self.component(n))

    def norms(self) -> np.ndarray:
        """2-norms of the harmonic vectors, ordered n = -n_max..+n_max."""
        return np.linalg.norm(self.harmonics, axis=1)

    def validate(
        self, trace_tol: float = 1e-9, conj_tol: float = 1e-9, tail_check: bool = True
    ) -> None:
        rho0 = self.matrix(0)
        tr = np.trace(rho0)
        if abs(tr - 1.0) > trace_tol:
            raise NumericalError(f"tr(rho_0) = {tr} is not 1 within {trace_tol}")
        scale = np.linalg.norm(self.component(0))
        for n in range(1, self.n_max_harmonics + 1):
            err = np.max(np.abs(self.matrix(-n) - self.matrix(n).conj().T))
            if err > conj_tol * max(1.0, scale):
                raise NumericalError(
                    f"conjugation symmetry rho_-{n} = rho_{n}^dag violated by {err:.3e}"
                )
        if tail_check:
            # low harmonics may be resonantly enhanced (subharmonic
            # structure), but the last few must fall off monotonically
            # unless they have already decayed below the tail tolerance
            norms = self.norms()[self.n_max_harmonics :]  # n = 0, 1, ...
            start = max(2, self.n_max_harmonics - 2)
            for n in range(start, self.n_max_harmonics + 1):
                if norms[n] <= TAIL_TOL * norms[0]:
                    continue
                if norms[n] > 1.001 * norms[n - 1]:
                    raise HarmonicTailError(
                        f"harmonic norms grow at n={n}: "
                        f"|rho_{n}| = {norms[n]:.3e} > |rho_{n-1}| = {norms[n-1]:.3e}"
                    )

    def mean_expectation(self, operator_entries: np.ndarray) -> complex:
        """Expectation of an operator in the time-averaged state (= rho_0)."""
        return complex(np.trace(np.asarray(operator_entries) @ self.matrix(0)))


def steady_state_static(L0: Superoperator) -> DensityMatrix:
    """Null vector of L0, trace-normalized; error if the null space is degenerate."""
    svals = scipy.linalg.svdvals(L0.entries)
    scale = svals[0]
    if svals[-1] > 1e-8 * scale:
        raise NumericalError(
            f"no steady state: smallest singular value {svals[-1]:.3e} "
            f"is not negligible against {scale:.3e}"
        )
    if svals[-2] < 1e-9 * scale:
        raise DegenerateSteadyStateError(
            f"steady state is not unique: two smallest singular values "
            f"{svals[-1]:.3e}, {svals[-2]:.3e}"
        )
    _, _, vh = np.linalg.svd(L0.entries)
    rho = unvec(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho)


def _solve_refined(A: np.ndarray, B: np.ndarray, context: str) -> np.ndarray:
    """Dense LU solve with one step of iterative refinement when needed."""
    try:
        lu, piv = scipy.linalg.lu_factor(A)
        X = scipy.linalg.lu_solve((lu, piv), B)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"singular shifted Liouvillian in {context}: {exc}") from exc
    if not np.all(np.isfinite(X)):
        raise NumericalError(
            f"singular shifted Liouvillian in {context}: "
            f"condition estimate {np.linalg.cond(A):.3e}"
        )
    bnorm = np.linalg.norm(B)
    if bnorm > 0:
        R = B - A @ X
        if np.linalg.norm(R) > 1e-12 * bnorm:
            X = X + scipy.linalg.lu_solve((lu, piv), R)
            R = B - A @ X
            if np.linalg.norm(R) > 1e-8 * bnorm:
                raise NumericalError(
                    f"linear solve in {context} failed to converge: relative "
                    f"residual {np.linalg.norm(R) / bnorm:.3e}, condition "
                    f"estimate {np.linalg.cond(A):.3e}"
                )
    return X


def continued_fraction_harmonics(
    L0: Superoperator,
    Lplus: Superoperator,
    Lminus: Superoperator,
    delta: float,
    n_max_harmonics: int = 8,
    tail_tol: float = TAIL_TOL,
) -> FloquetHarmonics:
    """Solve the harmonic recursion by matrix continued fractions.

    At delta = 0 the two drives are degenerate in frequency and the
    problem collapses to the static steady state of L0 + Lplus + Lminus.
    """
    if n_max_harmonics < 1:
        raise ValueError("n_max_harmonics must be >= 1")
    d2 = L0.dim
    K = n_max_harmonics
    L0m, Lpm, Lmm = L0.entries, Lplus.entries, Lminus.entries
    probe_off = np.linalg.norm(Lpm) == 0.0 and np.linalg.norm(Lmm) == 0.0

    if delta == 0.0 and not probe_off:
        merged = Superoperator(L0m + Lpm + Lmm)
        rho0 = steady_state_static(merged)
        harmonics = np.zeros((2 * K + 1, d2), dtype=complex)
        harmonics[K] = vec(rho0.entries)
        h = FloquetHarmonics(K, harmonics, 0.0)
        h.validate(tail_check=False)
        return h

    eye = np.eye(d2)

    # upward ratios: rho_n = S_n rho_{n-1}, S_{K+1} = 0
    S = np.zeros((d2, d2), dtype=complex)
    S_list: dict[int, np.ndarray] = {}
    for n in range(K, 0, -1):
        A = L0m - 1j * n * delta * eye + Lmm @ S
        S = -_solve_refined(A, Lpm, f"S_{n}")
        S_list[n] = S

    # downward ratios: rho_{-n} = T_n rho_{-(n-1)}, T_{K+1} = 0
    T = np.zeros((d2, d2), dtype=complex)
    T_list: dict[int, np.ndarray] = {}
    for n in range(K, 0, -1):
        A = L0m + 1j * n * delta * eye + Lpm @ T
        T = -_solve_refined(A, Lmm, f"T_{n}")
        T_list[n] = T

    core = Superoperator(L0m + Lmm @ S_list[1] + Lpm @ T_list[1])
    rho0 = steady_state_static(core)

    harmonics = np.zeros((2 * K + 1, d2), dtype=complex)
    harmonics[K] = vec(rho0.entries)
    for n in range(1, K + 1):
        harmonics[K + n] = S_list[n] @ harmonics[K + n - 1]
        harmonics[K - n] = T_list[n] @ harmonics[K - n + 1]

    h = FloquetHarmonics(K, harmonics, delta)

    scale = np.linalg.norm(harmonics[K])
    tail = np.linalg.norm(harmonics[2 * K])
    if tail > tail_tol * scale:
        raise HarmonicTailError(
            f"harmonic tail has not decayed: |rho_{K}| / |rho_0| = {tail / scale:.3e} "
            f"> {tail_tol:.1e}; increase n_max_harmonics"
        )

    resid = recursion_residual(h, L0, Lplus, Lminus)
    if resid > RESIDUAL_TOL * scale:
        raise NumericalError(
            f"harmonic recursion residual {resid:.3e} exceeds "
            f"{RESIDUAL_TOL:.1e} * |rho_0| = {RESIDUAL_TOL * scale:.3e}"
        )
    h.validate(tail_check=not probe_off)
    return h


def recursion_residual(
    h: FloquetHarmonics, L0: Superoperator, Lplus: Superoperator, Lminus: Superoperator
) -> float:
    """max_n |(L0 - i n delta) rho_n + Lplus rho_{n-1} + Lminus rho_{n+1}|."""
    K = h.n_max_harmonics
    d2 = L0.dim
    worst = 0.0
    for n in range(-K, K + 1):
        r = (L0.entries - 1j * n * h.delta * np.eye(d2)) @ h.component(n)
        r = r + Lplus.entries @ (h.component(n - 1) if n - 1 >= -K else np.zeros(d2))
        r = r + Lminus.entries @ (h.component(n + 1) if n + 1 <= K else np.zeros(d2))
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def reconstruct_state(h: FloquetHarmonics, t: float) -> DensityMatrix:
    """rho(t) = sum_n rho_n e^{i n delta t}; valid state for a weak probe."""
    K = h.n_max_harmonics
    phases = np.exp(1j * h.delta * t * np.arange(-K, K + 1))
    rho = unvec(phases @ h.harmonics)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, herm_tol=1e-9, trace_tol=1e-9, pos_tol=1e-6)
