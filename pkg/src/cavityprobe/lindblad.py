"""Rotating-frame Hamiltonian and Liouvillian superoperators.

The emitter is driven by a strong pump (amplitude J1) and a weak probe
(amplitude J2, detuned by delta from the pump). In the frame rotating at
the pump frequency the generator of the master equation splits into a
static part and two sidebands,

    d(rho)/dt = (L0 + Lplus * exp(+i delta t) + Lminus * exp(-i delta t)) rho,

where L0 carries the static Hamiltonian and all dissipators and Lplus /
Lminus are the probe commutators with the J2 amplitude folded in. All
superoperators use column-stacking vectorization: vec(A rho B) =
(B^T kron A) vec(rho).
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

import numpy as np

from .core import (
    HilbertSpace,
    Operator,
    annihilation,
    number_op,
    qd_lowering,
    qd_population,
    qd_sigma_x,
)

TWO_PI = 2.0 * np.pi

_RATE_FIELDS = ("kappa", "gamma", "gamma_r", "gamma_d")


@dataclass(frozen=True)
class SystemParams:
    """All rates, detunings and drive amplitudes of the driven QD-cavity model.

    Every entry is an angular frequency (rad/ns in this package's
    convention). ``delta_dc`` is the cavity-minus-emitter detuning,
    ``delta_pump`` the pump-minus-emitter detuning (0 puts the pump on
    the emitter resonance) and ``delta`` the probe-minus-pump detuning.
    """

    kappa: float = TWO_PI * 17.0      # cavity field decay
    gamma: float = TWO_PI * 1.0       # emitter decay
    gamma_r: float = TWO_PI * 0.5     # phonon-mediated emitter-cavity rate
    gamma_d: float = TWO_PI * 3.0     # pure dephasing
    delta_dc: float = TWO_PI * 17.0 * 8.0   # cavity - emitter detuning
    delta_pump: float = 0.0           # pump - emitter detuning
    g: float = 0.0                    # coherent emitter-cavity coupling
    n_bar: float = 1.0                # phonon occupation
    J1: float = 0.0                   # pump amplitude
    J2: float = 0.0                   # probe amplitude
    delta: float = 0.0                # probe - pump detuning

    def __post_init__(self):
        for name in _RATE_FIELDS:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_bar < 0:
            raise ValueError("n_bar must be nonnegative")
        if self.J2 < 0:
            raise ValueError("J2 must be nonnegative")
        for f in dataclasses.fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    @classmethod
    def from_ghz(cls, **kwargs) -> "SystemParams":
        """Build from plain frequencies in GHz (each value nu enters as 2*pi*nu)."""
        return cls(**{k: TWO_PI * v for k, v in kwargs.items()})

    def replace(self, **kwargs) -> "SystemParams":
        return dataclasses.replace(self, **kwargs)

    def content_hash(self) -> str:
        text = ",".join(
            f"{f.name}={getattr(self, f.name):.17g}" for f in dataclasses.fields(self)
        )
        return hashlib.sha1(text.encode()).hexdigest()[:16]


@dataclass
class Superoperator:
    """Dense superoperator acting on column-stacked density matrices."""

    entries: np.ndarray
    convention: str = "column"

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        d2 = self.entries.shape[0]
        if self.entries.ndim != 2 or self.entries.shape[1] != d2:
            raise ValueError("superoperator must be square")
        d = int(round(np.sqrt(d2)))
        if d * d != d2:
            raise ValueError("superoperator dimension must be a perfect square")
        if self.convention != "column":
            raise ValueError("only column-stacking vectorization is supported")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def hilbert_dim(self) -> int:
        return int(round(np.sqrt(self.dim)))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Act on a density matrix given in matrix form."""
        d = self.hilbert_dim
        return (self.entries @ np.asarray(rho).reshape(-1, order="F")).reshape(
            (d, d), order="F"
        )

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.entries + other.entries)

    def __mul__(self, scalar: complex) -> "Superoperator":
        return Superoperator(self.entries * scalar)

    __rmul__ = __mul__


def left_mult(A: np.ndarray) -> np.ndarray:
    """Superoperator matrix of rho -> A rho."""
    d = A.shape[0]
    return np.kron(np.eye(d), A)


def right_mult(B: np.ndarray) -> np.ndarray:
    """Superoperator matrix of rho -> rho B."""
    d = B.shape[0]
    return np.kron(B.T, np.eye(d))


def commutator_superop(H: Operator) -> Superoperator:
    """-i [H, .] as a superoperator."""
    Hm = H.entries
    return Superoperator(-1j * (left_mult(Hm) - right_mult(Hm)))


def dissipator(C: Operator) -> Superoperator:
    """Lindblad dissipator rho -> C rho C^dag - (1/2){C^dag C, rho}."""
    Cm = C.entries
    CdC = Cm.conj().T @ Cm
    D = np.kron(Cm.conj(), Cm) - 0.5 * (left_mult(CdC) + right_mult(CdC))
    return Superoperator(D)


def hamiltonian_rotating(params: SystemParams, space: HilbertSpace) -> Operator:
    """Static Hamiltonian in the pump frame.

    H0 = (delta_dc - delta_pump) a^dag a - delta_pump sigma^dag sigma
         + g (sigma^dag a + sigma a^dag) + J1 sigma_x
    """
    a = annihilation(space).entries
    s = qd_lowering(space).entries
    H = (params.delta_dc - params.delta_pump) * number_op(space).entries
    H = H - params.delta_pump * qd_population(space).entries
    if params.g != 0.0:
        H = H + params.g * (s.conj().T @ a + s @ a.conj().T)
    if params.J1 != 0.0:
        H = H + params.J1 * qd_sigma_x(space).entries
    return Operator(H, label="H0")


def build_liouvillians(
    params: SystemParams, space: HilbertSpace
) -> tuple[Superoperator, Superoperator, Superoperator]:
    """Static Liouvillian and the two probe sidebands.

    L0 holds -i[H0, .] plus the five dissipators (emitter decay at rate
    2*gamma, cavity decay at 2*kappa, phonon up/down scattering at
    2*gamma_r*n_bar and 2*gamma_r*(1+n_bar), pure dephasing at 2*gamma_d).
    Lplus = -i J2 [sigma, .] and Lminus = -i J2 [sigma^dag, .]; the full
    generator at time t is L0 + Lplus e^{+i delta t} + Lminus e^{-i delta t}.
    """
    a = annihilation(space)
    s = qd_lowering(space)
    sd = s.dag()

    L0 = commutator_superop(hamiltonian_rotating(params, space)).entries
    L0 = L0 + dissipator(np.sqrt(2.0 * params.gamma) * s).entries
    L0 = L0 + dissipator(np.sqrt(2.0 * params.kappa) * a).entries
    if params.gamma_r > 0.0:
        up = Operator(a.dag().entries @ s.entries)       # emitter -> cavity
        down = Operator(a.entries @ sd.entries)          # cavity -> emitter
        L0 = L0 + params.n_bar * dissipator(np.sqrt(2.0 * params.gamma_r) * up).entries
        L0 = L0 + (1.0 + params.n_bar) * dissipator(
            np.sqrt(2.0 * params.gamma_r) * down
        ).entries
    L0 = L0 + dissipator(np.sqrt(2.0 * params.gamma_d) * Operator(sd.entries @ s.entries)).entries

    Lplus = params.J2 * commutator_superop(s).entries
    Lminus = params.J2 * commutator_superop(sd).entries
    return Superoperator(L0), Superoperator(Lplus), Superoperator(Lminus)


def generator_at(
    L0: Superoperator, Lplus: Superoperator, Lminus: Superoperator, delta: float, t: float
) -> np.ndarray:
    """Full generator matrix L(t) = L0 + Lplus e^{+i delta t} + Lminus e^{-i delta t}."""
    z = np.exp(1j * delta * t)
    return L0.entries + z * Lplus.entries + np.conj(z) * Lminus.entries
