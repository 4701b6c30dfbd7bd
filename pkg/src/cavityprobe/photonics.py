"""Closed-form cavity photonics estimates in SI units.

Everything here is algebraic: intracavity field from input power, the
cavity field enhancement over the bare focused beam, Rabi frequency from
field and dipole moment, dipole estimation from a splitting-versus-root-
power slope, the maximum vacuum coupling rate, and wavelength <-> rate
conversions. Inputs are SI (W, m, rad/s); dipole moments are carried by a
small tagged type so Debye and C*m cannot be mixed up silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA values used by every formula here."""

    c: float = 299792458.0            # m/s
    hbar: float = 1.054571817e-34     # J*s
    eps0: float = 8.8541878128e-12    # F/m
    debye: float = 3.33564095198e-30  # C*m per Debye


CONST = PhysicalConstants()


@dataclass(frozen=True)
class Dipole:
    """Transition dipole moment tagged with its SI magnitude."""

    si: float  # C*m

    def __post_init__(self):
        if self.si < 0:
            raise ValueError("dipole magnitude must be nonnegative")

    @classmethod
    def from_debye(cls, value: float) -> "Dipole":
        return cls(value * CONST.debye)

    @property
    def debye(self) -> float:
        return self.si / CONST.debye


def _as_dipole(mu_d) -> Dipole:
    if isinstance(mu_d, Dipole):
        return mu_d
    raise TypeError(
        "dipole moments must be passed as Dipole(si=...) or Dipole.from_debye(...); "
        f"got {type(mu_d).__name__}"
    )


@dataclass(frozen=True)
class CavityGeometry:
    """Cavity and excitation-beam parameters entering the field estimates."""

    quality_factor: float = 10000.0
    lambda0: float = 927e-9             # cavity resonance wavelength, m
    mode_volume: float = 0.0            # m^3; 0 means 0.8 * (lambda0 / n)^3
    coupling_efficiency: float = 0.01   # eta, beam-to-cavity
    refractive_index: float = 3.5       # GaAs near 927 nm
    mode_pattern: float = 1.0           # psi(x, y) at the emitter, in [0, 1]
    spot_radius: float = 3e-6           # Gaussian beam radius sigma_0, m

    def __post_init__(self):
        if self.mode_volume == 0.0:
            object.__setattr__(
                self, "mode_volume",
                0.8 * (self.lambda0 / self.refractive_index) ** 3,
            )
        for name in ("quality_factor", "lambda0", "mode_volume", "coupling_efficiency",
                     "refractive_index", "spot_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.mode_pattern <= 1.0:
            raise ValueError("mode_pattern must lie in [0, 1]")
        if self.coupling_efficiency > 1.0:
            raise ValueError("coupling_efficiency must be <= 1")

    def replace(self, **kwargs) -> "CavityGeometry":
        return replace(self, **kwargs)

    @property
    def linewidth(self) -> float:
        """Cavity energy linewidth Delta_omega = omega_0 / Q, rad/s."""
        return 2.0 * math.pi * CONST.c / (self.quality_factor * self.lambda0)

    @property
    def medium_permittivity(self) -> float:
        """epsilon = n^2 eps0 inside the dielectric."""
        return self.refractive_index**2 * CONST.eps0


@dataclass
class DriveEstimate:
    """Field and Rabi frequency produced by a given input power."""

    power: float          # W, measured before the objective
    detuning: float       # laser - cavity, rad/s
    e_max: float          # V/m at the field antinode
    e_at_qd: float        # V/m at the emitter location
    rabi: float = 0.0     # rad/s, filled when a dipole moment is supplied

    def __post_init__(self):
        for name in ("power", "e_max", "e_at_qd", "rabi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def lorentzian_factor(detuning: float, cavity_linewidth: float) -> float:
    """Stored-energy reduction f = 1 / (1 + (2 Delta / Delta_omega)^2)."""
    if cavity_linewidth <= 0:
        raise ValueError("cavity linewidth must be positive")
    return 1.0 / (1.0 + (2.0 * detuning / cavity_linewidth) ** 2)


def intracavity_field(
    power: float, geom: CavityGeometry, detuning: float = 0.0, mu_d: Dipole | None = None
) -> DriveEstimate:
    """Peak intracavity field from the input power.

    |E_max| = sqrt(eta P Q lambda0 / (2 pi c eps V_m) * f(Delta)) with
    eps = n^2 eps0; the field at the emitter is E_max * psi. A dipole
    moment, if given, also fills the Rabi frequency.
    """
    if power < 0:
        raise ValueError("power must be nonnegative")
    f = lorentzian_factor(detuning, geom.linewidth)
    e2 = (
        geom.coupling_efficiency * power * geom.quality_factor * geom.lambda0
        / (2.0 * math.pi * CONST.c * geom.medium_permittivity * geom.mode_volume)
    ) * f
    e_max = math.sqrt(e2)
    e_qd = e_max * geom.mode_pattern
    rabi = rabi_frequency(mu_d, e_qd) if mu_d is not None else 0.0
    return DriveEstimate(power, detuning, e_max, e_qd, rabi)


def bare_field(power: float, geom: CavityGeometry) -> float:
    """Field at the emitter with no cavity: a focused Gaussian beam entering
    the dielectric through a flat interface,

        |E_nocav| = (2 / (1 + n)) sqrt(P / (c eps0 pi sigma_0^2)).
    """
    if power < 0:
        raise ValueError("power must be nonnegative")
    e_free = math.sqrt(power / (CONST.c * CONST.eps0 * math.pi * geom.spot_radius**2))
    return 2.0 / (1.0 + geom.refractive_index) * e_free


def enhancement_ratio(geom: CavityGeometry, detuning: float = 0.0) -> float:
    """E_cav / E_nocav: how much the cavity boosts the drive field.

    Equals ((1+n)/2) * sqrt(eta Q lambda0 sigma_0^2 / (2 V_m) * f) * psi
    and is independent of the input power (the power cancels between the
    two fields).
    """
    f = lorentzian_factor(detuning, geom.linewidth)
    ratio = (1.0 + geom.refractive_index) / 2.0 * math.sqrt(
        geom.coupling_efficiency * geom.quality_factor * geom.lambda0
        * geom.spot_radius**2 / (2.0 * geom.mode_volume) * f
    )
    return ratio * geom.mode_pattern


def rabi_frequency(mu_d: Dipole, e_field: float) -> float:
    """Omega = mu_d E / hbar, rad/s."""
    mu = _as_dipole(mu_d)
    if e_field < 0:
        raise ValueError("field must be nonnegative")
    return mu.si * e_field / CONST.hbar


def dipole_from_splitting_slope(
    slope: float,
    geom: CavityGeometry,
    detuning: float = 0.0,
    splitting_factor: float = 4.0,
) -> Dipole:
    """Dipole moment from the slope of feature splitting versus sqrt(power).

    Inverts splitting = splitting_factor * mu_d * E(P) / hbar with
    E(P) = E_max(P; detuning) * psi, so slope has units rad/s per sqrt(W).
    """
    if slope <= 0:
        raise ValueError("slope must be positive")
    if splitting_factor <= 0:
        raise ValueError("splitting factor must be positive")
    field_per_sqrt_w = intracavity_field(1.0, geom, detuning).e_at_qd
    return Dipole(CONST.hbar * slope / (splitting_factor * field_per_sqrt_w))


def g_max(mu_d: Dipole, geom: CavityGeometry) -> float:
    """Largest possible emitter-cavity coupling, rad/s.

    g = mu_d * sqrt(omega_0 / (2 hbar eps V_m)) with eps = n^2 eps0 and
    the emitter at the field antinode.
    """
    mu = _as_dipole(mu_d)
    omega0 = 2.0 * math.pi * CONST.c / geom.lambda0
    return mu.si * math.sqrt(
        omega0 / (2.0 * CONST.hbar * geom.medium_permittivity * geom.mode_volume)
    )


@dataclass(frozen=True)
class RateConversion:
    """A wavelength span expressed as frequency and field-decay rate."""

    frequency_fwhm_hz: float   # Delta_nu = c * Delta_lambda / lambda0^2
    field_decay_rad_s: float   # kappa = pi * Delta_nu (half width of the field)


def wavelength_offset_to_rate(dlambda: float, lambda0: float) -> RateConversion:
    """Convert a wavelength offset (FWHM convention) near lambda0 to rates."""
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    dnu = CONST.c * dlambda / lambda0**2
    return RateConversion(dnu, math.pi * dnu)


def rate_to_wavelength_offset(frequency_fwhm_hz: float, lambda0: float) -> float:
    """Exact inverse of wavelength_offset_to_rate on the frequency member."""
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    return frequency_fwhm_hz * lambda0**2 / CONST.c
