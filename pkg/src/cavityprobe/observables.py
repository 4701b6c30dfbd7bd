"""Probe-detuning scans of the cavity emission and feature extraction.

A scan sweeps the probe over the emitter resonance and records the cavity
emission observable per point. Features are pulled out by multi-start
Lorentzian least squares (peaks) or local-minimum refinement (dips); the
pump dependence of the peak and dip separations is summarized by linear
fits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .core import HilbertSpace, number_op
from .dynamics import scan_peak_heights
from .errors import NumericalError, TopologyError
from .floquet import continued_fraction_harmonics
from .lindblad import SystemParams, build_liouvillians

OBSERVABLE_KINDS = ("spectrum_height", "mean_photon_number")


@dataclass
class ScanResult:
    """Cavity emission versus probe detuning for fixed drive parameters."""

    probe_detunings: np.ndarray          # delta (probe - pump), rad/ns
    probe_offsets_from_qd: np.ndarray    # delta + delta_pump, rad/ns
    heights: np.ndarray
    params: SystemParams
    observable_kind: str

    def __post_init__(self):
        self.probe_detunings = np.asarray(self.probe_detunings, dtype=float)
        self.probe_offsets_from_qd = np.asarray(self.probe_offsets_from_qd, dtype=float)
        self.heights = np.asarray(self.heights, dtype=float)
        n = self.probe_detunings.size
        if self.probe_offsets_from_qd.size != n or self.heights.size != n:
            raise ValueError("scan arrays must have equal length")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("scan heights must be finite")
        if self.observable_kind not in OBSERVABLE_KINDS:
            raise ValueError(f"unknown observable kind {self.observable_kind!r}")
        top = float(np.max(self.heights)) if n else 0.0
        if n and float(np.min(self.heights)) < -1e-6 * max(top, 1e-300):
            raise NumericalError(
                f"scan heights dip below the numerical floor: {np.min(self.heights):.3e}"
            )
        np.clip(self.heights, 0.0, None, out=self.heights)

    @property
    def normalized(self) -> np.ndarray:
        top = float(np.max(self.heights))
        return self.heights / top if top > 0 else self.heights.copy()


def qd_linewidth(params: SystemParams) -> float:
    """Half width of the bare emitter line: gamma + gamma_d + n_bar * gamma_r."""
    return params.gamma + params.gamma_d + params.n_bar * params.gamma_r


def probe_grid(
    params: SystemParams,
    points_per_linewidth: int = 10,
    span_factor: float = 1.0,
) -> np.ndarray:
    """Symmetric probe grid about the emitter resonance.

    Covers +- (4 J1 + 5 (gamma + gamma_d)) * span_factor around
    probe - QD = 0 (i.e. delta = -delta_pump), spaced so the bare line
    carries at least points_per_linewidth samples. Symmetry of the grid
    about the resonance is built in, so mirror-symmetry checks compare
    like with like.
    """
    half = span_factor * (4.0 * params.J1 + 5.0 * (params.gamma + params.gamma_d))
    fwhm = 2.0 * qd_linewidth(params)
    step = fwhm / points_per_linewidth
    n_side = int(math.ceil(half / step))
    offsets = np.arange(-n_side, n_side + 1) * step
    return -params.delta_pump + offsets


def probe_scan(
    params: SystemParams,
    delta_grid: np.ndarray,
    kind: str = "spectrum_height",
    space: HilbertSpace | None = None,
    n_phase: int = 1,
    n_max_harmonics: int = 12,
    tau_max: float | None = None,
    dt: float | None = None,
) -> ScanResult:
    """Sweep the probe and record cavity emission.

    kind="spectrum_height" is the reference observable (spectrum value at
    the cavity frequency); kind="mean_photon_number" substitutes the far
    cheaper <a^dag a> of the period-averaged state, useful for wide
    surveys, and is flagged as such in the result.

    n_phase=1 (default) evaluates the correlation from the quasi-steady
    state at a fixed drive phase, which retains the terms oscillating at
    the pump-probe beat; these carry the dressed-state peak structure of
    the emission. n_phase >= 2 averages the correlation over the drive
    cycle instead, which cancels the beat-coherent part and leaves the
    saturation response of the emitter.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.size < 2:
        raise ValueError("delta grid must have at least 2 points")
    if space is None:
        space = HilbertSpace(3)
    if kind == "spectrum_height":
        heights = scan_peak_heights(
            params, delta_grid, space,
            n_phase=n_phase, n_max_harmonics=n_max_harmonics,
            tau_max=tau_max, dt=dt,
        )
    elif kind == "mean_photon_number":
        L0, Lp, Lm = build_liouvillians(params, space)
        n_op = number_op(space).entries
        heights = np.empty(delta_grid.size)
        for i, d in enumerate(delta_grid):
            h = continued_fraction_harmonics(L0, Lp, Lm, float(d), n_max_harmonics)
            heights[i] = h.mean_expectation(n_op).real
    else:
        raise ValueError(f"unknown observable kind {kind!r}")
    return ScanResult(
        probe_detunings=delta_grid,
        probe_offsets_from_qd=delta_grid + params.delta_pump,
        heights=heights,
        params=params,
        observable_kind=kind,
    )


@dataclass
class PeakFit:
    """One Lorentzian feature: h(x) = offset + amplitude * hwhm^2 / ((x-center)^2 + hwhm^2)."""

    center: float
    hwhm: float
    amplitude: float
    offset: float
    residual_rms: float

    def __post_init__(self):
        if self.hwhm <= 0:
            raise ValueError("fitted hwhm must be positive")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.offset + self.amplitude * self.hwhm**2 / (
            (x - self.center) ** 2 + self.hwhm**2
        )


def _lorentz_model(x: np.ndarray, theta: np.ndarray, n_peaks: int) -> np.ndarray:
    out = np.full_like(x, theta[-1])
    for i in range(n_peaks):
        amp, c, hw = theta[3 * i : 3 * i + 3]
        out = out + amp * hw**2 / ((x - c) ** 2 + hw**2)
    return out


def _local_maxima(y: np.ndarray) -> np.ndarray:
    idx = np.where((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    return idx[np.argsort(y[idx])[::-1]]  # strongest first


def _local_minima(y: np.ndarray) -> np.ndarray:
    idx = np.where((y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:]))[0] + 1
    return idx[np.argsort(y[idx])]  # deepest first


def _refine_extremum(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Sub-grid extremum position by a parabola through three points."""
    if i <= 0 or i >= x.size - 1:
        return float(x[i])
    denom = y[i + 1] - 2.0 * y[i] + y[i - 1]
    if denom == 0:
        return float(x[i])
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(x[i] + np.clip(shift, -1.0, 1.0) * (x[i + 1] - x[i]))


def _dominant_pair(x: np.ndarray, y: np.ndarray) -> tuple[int, int]:
    """Indices of the strongest local maxima on each side of the scan center."""
    maxima = _local_maxima(y)
    mid = 0.5 * (x[0] + x[-1])
    left = [i for i in maxima if x[i] < mid]
    right = [i for i in maxima if x[i] >= mid]
    if not left or not right:
        raise NumericalError("no resolved peak pair: need a local maximum on each side")
    return int(left[0]), int(right[0])


def fit_lorentzians(scan: ScanResult, n_peaks: int) -> list[PeakFit]:
    """Multi-start nonlinear least squares for 1 or 2 Lorentzian peaks.

    A single peak is fit over the whole scan. For a pair, the two
    strongest local maxima on opposite sides of the scan seed the fit,
    and the joint model (two Lorentzians plus a common offset) is fit on
    windows around the seeds so the non-Lorentzian structure between and
    beyond the peaks does not drag the centers. Fits are returned sorted
    by center; overlapping peaks (center distance below the larger hwhm)
    are reported with a warning.
    """
    if n_peaks not in (1, 2):
        raise ValueError("n_peaks must be 1 or 2")
    x = scan.probe_offsets_from_qd
    y = scan.heights
    if x.size < 3 * n_peaks + 2:
        raise ValueError("scan too short to fit")
    hw0 = qd_linewidth(scan.params)
    span = float(x[-1] - x[0])
    step = float(np.min(np.diff(x)))
    top = float(y.max())

    if n_peaks == 1:
        c0 = _refine_extremum(x, y, int(np.argmax(y)))
        starts = [[top, c0, w] for w in (0.5 * hw0, hw0, 2 * hw0)]
        xs, ys = x, y
    else:
        iL, iR = _dominant_pair(x, y)
        cL, cR = _refine_extremum(x, y, iL), _refine_extremum(x, y, iR)
        half = max(4 * step, min(hw0, 0.30 * abs(cR - cL)))
        mask = (np.abs(x - cL) <= half) | (np.abs(x - cR) <= half)
        xs, ys = x[mask], y[mask]
        starts = [
            [y[iL], cL, w, y[iR], cR, w] for w in (0.5 * hw0, hw0, 2 * hw0)
        ]

    def resid(theta):
        return _lorentz_model(xs, theta, n_peaks) - ys

    lo = ([0.0, x[0] - span, 0.25 * step] * n_peaks) + [-np.inf]
    hi = ([np.inf, x[-1] + span, span] * n_peaks) + [np.inf]
    best = None
    for s in starts:
        theta0 = np.array(list(s) + [float(ys.min())])
        try:
            sol = scipy.optimize.least_squares(
                resid, theta0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14, gtol=1e-14
            )
        except ValueError:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None or (not best.success and best.cost > 1e-3 * top**2 * xs.size):
        raise NumericalError(
            "lorentzian fit did not converge from any start"
            + (f"; best residual {math.sqrt(2 * best.cost / xs.size):.3e}" if best else "")
        )
    theta = best.x
    rms = math.sqrt(float(np.mean(resid(theta) ** 2)))
    fits = [
        PeakFit(
            center=float(theta[3 * i + 1]),
            hwhm=float(theta[3 * i + 2]),
            amplitude=float(theta[3 * i]),
            offset=float(theta[-1]),
            residual_rms=rms,
        )
        for i in range(n_peaks)
    ]
    fits.sort(key=lambda f: f.center)
    if n_peaks == 2:
        gap = abs(fits[1].center - fits[0].center)
        if gap < max(fits[0].hwhm, fits[1].hwhm):
            warnings.warn(
                f"fitted peaks overlap: separation {gap:.3g} below hwhm "
                f"{max(fits[0].hwhm, fits[1].hwhm):.3g}",
                stacklevel=2,
            )
    return fits


def dip_splitting(scan: ScanResult, min_prominence: float = 0.01) -> float:
    """Separation of the two dips flanking the central feature.

    Requires the high-pump topology: two dominant side peaks, a central
    local maximum between them, and a genuine local minimum on each side
    of that central feature (depth at least min_prominence of the trace
    range against both neighbors). The deepest qualifying minimum per
    side is refined to sub-grid accuracy by a parabola. Raises
    TopologyError when the structure is absent, which signals the pump
    is below the dip regime.
    """
    x = scan.probe_offsets_from_qd
    y = scan.heights
    rng = float(y.max() - y.min())
    if rng <= 0:
        raise TopologyError("flat scan: no features at all")
    iL, iR = _dominant_pair(x, y)
    maxima = _local_maxima(y)
    inner = [i for i in maxima if iL < i < iR]
    if not inner:
        raise TopologyError(
            "no central maximum between the side peaks: doublet regime"
        )
    central = max(inner, key=lambda i: y[i])  # the central feature
    minima = _local_minima(y)

    def pick(side_idx, lo_bound, hi_bound):
        cands = [
            j for j in minima
            if lo_bound < j < hi_bound
            and min(y[side_idx], y[central]) - y[j] >= min_prominence * rng
        ]
        if not cands:
            raise TopologyError(
                "no dip of sufficient depth between the central maximum and a "
                "side peak: pump below the dip regime"
            )
        return min(cands, key=lambda j: y[j])  # the deepest one

    j_lo = pick(iL, iL, central)
    j_hi = pick(iR, central, iR)
    x_lo = _refine_extremum(x, y, int(j_lo))
    x_hi = _refine_extremum(x, y, int(j_hi))
    return abs(x_hi - x_lo)


@dataclass
class SplittingSeries:
    """Fitted feature separation versus pump amplitude with its linear fit."""

    pump_amplitudes: np.ndarray
    splittings: np.ndarray
    fit_slope: float
    fit_intercept: float
    r_squared: float
    slope_stderr: float = float("nan")
    intercept_stderr: float = float("nan")

    def __post_init__(self):
        self.pump_amplitudes = np.asarray(self.pump_amplitudes, dtype=float)
        self.splittings = np.asarray(self.splittings, dtype=float)
        if self.pump_amplitudes.size != self.splittings.size:
            raise ValueError("pump amplitudes and splittings must have equal length")
        if not np.isfinite(self.fit_slope):
            raise ValueError("fit slope must be finite")


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = x.size
    if n > 2:
        s2 = ss_res / (n - 2)
        sxx = float(np.sum((x - x.mean()) ** 2))
        slope_se = math.sqrt(s2 / sxx)
        inter_se = math.sqrt(s2 * (1.0 / n + x.mean() ** 2 / sxx))
    else:
        slope_se = inter_se = float("nan")
    return float(slope), float(intercept), r2, slope_se, inter_se


def splitting_vs_pump(
    params_base: SystemParams,
    J1_list,
    feature: str = "peaks",
    kind: str = "spectrum_height",
    space: HilbertSpace | None = None,
    n_phase: int = 1,
    points_per_linewidth: int = 10,
    probe_ratio: float | None = None,
    tau_max: float | None = None,
    dt: float | None = None,
    scans: list[ScanResult] | None = None,
) -> SplittingSeries:
    """Feature separation versus pump amplitude with a least-squares line.

    feature="peaks" uses the two-Lorentzian fit, feature="dips" the
    refined local-minimum separation. With probe_ratio set, each scan
    runs at J2 = probe_ratio * J1; otherwise J2 stays at its base value.
    Pump values whose scan lacks the requested structure are excluded
    with a warning. Precomputed scans matching J1_list may be passed to
    avoid recomputation.
    """
    if feature not in ("peaks", "dips"):
        raise ValueError("feature must be 'peaks' or 'dips'")
    J1s = [float(j) for j in J1_list]
    used_j1, seps = [], []
    for i, J1 in enumerate(J1s):
        p = params_base.replace(J1=J1)
        if probe_ratio is not None:
            p = p.replace(J2=probe_ratio * J1)
        if scans is not None:
            scan = scans[i]
        else:
            grid = probe_grid(p, points_per_linewidth=points_per_linewidth)
            scan = probe_scan(
                p, grid, kind=kind, space=space, n_phase=n_phase,
                tau_max=tau_max, dt=dt,
            )
        try:
            if feature == "peaks":
                fits = fit_lorentzians(scan, 2)
                sep = abs(fits[1].center - fits[0].center)
            else:
                sep = dip_splitting(scan)
        except (TopologyError, NumericalError) as exc:
            warnings.warn(
                f"J1/2pi = {J1 / (2 * np.pi):.3g} GHz excluded from the "
                f"{feature} series: {exc}",
                stacklevel=2,
            )
            continue
        used_j1.append(J1)
        seps.append(sep)
    if len(used_j1) < 2:
        raise NumericalError(
            f"fewer than two pump values produced a resolvable {feature} separation"
        )
    xs = np.array(used_j1)
    ys = np.array(seps)
    slope, intercept, r2, slope_se, inter_se = _linear_fit(xs, ys)
    return SplittingSeries(xs, ys, slope, intercept, r2, slope_se, inter_se)


def anticrossing_scan(
    params_base: SystemParams,
    delta_pump_list,
    kind: str = "spectrum_height",
    space: HilbertSpace | None = None,
    n_phase: int = 1,
    points_per_linewidth: int = 10,
    tau_max: float | None = None,
    dt: float | None = None,
) -> list[ScanResult]:
    """One probe scan per pump detuning at fixed pump amplitude."""
    out = []
    for dp in delta_pump_list:
        p = params_base.replace(delta_pump=float(dp))
        grid = probe_grid(p, points_per_linewidth=points_per_linewidth)
        out.append(
            probe_scan(p, grid, kind=kind, space=space, n_phase=n_phase,
                       tau_max=tau_max, dt=dt)
        )
    return out
