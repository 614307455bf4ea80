"""Decay-model fitting and classification of energy time series.

Caveat that shapes everything here: a finite-dimensional dissipative system
always ends in a pure exponential (its spectral gap), so a polynomial decay
law of the limiting system can only appear as a transient.  Fits therefore
always carry their window, and the polynomial window is cut off at the time
the instantaneous log-slope has settled onto its terminal (gap) value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

ENERGY_FLOOR_REL = 1e-28

R2_ACCEPT = 0.99
R2_MARGIN = 0.005
CONSERVED_DROP = 1e-6


@dataclass
class DecayFit:
    model: str  # "exponential" | "polynomial"
    rate: float  # amplitude rate L for exp(-Lt) amplitudes, exponent p for t^-p energy
    window: tuple[float, float]
    r2: float
    t_samples: np.ndarray
    residuals: np.ndarray  # in log-energy space
    zero_variance: bool = False

    @property
    def n_samples(self) -> int:
        return len(self.t_samples)


def _window_slice(t: np.ndarray, e: np.ndarray, window: Optional[tuple[float, float]]):
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise ValueError("series must be two equal-length 1-D arrays")
    if window is None:
        window = (float(t[0]), float(t[-1]))
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"empty fit window [{lo}, {hi}]")
    mask = (t >= lo) & (t <= hi)
    # the series ends at the first sample at or below the numerical floor:
    # beyond it the energies are round-off noise, not data
    floor = ENERGY_FLOOR_REL * (e[0] if e[0] > 0 else 1.0)
    dead = np.flatnonzero(e <= floor)
    if dead.size:
        live = np.zeros_like(mask)
        live[: dead[0]] = True
        mask_live = mask & live
    else:
        mask_live = mask
    ts, es = t[mask_live], e[mask_live]
    if len(ts) < 10:
        if np.any(e[mask] <= 0):
            raise ValueError("window contains nonpositive energies")
        raise ValueError(f"need at least 10 samples in the window, got {len(ts)}")
    return ts, es, (lo, hi)


def _line_fit(x: np.ndarray, y: np.ndarray):
    sstot = float(np.sum((y - y.mean()) ** 2))
    if (y.max() - y.min()) <= 1e-13 * max(1.0, abs(float(y.mean()))):
        return 0.0, float(y.mean()), 0.0, np.zeros_like(y), True
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    r2 = 1.0 - float(np.sum(resid**2)) / sstot
    return float(slope), float(icpt), r2, resid, False


def fit_exponential(
    t: np.ndarray, e: np.ndarray, window: Optional[tuple[float, float]] = None
) -> DecayFit:
    """Least squares on log E vs t; reports the amplitude rate L (E ~ e^{-2Lt})."""
    ts, es, win = _window_slice(t, e, window)
    slope, _, r2, resid, zv = _line_fit(ts, np.log(es))
    return DecayFit(
        model="exponential",
        rate=-slope / 2.0,
        window=win,
        r2=r2,
        t_samples=ts,
        residuals=resid,
        zero_variance=zv,
    )


def fit_polynomial(
    t: np.ndarray, e: np.ndarray, window: Optional[tuple[float, float]] = None
) -> DecayFit:
    """Least squares on log E vs log t; the window must start at t >= 1."""
    if window is None:
        t_arr = np.asarray(t, dtype=float)
        window = (1.0, float(t_arr[-1]))
    if window[0] < 1.0:
        raise ValueError(f"polynomial window must start at t >= 1, got {window[0]}")
    ts, es, win = _window_slice(t, e, window)
    slope, _, r2, resid, zv = _line_fit(np.log(ts), np.log(es))
    return DecayFit(
        model="polynomial",
        rate=-slope,
        window=win,
        r2=r2,
        t_samples=ts,
        residuals=resid,
        zero_variance=zv,
    )


def gap_time(t: np.ndarray, e: np.ndarray, settle: float = 0.05) -> float:
    """Earliest time after which d(log E)/dt stays within `settle` of its terminal value."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    pos = e > ENERGY_FLOOR_REL * max(e[0], 1e-300)
    t, e = t[pos], e[pos]
    if len(t) < 5:
        return float(t[-1]) if len(t) else 0.0
    logE = np.log(e)
    s = np.gradient(logE, t)
    tail = s[-max(5, len(s) // 10) :]
    terminal = float(np.median(tail))
    if abs(terminal) < 1e-14:
        return float(t[-1])
    ok = np.abs(s - terminal) <= settle * abs(terminal)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(t[0])
    k = bad[-1] + 1
    return float(t[k]) if k < len(t) else float(t[-1])


@dataclass
class DecayAnalysis:
    label: str
    exponential: Optional[DecayFit]
    polynomial: Optional[DecayFit]
    t_gap: float
    total_drop: float


def analyze(t: np.ndarray, e: np.ndarray) -> DecayAnalysis:
    """Fit both models on their default windows and classify the run."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if len(t) < 10:
        raise ValueError(f"need at least 10 samples to classify, got {len(t)}")
    drop = float((e[0] - e[-1]) / e[0]) if e[0] > 0 else 0.0
    if abs(drop) < CONSERVED_DROP:
        return DecayAnalysis("conserved", None, None, float(t[-1]), drop)

    horizon = float(t[-1])
    tg = gap_time(t, e)
    fits: dict[str, Optional[DecayFit]] = {"exponential": None, "polynomial": None}
    try:
        fits["exponential"] = fit_exponential(t, e, (0.1 * horizon, 0.9 * horizon))
    except ValueError:
        pass
    try:
        start = max(1.0, 0.05 * horizon)
        if tg > start:
            fits["polynomial"] = fit_polynomial(t, e, (start, tg))
    except ValueError:
        pass

    fe, fp = fits["exponential"], fits["polynomial"]
    usable = {
        name: f for name, f in fits.items() if f is not None and not f.zero_variance
    }
    if not usable:
        label = "undecided"
    elif len(usable) == 1:
        name, f = next(iter(usable.items()))
        label = name if f.r2 >= R2_ACCEPT else "undecided"
    else:
        r2e, r2p = fe.r2, fp.r2
        if r2e == r2p:
            # exact tie: prefer the model with one fewer transform of the axis
            label = "exponential" if r2e >= R2_ACCEPT else "undecided"
        else:
            win_name, win = ("exponential", fe) if r2e > r2p else ("polynomial", fp)
            lose_r2 = min(r2e, r2p)
            if win.r2 >= R2_ACCEPT and (win.r2 - lose_r2) >= R2_MARGIN:
                label = win_name
            else:
                label = "undecided"
    return DecayAnalysis(label, fe, fp, tg, drop)


def classify(t: np.ndarray, e: np.ndarray) -> str:
    """One of exponential / polynomial / undecided / conserved."""
    return analyze(t, e).label


def fit_dict(f: Optional[DecayFit]) -> Optional[dict]:
    if f is None:
        return None
    return {
        "model": f.model,
        "rate": f.rate,
        "window": list(f.window),
        "r2": f.r2,
        "n_samples": f.n_samples,
        "zero_variance": bool(f.zero_variance),
    }


def write_residuals_csv(f: DecayFit, path, manifest_hash: str = "") -> None:
    with open(path, "w") as fh:
        if manifest_hash:
            fh.write(f"# manifest: {manifest_hash}\n")
        fh.write("t,log_energy_residual\n")
        for t, r in zip(f.t_samples, f.residuals):
            fh.write(f"{float(t)!r},{float(r)!r}\n")
