"""Conservative Neumann wave propagation and observability Gramians.

The undamped acoustic system restricted to gradient velocities is the wave
equation psi_tt = div grad psi with structural Neumann conditions, evolved
here in first-order form (psi, psi_t) by the same implicit midpoint rule as
the acoustic stepper; the wave energy (1/2)(||grad psi||^2 + ||psi_t||^2) is
its conserved quadratic and zero means are preserved exactly.

The Gramian G_T of the damping-weighted observation

    <G_T w, w> = int_0^T int alpha |grad psi(t)|^2 dt

is assembled by propagating an orthonormal basis of the zero-mean data space
and accumulating trapezoidal quadrature; the observability constant C(T) is
the smallest Rayleigh quotient of G_T against the data norm
||(grad psi0, psi1)||^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .damping import DampingField, DampingProfile, sample_profile
from .grid import CellField, Grid, gradient_matrix

DATA_DENSE_CAP = 4_000

# Accuracy bound for the time step: resolve the fastest discrete mode by
# at least ~12 steps per period, so quadrature (not phase error) dominates.
DT_SAFETY = 0.5


@dataclass(frozen=True)
class WaveState:
    """Zero-mean (psi, psi_t) pair on cell centers."""

    psi: CellField
    v: CellField


def make_wave_state(psi: np.ndarray, v: np.ndarray, g: Grid) -> WaveState:
    """Build a WaveState, enforcing the zero-mean constraint."""
    psi = np.asarray(psi, dtype=float).reshape(g.nx, g.ny)
    v = np.asarray(v, dtype=float).reshape(g.nx, g.ny)
    for name, arr in (("psi", psi), ("psi_t", v)):
        nrm = np.linalg.norm(arr)  # integral of the field vs its L2 norm
        if nrm > 0 and abs(arr.sum()) * math.sqrt(g.cell_area) > 1e-12 * nrm:
            raise ValueError(f"{name} must have zero mean")
    return WaveState(CellField(psi), CellField(v))


def max_frequency_bound(g: Grid) -> float:
    """Upper bound on the largest discrete Neumann wave frequency."""
    return 2.0 * math.sqrt(1.0 / g.hx**2 + 1.0 / g.hy**2)


def wave_energy(w: WaveState, g: Grid) -> float:
    G = gradient_matrix(g)
    gp = G @ w.psi.values.ravel()
    return 0.5 * g.cell_area * float(gp @ gp + w.v.values.ravel() @ w.v.values.ravel())


class WaveStepper:
    """Implicit midpoint step for psi_tt = div grad psi; accepts column blocks."""

    def __init__(self, g: Grid, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.g = g
        self.dt = dt
        G = gradient_matrix(g)
        self._K = (G.T @ G).tocsr()  # -div grad, PSD
        shifted = (sp.identity(g.ncells, format="csr") + (dt**2 / 4.0) * self._K).tocsc()
        self._solve = spla.splu(shifted).solve

    def step_arrays(self, psi: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dt = self.dt
        rhs = psi - (dt**2 / 4.0) * (self._K @ psi) + dt * v
        psi_new = self._solve(rhs)
        v_new = v - (dt / 2.0) * (self._K @ (psi + psi_new))
        return psi_new, v_new


def wave_step(w: WaveState, dt: float, g: Grid) -> WaveState:
    st = WaveStepper(g, dt)
    p, v = st.step_arrays(w.psi.values.ravel(), w.v.values.ravel())
    return WaveState(CellField(p.reshape(g.nx, g.ny)), CellField(v.reshape(g.nx, g.ny)))


@dataclass
class WaveTrajectory:
    times: np.ndarray
    energies: np.ndarray
    max_energy_drift: float  # relative to E(0)
    max_mean_drift: float
    probe_psi: Optional[np.ndarray] = None
    probe_v: Optional[np.ndarray] = None


def wave_simulate(
    w0: WaveState,
    dt: float,
    nsteps: int,
    g: Grid,
    probe: Optional[CellField] = None,
) -> WaveTrajectory:
    """Propagate and record energy (and optionally a probe coefficient) per step."""
    st = WaveStepper(g, dt)
    psi = w0.psi.values.ravel().astype(float).copy()
    v = w0.v.values.ravel().astype(float).copy()
    G = gradient_matrix(g)
    area = g.cell_area

    def efun(p, vv):
        gp = G @ p
        return 0.5 * area * float(gp @ gp + vv @ vv)

    pr = probe.values.ravel() if probe is not None else None
    times = np.arange(nsteps + 1) * dt
    energies = np.empty(nsteps + 1)
    energies[0] = efun(psi, v)
    pp = np.empty(nsteps + 1) if pr is not None else None
    pv = np.empty(nsteps + 1) if pr is not None else None
    if pr is not None:
        pp[0] = area * float(pr @ psi)
        pv[0] = area * float(pr @ v)
    mean_drift = abs(psi.mean())
    for k in range(1, nsteps + 1):
        psi, v = st.step_arrays(psi, v)
        energies[k] = efun(psi, v)
        mean_drift = max(mean_drift, abs(psi.mean()))
        if pr is not None:
            pp[k] = area * float(pr @ psi)
            pv[k] = area * float(pr @ v)
    e0 = energies[0] if energies[0] > 0 else 1.0
    return WaveTrajectory(
        times=times,
        energies=energies,
        max_energy_drift=float(np.max(np.abs(energies - energies[0])) / e0),
        max_mean_drift=float(mean_drift),
        probe_psi=pp,
        probe_v=pv,
    )


@dataclass
class ObservabilityReport:
    T: float
    dt: float
    grid_shape: tuple[int, int]
    damping_kind: str
    constant: float
    data_dim: int
    minimizer_psi0: np.ndarray
    minimizer_psi1: np.ndarray
    minimizer_norms: dict


def _zero_mean_basis(m: int) -> np.ndarray:
    """Orthonormal basis of the zero-mean subspace of R^m (Householder columns)."""
    w = np.full(m, 1.0 / math.sqrt(m))
    e1 = np.zeros(m)
    e1[0] = 1.0
    vv = w - e1
    vv /= np.linalg.norm(vv)
    H = np.eye(m) - 2.0 * np.outer(vv, vv)
    return H[:, 1:]


def choose_wave_dt(T: float, g: Grid, dt: Optional[float] = None) -> float:
    """Pick (or validate) a quadrature step with T/dt an integer."""
    dt_max = DT_SAFETY / max_frequency_bound(g)
    if dt is None:
        nsteps = max(1, math.ceil(T / dt_max))
        return T / nsteps
    ratio = T / dt
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"T/dt must be an integer, got {ratio}")
    if dt > dt_max:
        raise ValueError(
            f"dt={dt} too coarse for accurate quadrature on this grid; "
            f"use dt <= {dt_max:.3e}"
        )
    return dt


def _gramians_shared(
    alphas: Sequence[DampingField], T: float, g: Grid, dt: float
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Gramians for several damping fields from one basis propagation.

    Returns ([G_T per alpha], data-norm matrix N, zero-mean basis Q0).
    """
    m = g.ncells
    d = 2 * (m - 1)
    if d > DATA_DENSE_CAP:
        raise ValueError(f"data-space dimension {d} exceeds the dense cap {DATA_DENSE_CAP}")
    nsteps = round(T / dt)
    Q0 = _zero_mean_basis(m)
    G = gradient_matrix(g)
    K = (G.T @ G).tocsr()
    area = g.cell_area

    Npsi = area * (Q0.T @ (K @ Q0))
    N = np.zeros((d, d))
    N[: m - 1, : m - 1] = Npsi
    N[m - 1 :, m - 1 :] = area * np.eye(m - 1)

    # restrict the observation to the faces where alpha is positive
    obs = []
    for a in alphas:
        af = np.concatenate([a.x.ravel(), a.y.ravel()])
        sel = np.flatnonzero(af > 0)
        obs.append((sel, af[sel] * area, sp.csr_matrix(G[sel])))

    st = WaveStepper(g, dt)
    Psi = np.zeros((m, d))
    V = np.zeros((m, d))
    Psi[:, : m - 1] = Q0
    V[:, m - 1 :] = Q0

    grams = [np.zeros((d, d)) for _ in alphas]

    def accumulate(weight: float) -> None:
        for gm, (sel, wts, S) in zip(grams, obs):
            if sel.size == 0:
                continue
            Y = S @ Psi
            gm += weight * (Y.T @ (wts[:, None] * Y))

    accumulate(dt / 2.0)
    for k in range(1, nsteps + 1):
        Psi, V = st.step_arrays(Psi, V)
        accumulate(dt if k < nsteps else dt / 2.0)
    grams = [0.5 * (gm + gm.T) for gm in grams]
    return grams, N, Q0


def _report_from_gramian(
    gm: np.ndarray, N: np.ndarray, Q0: np.ndarray, T: float, dt: float, g: Grid, kind: str
) -> ObservabilityReport:
    m = g.ncells
    vals, vecs = sla.eigh(gm, N)
    c = float(vals[0])
    wmin = vecs[:, 0]
    psi0 = Q0 @ wmin[: m - 1]
    psi1 = Q0 @ wmin[m - 1 :]
    G = gradient_matrix(g)
    gp = G @ psi0
    norms = {
        "grad_psi0_sq": g.cell_area * float(gp @ gp),
        "psi1_sq": g.cell_area * float(psi1 @ psi1),
    }
    return ObservabilityReport(
        T=float(T),
        dt=float(dt),
        grid_shape=(g.nx, g.ny),
        damping_kind=kind,
        constant=c,
        data_dim=2 * (m - 1),
        minimizer_psi0=psi0.reshape(g.nx, g.ny),
        minimizer_psi1=psi1.reshape(g.nx, g.ny),
        minimizer_norms=norms,
    )


def gramian_constant(
    alpha: DampingField, T: float, g: Grid, dt: Optional[float] = None
) -> ObservabilityReport:
    """Observability constant C(T) for one damping field."""
    if T <= 0:
        raise ValueError("horizon T must be positive")
    dt = choose_wave_dt(T, g, dt)
    grams, N, Q0 = _gramians_shared([alpha], T, g, dt)
    return _report_from_gramian(grams[0], N, Q0, T, dt, g, alpha.profile.kind)


def collar_sweep(
    widths: Sequence[float],
    level: float,
    T: float,
    g: Grid,
    dt: Optional[float] = None,
) -> list[tuple[float, ObservabilityReport]]:
    """C(T) as a function of collar width, from a single basis propagation.

    A width >= 1 (as a fraction of the short side) cannot keep its blend band
    inside the domain and degenerates to uniform damping at the same level.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    dt = choose_wave_dt(T, g, dt)
    fields = []
    for w in widths:
        if w >= 1.0:
            fields.append(sample_profile(DampingProfile("constant", level=level), g))
        else:
            fields.append(
                sample_profile(DampingProfile("boundary_collar", level=level, width=w), g)
            )
    grams, N, Q0 = _gramians_shared(fields, T, g, dt)
    out = []
    for w, gm, a in zip(widths, grams, fields):
        out.append((float(w), _report_from_gramian(gm, N, Q0, T, dt, g, a.profile.kind)))
    return out


def report_dict(rep: ObservabilityReport) -> dict:
    return {
        "T": rep.T,
        "dt": rep.dt,
        "grid": list(rep.grid_shape),
        "damping_kind": rep.damping_kind,
        "constant": rep.constant,
        "data_dim": rep.data_dim,
        "minimizer_norms": rep.minimizer_norms,
    }


def write_sweep_csv(rows: Sequence[tuple[float, float]], path, key: str, manifest_hash: str = "") -> None:
    """Two-column CSV (width or T vs constant)."""
    with open(path, "w") as fh:
        if manifest_hash:
            fh.write(f"# manifest: {manifest_hash}\n")
        fh.write(f"{key},constant\n")
        for k, c in rows:
            fh.write(f"{float(k)!r},{float(c)!r}\n")
