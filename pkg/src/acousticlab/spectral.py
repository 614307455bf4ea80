"""Dense generator assembly, eigenstructure, and resolvent-norm sweeps.

Everything here works on the flat-vector matrix of the generator.  Because
every degree of freedom carries the same quadrature weight hx*hy, the discrete
H geometry is a scalar multiple of the Euclidean one: Euclidean-orthonormal
bases are H-orthogonal, matrix operator norms equal H operator norms, and the
undamped generator is skew-symmetric as a plain matrix.  That is what makes
dense linear algebra an honest oracle for the weighted problem.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from . import evolution
from .damping import DampingField
from .grid import Grid, State, pack, stream_velocity, unpack
from .helmholtz import HelmholtzSolver

DENSE_CAP = 6_000

KERNEL_TOL = 1e-8  # relative singular-value threshold separating the kernel
CLEAR_RE = 1e-10  # imaginary-axis clearance thresholds
CLEAR_IM = 1e-6


class AssemblyError(RuntimeError):
    """Assembled matrix disagrees with the matrix-free generator."""


@dataclass(frozen=True)
class GeneratorMatrix:
    matrix: np.ndarray
    grid: Grid
    law: str
    alpha_kind: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    kernel_dim: int
    kernel_basis: np.ndarray  # (n, k), H-orthonormal
    abscissa_h0: Optional[float]
    axis_violations: np.ndarray  # eigenvalues flagged on the imaginary axis
    kernel_gap: float  # smallest nonkernel sv / kernel threshold
    ill_separated: bool
    law: str
    grid_shape: tuple[int, int]


@dataclass(frozen=True)
class ResolventSample:
    beta: float
    sigma_min: float
    resolvent_norm: float
    used_fallback: bool = False


@dataclass
class ResolventExponentFit:
    exponent: float
    residual_rms: float
    n_peaks: int
    peak_betas: np.ndarray
    peak_norms: np.ndarray
    window: tuple[float, float]


def resolved_band_limit(g: Grid) -> float:
    """Largest frequency at which the grid still tracks continuum dispersion.

    A quarter of the grid Nyquist rate; above it, resolvent growth reflects
    the mesh rather than the limiting system.
    """
    return float(np.pi / (4.0 * max(g.hx, g.hy)))


def assemble(
    g: Grid,
    alpha: Optional[DampingField],
    law: str,
    helm: Optional[HelmholtzSolver] = None,
    dense_cap: int = DENSE_CAP,
) -> GeneratorMatrix:
    """Dense generator matrix, verified against the matrix-free action."""
    if g.nstate > dense_cap:
        raise ValueError(
            f"dense assembly needs state dimension <= {dense_cap}, grid has {g.nstate}"
        )
    if law == "modified" and helm is None:
        helm = HelmholtzSolver(g)
    M = evolution.generator_matrix(g, alpha, law, helm)
    Md = M.toarray() if not isinstance(M, np.ndarray) else M
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.standard_normal(g.nstate)
        ref = pack(evolution.apply_generator(unpack(v, g), alpha, law, helm, g), g)
        err = np.linalg.norm(Md @ v - ref)
        if err > 1e-12 * max(np.linalg.norm(ref), 1.0):
            raise AssemblyError(
                f"assembled action deviates from matrix-free action by {err:.3e}"
            )
    kind = alpha.profile.kind if alpha is not None else "zero"
    return GeneratorMatrix(Md, g, law, kind)


def kernel_basis(M: GeneratorMatrix, zero_tol: float = KERNEL_TOL) -> np.ndarray:
    """H-orthonormal basis of the null space, from a full SVD."""
    _, s, vt = np.linalg.svd(M.matrix)
    basis, _ = _split_kernel(M, s, vt, zero_tol)
    return basis


def _split_kernel(M: GeneratorMatrix, s, vt, zero_tol):
    n = M.n
    smax = s[0] if s.size else 0.0
    k = int(np.sum(s <= zero_tol * smax))
    if 0 < k < n and s[n - k - 1] <= 10 * zero_tol * smax:
        warnings.warn(
            f"ill-separated kernel: next singular value {s[n - k - 1]:.3e} "
            f"within 10x of the threshold {zero_tol * smax:.3e}",
            stacklevel=3,
        )
        ill = True
    else:
        ill = False
    basis = vt[n - k :].T / np.sqrt(M.grid.cell_area)
    gap = float(s[n - k - 1] / (zero_tol * smax)) if 0 < k < n else np.inf
    return basis, (k, gap, ill)


def eigen(M: GeneratorMatrix, zero_tol: float = KERNEL_TOL) -> SpectralReport:
    """Full spectrum plus kernel structure of a dense generator.

    Apparent imaginary-axis eigenvalues are certified against the resolvent
    before being flagged: sigma_min(i b - M) is a lower bound on the distance
    from i b to the true spectrum, so a sizable value withdraws a flag that
    only reflects eigensolver round-off on a non-normal cluster.
    """
    lam = sla.eigvals(M.matrix)
    _, s, vt = np.linalg.svd(M.matrix)
    basis, (k, gap, ill) = _split_kernel(M, s, vt, zero_tol)
    # sanity: kernel vectors must be annihilated relative to the operator norm
    if k:
        normM = s[0]
        worst = max(
            float(np.linalg.norm(M.matrix @ basis[:, j])) for j in range(k)
        ) * np.sqrt(M.grid.cell_area)
        if worst > 1e-8 * normM:
            warnings.warn(f"kernel residual {worst:.3e} exceeds 1e-8*||M||", stacklevel=2)
    maxmod = float(np.max(np.abs(lam))) if lam.size else 0.0
    nonkernel = lam[np.abs(lam) > zero_tol * maxmod]
    abscissa = float(np.max(nonkernel.real)) if nonkernel.size else None
    cand = lam[(np.abs(lam.real) <= CLEAR_RE) & (np.abs(lam.imag) >= CLEAR_IM)]
    confirmed = []
    for b in np.unique(np.round(np.abs(cand.imag), 9)):
        dist = _sigma_min_dense(1j * b * np.eye(M.n) - M.matrix)
        if dist <= 1e-8 * max(s[0], 1.0):
            confirmed.extend(cand[np.abs(np.abs(cand.imag) - b) < 1e-9])
    viol = np.array(confirmed, dtype=complex)
    return SpectralReport(
        eigenvalues=lam,
        kernel_dim=k,
        kernel_basis=basis,
        abscissa_h0=abscissa,
        axis_violations=viol,
        kernel_gap=gap,
        ill_separated=ill,
        law=M.law,
        grid_shape=(M.grid.nx, M.grid.ny),
    )


def divfree_kernel_basis(g: Grid) -> np.ndarray:
    """H-orthonormal basis of {divergence-free u} + {constant r}.

    This is the null space of the undamped and of the filtered-law generator,
    built structurally from stream functions (cheap at any dense-able size).
    """
    nsol = (g.nx - 1) * (g.ny - 1)
    cols = np.zeros((g.nstate, nsol + 1))
    z = np.zeros((g.nx - 1, g.ny - 1))
    idx = 0
    for i in range(g.nx - 1):
        for j in range(g.ny - 1):
            z[i, j] = 1.0
            u = stream_velocity(z, g)
            z[i, j] = 0.0
            cols[: g.nxfaces, idx] = u.x.ravel()
            cols[g.nxfaces : g.nfaces, idx] = u.y.ravel()
            idx += 1
    cols[g.nfaces :, nsol] = 1.0
    q, _ = np.linalg.qr(cols)
    return q / np.sqrt(g.cell_area)


def project_H0(z: State, basis: np.ndarray, g: Grid) -> State:
    """Remove the kernel component: Z - sum <Z, k_i>_H k_i."""
    zv = pack(z, g)
    coeff = g.cell_area * (basis.conj().T @ zv)
    return unpack(zv - basis @ coeff, g)


def deflate(M: GeneratorMatrix, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Restrict the generator to the orthogonal complement of its kernel.

    Returns (M0, C) with C an orthonormal basis of the complement; the
    restriction is exact because the generator maps the complement to itself.
    """
    n = M.n
    k = basis.shape[1]
    if k == 0:
        return M.matrix.copy(), np.eye(n)
    q, _ = sla.qr(basis, mode="full")
    C = q[:, k:]
    return C.T @ M.matrix @ C, C


def _sigma_min_dense(B: np.ndarray) -> float:
    return float(sla.svdvals(B)[-1])


def _sigma_min_iterative(B: np.ndarray, tol: float = 1e-10, maxiter: int = 200):
    """Smallest singular value by inverse power iteration on B^H B.

    Returns (sigma, converged).  One LU of B, two triangular solves per sweep.
    """
    lu, piv = sla.lu_factor(B)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(B.shape[0]) + 1j * rng.standard_normal(B.shape[0])
    x /= np.linalg.norm(x)
    sigma = np.inf
    for _ in range(maxiter):
        y = sla.lu_solve((lu, piv), x, trans=2)
        zv = sla.lu_solve((lu, piv), y, trans=0)
        lam = np.vdot(x, zv).real  # Rayleigh quotient for (B^H B)^-1
        nz = np.linalg.norm(zv)
        if nz == 0.0 or lam <= 0.0:
            return 0.0, False
        x = zv / nz
        new_sigma = 1.0 / np.sqrt(lam)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return new_sigma, True
        sigma = new_sigma
    return sigma, False


def resolvent_norm(M0: np.ndarray, beta: float) -> ResolventSample:
    """|| (i beta - M0)^{-1} || via the smallest singular value on H0.

    M0 must already be deflated; iteration stagnation falls back to a full
    singular value decomposition and flags the sample.
    """
    B = 1j * beta * np.eye(M0.shape[0]) - M0
    try:
        sigma, ok = _sigma_min_iterative(B)
    except sla.LinAlgError:
        sigma, ok = 0.0, False
    used_fallback = False
    if not ok:
        sigma = _sigma_min_dense(B)
        used_fallback = True
    rn = np.inf if sigma == 0.0 else 1.0 / sigma
    return ResolventSample(float(beta), float(sigma), float(rn), used_fallback)


def resolvent_sweep(
    M0: np.ndarray,
    betas: Sequence[float],
    refine_peaks: bool = False,
    threads: Optional[int] = None,
) -> list[ResolventSample]:
    """Sample the resolvent norm over a frequency list (sorted output).

    With refine_peaks, every interior local maximum of the coarse sweep is
    polished by a bounded scalar minimization of sigma_min, so the envelope
    tracks true peak heights instead of grid-sampling luck.
    """
    betas = sorted(float(b) for b in betas)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda b: resolvent_norm(M0, b), betas))
    else:
        samples = [resolvent_norm(M0, b) for b in betas]
    if refine_peaks:
        extra = []
        rn = [s.resolvent_norm for s in samples]
        for i in range(1, len(samples) - 1):
            if rn[i] > rn[i - 1] and rn[i] >= rn[i + 1]:
                lo, hi = betas[i - 1], betas[i + 1]
                res = minimize_scalar(
                    lambda b: resolvent_norm(M0, b).sigma_min,
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-4 * (hi - lo)},
                )
                extra.append(resolvent_norm(M0, float(res.x)))
        samples = sorted(samples + extra, key=lambda s: s.beta)
    return samples


def fit_resolvent_exponent(
    samples: Sequence[ResolventSample],
    window: tuple[float, float],
    band_limit: Optional[float] = None,
) -> ResolventExponentFit:
    """Least-squares slope of log(resolvent norm) vs log(beta) over sweep peaks.

    The envelope (local maxima) is fitted rather than the raw sweep: the
    resolvent oscillates between eigenfrequencies and only its upper envelope
    carries the growth exponent.  A sweep with fewer than two interior maxima
    does not oscillate, so it is its own envelope and is fitted raw.
    """
    lo, hi = window
    if band_limit is not None and hi > band_limit * (1 + 1e-12):
        raise ValueError(
            f"window [{lo}, {hi}] exceeds the resolved band (beta <= {band_limit:.4g})"
        )
    inside = [s for s in samples if lo <= s.beta <= hi]
    if len(inside) < 8:
        raise ValueError(f"need at least 8 samples in the window, got {len(inside)}")
    rn = np.array([s.resolvent_norm for s in inside])
    bet = np.array([s.beta for s in inside])
    peaks = [
        i
        for i in range(1, len(inside) - 1)
        if rn[i] > rn[i - 1] and rn[i] >= rn[i + 1]
    ]
    if len(peaks) < 2:
        peaks = list(range(len(inside)))
    lb, ln = np.log(bet[peaks]), np.log(rn[peaks])
    slope, intercept = np.polyfit(lb, ln, 1)
    resid = ln - (slope * lb + intercept)
    return ResolventExponentFit(
        exponent=float(slope),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n_peaks=len(peaks),
        peak_betas=bet[peaks],
        peak_norms=rn[peaks],
        window=(float(lo), float(hi)),
    )


# -- exports -------------------------------------------------------------


def report_dict(rep: SpectralReport) -> dict:
    return {
        "grid": list(rep.grid_shape),
        "law": rep.law,
        "eigenvalues": [[float(l.real), float(l.imag)] for l in rep.eigenvalues],
        "kernel_dim": int(rep.kernel_dim),
        "abscissa_h0": rep.abscissa_h0,
        "axis_violations": [[float(l.real), float(l.imag)] for l in rep.axis_violations],
        "kernel_gap": rep.kernel_gap if np.isfinite(rep.kernel_gap) else None,
        "ill_separated": bool(rep.ill_separated),
    }


def write_sweep_csv(samples: Sequence[ResolventSample], path, manifest_hash: str = "") -> None:
    with open(path, "w") as fh:
        if manifest_hash:
            fh.write(f"# manifest: {manifest_hash}\n")
        fh.write("beta,sigma_min,resolvent_norm,used_fallback\n")
        for s in samples:
            fh.write(
                f"{float(s.beta)!r},{float(s.sigma_min)!r},"
                f"{float(s.resolvent_norm)!r},{int(s.used_fallback)}\n"
            )
