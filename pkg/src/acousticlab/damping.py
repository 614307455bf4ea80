"""Damping coefficients with controllable support, and the two damping laws.

A profile describes the nonnegative coefficient field alpha and the region
omega on which it is bounded below by `level`.  Two laws turn alpha into an
operator on states:

    friction law   D(u, r) = (alpha * u, 0)            (diagonal in velocity)
    filtered law   D(u, r) = (P(alpha * P u), 0)       (P = gradient projector)

Both are self-adjoint and positive semidefinite in the discrete H inner
product; the filtered law annihilates divergence-free velocities entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import CellField, FaceField, Grid, State, _check_face

# Fixed fraction of the collar/bump width used for the smooth transition band.
BLEND_FRACTION = 0.5

KINDS = ("constant", "boundary_collar", "interior_bump", "vanishing_smooth", "zero")


def _smootherstep(t: np.ndarray) -> np.ndarray:
    # C^2 polynomial ramp: 0 at t<=0, 1 at t>=1, zero first and second
    # derivatives at both ends.
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class DampingProfile:
    """Declarative description of the damping coefficient.

    level   -- the lower bound alpha_- attained on the declared support omega
    width   -- collar width as a fraction of min(lx, ly)  (boundary_collar)
    center  -- bump center in absolute coordinates; domain center when None
    radius  -- bump radius, absolute length               (interior_bump)
    """

    kind: str
    level: float = 1.0
    width: float = 0.25
    center: Optional[tuple[float, float]] = None
    radius: float = 0.25

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown damping kind {self.kind!r}; expected one of {KINDS}")
        if self.level < 0:
            raise ValueError(f"damping level must be nonnegative, got {self.level}")


@dataclass(frozen=True)
class DampingField:
    """alpha sampled at the staggered locations; all samples nonnegative.

    `omega_x`/`omega_y` mask the faces of the declared support (alpha >= level
    there); `support_x`/`support_y` mask every face with alpha > 0.
    """

    profile: DampingProfile
    x: np.ndarray
    y: np.ndarray
    cells: np.ndarray
    omega_x: np.ndarray
    omega_y: np.ndarray
    support_x: np.ndarray
    support_y: np.ndarray

    @property
    def is_zero(self) -> bool:
        return not (self.support_x.any() or self.support_y.any())


def _profile_values(p: DampingProfile, g: Grid, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if p.kind == "zero":
        return np.zeros(np.broadcast_shapes(x.shape, y.shape))
    if p.kind == "constant":
        return np.full(np.broadcast_shapes(x.shape, y.shape), p.level)
    if p.kind == "boundary_collar":
        # Plateau at alpha = level within distance w*(1-rho) of the boundary,
        # smooth ramp to zero across the band of width w*rho.
        w = p.width * min(g.lx, g.ly)
        dist = np.minimum(np.minimum(x, g.lx - x), np.minimum(y, g.ly - y))
        band = w * BLEND_FRACTION
        return p.level * _smootherstep((w - dist) / band)
    if p.kind == "interior_bump":
        cx, cy = p.center if p.center is not None else (0.5 * g.lx, 0.5 * g.ly)
        d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        band = p.radius * BLEND_FRACTION
        return p.level * _smootherstep((p.radius - d) / band)
    if p.kind == "vanishing_smooth":
        # Smooth quadratic well: strictly positive except at the domain center,
        # so inf over the domain is 0 while alpha stays C-infinity.
        cx, cy = 0.5 * g.lx, 0.5 * g.ly
        dmax2 = cx**2 + cy**2
        return p.level * ((x - cx) ** 2 + (y - cy) ** 2) / dmax2
    raise AssertionError(p.kind)


def _validate_geometry(p: DampingProfile, g: Grid) -> None:
    if p.kind == "boundary_collar":
        if not 0.0 < p.width < 0.5:
            raise ValueError(
                f"collar width must lie in (0, 0.5) as a fraction of the short side, "
                f"got {p.width}"
            )
    if p.kind == "interior_bump":
        if p.radius <= 0:
            raise ValueError(f"bump radius must be positive, got {p.radius}")
        cx, cy = p.center if p.center is not None else (0.5 * g.lx, 0.5 * g.ly)
        if not (0 < cx - p.radius and cx + p.radius < g.lx and 0 < cy - p.radius and cy + p.radius < g.ly):
            raise ValueError("bump must fit strictly inside the domain")


def sample_profile(p: DampingProfile, g: Grid) -> DampingField:
    """Sample alpha pointwise at faces (where the laws act) and at cell centers."""
    _validate_geometry(p, g)
    ax = _profile_values(p, g, *g.xface_xy())
    ay = _profile_values(p, g, *g.yface_xy())
    ac = _profile_values(p, g, *g.cell_xy())
    # Declared support: alpha at (or numerically at) its plateau level.
    plateau = p.level * (1.0 - 1e-12)
    if p.kind in ("zero", "vanishing_smooth"):
        ox = np.zeros_like(ax, dtype=bool)
        oy = np.zeros_like(ay, dtype=bool)
    else:
        ox = ax >= plateau
        oy = ay >= plateau
    return DampingField(
        profile=p,
        x=ax,
        y=ay,
        cells=ac,
        omega_x=ox,
        omega_y=oy,
        support_x=ax > 0,
        support_y=ay > 0,
    )


def apply_brinkman(alpha: DampingField, z: State, g: Grid) -> State:
    """Friction law: multiply the velocity componentwise, zero on the pressure."""
    _check_face(z.u, g)
    if alpha.x.shape != z.u.x.shape or alpha.y.shape != z.u.y.shape:
        raise ValueError("damping field and state live on different grids")
    u = FaceField(alpha.x * z.u.x, alpha.y * z.u.y)
    return State(u, CellField(np.zeros_like(z.r.values)))


def apply_modified(alpha: DampingField, z: State, helm, g: Grid) -> State:
    """Filtered law: damp only the gradient part of the velocity.

    helm is a HelmholtzSolver on the same grid; solver failures propagate.
    """
    if alpha.x.shape != z.u.x.shape or alpha.y.shape != z.u.y.shape:
        raise ValueError("damping field and state live on different grids")
    pu, _ = helm.project(z.u)
    w = FaceField(alpha.x * pu.x, alpha.y * pu.y)
    pw, _ = helm.project(w)
    return State(pw, CellField(np.zeros_like(z.r.values)))


def damping_power(alpha: DampingField, z: State, law: str, helm, g: Grid) -> float:
    """<D z, z> for the given law: || sqrt(alpha) u ||^2 or || sqrt(alpha) P u ||^2."""
    if law == "none":
        return 0.0
    if law == "brinkman":
        ux, uy = z.u.x, z.u.y
    elif law == "modified":
        pu, _ = helm.project(z.u)
        ux, uy = pu.x, pu.y
    else:
        raise ValueError(f"unknown damping law {law!r}")
    s = np.sum(alpha.x * np.abs(ux) ** 2) + np.sum(alpha.y * np.abs(uy) ** 2)
    return float(g.cell_area * s)
