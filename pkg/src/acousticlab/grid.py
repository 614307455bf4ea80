"""Staggered (MAC) discretization of a rectangle for the acoustic system.

Layout on an nx-by-ny cell grid over [0, lx] x [0, ly]:

    cell centers   ((i+1/2)hx, (j+1/2)hy)   i=0..nx-1, j=0..ny-1   pressure r
    x-faces        ((i+1)hx,   (j+1/2)hy)   i=0..nx-2, j=0..ny-1   velocity u_x
    y-faces        ((i+1/2)hx, (j+1)hy)     i=0..nx-1, j=0..ny-2   velocity u_y

Only interior faces carry unknowns: the impermeability condition u.n = 0 is
structural, there simply is no boundary-normal degree of freedom.  With the
uniform quadrature weight hx*hy on every cell and every face, the two-point
`grad` and the flux-balance `div` are exact negative adjoints of each other
(summation by parts), so the continuous energy identity survives
discretization exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid:
    """Rectangular staggered grid; immutable after construction."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs nx, ny >= 2, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError(f"side lengths must be positive, got lx={self.lx}, ly={self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def nxfaces(self) -> int:
        return (self.nx - 1) * self.ny

    @property
    def nyfaces(self) -> int:
        return self.nx * (self.ny - 1)

    @property
    def nfaces(self) -> int:
        return self.nxfaces + self.nyfaces

    @property
    def nstate(self) -> int:
        return self.nfaces + self.ncells

    # Coordinates of the sample points, as broadcastable (n, 1)/(1, n) pairs.
    def cell_xy(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx)[:, None] + 0.5) * self.hx
        y = (np.arange(self.ny)[None, :] + 0.5) * self.hy
        return x, y

    def xface_xy(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx - 1)[:, None] + 1.0) * self.hx
        y = (np.arange(self.ny)[None, :] + 0.5) * self.hy
        return x, y

    def yface_xy(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx)[:, None] + 0.5) * self.hx
        y = (np.arange(self.ny - 1)[None, :] + 1.0) * self.hy
        return x, y


def build_grid(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> Grid:
    """Validate and build a staggered grid."""
    return Grid(int(nx), int(ny), float(lx), float(ly))


@dataclass(frozen=True)
class CellField:
    """Scalar samples at cell centers, shape (nx, ny)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        if self.values.ndim != 2:
            raise ValueError("CellField values must be a 2-D (nx, ny) array")


@dataclass(frozen=True)
class FaceField:
    """Velocity samples on interior faces: x shape (nx-1, ny), y shape (nx, ny-1)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x))
        object.__setattr__(self, "y", np.asarray(self.y))
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise ValueError("FaceField components must be 2-D arrays")


@dataclass(frozen=True)
class State:
    """One snapshot Z = (u, r) of the discrete acoustic system."""

    u: FaceField
    r: CellField


def _check_cell(r: CellField, g: Grid) -> None:
    if r.values.shape != (g.nx, g.ny):
        raise ValueError(f"cell field shape {r.values.shape} does not match grid {g.nx}x{g.ny}")


def _check_face(u: FaceField, g: Grid) -> None:
    if u.x.shape != (g.nx - 1, g.ny) or u.y.shape != (g.nx, g.ny - 1):
        raise ValueError(
            f"face field shapes {u.x.shape}/{u.y.shape} do not match grid {g.nx}x{g.ny}"
        )


def zero_state(g: Grid, dtype=np.float64) -> State:
    u = FaceField(
        np.zeros((g.nx - 1, g.ny), dtype=dtype), np.zeros((g.nx, g.ny - 1), dtype=dtype)
    )
    return State(u, CellField(np.zeros((g.nx, g.ny), dtype=dtype)))


def grad(r: CellField, g: Grid) -> FaceField:
    """Two-point difference across each interior face; boundary-normal parts are zero by construction."""
    _check_cell(r, g)
    v = r.values
    gx = (v[1:, :] - v[:-1, :]) / g.hx
    gy = (v[:, 1:] - v[:, :-1]) / g.hy
    return FaceField(gx, gy)


def div(u: FaceField, g: Grid) -> CellField:
    """Per-cell net outflux divided by cell area, with zero boundary-normal flux."""
    _check_face(u, g)
    d = np.zeros((g.nx, g.ny), dtype=np.result_type(u.x, u.y))
    d[:-1, :] += u.x / g.hx
    d[1:, :] -= u.x / g.hx
    d[:, :-1] += u.y / g.hy
    d[:, 1:] -= u.y / g.hy
    return CellField(d)


def inner(a: State, b: State, g: Grid):
    """Discrete H inner product: every face and cell carries the weight hx*hy.

    Linear in the first argument, conjugated in the second.
    """
    _check_face(a.u, g)
    _check_face(b.u, g)
    _check_cell(a.r, g)
    _check_cell(b.r, g)
    s = (
        np.sum(a.u.x * np.conj(b.u.x))
        + np.sum(a.u.y * np.conj(b.u.y))
        + np.sum(a.r.values * np.conj(b.r.values))
    )
    return g.cell_area * s


def norm(a: State, g: Grid) -> float:
    return float(np.sqrt(inner(a, a, g).real))


def energy(z: State, g: Grid) -> float:
    """E = (1/2) ||(u, r)||_H^2; nonnegative, zero iff the state is zero."""
    return 0.5 * inner(z, z, g).real


# --- flat packing ------------------------------------------------------------
#
# Vector order: [u_x (C order), u_y (C order), r (C order)].  The maps below
# are the bijections every matrix-based module relies on.


def pack(z: State, g: Grid) -> np.ndarray:
    _check_face(z.u, g)
    _check_cell(z.r, g)
    return np.concatenate([z.u.x.ravel(), z.u.y.ravel(), z.r.values.ravel()])


def unpack(vec: np.ndarray, g: Grid) -> State:
    vec = np.asarray(vec)
    if vec.shape != (g.nstate,):
        raise ValueError(f"state vector length {vec.shape} does not match nstate={g.nstate}")
    nxf, nyf = g.nxfaces, g.nyfaces
    ux = vec[:nxf].reshape(g.nx - 1, g.ny)
    uy = vec[nxf : nxf + nyf].reshape(g.nx, g.ny - 1)
    r = vec[nxf + nyf :].reshape(g.nx, g.ny)
    return State(FaceField(ux, uy), CellField(r))


def pack_face(u: FaceField, g: Grid) -> np.ndarray:
    _check_face(u, g)
    return np.concatenate([u.x.ravel(), u.y.ravel()])


def unpack_face(vec: np.ndarray, g: Grid) -> FaceField:
    vec = np.asarray(vec)
    nxf = g.nxfaces
    return FaceField(vec[:nxf].reshape(g.nx - 1, g.ny), vec[nxf:].reshape(g.nx, g.ny - 1))


def gradient_matrix(g: Grid) -> sp.csr_matrix:
    """Sparse matrix of `grad` acting on flat cell vectors, returning flat face vectors.

    With the uniform weight, the flat matrix of `div` is exactly -G^T.
    """
    rows, cols, vals = [], [], []
    cell = lambda i, j: i * g.ny + j
    # x-faces: face (i, j) couples cells (i, j) and (i+1, j)
    for i in range(g.nx - 1):
        for j in range(g.ny):
            f = i * g.ny + j
            rows += [f, f]
            cols += [cell(i + 1, j), cell(i, j)]
            vals += [1.0 / g.hx, -1.0 / g.hx]
    # y-faces, offset by the x-face block
    off = g.nxfaces
    for i in range(g.nx):
        for j in range(g.ny - 1):
            f = off + i * (g.ny - 1) + j
            rows += [f, f]
            cols += [cell(i, j + 1), cell(i, j)]
            vals += [1.0 / g.hy, -1.0 / g.hy]
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(g.nfaces, g.ncells)
    )


def stream_velocity(psi_interior: np.ndarray, g: Grid) -> FaceField:
    """Exactly divergence-free velocity from a stream function on interior vertices.

    psi_interior has shape (nx-1, ny-1); it is extended by zero to the boundary
    vertices, so the resulting field also has zero normal trace structurally.
    div(stream_velocity(psi)) vanishes identically (telescoping differences).
    """
    psi_interior = np.asarray(psi_interior)
    if psi_interior.shape != (g.nx - 1, g.ny - 1):
        raise ValueError(
            f"stream function shape {psi_interior.shape} != interior vertices "
            f"({g.nx - 1}, {g.ny - 1})"
        )
    psiv = np.zeros((g.nx + 1, g.ny + 1), dtype=psi_interior.dtype)
    psiv[1:-1, 1:-1] = psi_interior
    ux = (psiv[1:-1, 1:] - psiv[1:-1, :-1]) / g.hy
    uy = -(psiv[1:, 1:-1] - psiv[:-1, 1:-1]) / g.hx
    return FaceField(ux, uy)
