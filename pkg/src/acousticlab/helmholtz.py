"""Discrete Helmholtz decomposition u = grad(phi) + w, div w = 0.

The potential solves the singular Neumann problem  div(grad phi) = div u  on
cell centers.  The kernel (constants) is handled by deflation, never by
pinning an unknown: the direct path solves the equivalent bordered system

    [ K  1 ] [phi]   [-f]          K = -div grad  (symmetric PSD)
    [ 1' 0 ] [mu ] = [ 0]

whose zero row enforces the zero-mean gauge exactly, and the iterative path
runs conjugate gradients on K with right-hand side and iterates projected onto
the zero-mean subspace.  Because both `grad` and `div` carry the same uniform
quadrature weight, the resulting projector onto gradient fields is orthogonal
in the discrete H inner product.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import CellField, FaceField, Grid, gradient_matrix, pack_face, unpack_face

DIRECT_STATE_DIM_LIMIT = 20_000

MODES = ("auto", "direct_factorization", "conjugate_iteration")


class ConvergenceError(RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (attained relative residual {residual:.3e})")
        self.residual = residual


class HelmholtzSolver:
    """Neumann Poisson solver and gradient projector on one grid.

    Immutable after construction; concurrent `project` calls are safe because
    each call works on its own arrays.
    """

    def __init__(
        self,
        grid: Grid,
        mode: str = "auto",
        tol: float = 1e-12,
        maxiter: int = 20_000,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown solver mode {mode!r}; expected one of {MODES}")
        if tol <= 0:
            raise ValueError("tolerance must be positive")
        self.grid = grid
        self.tol = tol
        self.maxiter = maxiter
        if mode == "auto":
            mode = (
                "direct_factorization"
                if grid.nstate <= DIRECT_STATE_DIM_LIMIT
                else "conjugate_iteration"
            )
        self.mode = mode

        self._G = gradient_matrix(grid)
        self._K = (self._G.T @ self._G).tocsr()
        self._lu = None
        if self.mode == "direct_factorization":
            m = grid.ncells
            ones = np.ones(m)
            bordered = sp.bmat(
                [[self._K, ones[:, None]], [ones[None, :], None]], format="csc"
            )
            self._lu = spla.splu(bordered)
        self._projector_dense: np.ndarray | None = None

    # -- scalar solve ----------------------------------------------------

    def _solve_real(self, b: np.ndarray) -> np.ndarray:
        """Solve K phi = b on the zero-mean subspace; b is already deflated."""
        m = self.grid.ncells
        if self._lu is not None:
            rhs = np.zeros(m + 1)
            rhs[:m] = b
            return self._lu.solve(rhs)[:m]
        # conjugate gradients with the kernel projected out of every iterate
        x = np.zeros(m)
        r = b.copy()
        p = r.copy()
        rs = float(r @ r)
        bnorm = float(np.sqrt(rs))
        if bnorm == 0.0:
            return x
        for _ in range(self.maxiter):
            Kp = self._K @ p
            alpha = rs / float(p @ Kp)
            x += alpha * p
            r -= alpha * Kp
            r -= r.mean()
            rs_new = float(r @ r)
            if np.sqrt(rs_new) <= self.tol * bnorm:
                x -= x.mean()
                return x
            p = r + (rs_new / rs) * p
            rs = rs_new
        raise ConvergenceError(
            f"Poisson iteration did not converge in {self.maxiter} steps",
            float(np.sqrt(rs) / bnorm),
        )

    def _solve_vec(self, b: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(b):
            return self._solve_real(b.real) + 1j * self._solve_real(b.imag)
        return self._solve_real(b)

    def neumann_poisson(self, f: CellField) -> CellField:
        """Zero-mean phi with div(grad phi) = f.

        A nonzero mean in f is unresolvable (pure Neumann): it is projected
        out with a warning reporting the removed mass.
        """
        g = self.grid
        fvec = np.asarray(f.values).ravel()
        mass = complex(fvec.sum()) * g.cell_area
        fnorm = float(np.linalg.norm(fvec)) * np.sqrt(g.cell_area)
        if fnorm == 0.0:
            return CellField(np.zeros((g.nx, g.ny)))
        if abs(mass) > 1e-10 * fnorm:
            warnings.warn(
                f"right-hand side has nonzero mean; removed mass {mass:.3e}",
                stacklevel=2,
            )
        fvec = fvec - fvec.mean()
        phi = self._solve_vec(-fvec)  # K = -div grad, so div grad phi = f
        resid = float(np.linalg.norm(-(self._K @ phi) - fvec))
        rel = resid / max(float(np.linalg.norm(fvec)), 1e-300)
        if rel > 10 * max(self.tol, 1e-13):
            raise ConvergenceError("Poisson residual exceeds tolerance", rel)
        return CellField(phi.reshape(g.nx, g.ny))

    # -- vector projection -------------------------------------------------

    def project(self, u: FaceField) -> tuple[FaceField, FaceField]:
        """Split u into (gradient part, divergence-free part)."""
        g = self.grid
        uvec = pack_face(u, g)
        duvec = -(self._G.T @ uvec)  # div u as a flat cell vector
        phi = self._solve_vec(-duvec)
        gp = unpack_face(self._G @ phi, g)
        sol = FaceField(u.x - gp.x, u.y - gp.y)
        return gp, sol

    def projector_matrix(self, cap: int = 6_000) -> np.ndarray:
        """Dense matrix of the gradient projector on flat face vectors (cached).

        Only intended for grids small enough for dense spectral work.
        """
        if self._projector_dense is None:
            g = self.grid
            if g.nfaces > cap:
                raise ValueError(
                    f"dense projector needs nfaces <= {cap}, grid has {g.nfaces}"
                )
            if self._lu is None:
                raise ValueError("dense projector requires the direct solver mode")
            m = g.ncells
            rhs = np.zeros((m + 1, g.nfaces))
            rhs[:m] = self._G.T.toarray()
            phi = self._lu.solve(rhs)[:m]
            self._projector_dense = np.asarray(self._G @ phi)
        return self._projector_dense


def neumann_poisson(f: CellField, solver: HelmholtzSolver) -> CellField:
    return solver.neumann_poisson(f)


def project(u: FaceField, solver: HelmholtzSolver) -> tuple[FaceField, FaceField]:
    return solver.project(u)
