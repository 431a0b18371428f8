"""Cell-centred finite volumes on a box with zero-flux faces.

Fields are plain numpy arrays shaped like ``grid.shape`` (row-major); the
grid object supplies the H inner product, norms, the Neumann Laplacian and a
Jacobi-preconditioned conjugate gradient solver.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

__all__ = [
    "GridSpec",
    "GridMismatchError",
    "CGConvergenceError",
    "cg_solve",
    "write_field",
    "read_field",
    "pack_field",
    "unpack_field",
    "SnapshotError",
    "FIELD_MAGIC",
    "FIELD_VERSION",
    "FIELD_HEADER",
]


class GridMismatchError(ValueError):
    pass


class CGConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class GridSpec:
    """Uniform box grid: ``extent[k]`` side lengths split into ``cells[k]`` cells."""

    extent: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        if len(self.extent) != len(self.cells) or not 1 <= len(self.cells) <= 3:
            raise ValueError("grid needs 1 to 3 axes with matching extent and cells")
        if any(n < 2 for n in self.cells):
            raise ValueError("every axis needs at least 2 cells")
        if any(not e > 0 for e in self.extent):
            raise ValueError("extents must be positive")

    @classmethod
    def uniform(cls, dim: int, n: int, length: float = 1.0) -> "GridSpec":
        return cls((length,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.cells))

    @property
    def dV(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinate arrays, broadcast to the full grid shape."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]
        return [np.ascontiguousarray(a) for a in np.meshgrid(*axes, indexing="ij")]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def check(self, *fields: np.ndarray) -> None:
        for u in fields:
            if np.shape(u) != self.shape:
                raise GridMismatchError(f"field of shape {np.shape(u)} on grid {self.shape}")

    # -- inner products and norms ------------------------------------------

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        self.check(u, v)
        return float(np.vdot(u, v)) * self.dV

    def norm_h(self, u: np.ndarray) -> float:
        self.check(u)
        return float(np.sqrt(np.vdot(u, u) * self.dV))

    def norm_l1(self, u: np.ndarray) -> float:
        self.check(u)
        return float(np.sum(np.abs(u)) * self.dV)

    def norm_linf(self, u: np.ndarray) -> float:
        self.check(u)
        return float(np.max(np.abs(u)))

    def integral(self, u: np.ndarray) -> float:
        self.check(u)
        return float(np.sum(u)) * self.dV

    def grad_sq(self, u: np.ndarray) -> float:
        """Sum over interior faces of (jump/h)^2 * dV, i.e. ||grad u||_H^2."""
        self.check(u)
        total = 0.0
        for axis, h in enumerate(self.spacing):
            d = np.diff(u, axis=axis) / h
            total += float(np.vdot(d, d))
        return total * self.dV

    def norm_v_sq(self, u: np.ndarray) -> float:
        return self.norm_h(u) ** 2 + self.grad_sq(u)

    # -- Laplacian ---------------------------------------------------------

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Second differences with mirrored ghost cells (zero normal flux)."""
        self.check(u)
        out = np.zeros(self.shape)
        for axis, h in enumerate(self.spacing):
            flux = np.diff(u, axis=axis) / (h * h)
            lead = [slice(None)] * self.dim
            trail = [slice(None)] * self.dim
            lead[axis] = slice(0, -1)
            trail[axis] = slice(1, None)
            out[tuple(lead)] += flux
            out[tuple(trail)] -= flux
        return out

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """The same stencil as a sparse matrix acting on raveled fields."""
        mats = []
        for n, h in zip(self.cells, self.spacing):
            main = np.full(n, -2.0)
            main[0] = main[-1] = -1.0
            off = np.ones(n - 1)
            mats.append(sp.diags([off, main, off], [-1, 0, 1]) / (h * h))
        total = None
        for axis in range(self.dim):
            factors = [sp.identity(n) for n in self.cells]
            factors[axis] = mats[axis]
            term = factors[0]
            for f in factors[1:]:
                term = sp.kron(term, f)
            total = term if total is None else total + term
        return sp.csr_matrix(total)

    @cached_property
    def laplacian_diagonal(self) -> np.ndarray:
        return self.laplacian_matrix.diagonal().reshape(self.shape)

    # -- V' surrogate ------------------------------------------------------

    def dual_norm_vprime(self, u: np.ndarray, cg_tol: float = 1e-12, maxit: int = 10000) -> float:
        """sqrt((u, w)_H) with (I - Delta_h) w = u; the norm dual to sqrt(||.||_H^2 + grad_sq)."""
        self.check(u)
        if not np.any(u):
            return 0.0
        L = self.laplacian_matrix
        w, _ = cg_solve(
            lambda x: x - (L @ x.ravel()).reshape(self.shape),
            u,
            tol=cg_tol,
            maxit=maxit,
            jacobi_diag=1.0 - self.laplacian_diagonal,
            grid=self,
        )
        return float(np.sqrt(max(self.inner(u, w), 0.0)))


def cg_solve(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float,
    maxit: int,
    jacobi_diag: np.ndarray,
    grid: GridSpec,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Solve apply(x) = b for SPD ``apply``; returns ``(x, iterations)``.

    Stops once ||apply(x) - b||_H <= tol * max(1, ||b||_H).
    """
    shape = grid.shape
    n = grid.size
    sqrt_dv = np.sqrt(grid.dV)
    bnorm = grid.norm_h(b)
    # H norm is sqrt(dV) times the Euclidean norm
    atol = tol * max(1.0, bnorm) / sqrt_dv
    A = LinearOperator((n, n), matvec=lambda x: apply(x.reshape(shape)).ravel(), dtype=float)
    dinv = 1.0 / np.ravel(jacobi_diag)
    M = LinearOperator((n, n), matvec=lambda x: dinv * x, dtype=float)
    count = [0]

    def _tick(_):
        count[0] += 1

    x, info = cg(
        A,
        np.ravel(b),
        x0=None if x0 is None else np.ravel(x0),
        rtol=0.0,
        atol=atol,
        maxiter=maxit,
        M=M,
        callback=_tick,
    )
    x = x.reshape(shape)
    res = grid.norm_h(apply(x) - b)
    if info != 0 or res > tol * max(1.0, bnorm) * (1 + 1e-6):
        raise CGConvergenceError("conjugate gradient did not converge", res, count[0])
    return x, count[0]


# ----------------------------------------------------------------------------
# binary field snapshots
# ----------------------------------------------------------------------------

FIELD_MAGIC = b"ENTF"
FIELD_VERSION = 1
# magic, version, dim, n0, n1, n2, float64 flag, reserved
FIELD_HEADER = struct.Struct("<4sIIIIIII")


class SnapshotError(ValueError):
    pass


def pack_field(u: np.ndarray) -> bytes:
    u = np.asarray(u, dtype=float)
    if not 1 <= u.ndim <= 3:
        raise ValueError("fields are 1D to 3D")
    dims = list(u.shape) + [1] * (3 - u.ndim)
    header = FIELD_HEADER.pack(FIELD_MAGIC, FIELD_VERSION, u.ndim, *dims, 1, 0)
    return header + np.ascontiguousarray(u, dtype="<f8").tobytes()


def unpack_field(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one snapshot starting at ``offset``; returns the field and the next offset."""
    end = offset + FIELD_HEADER.size
    if len(buf) < end:
        raise SnapshotError("truncated snapshot header")
    magic, version, dim, n0, n1, n2, flag, _ = FIELD_HEADER.unpack_from(buf, offset)
    if magic != FIELD_MAGIC:
        raise SnapshotError(f"bad snapshot magic {magic!r}")
    if version != FIELD_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if flag != 1 or not 1 <= dim <= 3:
        raise SnapshotError("corrupt snapshot header")
    shape = (n0, n1, n2)[:dim]
    count = int(np.prod(shape))
    stop = end + 8 * count
    if len(buf) < stop:
        raise SnapshotError("truncated snapshot data")
    values = np.frombuffer(buf, dtype="<f8", count=count, offset=end).astype(float).reshape(shape)
    return values, stop


def write_field(path, u: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_field(u))


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    u, stop = unpack_field(buf)
    if stop != len(buf):
        raise SnapshotError("trailing bytes after snapshot")
    return u
