"""Scalar maximal monotone graphs, nonlocal operators on L^2 and their Yosida machinery.

Every scalar routine is vectorised: pass a float and get a float back, pass an
array and get an array of the same shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import wrightomega

__all__ = [
    "ScalarGraph",
    "NonlocalOp",
    "PiFunction",
    "RootFindingError",
    "log_resolvent",
    "log_resolvent_derivative",
    "log_yosida",
    "log_moreau",
    "log_primitive",
    "graph_resolvent",
    "graph_yosida",
    "graph_moreau",
    "graph_primitive",
    "graph_contains",
    "initial_selection",
    "nonlocal_resolvent",
    "nonlocal_yosida",
    "nonlocal_yosida_jacobian",
    "nonlocal_potential",
    "growth_constant",
]

_MAXIT = 60
_TINY = np.finfo(float).tiny


class RootFindingError(RuntimeError):
    """A scalar root finder failed to converge (internal fault)."""


def _wrap(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


# ----------------------------------------------------------------------------
# logarithm graph
# ----------------------------------------------------------------------------

def _log_resolvent_u(eps: float, x: np.ndarray) -> np.ndarray:
    """Return u = ln y where y + eps*ln y = x.

    In the log variable f(u) = e^u + eps*u - x is convex and increasing, so
    Newton iterates started right of the root decrease monotonically onto it.
    Wright's omega gives a start that is already within rounding of the root.
    """
    x = np.asarray(x, dtype=float)
    z = x / eps - np.log(eps)
    w = wrightomega(z)
    # ln(omega) = z - omega; pick the representation without cancellation
    u = np.where(w > 1.0, np.log(eps) + np.log(np.maximum(w, _TINY)), x / eps - w)
    # upper bounds of the root: u <= x/eps always, u <= ln x when x >= 1
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(x >= 1.0, np.minimum(x / eps, np.log(np.where(x >= 1.0, x, 1.0))), x / eps)
    u = np.minimum(u, upper)
    for _ in range(_MAXIT):
        eu = np.exp(u)
        f = eu + eps * u - x
        noise = 4e-16 * (eu + eps * np.abs(u) + np.abs(x))
        if np.all(np.abs(f) <= noise):
            break
        u = np.minimum(u - f / (eu + eps), upper)
    else:
        f = np.exp(u) + eps * u - x
        if np.any(np.abs(f) > 1e-13 * np.maximum(1.0, np.abs(x))):
            raise RootFindingError("log resolvent did not converge")
    return u


def _log_resolvent_y(eps: float, x, u: np.ndarray) -> np.ndarray:
    # y = x - eps*u is the accurate branch once y dominates eps*|u|; exp(u) otherwise
    x = np.asarray(x, dtype=float)
    eu = np.exp(u)
    y = np.where(eu > eps * np.abs(u), x - eps * u, eu)
    return np.maximum(y, _TINY)


def log_resolvent(eps: float, x):
    """Resolvent (I + eps*ln)^-1: the unique y > 0 with y + eps*ln(y) = x."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    u = _log_resolvent_u(eps, x)
    return _wrap(x, _log_resolvent_y(eps, x, u))


def log_resolvent_derivative(eps: float, x):
    """d/dx of the log resolvent, y/(y + eps)."""
    y = np.maximum(np.exp(_log_resolvent_u(eps, x)), _TINY)
    return _wrap(x, y / (y + eps))


def log_yosida(eps: float, x):
    """Yosida approximation ln_eps(x) = (x - L_eps x)/eps and its derivative 1/(y + eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    u = _log_resolvent_u(eps, x)
    y = np.maximum(np.exp(u), _TINY)
    # ln_eps(x) lies in ln(L_eps x), i.e. it equals u exactly
    return _wrap(x, u), _wrap(x, 1.0 / (y + eps))


def log_primitive(x):
    """Lambda(x) = x ln x - x + 1 on [0, inf), +inf for x < 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)) - x + 1.0, np.inf)
    val = np.where(x == 0, 1.0, val)
    return _wrap(x, val)


def log_moreau(eps: float, x):
    """Moreau envelope Lambda_eps(x) = Lambda(y) + (x - y)^2/(2 eps), y = L_eps x."""
    u = _log_resolvent_u(eps, x)
    y = np.exp(u)
    # x - y = eps*u, so the quadratic term is eps*u^2/2
    val = y * u - y + 1.0 + 0.5 * eps * u * u
    return _wrap(x, np.maximum(val, 0.0))


# ----------------------------------------------------------------------------
# scalar graphs beta
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarGraph:
    """One of the four concrete maximal monotone graphs.

    ``kind`` is ``"log"``, ``"box"`` (subdifferential of the indicator of
    [lo, hi]), ``"power"`` (y -> y**p with odd p >= 3) or ``"zero"``.
    """

    kind: str
    lo: float = 0.0
    hi: float = 1.0
    p: int = 3

    def __post_init__(self):
        if self.kind not in ("log", "box", "power", "zero"):
            raise ValueError(f"unknown graph kind {self.kind!r}")
        if self.kind == "box" and not self.lo <= self.hi:
            raise ValueError("box graph needs lo <= hi")
        if self.kind == "power" and (self.p < 3 or self.p % 2 == 0):
            raise ValueError("power graph needs an odd exponent p >= 3")

    @classmethod
    def box(cls, lo: float = 0.0, hi: float = 1.0) -> "ScalarGraph":
        return cls("box", lo=float(lo), hi=float(hi))

    @classmethod
    def power(cls, p: int = 3) -> "ScalarGraph":
        return cls("power", p=int(p))

    @classmethod
    def log(cls) -> "ScalarGraph":
        return cls("log")

    @classmethod
    def zero(cls) -> "ScalarGraph":
        return cls("zero")

    @property
    def zero_in_graph_at_zero(self) -> bool:
        """Whether 0 belongs to beta(0), i.e. the primitive is minimal at 0."""
        if self.kind == "box":
            return self.lo <= 0.0 <= self.hi
        return self.kind != "log"

    def in_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return (x >= self.lo) & (x <= self.hi)
        if self.kind == "log":
            return x > 0
        return np.isfinite(x)

    def describe(self) -> str:
        if self.kind == "box":
            return f"box({self.lo!r}, {self.hi!r})"
        if self.kind == "power":
            return f"power({self.p})"
        return self.kind


def _power_resolvent(eps: float, p: int, x):
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    # g(y) = y + eps*y^p - a is convex on y >= 0; both bounds sit right of the root
    y = np.minimum(a, (a / eps) ** (1.0 / p))
    for _ in range(_MAXIT):
        g = y + eps * y**p - a
        if np.all(np.abs(g) <= 4e-16 * (y + eps * y**p + a)):
            break
        y = np.maximum(y - g / (1.0 + eps * p * y ** (p - 1)), 0.0)
    else:
        g = y + eps * y**p - a
        if np.any(np.abs(g) > 1e-13 * np.maximum(1.0, a)):
            raise RootFindingError("power resolvent did not converge")
    return np.sign(x) * y


def graph_resolvent(g: ScalarGraph, eps: float, x):
    """R_eps = (I + eps*beta)^-1 evaluated pointwise."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if g.kind == "log":
        return log_resolvent(eps, x)
    xa = np.asarray(x, dtype=float)
    if g.kind == "box":
        out = np.clip(xa, g.lo, g.hi)
    elif g.kind == "power":
        out = _power_resolvent(eps, g.p, xa)
    else:
        out = xa.copy()
    return _wrap(x, out)


def graph_yosida(g: ScalarGraph, eps: float, x):
    """Yosida map beta_eps(x) = (x - R_eps x)/eps and a generalized derivative.

    At the kinks of the box graph the derivative 0 is selected.
    """
    if g.kind == "log":
        return log_yosida(eps, x)
    xa = np.asarray(x, dtype=float)
    if g.kind == "box":
        r = np.clip(xa, g.lo, g.hi)
        val = (xa - r) / eps
        der = np.where((xa < g.lo) | (xa > g.hi), 1.0 / eps, 0.0)
    elif g.kind == "power":
        r = _power_resolvent(eps, g.p, xa)
        # beta_eps(x) belongs to beta(R_eps x), which is exact and cancellation free
        val = r**g.p
        q = g.p * np.abs(r) ** (g.p - 1)
        der = q / (1.0 + eps * q)
    else:
        val = np.zeros_like(xa)
        der = np.zeros_like(xa)
    return _wrap(x, val), _wrap(x, der)


def graph_primitive(g: ScalarGraph, x):
    """The convex potential whose subdifferential is the graph (beta tilde, or Lambda)."""
    if g.kind == "log":
        return log_primitive(x)
    xa = np.asarray(x, dtype=float)
    if g.kind == "box":
        out = np.where((xa >= g.lo) & (xa <= g.hi), 0.0, np.inf)
    elif g.kind == "power":
        out = xa ** (g.p + 1) / (g.p + 1)
    else:
        out = np.zeros_like(xa)
    return _wrap(x, out)


def graph_moreau(g: ScalarGraph, eps: float, x):
    """Moreau envelope min_y {primitive(y) + |x - y|^2/(2 eps)} via the resolvent."""
    if g.kind == "log":
        return log_moreau(eps, x)
    xa = np.asarray(x, dtype=float)
    if g.kind == "box":
        d = xa - np.clip(xa, g.lo, g.hi)
        out = d * d / (2.0 * eps)
    elif g.kind == "power":
        r = _power_resolvent(eps, g.p, xa)
        out = r ** (g.p + 1) / (g.p + 1) + (xa - r) ** 2 / (2.0 * eps)
    else:
        out = np.zeros_like(xa)
    return _wrap(x, out)


def graph_contains(g: ScalarGraph, x, r, atol: float = 0.0) -> np.ndarray:
    """Membership test r in beta(x), with tolerance for single-valued branches."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if g.kind == "box":
        inside = (x > g.lo) & (x < g.hi)
        at_lo = x == g.lo
        at_hi = x == g.hi
        ok = np.where(inside, np.abs(r) <= atol, False)
        ok = ok | (at_lo & (r <= atol) & ~at_hi) | (at_hi & (r >= -atol) & ~at_lo)
        ok = ok | (at_lo & at_hi)
        return ok
    if g.kind == "power":
        return np.abs(r - x**g.p) <= atol
    if g.kind == "log":
        with np.errstate(divide="ignore", invalid="ignore"):
            return (x > 0) & (np.abs(r - np.log(np.where(x > 0, x, 1.0))) <= atol)
    return np.abs(r) <= atol


def initial_selection(g: ScalarGraph, chi0: np.ndarray) -> np.ndarray:
    """A selection xi0 in beta(chi0): zero for the box graph, beta(chi0) otherwise."""
    chi0 = np.asarray(chi0, dtype=float)
    if g.kind == "box":
        if not np.all(g.in_domain(chi0)):
            raise ValueError("chi0 is outside the domain of beta")
        return np.zeros_like(chi0)
    if g.kind == "power":
        return chi0**g.p
    if g.kind == "log":
        return np.log(chi0)
    return np.zeros_like(chi0)


# ----------------------------------------------------------------------------
# Lipschitz perturbation pi
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PiFunction:
    """Affine pi(r) = p1*r + p0."""

    p1: float = 0.0
    p0: float = 0.0

    def __call__(self, r):
        return self.p1 * r + self.p0

    @property
    def lipschitz(self) -> float:
        return abs(self.p1)


# ----------------------------------------------------------------------------
# operators A on H
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlocalOp:
    """A maximal monotone operator on H = L^2 with closed-form resolvent.

    ``"sign_nonlocal"`` is the subdifferential of v -> ||v||_H,
    ``"sign_local"`` the subdifferential of v -> int |v|, ``"zero"`` is A = 0.
    """

    kind: str = "zero"

    def __post_init__(self):
        if self.kind not in ("zero", "sign_nonlocal", "sign_local"):
            raise ValueError(f"unknown operator kind {self.kind!r}")


def _norm_h(v: np.ndarray, dV: float) -> float:
    return float(np.sqrt(np.sum(v * v) * dV))


def growth_constant(op: NonlocalOp, volume: float = 1.0) -> float:
    """C_A with ||y||_H <= C_A (1 + ||x||_H) for y in A x.

    Sign on H has unit-ball values, so C_A = 1. The local sign has values
    bounded by 1 pointwise, hence by sqrt(|Omega|) in H.
    """
    if op.kind == "zero":
        return 0.0
    if op.kind == "sign_nonlocal":
        return 1.0
    return max(1.0, float(np.sqrt(volume)))


def nonlocal_resolvent(op: NonlocalOp, eps: float, v: np.ndarray, dV: float) -> np.ndarray:
    """J_eps = (I + eps*A)^-1 applied to the field ``v`` (cell volume ``dV``)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, dtype=float)
    if op.kind == "zero":
        return v.copy()
    if op.kind == "sign_nonlocal":
        n = _norm_h(v, dV)
        if n <= eps:
            return np.zeros_like(v)
        return (1.0 - eps / n) * v
    return np.sign(v) * np.maximum(np.abs(v) - eps, 0.0)


def nonlocal_yosida(op: NonlocalOp, eps: float, v: np.ndarray, dV: float) -> np.ndarray:
    """A_eps = (I - J_eps)/eps applied to ``v``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, dtype=float)
    if op.kind == "zero":
        return np.zeros_like(v)
    if op.kind == "sign_nonlocal":
        return v / max(_norm_h(v, dV), eps)
    return np.clip(v / eps, -1.0, 1.0)


def nonlocal_yosida_jacobian(op: NonlocalOp, eps: float, v: np.ndarray, dV: float):
    """Generalized derivative of A_eps at ``v``.

    Returns ``(diag, rank_one)`` where the derivative acts as
    ``d -> diag*d - c*w*(w, d)_H`` with ``rank_one = (c, w)`` or None.
    Kinks pick the smaller branch, as for the scalar graphs.
    """
    v = np.asarray(v, dtype=float)
    if op.kind == "zero":
        return np.zeros_like(v), None
    if op.kind == "sign_local":
        return np.where(np.abs(v) < eps, 1.0 / eps, 0.0), None
    n = _norm_h(v, dV)
    if n < eps:
        return np.full_like(v, 1.0 / eps), None
    w = v / n
    return np.full_like(v, 1.0 / n), (1.0 / n, w)


def nonlocal_potential(op: NonlocalOp, v: np.ndarray, dV: float) -> float:
    """Phi(v) with A = dPhi: ||v||_H, int |v|, or 0."""
    v = np.asarray(v, dtype=float)
    if op.kind == "zero":
        return 0.0
    if op.kind == "sign_nonlocal":
        return _norm_h(v, dV)
    return float(np.sum(np.abs(v)) * dV)
