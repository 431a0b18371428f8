"""Named test problems used by the CLI, the scripts and the acceptance suite."""
from __future__ import annotations

from .grid import GridSpec
from .monotone import NonlocalOp, PiFunction, ScalarGraph
from .scheme import EpsPolicy, SchemeConfig, SourceSpec

__all__ = ["SCENARIOS", "scenario", "scenario_names"]


def stationary(n: int = 64, N: int = 20) -> SchemeConfig:
    """No data at all: theta stays 1 and chi stays 0."""
    return SchemeConfig(
        T=0.02,
        N=N,
        grid=GridSpec((1.0,), (n,)),
        ell=0.0,
        eps_policy=EpsPolicy("fixed", eps=1e-4),
    )


def smooth_decoupled(n: int = 128, N: int = 100) -> SchemeConfig:
    """beta = A = 0 and ell = 0: chi solves a linear reaction-diffusion step."""
    return SchemeConfig(
        T=0.1,
        N=N,
        grid=GridSpec((1.0,), (n,)),
        ell=0.0,
        pi=PiFunction(0.5, 0.0),
        theta0="1 + 0.5*cos(pi*x)",
        chi0="cos(pi*x) + 0.5*cos(2*pi*x)",
        source=SourceSpec(kind="expr", expr="cos(pi*x)*(1 + t)"),
        eps_policy=EpsPolicy("fixed", eps=1e-4),
    )


def double_obstacle(n: int = 128, N: int = 100) -> SchemeConfig:
    """Box constraint plus the nonlocal sign; pi pushes chi against the upper obstacle."""
    return SchemeConfig(
        T=0.1,
        N=N,
        grid=GridSpec((1.0,), (n,)),
        ell=1.0,
        graph_beta=ScalarGraph.box(0.0, 1.0),
        op_A=NonlocalOp("sign_nonlocal"),
        pi=PiFunction(0.0, -1.5),
        theta0="0.3 + 0.2*cos(pi*x)",
        theta_star="0.5",
        chi0="0.8 + 0.15*cos(pi*x)",
        source=SourceSpec(kind="constant", shape="0"),
        eps_policy=EpsPolicy("ladder", eps0=1e-1, factor=0.5, eps_min=1e-5),
    )


def local_sign(n: int = 128, N: int = 50) -> SchemeConfig:
    """Pointwise sign operator and a box graph with a polynomial-in-time source."""
    return SchemeConfig(
        T=0.05,
        N=N,
        grid=GridSpec((1.0,), (n,)),
        ell=0.5,
        graph_beta=ScalarGraph.box(0.0, 1.0),
        op_A=NonlocalOp("sign_local"),
        pi=PiFunction(-1.0, 0.5),
        theta0="1 + 0.3*sin(2*pi*x)",
        theta_star="1",
        chi0="0.5 + 0.3*cos(pi*x)",
        source=SourceSpec(kind="poly", shape="cos(pi*x)", coeffs=(0.0, 2.0)),
        eps_policy=EpsPolicy("fixed", eps=1e-4),
    )


def power(n: int = 128, N: int = 50) -> SchemeConfig:
    """Cubic beta with a tabulated source."""
    return SchemeConfig(
        T=0.05,
        N=N,
        grid=GridSpec((1.0,), (n,)),
        ell=1.0,
        graph_beta=ScalarGraph.power(3),
        pi=PiFunction(-1.0, 0.0),
        theta0="2 + cos(pi*x)",
        chi0="0.8*cos(pi*x)",
        source=SourceSpec(kind="table", times=(0.0, 0.025, 0.05), table=("0", "cos(pi*x)", "2*cos(pi*x)")),
        eps_policy=EpsPolicy("fixed", eps=1e-4),
    )


def planar(n: int = 24, N: int = 20) -> SchemeConfig:
    """2D box grid with the double obstacle and the nonlocal sign."""
    return SchemeConfig(
        T=0.02,
        N=N,
        grid=GridSpec((1.0, 1.0), (n, n)),
        ell=1.0,
        graph_beta=ScalarGraph.box(0.0, 1.0),
        op_A=NonlocalOp("sign_nonlocal"),
        pi=PiFunction(0.0, -1.0),
        theta0="1 + 0.5*cos(pi*x)*cos(pi*y)",
        theta_star="1",
        chi0="0.5 + 0.4*cos(pi*x)*cos(pi*y)",
        eps_policy=EpsPolicy("fixed", eps=1e-4),
    )


SCENARIOS = {
    "stationary": stationary,
    "smooth_decoupled": smooth_decoupled,
    "double_obstacle": double_obstacle,
    "local_sign": local_sign,
    "power": power,
    "planar": planar,
}


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def scenario(name: str, **kw) -> SchemeConfig:
    try:
        return SCENARIOS[name](**kw)
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
