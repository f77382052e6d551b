"""Geometric size grids, quadrature, interpolation and complex line integrals.

Everything downstream works on grids that are uniform in ln x: the size
variable spans several decades and the Mellin transform is a Fourier
transform in ln x, so log-uniform sampling keeps both the solvers and the
transforms well conditioned.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LogGrid",
    "GridFunction",
    "ComplexLine",
    "make_log_grid",
    "integrate",
    "interp_log",
    "line_integral",
]


@dataclass(frozen=True)
class LogGrid:
    """Geometric grid x_i = x_min * r^i with trapezoid-in-log quadrature weights.

    The weights w_i = x_i * ln r (halved at the endpoints) approximate
    integrals over (0, inf) restricted to [x_min, x_max].
    """

    x_min: float
    x_max: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def log_step(self) -> float:
        """Uniform spacing in ln x."""
        return np.log(self.x_max / self.x_min) / (self.n - 1)

    @property
    def log_nodes(self) -> np.ndarray:
        return np.log(self.nodes)


@dataclass
class GridFunction:
    """Real-valued samples on a LogGrid."""

    grid: LogGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid size {self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFunction values must be finite")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,value\n")
        for x, v in zip(self.grid.nodes, self.values):
            buf.write(f"{float(x)!r},{float(v)!r}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "GridFunction":
        rows = [line for line in text.strip().splitlines() if line and not line.startswith("#")]
        if rows and rows[0].lower().startswith("x,"):
            rows = rows[1:]
        xs, vs = [], []
        for row in rows:
            sx, sv = row.split(",")[:2]
            xs.append(float(sx))
            vs.append(float(sv))
        x = np.asarray(xs)
        grid = make_log_grid(x[0], x[-1], len(x))
        if not np.allclose(grid.nodes, x, rtol=1e-10):
            raise ValueError("CSV nodes are not a geometric sequence")
        return GridFunction(grid, np.asarray(vs))


@dataclass
class ComplexLine:
    """Complex samples along the vertical line Re s = u, Im s on [-V, V]."""

    u: float
    v_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.v_nodes = np.asarray(self.v_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.v_nodes.ndim != 1 or self.v_nodes.size < 2:
            raise ValueError("v_nodes must be a 1-d array with at least two nodes")
        dv = np.diff(self.v_nodes)
        if not np.allclose(dv, dv[0], rtol=1e-12, atol=1e-14):
            raise ValueError("v_nodes must be uniformly spaced")
        if not np.allclose(self.v_nodes, -self.v_nodes[::-1], atol=1e-12 * max(1.0, abs(self.v_nodes[-1]))):
            raise ValueError("v_nodes must be symmetric about 0")
        if self.values.shape != self.v_nodes.shape:
            raise ValueError("values length must match v_nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("line values must be finite")

    @property
    def dv(self) -> float:
        return float(self.v_nodes[1] - self.v_nodes[0])

    @property
    def s_nodes(self) -> np.ndarray:
        return self.u + 1j * self.v_nodes


def make_log_grid(x_min: float, x_max: float, n: int) -> LogGrid:
    """Build a geometric grid with trapezoid-in-log weights."""
    if not (0.0 < x_min < x_max):
        raise ValueError("need 0 < x_min < x_max")
    if n < 2:
        raise ValueError("need at least two nodes")
    nodes = np.geomspace(x_min, x_max, n)
    lnr = np.log(x_max / x_min) / (n - 1)
    weights = nodes * lnr
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return LogGrid(x_min=float(x_min), x_max=float(x_max), n=int(n), nodes=nodes, weights=weights)


def integrate(f: GridFunction, moment_order: float = 0.0) -> float:
    """Moment integral sum_i w_i x_i^k f_i, approximating int x^k f dx."""
    if moment_order < 0:
        raise ValueError("moment order must be >= 0")
    g = f.grid
    if moment_order == 0.0:
        return float(np.sum(g.weights * f.values))
    return float(np.sum(g.weights * g.nodes ** moment_order * f.values))


def interp_log(f: GridFunction, x) -> np.ndarray | float:
    """Linear interpolation in (ln x, f); zero outside [x_min, x_max].

    Densities decay superalgebraically, so the zero extension avoids
    extrapolation artifacts.
    """
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if np.any(x_arr <= 0):
        raise ValueError("interp_log requires x > 0")
    out = np.interp(np.log(x_arr), f.grid.log_nodes, f.values, left=0.0, right=0.0)
    # np.interp clamps at the boundaries; enforce the zero extension strictly
    out = np.where((x_arr < f.grid.x_min) | (x_arr > f.grid.x_max), 0.0, out)
    return float(out[0]) if scalar else out


def line_integral(line: ComplexLine, integrand=None) -> complex:
    """Trapezoid approximation of the contour integral along Re s = u.

    The result includes the direction element i, so it approximates
    int_{Re s = u} h(s) ds for the upward-oriented line.
    """
    vals = line.values if integrand is None else np.asarray(integrand, dtype=complex)
    if vals.shape != line.v_nodes.shape:
        raise ValueError("integrand length must match the line nodes")
    return 1j * complex(np.trapezoid(vals, dx=line.dv))
