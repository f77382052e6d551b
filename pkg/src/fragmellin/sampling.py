"""Measured size samples and their conversion to empirical densities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridFunction, LogGrid, integrate

__all__ = ["SampleSet", "ingest_samples", "empirical_density"]


@dataclass
class SampleSet:
    """Observation times and the measured sizes per time."""

    times: np.ndarray
    sizes: list  # list of 1-d arrays, one per time

    def counts(self) -> list:
        return [len(s) for s in self.sizes]


def ingest_samples(path_or_text: str, from_text: bool = False) -> SampleSet:
    """Parse a CSV with columns t,x into a grouped, validated SampleSet."""
    if from_text:
        lines = path_or_text.splitlines()
    else:
        with open(path_or_text, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    groups: dict[float, list] = {}
    start = 0
    if lines and lines[0].strip().lower().replace(" ", "") in ("t,x",):
        start = 1
    for ln, row in enumerate(lines[start:], start=start + 1):
        row = row.strip()
        if not row or row.startswith("#"):
            continue
        parts = row.split(",")
        if len(parts) != 2:
            raise ValueError(f"line {ln}: expected 't,x', got {row!r}")
        try:
            t = float(parts[0])
            x = float(parts[1])
        except ValueError as exc:
            raise ValueError(f"line {ln}: {exc}") from exc
        if x <= 0:
            raise ValueError(f"line {ln}: nonpositive size {x!r}")
        groups.setdefault(t, []).append(x)
    times = np.asarray(sorted(groups), dtype=float)
    sizes = [np.asarray(groups[t], dtype=float) for t in times]
    return SampleSet(times=times, sizes=sizes)


def empirical_density(
    samples: np.ndarray,
    grid: LogGrid,
    bandwidth: float | None = None,
) -> tuple[GridFunction, dict]:
    """Log-domain Gaussian kernel density estimate scaled to the sample count.

    The KDE lives in w = ln x: p_w(w) = (1/(N h)) sum K((w - w_k)/h), and
    the number density in x is f(x) = N_scale * p_w(ln x)/x, rescaled so the
    grid quadrature of f equals the number of samples.  The applied scale is
    recorded in the returned diagnostics.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empirical_density needs at least one sample")
    if np.any(x <= 0):
        raise ValueError("sizes must be positive")
    n = x.size
    if n < 30:
        import warnings

        warnings.warn(f"only {n} samples; the density estimate will be rough")
    w = np.log(x)
    if bandwidth is None:
        sigma = float(np.std(w)) or 1.0
        bandwidth = 1.06 * sigma * n ** (-0.2)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    lw = grid.log_nodes
    # sum of Gaussians, evaluated in chunks to bound memory
    dens = np.zeros(grid.n)
    chunk = 4096
    for i in range(0, n, chunk):
        d = (lw[:, None] - w[None, i : i + chunk]) / bandwidth
        dens += np.exp(-0.5 * d**2).sum(axis=1)
    dens /= n * bandwidth * np.sqrt(2.0 * np.pi)
    f_vals = dens / grid.nodes  # per-size density
    f = GridFunction(grid, f_vals)
    m0 = integrate(f, 0.0)
    scale = n / m0 if m0 > 0 else 1.0
    f = GridFunction(grid, f_vals * scale)
    return f, {"bandwidth": bandwidth, "normalization_scale": scale, "count": n}
