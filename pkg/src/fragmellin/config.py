"""Run configuration: INI-style `key = value` sections, echoed into run.json."""
from __future__ import annotations

import configparser
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .grids import LogGrid, make_log_grid
from .kernels import KernelSpec, RateSpec, beta_kernel, kernel_from_json, mitosis, uniform_binary

__all__ = ["RunConfig", "parse_config", "load_kernel", "derive_rng"]


@dataclass
class RunConfig:
    # grid
    x_min: float = 1e-4
    x_max: float = 60.0
    n: int = 512
    # kernel: either a named kind or a path to a JSON kernel file
    kernel_kind: str = "uniform"
    kernel_path: str | None = None
    kernel_params: dict = field(default_factory=dict)
    # rate
    alpha: float = 1.0
    gamma: float = 1.0
    # solver
    dt: float | None = None
    t_end: float = 5.0
    output_times: tuple = ()
    adaptive_safety: float = 0.05
    # spectral
    s0: float | None = None
    V: float | None = None
    dv: float | None = None
    V_eval: float = 40.0
    dv_eval: float = 0.05
    taper_kind: str = "tukey"
    taper_frac: float = 0.25
    rho: float = 1.0
    # estimation
    s_window_lo: float = 3.0
    s_window_hi: float = 8.0
    probe_R: float = 1.0
    V_recover: float = 25.0
    recon_mode: str = "direct"
    noise: float = 0.0
    # misc
    seed: int = 0
    output_dir: str = "runs"
    emit_plot_data: bool = False

    def grid(self) -> LogGrid:
        return make_log_grid(self.x_min, self.x_max, self.n)

    def rate(self) -> RateSpec:
        return RateSpec(alpha=self.alpha, gamma=self.gamma)

    def kernel(self) -> KernelSpec:
        return load_kernel(self.kernel_kind, self.kernel_path, self.kernel_params)

    def echo_dict(self) -> dict:
        d = asdict(self)
        d["output_times"] = list(self.output_times)
        return d


def load_kernel(kind: str, path: str | None = None, params: dict | None = None) -> KernelSpec:
    params = params or {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            return kernel_from_json(fh.read())
    if kind == "uniform":
        return uniform_binary(mass=float(params.get("mass", 2.0)))
    if kind == "beta":
        return beta_kernel(p=float(params.get("p", 2.0)), q=float(params.get("q", 2.0)))
    if kind == "mitosis":
        return mitosis()
    raise ValueError(f"unknown kernel kind {kind!r} (and no kernel file given)")


_SECTION_FIELDS = {
    "grid": {"x_min": float, "x_max": float, "n": int},
    "kernel": {"kind": str, "path": str, "mass": float, "p": float, "q": float},
    "rate": {"alpha": float, "gamma": float},
    "solver": {"dt": float, "t_end": float, "output_times": str, "adaptive_safety": float},
    "spectral": {
        "s0": float,
        "V": float,
        "dv": float,
        "V_eval": float,
        "dv_eval": float,
        "taper": str,
        "taper_frac": float,
        "rho": float,
    },
    "estimation": {
        "s_window": str,
        "probe_R": float,
        "V_recover": float,
        "mode": str,
        "noise": float,
    },
    "run": {"seed": int, "output_dir": str},
}


def parse_config(path_or_text: str, from_text: bool = False) -> RunConfig:
    """Parse the line-based `key = value` config with [section] headers."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if from_text:
        cp.read_string(path_or_text)
    else:
        if not os.path.exists(path_or_text):
            raise FileNotFoundError(path_or_text)
        cp.read(path_or_text)
    cfg = RunConfig()
    for section in cp.sections():
        if section not in _SECTION_FIELDS:
            raise ValueError(f"unknown config section [{section}]")
        known = _SECTION_FIELDS[section]
        for key, raw in cp.items(section):
            if key not in known:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            cast = known[key]
            if section == "grid":
                setattr(cfg, key, cast(raw))
            elif section == "kernel":
                if key == "kind":
                    cfg.kernel_kind = raw.strip()
                elif key == "path":
                    cfg.kernel_path = raw.strip()
                else:
                    cfg.kernel_params[key] = float(raw)
            elif section == "rate":
                setattr(cfg, key, cast(raw))
            elif section == "solver":
                if key == "output_times":
                    cfg.output_times = tuple(float(p) for p in raw.replace(",", " ").split())
                else:
                    setattr(cfg, key, cast(raw))
            elif section == "spectral":
                if key == "taper":
                    cfg.taper_kind = raw.strip()
                else:
                    setattr(cfg, key, cast(raw))
            elif section == "estimation":
                if key == "s_window":
                    lo, hi = (float(p) for p in raw.replace(",", " ").split())
                    cfg.s_window_lo, cfg.s_window_hi = lo, hi
                elif key == "mode":
                    cfg.recon_mode = raw.strip()
                elif key == "probe_R":
                    cfg.probe_R = float(raw)
                elif key == "V_recover":
                    cfg.V_recover = float(raw)
                elif key == "noise":
                    cfg.noise = float(raw)
            elif section == "run":
                setattr(cfg, key, cast(raw))
    if cfg.kernel_path and not os.path.exists(cfg.kernel_path):
        raise FileNotFoundError(f"kernel file {cfg.kernel_path!r} does not exist")
    return cfg


def derive_rng(seed: int, stream: str) -> np.random.Generator:
    """Named-stream RNG derivation: one 64-bit seed, one stream per stage."""
    stream_key = int.from_bytes(stream.encode("utf-8")[:8].ljust(8, b"\0"), "little")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream_key,)))


def write_run_json(directory: str, cfg: RunConfig, extra: dict | None = None) -> str:
    import fragmellin

    os.makedirs(directory, exist_ok=True)
    payload = {
        "config": cfg.echo_dict(),
        "versions": {
            "fragmellin": fragmellin.__version__,
            "numpy": np.__version__,
        },
        "threads_cap": os.environ.get("FRAGMELLIN_THREADS"),
    }
    if extra:
        payload.update(extra)
    path = os.path.join(directory, "run.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return path
