"""Optimal causal scheduler for arbitrary horizons by backward induction on a
discretized remaining-bits grid.

The cost-to-go obeys

    Jbar_1(beta) = (2^beta - 1) * nu_1                       (exact)
    Jbar_t(beta) = E_g[ min_{0<=b<=beta} (2^b - 1)/g + Jbar_{t-1}(beta - b) ]

with a convex inner objective, so each layer is a sweep of one-dimensional
convex minimizations.  The expectation over g uses fixed equiprobable-midpoint
quadrature nodes; Jbar_{t-1} is linearly interpolated between grid points.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, moments, parse_channel_spec
from .policies import Policy

INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


class OutOfTable(ValueError):
    """Query outside the solved (t, beta) range of a cost-to-go table."""


class GridTooCoarse(UserWarning):
    """Estimated interpolation error of a value row exceeds 1% of the value."""


@dataclass(frozen=True)
class DpConfig:
    """Discretization controls for the backward induction."""

    b_max: float
    grid_points: int = 1025
    quad_nodes: int = 256
    inner_tol: float = 1e-9

    def __post_init__(self):
        if not self.b_max > 0:
            raise ValueError("b_max must be > 0")
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be > 0")
        if self.quad_nodes < 1:
            raise ValueError("quad_nodes must be >= 1")


def golden_min(h, lo, hi, tol: float):
    """Elementwise golden-section minimization of h over [lo, hi].

    h must map an array of probe points to an array of objective values of
    the same shape.  Intended for convex objectives; endpoints are compared
    explicitly so boundary minima are exact.  Returns (argmin, min).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a = np.broadcast_arrays(lo, hi)[0].astype(float).copy()
    b = np.broadcast_arrays(lo, hi)[1].astype(float).copy()
    span = float(np.max(b - a, initial=0.0))
    n_iter = 0 if span <= tol else int(np.ceil(np.log(tol / span) / np.log(INVPHI))) + 1
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = h(c), h(d)
    for _ in range(n_iter):
        shrink_right = fc < fd
        b = np.where(shrink_right, d, b)
        a = np.where(shrink_right, a, c)
        c = b - INVPHI * (b - a)
        d = a + INVPHI * (b - a)
        fc, fd = h(c), h(d)
    x = 0.5 * (a + b)
    fx = h(x)
    for edge in (lo, hi):
        f_edge = h(np.broadcast_to(edge, x.shape))
        better = f_edge < fx
        x = np.where(better, edge, x)
        fx = np.where(better, f_edge, fx)
    return x, fx


@dataclass(frozen=True)
class CostToGoTable:
    """Solved expected-cost table value[t][i] ~ Jbar_t(grid[i]) for t = 1..t_max."""

    channel_spec: str
    config: DpConfig
    grid: np.ndarray
    value: np.ndarray  # shape (t_max + 1, grid_points); row 0 is all-zero filler

    def __post_init__(self):
        self.grid.setflags(write=False)
        self.value.setflags(write=False)

    @property
    def t_max(self) -> int:
        return self.value.shape[0] - 1

    @property
    def b_max(self) -> float:
        return float(self.grid[-1])

    def _check_state(self, t, beta):
        if not 1 <= t <= self.t_max:
            raise OutOfTable(f"t={t} outside solved horizon 1..{self.t_max}")
        if np.any(np.asarray(beta) > self.b_max * (1 + 1e-12)):
            raise OutOfTable(f"beta exceeds table b_max={self.b_max}")
        if np.any(np.asarray(beta) < 0):
            raise OutOfTable("beta must be >= 0")

    def cost(self, t: int, beta):
        """Interpolated expected cost Jbar_t(beta)."""
        self._check_state(t, beta)
        out = np.interp(np.asarray(beta, dtype=float), self.grid, self.value[t])
        return out if out.ndim else float(out)

    def decide(self, t: int, beta, g):
        """argmin_{0<=b<=beta} (2^b - 1)/g + Jbar_{t-1}(beta - b).

        Vectorized over beta and g; exhibits the three-branch structure
        (b = 0 for weak channels, interior for middling, b = beta for strong).
        """
        self._check_state(t, beta)
        beta = np.asarray(beta, dtype=float)
        g = np.asarray(g, dtype=float)
        if t == 1:
            out = beta + np.zeros_like(g)
            return out if out.ndim else float(out)
        prev = self.value[t - 1]

        def objective(b):
            return (np.exp2(b) - 1.0) / g + np.interp(beta - b, self.grid, prev)

        x, _ = golden_min(objective, np.zeros_like(beta * g), beta + np.zeros_like(g),
                          self.config.inner_tol)
        return x if x.ndim else float(x)

    def save(self, path) -> None:
        """Serialize as CSV: comment header with the solve parameters, then
        one (t, beta, value) row per entry."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self._serialize())

    def _serialize(self) -> str:
        cfg = self.config
        buf = io.StringIO()
        buf.write("# bitsched cost-to-go table v1\n")
        buf.write(f"# channel={self.channel_spec}\n")
        buf.write(
            f"# t_max={self.t_max} b_max={cfg.b_max!r} grid_points={cfg.grid_points}"
            f" quad_nodes={cfg.quad_nodes} inner_tol={cfg.inner_tol!r}\n"
        )
        buf.write("t,beta,value\n")
        for t in range(1, self.t_max + 1):
            for beta, val in zip(self.grid, self.value[t]):
                buf.write(f"{t},{float(beta)!r},{float(val)!r}\n")
        return buf.getvalue()


def load_table(path) -> CostToGoTable:
    """Inverse of CostToGoTable.save."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "# bitsched cost-to-go table v1":
        raise ValueError(f"{path}: not a bitsched cost-to-go table")
    channel_spec = lines[1].removeprefix("# channel=")
    meta = dict(item.split("=", 1) for item in lines[2].removeprefix("# ").split())
    config = DpConfig(
        b_max=float(meta["b_max"]),
        grid_points=int(meta["grid_points"]),
        quad_nodes=int(meta["quad_nodes"]),
        inner_tol=float(meta["inner_tol"]),
    )
    t_max = int(meta["t_max"])
    rows = np.array([[float(x) for x in line.split(",")] for line in lines[4:]])
    grid = rows[: config.grid_points, 1].copy()
    value = np.zeros((t_max + 1, config.grid_points))
    for t in range(1, t_max + 1):
        chunk = rows[(t - 1) * config.grid_points : t * config.grid_points]
        value[t] = chunk[:, 2]
    return CostToGoTable(channel_spec=channel_spec, config=config, grid=grid, value=value)


def solve(channel: ChannelModel, config: DpConfig, T: int) -> CostToGoTable:
    """Backward induction for horizons 1..T on the configured grid."""
    if T < 1:
        raise ValueError("T must be >= 1")
    nu1 = moments(channel, 1).nu1  # raises NonIntegrable for heavy 1/g tails
    grid = np.linspace(0.0, config.b_max, config.grid_points)
    nodes = channel.equiprobable_nodes(config.quad_nodes)[:, None]
    value = np.zeros((T + 1, config.grid_points))
    value[1] = (np.exp2(grid) - 1.0) * nu1
    lo = np.zeros((config.quad_nodes, config.grid_points))
    hi = np.broadcast_to(grid[None, :], lo.shape)
    for t in range(2, T + 1):
        prev = value[t - 1]

        def objective(b):
            return (np.exp2(b) - 1.0) / nodes + np.interp(grid[None, :] - b, grid, prev)

        _, fmin = golden_min(objective, lo, hi, config.inner_tol)
        value[t] = fmin.mean(axis=0)
    _warn_if_coarse(grid, value[T])
    return CostToGoTable(
        channel_spec=channel.spec, config=config, grid=grid, value=value
    )


def _warn_if_coarse(grid, row) -> None:
    """Linear-interpolation error of a convex row is bounded by the second
    difference over 8; warn when that estimate tops 1% of the value."""
    if len(row) < 3:
        return
    second = np.abs(np.diff(row, 2))
    rel = (second / 8.0) / np.maximum(np.abs(row[1:-1]), 1e-300)
    worst = float(rel.max())
    if worst > 0.01:
        warnings.warn(
            f"grid may be too coarse: estimated interpolation error "
            f"{worst:.1%} of the value at its worst point",
            GridTooCoarse,
            stacklevel=3,
        )


def dp_decide(table: CostToGoTable, state, g):
    """Functional form of CostToGoTable.decide for a SchedulerState."""
    return table.decide(state.t, state.beta, g)


class DpPolicy(Policy):
    """Causal policy that tracks a solved cost-to-go table."""

    kind = "dp"

    def __init__(self, table: CostToGoTable):
        self.table = table

    def decide(self, t, beta, g):
        return self.table.decide(t, beta, g)


def solve_for(channel_spec: str, b_max: float, T: int, **overrides) -> CostToGoTable:
    """Convenience: parse a channel spec and solve with default discretization."""
    channel = parse_channel_spec(channel_spec)
    return solve(channel, DpConfig(b_max=b_max, **overrides), T)
