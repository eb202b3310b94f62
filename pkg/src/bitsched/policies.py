"""Closed-form scheduling policies and the non-causal inverse-waterfilling
oracle.

Every causal policy is a pure decision function mapping (remaining slots t,
remaining bits beta, observed gain g) to a bit allocation b in [0, beta];
t counts down to the deadline at t = 1, where every policy must flush the
queue (b = beta).  All of the closed-form rules share the single threshold
form

    b = clamp(beta/t + ((t - 1)/t) * log2(g / eta_t), 0, beta)

and differ only in the channel threshold eta_t.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import MomentTable


@dataclass(frozen=True)
class SchedulerState:
    """Decision-point state: t slots remain (t >= 1) and beta bits are queued."""

    t: int
    beta: float

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


def energy_cost(b, g):
    """Energy to send b bits through a slot with gain g: (2^b - 1)/g."""
    return (np.exp2(b) - 1.0) / g


def threshold_rule(t, beta, g, eta):
    """Shared clamp(beta/t + ((t-1)/t)*log2(g/eta), 0, beta) decision form."""
    beta = np.asarray(beta, dtype=float)
    if t == 1:
        return beta.copy() if beta.ndim else float(beta)
    raw = beta / t + ((t - 1.0) / t) * np.log2(np.asarray(g, dtype=float) / eta)
    out = np.clip(raw, 0.0, beta)
    return out if out.ndim else float(out)


def equal_bit(state: SchedulerState, g=None):
    """Channel-blind baseline: always send beta/t bits."""
    return state.beta / state.t


def suboptimal_I(state: SchedulerState, g, moments: MomentTable):
    """Threshold rule with the fixed threshold eta = 1/nu_1.

    Transmits more than the fair share beta/t whenever g exceeds 1/nu_1; the
    fixed threshold makes it increasingly aggressive for large t.
    """
    return threshold_rule(state.t, state.beta, g, 1.0 / moments.nu1)


def suboptimal_II(state: SchedulerState, g, moments: MomentTable):
    """Threshold rule with the statistics-only threshold
    eta_t = 1/geomean(nu_{t-1}, ..., nu_1).

    The threshold grows with t (more remaining slots demand a better channel
    to exceed the fair share), which removes most of suboptimal_I's early
    over-allocation.  At t = 2 it coincides with suboptimal_I and optimal_T2.
    """
    t = state.t
    if t == 1:
        return threshold_rule(1, state.beta, g, 1.0)
    return threshold_rule(t, state.beta, g, 1.0 / moments.geo(t - 1))


def optimal_T2(B, g2, moments: MomentTable):
    """Exact first-slot rule for a 2-slot horizon:
    clamp(B/2 + log2(g2 * nu_1)/2, 0, B)."""
    return threshold_rule(2, B, g2, 1.0 / moments.nu1)


@dataclass(frozen=True)
class IwfResult:
    """Non-causal inverse-waterfilling allocation over one gain realization."""

    bits: np.ndarray
    water_level: float
    utilized: np.ndarray
    energy: float


def iwf_bits(B: float, gains: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse waterfilling over rows of a (episodes, T) gain array.

    Returns (bits, water_level) where bits[i] solves
    minimize sum_t (2^b_t - 1)/g_t  s.t.  sum_t b_t = B, b_t >= 0
    for row i; the solution is b_t = max(0, log2(g_t / level_i)).

    The active set is found exactly: with gains sorted so that
    lg_1 >= ... >= lg_T (lg = log2 g), the level for k active slots is
    x_k = (lg_1 + ... + lg_k - B) / k, and slot k is active iff lg_k > x_k.
    Those validity flags form a prefix, so the active count is their sum.
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    if B < 0:
        raise ValueError("B must be >= 0")
    if not np.all(gains > 0):
        raise ValueError("gains must be positive")
    n, T = gains.shape
    lg = np.log2(gains)
    if B == 0:
        return np.zeros_like(gains), np.exp2(lg.max(axis=1))
    order = np.argsort(-lg, axis=1)
    lg_sorted = np.take_along_axis(lg, order, axis=1)
    prefix = np.cumsum(lg_sorted, axis=1)
    ks = np.arange(1, T + 1)
    candidate_x = (prefix - B) / ks
    # At least one slot is active for B > 0; the floor also covers budgets so
    # small they vanish against log2(g) in floating point.
    active = np.maximum(np.sum(lg_sorted > candidate_x, axis=1), 1)
    x = (np.take_along_axis(prefix, active[:, None] - 1, axis=1)[:, 0] - B) / active
    bits = np.maximum(0.0, lg - x[:, None])
    return bits, np.exp2(x)


def iwf_allocate(B: float, gains) -> IwfResult:
    """Inverse waterfilling for a single gain vector (sees the whole future)."""
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 1:
        raise ValueError("gains must be a 1-D vector; use iwf_bits for batches")
    if not np.all(gains > 0):
        raise ValueError("gains must be positive")
    bits, level = iwf_bits(B, gains[None, :])
    bits = bits[0]
    level = float(level[0])
    return IwfResult(
        bits=bits,
        water_level=level,
        utilized=bits > 0,
        energy=float(energy_cost(bits, gains).sum()),
    )


class Policy:
    """Vectorized causal decision rule.

    decide(t, beta, g) accepts scalars or equal-length arrays for beta and g
    and returns allocations in [0, beta]; t = 1 always returns beta.
    """

    kind: str = "?"
    non_causal: bool = False

    def decide(self, t: int, beta, g):
        raise NotImplementedError

    def decide_state(self, state: SchedulerState, g):
        """SchedulerState convenience wrapper around decide()."""
        return self.decide(state.t, state.beta, g)


class EqualBitPolicy(Policy):
    kind = "eq"

    def decide(self, t, beta, g):
        out = np.asarray(beta, dtype=float) / t
        return out if out.ndim else float(out)


class SuboptimalIPolicy(Policy):
    kind = "sub1"

    def __init__(self, moments: MomentTable):
        self.moments = moments

    def decide(self, t, beta, g):
        return threshold_rule(t, beta, g, 1.0 / self.moments.nu1)


class SuboptimalIIPolicy(Policy):
    kind = "sub2"

    def __init__(self, moments: MomentTable):
        self.moments = moments

    def decide(self, t, beta, g):
        if t == 1:
            return threshold_rule(1, beta, g, 1.0)
        if t - 1 > self.moments.m_max:
            raise ValueError(
                f"need nu_1..nu_{t - 1} but the moment table stops at {self.moments.m_max}"
            )
        return threshold_rule(t, beta, g, 1.0 / self.moments.geo(t - 1))


class OptimalT2Policy(Policy):
    """Exact policy for 2-slot horizons; not defined for t > 2."""

    kind = "opt2"

    def __init__(self, moments: MomentTable):
        self.moments = moments

    def decide(self, t, beta, g):
        if t > 2:
            raise ValueError("optimal_T2 is only defined for horizons T <= 2")
        return threshold_rule(t, beta, g, 1.0 / self.moments.nu1)


class IwfOracle(Policy):
    """Non-causal benchmark: inverse waterfilling over the episode's whole
    gain vector.  Has no slot-by-slot rule — simulators allocate per episode
    via iwf_bits."""

    kind = "iwf"
    non_causal = True

    def decide(self, t, beta, g):
        raise NotImplementedError(
            "iwf is non-causal; allocate whole episodes with iwf_bits/iwf_allocate"
        )
