"""All-or-nothing scheduler: transmit the whole payload in one slot chosen by
an optimal-stopping rule, or wait.

With t slots remaining, firing costs (2^B - 1)/g and waiting costs
(2^B - 1) * omega_t in expectation, where the continuation coefficients obey

    omega_1 = +inf   (the deadline forces transmission)
    omega_t = E[ min(1/g, omega_{t-1}) ]

so the rule reduces to: fire iff g > 1/omega_t.  The sequence is nonincreasing
in t — more remaining slots make the scheduler choosier — and is independent
of the payload size B.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, expect, parse_channel_spec
from .policies import Policy, SchedulerState


@dataclass(frozen=True)
class OneShotThresholds:
    """Continuation coefficients omega[t] for t = 1..t_max (omega[0] unused;
    omega[1] is the +inf sentinel, making the decide rule uniform in t)."""

    channel_spec: str
    omega: np.ndarray

    def __post_init__(self):
        self.omega.setflags(write=False)

    @property
    def t_max(self) -> int:
        return len(self.omega) - 1

    def gain_threshold(self, t: int) -> float:
        """Smallest gain that triggers transmission with t slots remaining."""
        return 1.0 / float(self.omega[t])


def _continuation(channel: ChannelModel, omega_prev: float) -> float:
    """E[min(1/g, omega_prev)]."""
    if np.isinf(omega_prev):
        return expect(channel, lambda x: 1.0 / x)
    kink = 1.0 / omega_prev
    lo, hi = channel.support
    points = (kink,) if lo < kink < hi else ()
    return expect(channel, lambda x: np.minimum(1.0 / x, omega_prev), points=points)


def compute_thresholds(channel: ChannelModel, T: int) -> OneShotThresholds:
    """Solve the continuation recursion for horizons 1..T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    omega = np.full(T + 1, np.nan)
    omega[1] = np.inf
    for t in range(2, T + 1):
        omega[t] = _continuation(channel, omega[t - 1])
    return OneShotThresholds(channel_spec=channel.spec, omega=omega)


def oneshot_decide(
    thresholds: OneShotThresholds,
    state: SchedulerState,
    g: float,
    already_fired: bool = False,
) -> float:
    """Bits to send now: the whole remaining payload when the rule says fire,
    else none.  Strict comparison g > 1/omega_t; the boundary event has
    probability zero for continuous channels."""
    if not 1 <= state.t <= thresholds.t_max:
        raise ValueError(f"t={state.t} outside computed horizon 1..{thresholds.t_max}")
    if already_fired:
        return 0.0
    if state.t == 1 or g > thresholds.gain_threshold(state.t):
        return float(state.beta)
    return 0.0


def oneshot_expected_energy(
    thresholds: OneShotThresholds, B: float, T: int | None = None
) -> float:
    """Expected total energy of the stopping rule for a B-bit payload over a
    T-slot horizon: (2^B - 1) * E[min(1/g, omega_T)] = (2^B - 1) * omega_{T+1}.
    The payload factor separates from the channel factor because the whole
    payload rides a single slot."""
    if T is None:
        T = thresholds.t_max
    if not 1 <= T <= thresholds.t_max:
        raise ValueError(f"T={T} outside computed horizon 1..{thresholds.t_max}")
    if T + 1 <= thresholds.t_max:
        coeff = float(thresholds.omega[T + 1])
    else:
        channel = parse_channel_spec(thresholds.channel_spec)
        coeff = _continuation(channel, float(thresholds.omega[T]))
    return float((np.exp2(B) - 1.0) * coeff)


class OneShotPolicy(Policy):
    """Causal policy wrapper: the remaining-bits state carries the episode
    bookkeeping (beta = 0 after the payload has been sent)."""

    kind = "oneshot"

    def __init__(self, thresholds: OneShotThresholds):
        self.thresholds = thresholds

    def decide(self, t, beta, g):
        if np.ndim(beta) == 0 and np.ndim(g) == 0:
            if beta <= 0:
                return 0.0
            return oneshot_decide(self.thresholds, SchedulerState(t, float(beta)), float(g))
        beta = np.asarray(beta, dtype=float)
        g = np.asarray(g, dtype=float)
        fire = (beta > 0) & ((t == 1) | (g > 1.0 / self.thresholds.omega[t]))
        return np.where(fire, beta, 0.0)
