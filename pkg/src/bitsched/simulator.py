"""Monte Carlo engine: roll scheduling policies over sampled gain episodes.

Every policy in a run sees the same gain draws (common random numbers), so
policy gaps are paired comparisons with far lower variance than independent
runs.  Episodes are generated in fixed-size blocks whose RNG streams are keyed
by (seed, block index); per-block statistics are merged in block order, so
results are bitwise identical for any worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .policies import Policy, energy_cost, iwf_bits

BLOCK_SIZE = 4096

FEAS_TOL_BITS = 1e-9


class SimulationInvariantError(AssertionError):
    """A rolled-out episode violated a hard scheduling constraint."""


@dataclass(frozen=True)
class EpisodeRecord:
    """One episode: chronological gains (first entry = slot with T remaining),
    the bits a policy allocated, and the per-slot energies."""

    gains: np.ndarray
    bits: np.ndarray
    energies: np.ndarray

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.energies, dtype=np.longdouble))


@dataclass(frozen=True)
class AggregateStats:
    """Monte Carlo summary for one policy."""

    policy: str
    episodes: int
    seed: int
    mean_energy: float
    stderr: float
    mean_bits_per_slot: np.ndarray

    def __post_init__(self):
        self.mean_bits_per_slot.setflags(write=False)

    @property
    def mean_energy_db(self) -> float:
        return 10.0 * np.log10(self.mean_energy)


@dataclass
class _Accumulator:
    """Mergeable mean/variance/bit-sum state (parallel Welford update)."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    bits_sum: np.ndarray | None = None

    def add_block(self, energies: np.ndarray, bits: np.ndarray) -> None:
        nb = len(energies)
        mb = float(energies.mean())
        m2b = float(np.sum((energies - mb) ** 2))
        delta = mb - self.mean
        n = self.n + nb
        self.mean += delta * nb / n
        self.m2 += m2b + delta * delta * self.n * nb / n
        self.n = n
        block_bits = bits.sum(axis=0)
        self.bits_sum = block_bits if self.bits_sum is None else self.bits_sum + block_bits

    def finalize(self, policy: str, seed: int) -> AggregateStats:
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return AggregateStats(
            policy=policy,
            episodes=self.n,
            seed=seed,
            mean_energy=self.mean,
            stderr=float(np.sqrt(var / self.n)),
            mean_bits_per_slot=self.bits_sum / self.n,
        )


def rollout(policy: Policy, gains: np.ndarray, B: float, *, check: bool = False):
    """Run one policy over a block of episodes.

    gains has shape (episodes, T) in chronological order.  Returns
    (bits, energies) of the same shape.
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    n, T = gains.shape
    if policy.non_causal:
        bits, _ = iwf_bits(B, gains)
    else:
        bits = np.empty_like(gains)
        beta = np.full(n, float(B))
        for j in range(T):
            b = np.asarray(policy.decide(T - j, beta, gains[:, j]), dtype=float)
            bits[:, j] = b
            beta = beta - b
    energies = energy_cost(bits, gains)
    if check:
        _check_block(bits, B)
    return bits, energies


def _check_block(bits: np.ndarray, B: float) -> None:
    tol = FEAS_TOL_BITS * max(1.0, B)
    if np.any(bits < -tol):
        raise SimulationInvariantError("negative bit allocation")
    remaining = B - np.cumsum(bits, axis=1)
    if np.any(remaining < -tol):
        raise SimulationInvariantError("allocation exceeds remaining bits")
    total = bits.sum(axis=1)
    if np.any(np.abs(total - B) > tol):
        worst = float(np.max(np.abs(total - B)))
        raise SimulationInvariantError(
            f"payload not fully delivered: |sum(bits) - B| up to {worst:.3e}"
        )


def _block_sizes(episodes: int):
    full, rem = divmod(episodes, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rem] if rem else [])


def _block_gains(channel: ChannelModel, seed, block_idx: int, size: int, T: int):
    rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), block_idx])
    return channel.sample(rng, (size, T))


def run(
    policies,
    channel: ChannelModel,
    B: float,
    T: int,
    episodes: int,
    seed: int,
    *,
    workers: int = 1,
    common_randoms: bool = True,
    check: bool = False,
):
    """Estimate expected total energy for each policy.

    Returns {policy.kind: AggregateStats}.  With common_randoms (default) all
    policies share each episode's gain vector; otherwise every policy draws
    its own episodes.  Deterministic given (seed, episodes, channel),
    regardless of workers.
    """
    policies = list(policies)
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if len({p.kind for p in policies}) != len(policies):
        raise ValueError("policies must have distinct kinds")
    sizes = _block_sizes(episodes)

    def do_block(block_idx: int):
        partials = []
        for p_idx, policy in enumerate(policies):
            stream = block_idx if common_randoms else (p_idx + 1) * len(sizes) + block_idx
            gains = _block_gains(channel, seed, stream, sizes[block_idx], T)
            bits, energies = rollout(policy, gains, B, check=check)
            totals = energies.sum(axis=1, dtype=np.longdouble).astype(float)
            partials.append((totals, bits))
        return partials

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_block = list(pool.map(do_block, range(len(sizes))))
    else:
        per_block = [do_block(i) for i in range(len(sizes))]

    out = {}
    for p_idx, policy in enumerate(policies):
        acc = _Accumulator()
        for block in per_block:  # fixed block order → worker-count invariant
            acc.add_block(*block[p_idx])
        out[policy.kind] = acc.finalize(policy.kind, seed)
    return out


def profile(
    policy: Policy,
    channel: ChannelModel,
    B: float,
    T: int,
    episodes: int,
    seed: int,
    *,
    workers: int = 1,
    check: bool = False,
) -> np.ndarray:
    """Mean bits per chronological slot, E[b_t] for t = T..1."""
    stats = run([policy], channel, B, T, episodes, seed, workers=workers, check=check)
    return stats[policy.kind].mean_bits_per_slot


def episode_records(
    policy: Policy,
    channel: ChannelModel,
    B: float,
    T: int,
    episodes: int,
    seed: int,
    *,
    check: bool = False,
):
    """Fully materialized per-episode records, for inspection at small N."""
    records = []
    sizes = _block_sizes(episodes)
    for block_idx, size in enumerate(sizes):
        gains = _block_gains(channel, seed, block_idx, size, T)
        bits, energies = rollout(policy, gains, B, check=check)
        records.extend(
            EpisodeRecord(gains=g, bits=b, energies=e)
            for g, b, e in zip(gains, bits, energies)
        )
    return records
