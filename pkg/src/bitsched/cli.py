"""Command-line front end: reproducible experiments over channels, policies,
DP tables, the one-shot rule, and the Monte Carlo engine.

Series reports are CSV; scalar reports are JSON.  When a report goes to a
file (--out), a PNG rendering of the same data is written next to it unless
--no-plot is passed.  Relative --out paths resolve against $BITSCHED_OUTDIR
when it is set.  Every subcommand is deterministic given its full flag set.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import analysis, dp_solver, oneshot, simulator
from .channel import NonIntegrable, moments, parse_channel_spec
from .policies import (
    EqualBitPolicy,
    IwfOracle,
    OptimalT2Policy,
    SuboptimalIIPolicy,
    SuboptimalIPolicy,
)
from .simulator import SimulationInvariantError

OUTDIR_ENV = "BITSCHED_OUTDIR"
POLICY_KINDS = ("eq", "sub1", "sub2", "opt2", "dp", "oneshot", "iwf")
DEFAULT_CHANNEL = "truncexp:lambda=1,gamma0=0.001"
DEFAULT_B_GRID = "0.01,0.03,0.1,0.3,1,2,3,5,7,10,15,20,30"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CHECK_FAILED = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulate run; canonicalizes for reproducibility."""

    channel: str
    B: float
    T: int
    policies: tuple[str, ...]
    episodes: int
    seed: int
    grid_points: int = 1025
    quad_nodes: int = 256
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.policies) - set(POLICY_KINDS)
        if unknown:
            raise ValueError(
                f"unknown policies {sorted(unknown)}; choose from {','.join(POLICY_KINDS)}"
            )

    def canonical(self) -> str:
        data = asdict(self)
        data["policies"] = list(self.policies)
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_canonical(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        data["policies"] = tuple(data["policies"])
        return cls(**data)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.12g" % float(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_fmt(cell) for cell in row] for row in rows)
    return buf.getvalue()


def _resolve_out(path_text):
    if path_text is None:
        return None
    path = Path(path_text)
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not path.is_absolute():
        path = Path(outdir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, text: str, plot=None) -> None:
    """Write a report to stdout or --out; render the sibling PNG for files."""
    out = _resolve_out(args.out)
    if out is None:
        sys.stdout.write(text)
        return
    out.write_text(text, encoding="utf-8")
    print(f"wrote {out}", file=sys.stderr)
    if plot is not None and not getattr(args, "no_plot", False):
        from . import plotting

        png = out.with_suffix(".png")
        plot(plotting, png)
        print(f"wrote {png}", file=sys.stderr)


def _channel_type(text: str):
    try:
        return parse_channel_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _policies_type(text: str):
    names = tuple(name.strip() for name in text.split(",") if name.strip())
    if not names:
        raise argparse.ArgumentTypeError("at least one policy required")
    unknown = set(names) - set(POLICY_KINDS)
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown policies {sorted(unknown)}; choose from {','.join(POLICY_KINDS)}"
        )
    return names


def _grid_type(text: str):
    try:
        values = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid value: {exc}") from exc
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("grid must be positive payload sizes")
    return values


def _build_policies(config: ExperimentConfig, channel, dp_table_path=None):
    """Instantiate the named policies against one channel."""
    order = max(1, config.T - 1) if "sub2" in config.policies else 2
    mom = moments(channel, max(order, 1))
    built = []
    for name in config.policies:
        if name == "eq":
            built.append(EqualBitPolicy())
        elif name == "sub1":
            built.append(SuboptimalIPolicy(mom))
        elif name == "sub2":
            built.append(SuboptimalIIPolicy(mom))
        elif name == "opt2":
            if config.T > 2:
                raise ValueError("policy opt2 requires T <= 2")
            built.append(OptimalT2Policy(mom))
        elif name == "iwf":
            built.append(IwfOracle())
        elif name == "oneshot":
            built.append(
                oneshot.OneShotPolicy(oneshot.compute_thresholds(channel, config.T))
            )
        elif name == "dp":
            built.append(dp_solver.DpPolicy(_dp_table(config, channel, dp_table_path)))
    return built


def _dp_table(config: ExperimentConfig, channel, dp_table_path):
    if dp_table_path is not None:
        path = Path(dp_table_path)
        if not path.exists():
            raise FileNotFoundError(
                f"dp table {path} not found; create it first, e.g. "
                f"`bitsched dp-solve --channel {config.channel} --T {config.T} "
                f"--b-max {config.B:g} --out {path}`"
            )
        table = dp_solver.load_table(path)
        if table.t_max < config.T or table.b_max < config.B:
            raise ValueError(
                f"dp table covers T<={table.t_max}, B<={table.b_max:g}; "
                f"re-run dp-solve for T={config.T}, B={config.B:g}"
            )
        return table
    dp_config = dp_solver.DpConfig(
        b_max=config.B, grid_points=config.grid_points, quad_nodes=config.quad_nodes
    )
    return dp_solver.solve(channel, dp_config, config.T)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_moments(args) -> int:
    mom = moments(args.channel, args.M)
    rows = [
        (m, mom.nu[m - 1], mom.gmean[m - 1], mom.nu_inf) for m in range(1, args.M + 1)
    ]
    ms = list(range(1, args.M + 1))

    def plot(plotting, png):
        plotting.save_line_chart(
            png,
            ms,
            {"nu_m": [r[1] for r in rows], "geomean": [r[2] for r in rows]},
            hlines={"nu_inf": mom.nu_inf},
            xlabel="order m",
            ylabel="inverse-gain moment",
            title=f"Fractional moments — {args.channel.spec}",
        )

    _emit(args, _csv(["m", "nu_m", "gmean_m", "nu_inf"], rows), plot)
    return EXIT_OK


def cmd_dp_solve(args) -> int:
    config = dp_solver.DpConfig(
        b_max=args.b_max,
        grid_points=args.grid_points,
        quad_nodes=args.quad_nodes,
        inner_tol=args.inner_tol,
    )
    table = dp_solver.solve(args.channel, config, args.T)

    def plot(plotting, png):
        stride = max(1, table.t_max // 6)
        ts = sorted({1, *range(stride, table.t_max + 1, stride), table.t_max})
        plotting.save_line_chart(
            png,
            table.grid,
            {f"t={t}": table.value[t] for t in ts},
            xlabel="remaining bits",
            ylabel="expected energy",
            title=f"Cost-to-go — {args.channel.spec}",
            logy=True,
        )

    _emit(args, table._serialize(), plot)
    if args.check:
        return _dp_check(args.channel, table)
    return EXIT_OK


def _dp_check(channel, table) -> int:
    """Cross-check solved values against independent closed forms."""
    nu1 = moments(channel, 1).nu1
    exact1 = (np.exp2(table.grid) - 1.0) * nu1
    err1 = np.max(np.abs(table.value[1] - exact1) / np.maximum(exact1, 1e-12))
    if err1 > 1e-9:
        print(f"check failed: final-slot values off by {err1:.2e}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    if table.t_max >= 2:
        for beta in (1.0, table.b_max / 4, table.b_max / 2, table.b_max):
            if beta <= 0 or beta > table.b_max:
                continue
            closed = analysis.optimal_T2_cost(beta, channel)
            rel = abs(table.cost(2, beta) - closed) / closed
            if rel > 0.005:
                print(
                    f"check failed: two-slot value at beta={beta:g} off by "
                    f"{rel:.2%} vs quadrature",
                    file=sys.stderr,
                )
                return EXIT_CHECK_FAILED
    print("check passed", file=sys.stderr)
    return EXIT_OK


def _merged_simulate_config(args) -> ExperimentConfig:
    """Config file (optional JSON) overridden by explicitly passed flags."""
    merged = {
        "channel": DEFAULT_CHANNEL,
        "B": 10.0,
        "T": 5,
        "policies": ("eq", "sub1", "sub2", "dp"),
        "episodes": 100_000,
        "seed": 7,
        "grid_points": 1025,
        "quad_nodes": 256,
        "workers": 1,
    }
    if args.config is not None:
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(loaded) - set(merged)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        merged.update(loaded)
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if isinstance(merged["policies"], str):
        merged["policies"] = _policies_type(merged["policies"])
    merged["policies"] = tuple(merged["policies"])
    merged["B"] = float(merged["B"])
    for key in ("T", "episodes", "seed", "grid_points", "quad_nodes", "workers"):
        merged[key] = int(merged[key])
    return ExperimentConfig(**merged)


def cmd_simulate(args) -> int:
    config = _merged_simulate_config(args)
    channel = parse_channel_spec(config.channel)
    policies = _build_policies(config, channel, args.dp_table)
    stats = simulator.run(
        policies,
        channel,
        config.B,
        config.T,
        config.episodes,
        config.seed,
        workers=config.workers,
        common_randoms=not args.independent_draws,
        check=args.check,
    )
    rows = [
        (
            kind,
            config.B,
            config.T,
            st.episodes,
            st.mean_energy,
            st.stderr,
            st.mean_energy_db,
        )
        for kind, st in ((p.kind, stats[p.kind]) for p in policies)
    ]

    def plot(plotting, png):
        plotting.save_bar_chart(
            png,
            [r[0] for r in rows],
            [r[4] for r in rows],
            errors=[r[5] for r in rows],
            ylabel="mean total energy",
            title=f"B={config.B:g}, T={config.T}, N={config.episodes} — {config.channel}",
        )

    header = ["policy", "B", "T", "episodes", "mean_energy", "stderr", "mean_energy_db"]
    _emit(args, _csv(header, rows), plot)
    return EXIT_OK


def cmd_profile(args) -> int:
    config = ExperimentConfig(
        channel=args.channel.spec,
        B=args.B,
        T=args.T,
        policies=(args.policy,),
        episodes=args.episodes,
        seed=args.seed,
        grid_points=args.grid_points,
        quad_nodes=args.quad_nodes,
        workers=args.workers,
    )
    policy = _build_policies(config, args.channel, args.dp_table)[0]
    means = simulator.profile(
        policy,
        args.channel,
        args.B,
        args.T,
        args.episodes,
        args.seed,
        workers=args.workers,
        check=args.check,
    )
    ts = list(range(args.T, 0, -1))  # chronological: first slot has T remaining
    rows = [(args.policy, t, b) for t, b in zip(ts, means)]

    def plot(plotting, png):
        plotting.save_bar_chart(
            png,
            [str(t) for t in ts],
            list(means),
            ylabel="mean bits",
            title=f"{args.policy} allocation profile — B={args.B:g}, T={args.T}",
        )

    _emit(args, _csv(["policy", "slot_index_t", "mean_bits"], rows), plot)
    return EXIT_OK


def cmd_oneshot_thresholds(args) -> int:
    thresholds = oneshot.compute_thresholds(args.channel, args.T)
    ts = list(range(args.T, 1, -1))  # chronological; omega column nondecreasing
    rows = [(t, thresholds.omega[t], thresholds.gain_threshold(t)) for t in ts]

    def plot(plotting, png):
        plotting.save_line_chart(
            png,
            ts,
            {"omega_t": [r[1] for r in rows]},
            xlabel="slots remaining t",
            ylabel="continuation coefficient",
            title=f"One-shot thresholds — {args.channel.spec}",
        )

    _emit(args, _csv(["t", "omega", "gain_threshold"], rows), plot)
    if args.check:
        omegas = np.array([r[1] for r in rows])
        if np.any(np.diff(omegas) < -1e-12):
            print("check failed: omega not nondecreasing down the file", file=sys.stderr)
            return EXIT_CHECK_FAILED
        print("check passed", file=sys.stderr)
    return EXIT_OK


def cmd_oneshot_energy(args) -> int:
    thresholds = oneshot.compute_thresholds(args.channel, args.T + 1)
    energy = oneshot.oneshot_expected_energy(thresholds, args.B, args.T)
    payload = float(np.exp2(args.B) - 1.0)
    data = {
        "channel": args.channel.spec,
        "B": args.B,
        "T": args.T,
        "coefficient": energy / payload,
        "expected_energy": energy,
        "expected_energy_db": 10.0 * float(np.log10(energy)),
    }
    _emit(args, json.dumps(data, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_table2(args) -> int:
    rows = analysis.table2_report()
    table = [
        (
            r.channel_spec,
            r.small_B_db,
            r.large_B_db,
            r.reference_small_db,
            r.reference_large_db,
            "pass" if r.small_ok else "fail",
            "pass" if r.large_ok else "fail",
        )
        for r in rows
    ]

    def plot(plotting, png):
        plotting.save_grouped_bars(
            png,
            [r.channel_spec for r in rows],
            {
                "small-B computed": [r.small_B_db for r in rows],
                "small-B reference": [r.reference_small_db for r in rows],
                "large-B computed": [r.large_B_db for r in rows],
                "large-B reference": [r.reference_large_db for r in rows],
            },
            ylabel="energy offset (dB)",
            title="Equal-bit vs optimal two-slot offsets",
        )

    header = [
        "channel",
        "small_B_db",
        "large_B_db",
        "ref_small_db",
        "ref_large_db",
        "small_flag",
        "large_flag",
    ]
    _emit(args, _csv(header, table), plot)
    if args.check and not all(r.small_ok and r.large_ok for r in rows):
        print("check failed: offsets outside ±0.05 dB", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_gap_curve(args) -> int:
    curve = analysis.gap_curve(args.channel, args.B_grid)
    rows = [(b, gap) for b, gap in curve]

    def plot(plotting, png):
        plotting.save_line_chart(
            png,
            curve[:, 0],
            {"gap": curve[:, 1]},
            xlabel="payload B (bits)",
            ylabel="energy advantage (dB)",
            title=f"Optimal vs equal-bit gap — {args.channel.spec}",
            logx=True,
        )

    _emit(args, _csv(["B", "gap_db"], rows), plot)
    if args.check:
        if np.any(np.diff(curve[:, 1]) > 1e-9):
            print("check failed: gap curve not nonincreasing", file=sys.stderr)
            return EXIT_CHECK_FAILED
        print("check passed", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub, *, plot: bool = True):
    sub.add_argument(
        "--channel",
        type=_channel_type,
        default=_channel_type(DEFAULT_CHANNEL),
        help=f"channel spec (default {DEFAULT_CHANNEL})",
    )
    sub.add_argument("--out", help="output file (default stdout); relative paths join $BITSCHED_OUTDIR")
    if plot:
        sub.add_argument(
            "--no-plot", action="store_true", help="skip the sibling PNG when writing --out"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitsched",
        description="Energy-minimizing bit scheduling over fading slots under a deadline.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("moments", help="inverse-gain fractional moments as CSV")
    _add_common(p)
    p.add_argument("--M", type=int, default=8, help="highest moment order (default 8)")
    p.set_defaults(func=cmd_moments)

    p = commands.add_parser("dp-solve", help="solve and serialize a cost-to-go table")
    _add_common(p)
    p.add_argument("--T", type=int, required=True, help="horizon (slots)")
    p.add_argument("--b-max", type=float, required=True, help="largest payload in the grid")
    p.add_argument("--grid-points", type=int, default=1025, help="payload grid size (default 1025)")
    p.add_argument("--quad-nodes", type=int, default=256, help="gain quadrature nodes (default 256)")
    p.add_argument("--inner-tol", type=float, default=1e-9, help="inner minimizer tolerance")
    p.add_argument("--check", action="store_true", help="cross-check against closed forms; nonzero exit on failure")
    p.set_defaults(func=cmd_dp_solve)

    p = commands.add_parser("simulate", help="Monte Carlo energy comparison of policies")
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("--channel", default=None, help=f"channel spec (default {DEFAULT_CHANNEL})")
    p.add_argument("--B", type=float, default=None, help="payload bits (default 10)")
    p.add_argument("--T", type=int, default=None, help="horizon (default 5)")
    p.add_argument(
        "--policies",
        type=_policies_type,
        default=None,
        help="comma list from eq,sub1,sub2,opt2,dp,oneshot,iwf (default eq,sub1,sub2,dp)",
    )
    p.add_argument("--episodes", type=int, default=None, help="episode count (default 100000)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 7)")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default 1)")
    p.add_argument("--grid-points", type=int, default=None, help="dp grid size when solving in-process")
    p.add_argument("--quad-nodes", type=int, default=None, help="dp quadrature nodes when solving in-process")
    p.add_argument("--dp-table", help="load the dp policy from this table instead of solving")
    p.add_argument(
        "--independent-draws",
        action="store_true",
        help="per-policy independent episodes instead of common random numbers",
    )
    p.add_argument("--check", action="store_true", help="verify per-episode feasibility; nonzero exit on failure")
    p.add_argument("--out", help="output file (default stdout); relative paths join $BITSCHED_OUTDIR")
    p.add_argument("--no-plot", action="store_true", help="skip the sibling PNG when writing --out")
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser("profile", help="mean bit allocation per slot for one policy")
    _add_common(p)
    p.add_argument("--B", type=float, default=50.0, help="payload bits (default 50)")
    p.add_argument("--T", type=int, default=10, help="horizon (default 10)")
    p.add_argument("--policy", choices=POLICY_KINDS, default="dp", help="policy to profile")
    p.add_argument("--episodes", type=int, default=20_000, help="episode count (default 20000)")
    p.add_argument("--seed", type=int, default=7, help="RNG seed (default 7)")
    p.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--grid-points", type=int, default=1025)
    p.add_argument("--quad-nodes", type=int, default=256)
    p.add_argument("--dp-table", help="load the dp policy from this table instead of solving")
    p.add_argument("--check", action="store_true", help="verify per-episode feasibility")
    p.set_defaults(func=cmd_profile)

    p = commands.add_parser("oneshot-thresholds", help="stopping-rule thresholds per remaining slots")
    _add_common(p)
    p.add_argument("--T", type=int, required=True, help="horizon (slots)")
    p.add_argument("--check", action="store_true", help="verify monotonicity; nonzero exit on failure")
    p.set_defaults(func=cmd_oneshot_thresholds)

    p = commands.add_parser("oneshot-energy", help="closed-form one-shot expected energy (JSON)")
    _add_common(p, plot=False)
    p.add_argument("--B", type=float, required=True, help="payload bits")
    p.add_argument("--T", type=int, required=True, help="horizon (slots)")
    p.set_defaults(func=cmd_oneshot_energy)

    p = commands.add_parser("table2", help="benchmark energy offsets with pass/fail flags")
    p.add_argument("--out", help="output file (default stdout); relative paths join $BITSCHED_OUTDIR")
    p.add_argument("--no-plot", action="store_true", help="skip the sibling PNG when writing --out")
    p.add_argument("--check", action="store_true", help="nonzero exit unless all rows pass")
    p.set_defaults(func=cmd_table2)

    p = commands.add_parser("gap-curve", help="two-slot optimal vs equal-bit gap across payloads")
    _add_common(p)
    p.add_argument(
        "--B-grid",
        type=_grid_type,
        default=_grid_type(DEFAULT_B_GRID),
        help=f"comma list of payload sizes (default {DEFAULT_B_GRID})",
    )
    p.add_argument("--check", action="store_true", help="verify the curve is nonincreasing")
    p.set_defaults(func=cmd_gap_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonIntegrable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SimulationInvariantError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
