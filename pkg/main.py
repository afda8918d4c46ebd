"""
main.py — pcpolar command-line entrypoint.

Usage:
  python main.py design   --channel bec:0.3 --channel bec:0.6 --k 4 --n1 8 --out runs/spec.json
  python main.py design   --table1-mode --channel biawgn:0.9 --out runs/table1.json
  python main.py simulate --spec runs/table1.json --sweep ebn0:1:3:0.5 --trials 10000 --csv runs/pcp.csv \\
                          --baseline random-puncturing
  python main.py encode   --spec runs/spec.json --level 2 --in a
  python main.py decode   --spec runs/spec.json --in 96 --in 3c
  python main.py reliability --channel bec:0.5 --n 4
  python main.py check    --spec runs/spec.json --export-generator runs/G2.txt --level 2

Exit codes: 0 success, 1 runtime or construction failure, 2 usage error.
Bits are hex, most significant bit first; lengths come from the spec file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

# ── Windows UTF-8 fix ──────────────────────────────────────────────────────────
# Rate and channel tables print σ, ε and n̄; cp1252 consoles cannot encode them.
if sys.platform == "win32":
    import io
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding="utf-8", errors="replace")
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding="utf-8", errors="replace")
    os.environ.setdefault("PYTHONUTF8", "1")

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.rule import Rule
from rich.table import Table

from audit import RunManifest, log_failure, log_run, write_manifest
from channels import ChannelKind, bsc, llrs, parse_channel
from config import (
    BASELINE_K,
    BASELINE_N_U,
    DEFAULT_SEED,
    DEFAULT_THREADS,
    DESIGN_SEED,
    RUNS_DIR,
    TABLE1_K,
    TABLE1_LENGTHS,
)
from harness import PcpScheme, StopRule, SweepAxis, SweepResult, random_puncturing_baseline, sweep
from pcp import (
    PcpConstructionError,
    PcpSpec,
    as_fraction,
    assemble_generator,
    build_pcp,
    check_dyadic_feasibility,
    encode_incremental,
    generator_to_text,
    sequential_decode,
)
from polar_core import profile_document, reliability_for, select_information_set
from puncturing import bits_to_hex, hex_to_bits, make_uniform_pattern, mother_length

console = Console()


# ── CLI argument parsing ───────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcpolar",
        description="pcpolar — rate-compatible parallel concatenated polar codes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="Construct a PCP spec and write it as JSON")
    p.add_argument("--channel", action="append", default=[],
                   help="Design channel <kind>:<param>; repeat once per rate, or give one for all rates")
    p.add_argument("--k", type=int, default=None, help="Information bits")
    p.add_argument("--n1", type=int, default=None, help="Length of the first transmission")
    p.add_argument("--rates", type=str, default=None, help="Comma-separated rates, e.g. 3/4,1/2,1/3")
    p.add_argument("--lengths", type=str, default=None, help="Comma-separated transmission lengths (pinned)")
    p.add_argument("--table1-mode", action="store_true",
                   help=f"Published construction: k={TABLE1_K}, lengths {','.join(map(str, TABLE1_LENGTHS))}")
    p.add_argument("--seed", type=int, default=DESIGN_SEED, help="Seed for Monte Carlo (BSC) designs")
    p.add_argument("--out", type=Path, default=RUNS_DIR / "pcp_spec.json")

    p = sub.add_parser("simulate", help="Monte Carlo HARQ-IR sweep, CSV output")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--sweep", type=str, required=True,
                   help="<kind>:<start>:<stop>:<step> or <kind>:<v1>,<v2>,…; kind is bec, bsc, biawgn or ebn0")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=DEFAULT_THREADS)
    p.add_argument("--stop", choices=[s.value for s in StopRule], default=StopRule.FIXED.value)
    p.add_argument("--rule", choices=["tanh", "minsum"], default="tanh")
    p.add_argument("--csv", type=Path, default=RUNS_DIR / "sweep.csv")
    p.add_argument("--baseline", choices=["random-puncturing"], default=None)
    p.add_argument("--baseline-nu", type=int, default=BASELINE_N_U)
    p.add_argument("--baseline-k", type=int, default=BASELINE_K)
    p.add_argument("--baseline-csv", type=Path, default=None)

    p = sub.add_parser("encode", help="Print the chunk sent in transmission --level")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--in", dest="bits", type=str, required=True, help="k-bit message as hex")

    p = sub.add_parser("decode", help="Sequentially decode the chunks received so far")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--in", dest="chunks", action="append", required=True,
                   help="Received hard-decision chunk as hex; repeat in transmission order")
    p.add_argument("--channel", type=str, default=None,
                   help="bsc:<p> to weight received bits as BSC outputs (default: noiseless)")
    p.add_argument("--rule", choices=["tanh", "minsum"], default="tanh")

    p = sub.add_parser("reliability", help="Dump a bit-channel reliability profile")
    p.add_argument("--channel", type=str, required=True)
    p.add_argument("--n", type=int, required=True, help="Transmitted length (punctured if not a power of two)")
    p.add_argument("--k", type=int, default=None, help="Also select an information set of this size")
    p.add_argument("--seed", type=int, default=DESIGN_SEED)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("check", help="Validate a spec file")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--export-generator", type=Path, default=None)
    p.add_argument("--level", type=int, default=None, help="Generator G_i to export (default: K)")

    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "design" and not args.table1_mode:
        if args.k is None:
            parser.error("design: --k is required unless --table1-mode is given")
        if not args.channel:
            parser.error("design: at least one --channel is required")
        if args.lengths is None and args.n1 is None:
            parser.error("design: --n1 is required unless --lengths is given")
    if args.command == "design" and args.table1_mode:
        if not args.channel:
            parser.error("design: --table1-mode needs a --channel")
        pinned = [flag for flag, value in (("--rates", args.rates), ("--lengths", args.lengths),
                                           ("--n1", args.n1)) if value is not None]
        if pinned:
            parser.error(f"design: --table1-mode pins the schedule; drop {', '.join(pinned)}")
    if args.command == "simulate" and (args.trials < 1 or args.threads < 1):
        parser.error("simulate: --trials and --threads must be >= 1")
    return args


# ── Internal helpers ───────────────────────────────────────────────────────────

def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_sweep(text: str) -> tuple[SweepAxis, ChannelKind, list[float]]:
    """``bec:0.1:0.9:0.1`` (inclusive range) or ``ebn0:1,2,3`` (explicit list)."""
    kind, sep, rest = text.strip().partition(":")
    kind = kind.lower()
    if not sep or not rest:
        raise ValueError(f"Invalid sweep '{text}'. Expected <kind>:<start>:<stop>:<step> or <kind>:<v1>,<v2>")
    if kind == "ebn0":
        axis, ch_kind = SweepAxis.EBN0, ChannelKind.BIAWGN
    else:
        try:
            axis, ch_kind = SweepAxis.PARAM, ChannelKind(kind)
        except ValueError as e:
            raise ValueError(f"Unknown sweep kind '{kind}'") from e

    parts = rest.split(":")
    if len(parts) == 3:
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"Invalid sweep range '{rest}'")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + step * t, 12) for t in range(count)]
    elif len(parts) == 1:
        values = [float(v) for v in _csv_list(rest)]
    else:
        raise ValueError(f"Invalid sweep '{text}'")
    if not values:
        raise ValueError(f"Sweep '{text}' is empty")
    return axis, ch_kind, values


def _load_spec(path: Path) -> PcpSpec:
    return PcpSpec.from_json(path.read_text(encoding="utf-8"))


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _manifest(args: argparse.Namespace, argv: list[str], artifacts: list[Path], seed: int | None = None) -> None:
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    manifest = RunManifest(
        subcommand=args.command,
        argv=tuple(argv),
        parameters=params,
        seed=seed,
        artifacts=tuple(str(a) for a in artifacts),
    )
    for artifact in artifacts:
        write_manifest(artifact, manifest)


def print_spec(spec: PcpSpec) -> None:
    table = Table(title=f"PCP spec  k={spec.k}  K={spec.K}", show_header=True, header_style="bold magenta")
    table.add_column("Level", style="cyan", width=6)
    table.add_column("n_i", width=6)
    table.add_column("n_u", width=6)
    table.add_column("R_i", width=12)
    table.add_column("sizes a_j^(i), j=i..K", width=28)
    for level, rate in zip(spec.levels, spec.schedule.rates):
        table.add_row(
            str(level.index), str(level.length), str(level.n_u),
            f"{rate} ({float(rate):.4f})", ", ".join(map(str, level.sizes)),
        )
    console.print(table)


def print_sweep(result: SweepResult) -> None:
    table = Table(title=f"{result.scheme} — {result.axis.value} sweep", show_header=True, header_style="bold magenta")
    for col in ("param", "i", "rate", "BLER", "BER", "mean tx", "throughput", "P(stop)"):
        table.add_column(col)
    for r in result.rows:
        table.add_row(
            f"{r.param:g}", str(r.rate_index), f"{r.rate:.4f}",
            f"{r.bler:.3e}", f"{r.bit_errors / (r.trials * result.k):.3e}",
            f"{r.mean_tx:.2f}", f"{r.throughput:.4f}", f"{r.p_stop:.4f}",
        )
    console.print(table)


# ── Subcommand runners ────────────────────────────────────────────────────────

def run_design(args: argparse.Namespace, argv: list[str]) -> dict:
    console.print(Rule("[bold cyan]design — PCP construction[/]"))
    channels = [parse_channel(c) for c in args.channel]
    rng = np.random.default_rng(args.seed)

    if args.table1_mode:
        k = args.k or TABLE1_K
        spec = build_pcp(k, channels=channels, lengths=TABLE1_LENGTHS, rng=rng)
    else:
        lengths = [int(t) for t in _csv_list(args.lengths)] if args.lengths else None
        rates = [as_fraction(t) for t in _csv_list(args.rates)] if args.rates else None
        spec = build_pcp(args.k, n_1=args.n1, channels=channels, rates=rates, lengths=lengths, rng=rng)

    out = _write_text(args.out, spec.to_json())
    _manifest(args, argv, [out], seed=args.seed)
    print_spec(spec)

    dyadic = check_dyadic_feasibility(spec.schedule.rates)
    console.print(Panel(
        f"Rates:   {', '.join(str(r) for r in spec.schedule.rates)}\n"
        f"Lengths: {', '.join(map(str, spec.schedule.lengths))}\n"
        f"Dyadic:  {'yes, ℓ = ' + str(dyadic.exponents) if dyadic.feasible else 'no (punctured levels)'}\n"
        f"Saved to: {out}",
        title="Design Output",
        border_style="green",
    ))
    return {"k": spec.k, "K": spec.K, "lengths": list(spec.schedule.lengths), "artifact": str(out)}


def _run_sweep(scheme, axis, kind, values, args) -> SweepResult:
    with Progress(
        SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
        BarColumn(), TextColumn("{task.completed}/{task.total}"), TimeElapsedColumn(),
        console=console, transient=True,
    ) as progress:
        task = progress.add_task(f"{scheme.name}", total=None)

        def on_progress(done: int, total: int) -> None:
            progress.update(task, completed=done, total=total)

        return sweep(
            scheme, values, axis=axis, kind=kind, trials=args.trials, seed=args.seed,
            stop_rule=args.stop, threads=args.threads, progress=on_progress,
        )


def run_simulate(args: argparse.Namespace, argv: list[str]) -> dict:
    console.print(Rule("[bold yellow]simulate — HARQ-IR Monte Carlo[/]"))
    spec = _load_spec(args.spec)
    axis, kind, values = parse_sweep(args.sweep)

    result = _run_sweep(PcpScheme(spec, rule=args.rule), axis, kind, values, args)
    artifacts = [result.write_csv(args.csv)]
    print_sweep(result)

    if args.baseline:
        design = parse_channel(spec.design_channels[-1]) if spec.design_channels else None
        family = random_puncturing_baseline(
            args.baseline_nu, args.baseline_k, rates=spec.schedule.rates, channel=design, seed=args.seed,
            rule=args.rule,
        )
        baseline = _run_sweep(family, axis, kind, values, args)
        path = args.baseline_csv or args.csv.with_name(f"{args.csv.stem}_baseline{args.csv.suffix}")
        artifacts.append(baseline.write_csv(path))
        print_sweep(baseline)

    _manifest(args, argv, artifacts, seed=args.seed)
    console.print(Panel(
        "\n".join(f"Saved to: {p}" for p in artifacts),
        title="Simulation Output",
        border_style="yellow",
    ))
    return {"points": len(values), "trials": args.trials, "artifacts": [str(p) for p in artifacts]}


def run_encode(args: argparse.Namespace, argv: list[str]) -> dict:
    spec = _load_spec(args.spec)
    u = hex_to_bits(args.bits, spec.k)
    chunk = encode_incremental(spec, u, args.level)
    console.print(bits_to_hex(chunk), highlight=False, soft_wrap=True)
    return {"level": args.level, "n_i": int(chunk.size)}


def run_decode(args: argparse.Namespace, argv: list[str]) -> dict:
    spec = _load_spec(args.spec)
    ch = parse_channel(args.channel) if args.channel else bsc(0.0)
    if ch.kind is not ChannelKind.BSC:
        raise ValueError(f"decode reads hard bits; only bsc:<p> is supported, got {ch}")
    if len(args.chunks) > spec.K:
        raise ValueError(f"{len(args.chunks)} chunks given, spec has {spec.K} transmissions")

    llr_chunks = [
        llrs(ch, hex_to_bits(text, n).astype(np.float64))
        for text, n in zip(args.chunks, spec.schedule.lengths)
    ]
    result = sequential_decode(spec, llr_chunks, rule=args.rule)
    console.print(bits_to_hex(result.bits), highlight=False, soft_wrap=True)

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Stage (level)", style="cyan")
    table.add_column("Bits decided")
    table.add_column("Confident")
    for stage in result.stages:
        flag = "[green]yes[/]" if stage.confident else "[red]no[/]"
        table.add_row(str(stage.level), str(len(stage.indices)), flag)
    console.print(table)
    return {"chunks": len(args.chunks), "confident": all(bool(s.confident) for s in result.stages)}


def run_reliability(args: argparse.Namespace, argv: list[str]) -> dict:
    ch = parse_channel(args.channel)
    n_u = mother_length(args.n)
    pattern = make_uniform_pattern(n_u, args.n)
    profile = reliability_for(ch, n_u, pattern, rng=np.random.default_rng(args.seed))
    info = select_information_set(profile, args.k) if args.k is not None else None
    doc = profile_document(profile, info)

    text = json.dumps(doc, indent=2)
    if args.out:
        _write_text(args.out, text + "\n")
        _manifest(args, argv, [args.out], seed=args.seed)
        console.print(f"[green]Profile saved to {args.out}[/]")
    else:
        console.print_json(text)
    return {"n_u": n_u, "n": args.n, "metric_kind": profile.metric_kind.value}


def run_check(args: argparse.Namespace, argv: list[str]) -> dict:
    console.print(Rule("[bold blue]check — spec validation[/]"))
    spec = _load_spec(args.spec)
    print_spec(spec)
    stats = {"k": spec.k, "K": spec.K}

    if args.export_generator:
        level = args.level or spec.K
        G = assemble_generator(spec, level)
        out = _write_text(args.export_generator, generator_to_text(G))
        _manifest(args, argv, [out])
        stats["generator"] = str(out)
        console.print(f"[green]G_{level} ({G.shape[0]}×{G.shape[1]}) saved to {out}[/]")

    console.print(Panel("[green]All construction conditions hold[/]", border_style="blue"))
    return stats


RUNNERS = {
    "design": run_design,
    "simulate": run_simulate,
    "encode": run_encode,
    "decode": run_decode,
    "reliability": run_reliability,
    "check": run_check,
}


# ── Main ──────────────────────────────────────────────────────────────────────

def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parse_args(argv)

    start = time.time()
    try:
        stats = RUNNERS[args.command](args, argv)
    except PcpConstructionError as e:
        console.print(f"[red]ERROR: construction failed, {escape(str(e))}[/]")
        log_failure(args.command, str(e))
        return 1
    except (ValueError, OSError) as e:
        console.print(f"[red]ERROR: {escape(str(e))}[/]")
        log_failure(args.command, str(e))
        return 1

    log_run(args.command, time.time() - start, stats, artifact=stats.get("artifact"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
