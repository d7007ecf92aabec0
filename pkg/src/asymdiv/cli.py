"""Command-line front end.

    python3 -m asymdiv tau --a 1 --b 2 --n 4
    python3 -m asymdiv meansquare --a 1 --b 2 --t 1048576 --format json

Data go to stdout (or --out), logs to stderr.  Exit codes: 0 ok, 2 usage or
parameter error, 3 budget or overflow rejection.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field

import numpy as np

from .divisor import (
    BudgetError,
    Params,
    g_ab,
    g_star,
    tau_point,
    tau_sieve,
    write_sieve_segment,
)
from .error_term import (
    DELTA_COLUMNS,
    EvalPoint,
    delta,
    delta_rows,
    psi_sum_delta,
    psi_sum_delta_array,
    summatory_table,
    write_csv,
)
from .meansquare import DEFAULT_BUDGET, cstar, default_grid, meansquare_report
from .voronoi import VORONOI_COLUMNS, delta_star_array, voronoi_table

log = logging.getLogger("asymdiv")

COMMANDS = ("tau", "sieve", "delta", "sweep", "voronoi", "meansquare", "cstar", "diag")
EXIT_OK, EXIT_USAGE, EXIT_BUDGET = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: Params
    n: int | None = None
    t: float | None = None
    z: float | None = None
    h_order: int = 8
    nmax: int | None = None
    samples: int = 0
    fmt: str = "csv"
    out: str | None = None
    threads: int = 1
    seed: int = 0
    max_n: int = DEFAULT_BUDGET
    max_z: float = 1e6
    timing: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymdiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("parameters")
    g.add_argument("--a", type=int, required=True)
    g.add_argument("--b", type=int, required=True)
    g.add_argument("--m1", type=int, default=1)
    g.add_argument("--m2", type=int, default=1)
    g.add_argument("--l1", type=int, default=1)
    g.add_argument("--l2", type=int, default=1)
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--out", default=None, help="output path (default stdout)")
    o.add_argument("--threads", type=int, default=1)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--max-n", type=int, default=DEFAULT_BUDGET, help="sieve budget on M1^a M2^b T")
    o.add_argument("--max-z", type=float, default=1e6, help="budget on the Voronoi cutoff z")
    o.add_argument("-v", "--verbose", action="store_true")

    helps = {
        "tau": "tau_{a,b}(n) at one n",
        "sieve": "tau for 1..nmax",
        "delta": "S, M and Delta at x = N / (M1^a M2^b)",
        "sweep": "Delta and its sawtooth form over a grid of N",
        "voronoi": "Delta, Delta* and the remainder on [T, 2T]",
        "meansquare": "int_1^T Delta^2 over T = 2^10..T with the slope fit and c*",
        "cstar": "the mean-square constant c* as a bracket",
        "diag": "sampled consistency diagnostics",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name in ("tau", "delta"):
            sp.add_argument("--n", type=int, required=name == "tau")
        if name in ("delta", "voronoi", "meansquare"):
            sp.add_argument("--t", type=float, required=name != "delta")
        if name in ("sieve", "sweep", "cstar", "diag"):
            sp.add_argument("--nmax", type=int, required=name in ("sieve", "sweep"))
        if name == "sieve":
            sp.add_argument("--binary", action="store_true", help="write the binary segment dump to --out")
        if name in ("voronoi", "diag"):
            sp.add_argument("--z", type=float)
            sp.add_argument("--h-order", type=int, default=8)
        if name in ("sweep", "voronoi", "diag"):
            sp.add_argument("--samples", type=int, default=0, help="random sample size (0 = full grid)")
        if name == "meansquare":
            sp.add_argument("--nmax", type=int, default=10**6)
            sp.add_argument("--no-timing", action="store_true", help="write runtime_sec as 0 for byte-stable output")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    try:
        p = Params(ns.a, ns.b, ns.m1, ns.m2, ns.l1, ns.l2)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return RunConfig(
        command=ns.command, params=p, n=getattr(ns, "n", None), t=getattr(ns, "t", None),
        z=getattr(ns, "z", None), h_order=getattr(ns, "h_order", 8), nmax=getattr(ns, "nmax", None),
        samples=getattr(ns, "samples", 0), fmt=ns.format, out=ns.out, threads=ns.threads, seed=ns.seed,
        max_n=ns.max_n, max_z=ns.max_z, timing=not getattr(ns, "no_timing", False),
        extra={"binary": getattr(ns, "binary", False)},
    )


# -- output ---------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def emit(cfg: RunConfig, payload: dict, columns, rows, fh) -> None:
    """JSON gets the full payload; CSV gets the row table."""
    if cfg.fmt == "json":
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=False)
        fh.write("\n")
    else:
        write_csv(rows, columns, fh)


def read_output(text: str, fmt: str):
    """Parse this tool's own output back into Python objects."""
    if fmt == "json":
        return json.loads(text)
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            if v == "":
                parsed[k] = None
                continue
            try:
                parsed[k] = int(v)
            except ValueError:
                parsed[k] = float(v)
        rows.append(parsed)
    return rows


def _check_budget(cfg: RunConfig, N: float, what: str) -> None:
    if N > cfg.max_n:
        raise BudgetError(f"{what} = {N:.6g} exceeds --max-n {cfg.max_n}")


def _rng(cfg: RunConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(stream + 1)[stream])


# -- commands -----------------------------------------------------------------------

def cmd_tau(cfg: RunConfig, fh) -> None:
    if cfg.n < 1:
        raise UsageError("--n must be >= 1")
    v = tau_point(cfg.n, cfg.params)
    if cfg.fmt == "json":
        emit(cfg, {"params": cfg.params.as_dict(), "n": cfg.n, "tau": v}, None, None, fh)
    else:
        fh.write(f"{v}\n")


def cmd_sieve(cfg: RunConfig, fh) -> None:
    _check_budget(cfg, cfg.nmax, "nmax")
    t = tau_sieve(cfg.nmax, cfg.params, threads=cfg.threads)
    if cfg.extra.get("binary"):
        if not cfg.out:
            raise UsageError("--binary needs --out")
        write_sieve_segment(cfg.out, t[1:], cfg.params, 0)
        log.info("wrote %d counts to %s", cfg.nmax, cfg.out)
        return
    rows = [{"n": n, "tau": int(v)} for n, v in enumerate(t[1:].tolist(), start=1)]
    emit(cfg, {"params": cfg.params.as_dict(), "rows": rows}, ("n", "tau"), rows, fh)


def cmd_delta(cfg: RunConfig, fh) -> None:
    if cfg.n is None and cfg.t is None:
        raise UsageError("delta needs --n or --t")
    pt = EvalPoint(cfg.n, cfg.params) if cfg.n is not None else EvalPoint.at(cfg.t, cfg.params)
    rows = delta_rows([pt.N], cfg.params)
    emit(cfg, {"params": cfg.params.as_dict(), "rows": rows}, DELTA_COLUMNS, rows, fh)


def cmd_sweep(cfg: RunConfig, fh) -> None:
    _check_budget(cfg, cfg.nmax, "nmax")
    S = summatory_table(cfg.nmax, cfg.params, cfg.threads)
    if cfg.samples:
        Ns = np.unique(_rng(cfg, 0).integers(1, cfg.nmax + 1, size=cfg.samples))
    else:
        Ns = np.arange(1, cfg.nmax + 1)
    rows = delta_rows(Ns, cfg.params, S)
    psi = psi_sum_delta_array(Ns, cfg.params)
    for r, v in zip(rows, psi.tolist()):
        r["psi_sum"] = v
    cols = DELTA_COLUMNS + ("psi_sum",)
    emit(cfg, {"params": cfg.params.as_dict(), "rows": rows}, cols, rows, fh)


def cmd_voronoi(cfg: RunConfig, fh) -> None:
    p = cfg.params
    z = cfg.z if cfg.z is not None else 1000.0
    if z > cfg.max_z:
        raise BudgetError(f"z = {z:.6g} exceeds --max-z {cfg.max_z}")
    _check_budget(cfg, 2 * cfg.t * p.scale, "2 M1^a M2^b T")
    Nlo, Nhi = EvalPoint.at(cfg.t, p).N, EvalPoint.at(2 * cfg.t, p).N
    if cfg.samples:
        Ns = np.unique(_rng(cfg, 1).integers(Nlo, Nhi + 1, size=cfg.samples))
    else:
        Ns = np.unique(np.linspace(Nlo, Nhi, 1001).astype(np.int64))
    S = summatory_table(int(Ns.max()), p, cfg.threads)
    base = delta_rows(Ns, p, S)
    ds = delta_star_array(Ns / p.scale, voronoi_table(float(z), p))
    rows = [{"x": r["x"], "delta": r["delta"], "delta_star": float(v), "remainder": r["delta"] - float(v)}
            for r, v in zip(base, ds)]
    emit(cfg, {"params": p.as_dict(), "z": z, "rows": rows}, VORONOI_COLUMNS, rows, fh)


def cmd_meansquare(cfg: RunConfig, fh) -> None:
    p = cfg.params
    _check_budget(cfg, cfg.t * p.scale, "M1^a M2^b T")
    Ts = default_grid(cfg.t) if cfg.t >= 2**13 else [float(cfg.t) * 2.0 ** -k for k in range(3, -1, -1)]
    rep = meansquare_report(p, Ts, nmax=cfg.nmax, budget=cfg.max_n, threads=cfg.threads)
    log.info("slope %.6f +- %.2g, cstar %.6g, %.1fs", rep.slope, rep.slope_stderr, rep.cstar.value, rep.runtime_sec)
    if not cfg.timing:
        rep.runtime_sec = 0.0
    if cfg.fmt == "json":
        emit(cfg, rep.to_json(), None, None, fh)
    else:
        rep.write_csv(fh)


def cmd_cstar(cfg: RunConfig, fh) -> None:
    nmax = cfg.nmax or 10**6
    _check_budget(cfg, nmax, "nmax")
    br = cstar(cfg.params, nmax)
    row = {"value": br.value, "lower": br.lower, "upper": br.upper, "terms": br.terms_used}
    emit(cfg, {"params": cfg.params.as_dict(), "cstar": row}, ("value", "lower", "upper", "terms"), [row], fh)


def cmd_diag(cfg: RunConfig, fh) -> None:
    """Spot checks on random n: sieve vs pointwise count, g* <= g^2, psi-sum vs Delta."""
    p = cfg.params
    nmax = cfg.nmax or 10**5
    _check_budget(cfg, nmax, "nmax")
    k = cfg.samples or 200
    ns = np.unique(_rng(cfg, 2).integers(1, nmax + 1, size=k))
    t = tau_sieve(nmax, p, threads=cfg.threads)
    mism = sum(int(t[n]) != tau_point(int(n), p) for n in ns.tolist())
    gap = max(g_star(int(n), p)[0] - g_ab(int(n), p)[0] ** 2 for n in ns.tolist())
    psi = max(abs(psi_sum_delta(int(n), p) - delta(int(n), p)) for n in ns.tolist())
    rows = [
        {"check": "sieve_mismatches", "value": mism},
        {"check": "max_gstar_minus_g2", "value": gap},
        {"check": "max_psi_sum_minus_delta", "value": psi},
        {"check": "samples", "value": int(ns.size)},
    ]
    emit(cfg, {"params": p.as_dict(), "seed": cfg.seed, "rows": rows}, ("check", "value"), rows, fh)


DISPATCH = {
    "tau": cmd_tau, "sieve": cmd_sieve, "delta": cmd_delta, "sweep": cmd_sweep,
    "voronoi": cmd_voronoi, "meansquare": cmd_meansquare, "cstar": cmd_cstar, "diag": cmd_diag,
}


def run(cfg: RunConfig, fh) -> None:
    DISPATCH[cfg.command](cfg, fh)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
        if cfg.out and not cfg.extra.get("binary"):
            with open(cfg.out, "w", newline="") as fh:
                run(cfg, fh)
        else:
            with contextlib.nullcontext(sys.stdout) as fh:
                run(cfg, fh)
    except (BudgetError, OverflowError, MemoryError) as e:
        print(f"asymdiv: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, ValueError) as e:
        print(f"asymdiv: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
