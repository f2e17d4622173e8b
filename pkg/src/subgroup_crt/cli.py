"""Command-line interface: ``subgroup-crt {simulate,analyze,power,sample-size,reproduce}``.

Results go to stdout as JSON (or a table for ``reproduce``).  Library errors
are written to stderr as ``{"error": <code>, "message": ...}`` with exit
status 1; argument errors exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .analysis import analyze
from .csvio import read_csv, write_csv
from .design import (
    LEVEL_ONE,
    Design,
    FixedEffects,
    IccProfile,
    SubgroupLevel,
    VarianceComponents,
    icc_to_components,
    setting_components,
)
from .errors import Infeasible, SubgroupCRTError
from .montecarlo import default_workers, reproduce_table, summarize, HIGH_POWER_FLOOR
from .power import (
    PowerSpec,
    SubgroupPowerSpec,
    power_lower_bound,
    required_N1_level2,
    required_n_level1,
    required_subgroup_n_level1,
    required_subgroup_n_level2,
    var_delta_formula,
)
from .simulate import simulate

SIDECAR_SCHEMA = "subgroup-crt/simulation/v1"
POWER_SCHEMA = "subgroup-crt/power/v1"
SAMPLE_SIZE_SCHEMA = "subgroup-crt/sample-size/v1"
REPRODUCE_SCHEMA = "subgroup-crt/reproduce/v1"


def load_schema(name: str) -> dict:
    """Bundled JSON schema, e.g. ``load_schema("analysis-report")``."""
    text = resources.files("subgroup_crt").joinpath("schemas", f"{name}.v1.json").read_text(encoding="utf-8")
    return json.loads(text)


class CliError(SubgroupCRTError):
    code = "InvalidArguments"


def _floats(text: str, count: int | tuple[int, ...], what: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    allowed = (count,) if isinstance(count, int) else count
    if len(values) not in allowed:
        raise CliError(f"{what}: expected {' or '.join(map(str, allowed))} values, got {len(values)}")
    return values


def _icc(text: str, level: SubgroupLevel) -> IccProfile:
    if level is LEVEL_ONE:
        s2, r1, r1p, r2p, r2 = _floats(text, 5, "--icc (sigma2,rho1,rho_1p,rho_2p,rho2)")
        return IccProfile(sigma_sq=s2, rho1=r1, rho_1p=r1p, rho_2p=r2p, rho2=r2)
    s2, r1, r2p, r2 = _floats(text, 4, "--icc (sigma2,rho1,rho_2p,rho2)")
    return IccProfile(sigma_sq=s2, rho1=r1, rho_2p=r2p, rho2=r2)


def _components(args, level: SubgroupLevel) -> VarianceComponents:
    if getattr(args, "components", None):
        return VarianceComponents(*_floats(args.components, 4, "--components"), level)
    if getattr(args, "icc", None):
        return icc_to_components(_icc(args.icc, level), level)
    if getattr(args, "setting", None):
        return setting_components(args.setting, level)
    low = args.sigma_grp2 if level is LEVEL_ONE else args.sigma1_2
    values = (args.sigma3_2, args.sigma2_2, low, args.sigma_e2)
    if args.sigma_e2 is None:
        raise CliError("give --sigma-e2 (plus the other components), --components, --icc or --setting")
    return VarianceComponents(*(0.0 if v is None else v for v in values), level)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    level = SubgroupLevel.parse(args.level)
    design = Design(args.n3, args.mid, args.low, level)
    vc = _components(args, level)
    fx = FixedEffects(args.beta0, args.tau, args.xi, args.delta)
    data = simulate(design, fx, vc, args.seed)
    out = Path(args.out)
    rows = write_csv(data, out)
    sidecar = {
        "schema": SIDECAR_SCHEMA,
        "version": __version__,
        "csv": out.name,
        "rows": rows,
        "seed": args.seed,
        "design": design.to_dict(),
        "fixed_effects": fx.to_dict(),
        "variance_components": vc.to_dict(),
    }
    if args.icc:
        sidecar["icc"] = _icc(args.icc, level).to_dict()
    out.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_analyze(args) -> int:
    data = read_csv(args.csv, args.level)
    report = analyze(data, args.alpha, printed_ss0=args.printed_ss0, printed_sigma2=args.printed_sigma2)
    _emit(report.to_dict(), args.out)
    return 0


def _level_design(args, level: SubgroupLevel) -> Design:
    if level is LEVEL_ONE:
        if args.n2 is None or args.n is None:
            raise CliError("level 1 needs --n2 and --n")
        return Design.level_one(args.n3, args.n2, args.n)
    if args.n is None or args.N1 is None:
        raise CliError("level 2 needs --n and --N1")
    return Design.level_two(args.n3, args.n, args.N1)


def cmd_power(args) -> int:
    level = SubgroupLevel.parse(args.level)
    design = _level_design(args, level)
    vc = _components(args, level)
    var = var_delta_formula(design, vc)
    _emit(
        {
            "schema": POWER_SCHEMA,
            "design": design.to_dict(),
            "delta": args.delta,
            "alpha": args.alpha,
            "var_delta": var,
            "power": power_lower_bound(args.delta, var, args.alpha),
        },
        args.out,
    )
    return 0


def cmd_sample_size(args) -> int:
    level = SubgroupLevel.parse(args.level)
    payload = {"schema": SAMPLE_SIZE_SCHEMA, "level": level.value, "target": args.target}
    try:
        if args.target == "difference":
            spec = PowerSpec(args.alpha, args.power, args.delta, one_sided_quantile=args.one_sided)
            vc = _components(args, level)
            if level is LEVEL_ONE:
                if args.n2 is None:
                    raise CliError("level 1 needs --n2")
                res, quantity = required_n_level1(spec, args.n3, args.n2, vc), "n"
            else:
                if args.n is None:
                    raise CliError("level 2 needs --n")
                res, quantity = required_N1_level2(spec, args.n3, args.n, vc), "N1"
        else:
            if args.delta_g is None or args.icc is None:
                raise CliError("--target subgroup needs --delta-g and --icc")
            spec = SubgroupPowerSpec(args.alpha, args.power, args.delta_g, two_sided_quantile=args.two_sided)
            icc = _icc(args.icc, level)
            if level is LEVEL_ONE:
                if args.n2 is None:
                    raise CliError("level 1 needs --n2")
                res, quantity = required_subgroup_n_level1(spec, args.n2, args.n3, icc), "N1g"
            else:
                if args.N1 is None:
                    raise CliError("level 2 needs --N1")
                res, quantity = required_subgroup_n_level2(spec, args.N1, args.n3, icc), "N2g"
    except Infeasible as exc:
        payload.update(status="infeasible", reason=exc.reason)
        _emit(payload, args.out)
        return 0
    payload.update(res.to_dict())
    payload["quantity"] = quantity
    payload[quantity] = res.size
    _emit(payload, args.out)
    return 0


_REPRO_FIELDS = (
    "table", "sizes", "setting", "delta", "empirical_power", "rejections", "replicates",
    "degenerate_count", "ci_low", "ci_high", "published", "abs_diff", "tolerance", "within",
)


def cmd_reproduce(args) -> int:
    workers = args.workers or default_workers()
    rows = reproduce_table(args.table, seed=args.seed, replicates=args.reps, workers=workers, alpha=args.alpha)
    summary = summarize(rows)
    records = [r.to_dict() for r in rows]
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(_REPRO_FIELDS)
            for rec in records:
                w.writerow(["x".join(map(str, rec["sizes"])) if k == "sizes" else rec[k] for k in _REPRO_FIELDS])
    if args.json:
        _emit({"schema": REPRODUCE_SCHEMA, "seed": args.seed, "rows": records, "summary": summary}, None)
    else:
        head = ("N3,N2,n" if args.table == 1 else "N3,n,N1")
        print(f"{head:>12} {'set':>3} {'delta':>5} {'ours':>6} {'pub':>6} {'|diff|':>7} {'tol':>7}  ok")
        for r in rows:
            sizes = ",".join(map(str, r.sizes))
            print(
                f"{sizes:>12} {r.setting:>3} {r.delta:>5g} {r.empirical_power:>6.3f} {r.published:>6.3f} "
                f"{r.abs_diff:>7.3f} {r.tolerance:>7.3f}  {'yes' if r.within else 'NO'}"
            )
        print(
            f"summary: {summary['within']}/{summary['rows']} rows within tolerance "
            f"({100 * summary['fraction_within']:.1f}%); "
            f"delta=1 rows >= {HIGH_POWER_FLOOR}: {'yes' if summary['high_power_ok'] else 'NO'}"
        )
    return 0 if summary["high_power_ok"] else 1


def _add_components(p: argparse.ArgumentParser, with_icc: bool = True) -> None:
    g = p.add_argument_group("variance components")
    ex = g.add_mutually_exclusive_group()
    ex.add_argument("--components", help="sigma3^2,sigma2^2,sigma_low^2,sigma_e^2")
    if with_icc:
        ex.add_argument("--icc", help="sigma^2,rho1,rho_1p,rho_2p,rho2 (level 1) or sigma^2,rho1,rho_2p,rho2 (level 2)")
    ex.add_argument("--setting", choices=("I", "II"), help="simulation setting I or II")
    g.add_argument("--sigma3-2", type=float)
    g.add_argument("--sigma2-2", type=float)
    g.add_argument("--sigma-grp2", type=float, help="level 1: subgroup-within-level-two variance")
    g.add_argument("--sigma1-2", type=float, help="level 2: level-two-unit variance")
    g.add_argument("--sigma-e2", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subgroup-crt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset to CSV plus a JSON sidecar")
    p.add_argument("--level", type=int, choices=(1, 2), required=True)
    p.add_argument("--n3", type=int, required=True, help="level-three units per arm")
    p.add_argument("--mid", type=int, required=True, help="level-two units per level-three unit, both subgroups (level 2: 2n)")
    p.add_argument("--low", type=int, required=True, help="level-one units per level-two unit, both subgroups (level 1: 2n)")
    for name in ("beta0", "tau", "xi", "delta"):
        p.add_argument(f"--{name}", type=float, default=0.0)
    _add_components(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV path; the sidecar replaces the suffix with .json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="estimate and test from a CSV file")
    p.add_argument("csv")
    p.add_argument("--level", type=int, choices=(1, 2), required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--printed-ss0", action="store_true", help="grand-mean error sum of squares (level 2)")
    p.add_argument("--printed-sigma2", action="store_true", help="1/n divisor for the level-two variance (level 1)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("power", help="analytic power lower bound")
    p.add_argument("--level", type=int, choices=(1, 2), required=True)
    p.add_argument("--n3", type=int, required=True)
    p.add_argument("--n2", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--N1", type=int)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    _add_components(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("sample-size", help="sample size for a target power")
    p.add_argument("--level", type=int, choices=(1, 2), required=True)
    p.add_argument("--target", choices=("difference", "subgroup"), default="difference",
                   help="differential effect (default) or one subgroup's effect")
    p.add_argument("--n3", type=int, required=True)
    p.add_argument("--n2", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--N1", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-g", type=float, help="|delta_g| / sigma for --target subgroup")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--power", type=float, default=0.8)
    p.add_argument("--one-sided", action="store_true", help="use z_{1-alpha} for the differential effect")
    p.add_argument("--two-sided", action="store_true", help="use z_{1-alpha/2} for --target subgroup")
    _add_components(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_size)

    p = sub.add_parser("reproduce", help="rerun the published simulation tables")
    p.add_argument("--table", type=int, choices=(1, 2), required=True)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--workers", type=int, help="worker processes (default from SUBGROUP_CRT_WORKERS or 1)")
    p.add_argument("--csv", help="also write the comparison table to this CSV file")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sample-size" and args.target == "difference" and args.delta is None:
        parser.error("sample-size needs --delta")
    try:
        return args.func(args)
    except SubgroupCRTError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "IOError", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
