from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence

from . import __version__
from .action_calabi import ActionContext, map_summary, path_independence_check, power_map_scaling_check
from .annulus_maps import AnnulusPoint, LiftedMap, check_admissibility
from .bounds import (
    MapInvariants,
    RationalFlags,
    disk_collapse_stats,
    hypothesis_classifier,
    penultimate_table,
    perturbation_plan,
)
from .config import OUTPUT_FORMATS, PRECISION_MODES, AppConfig, load_config
from .contact_check import contact_report
from .ech_lattice import (
    SLOPE_SUM_TOL,
    Generator,
    SlopeData,
    ech_index,
    ech_index_oracle,
    generator_table,
    generators_by_index,
    n_sequence,
    nk_lower_bound_check,
    relative_invariant_constants,
    width_ranks,
)
from .errors import MapSpecError, MeanActionError, UsageError
from .mapspec import load_map_spec
from .orbit_search import SearchConfig, search_periodic_orbits, verify_main_inequality
from .reports import Report, render
from .verify_suite import run_suite

LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
ORBIT_COLUMNS = ("period", "winding", "x0", "y0", "total_action", "mean_action", "residual", "family_suspected")
CONTACT_RETURN_TOL = 1e-8
CONTACT_VOLUME_TOL = 1e-6
# a command-line slope pair within this of p is snapped to b = p - a
SLOPE_INPUT_TOL = 1e-5


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


def _add_slopes(parser: argparse.ArgumentParser, with_p: bool = True) -> None:
    parser.add_argument("--a", type=float, required=True, help="Outer slope y+")
    parser.add_argument("--b", type=float, help="Inner slope -y- + F (default: p - a)")
    if with_p:
        parser.add_argument("--p", type=int, required=True, help="Lens-space order a + b")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meanaction", description="Action, Calabi invariant and ECH lattice tools")
    parser.add_argument("--config", default="config.toml", help="Path to config file")
    parser.add_argument("--format", choices=OUTPUT_FORMATS, help="Report format (default from config)")
    parser.add_argument("--seed", type=int, help="Seed for randomised checks")
    parser.add_argument("--precision", choices=PRECISION_MODES, help="Arithmetic for the ECH lattice")
    parser.add_argument("--threads", type=int, help="Worker cap (also MEANACTION_THREADS)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    parser.add_argument("--version", action="version", version=f"meanaction {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Flux, Calabi invariant, boundary values and admissibility")
    analyze.add_argument("mapspec")
    analyze.add_argument("--offset", type=int, default=0, help="Extra full turns added to the lift")
    analyze.add_argument("--power", type=int, help="Also compare the q-th power against q times the invariants")

    orbits = sub.add_parser("orbits", help="Periodic orbits with their mean actions")
    orbits.add_argument("mapspec")
    orbits.add_argument("--qmax", type=int, help="Largest period searched")
    orbits.add_argument("--winding", type=int, nargs=2, metavar=("LO", "HI"), help="Winding range")
    orbits.add_argument("--seed-grid", type=int, nargs=2, metavar=("NX", "NY"), help="Newton seed grid")
    orbits.add_argument("--witness", action="store_true", help="Report the mean-action inequality witness")

    contact = sub.add_parser("contact-check", help="Contact form on the mapping torus")
    contact.add_argument("mapspec")
    contact.add_argument("--offset", type=int, default=0, help="Extra full turns added to the lift")
    contact.add_argument("--samples", type=int, default=100, help="Random points per pointwise check")

    ech = sub.add_parser("ech", help="ECH lattice combinatorics of L(p, p-1)")
    ech_sub = ech.add_subparsers(dest="ech_command", required=True)
    index = ech_sub.add_parser("index", help="ECH index of one generator")
    _add_slopes(index)
    index.add_argument("--mplus", type=int, required=True)
    index.add_argument("--mminus", type=int, required=True)
    index.add_argument("--oracle", action="store_true", help="Also count lattice points directly")
    order = ech_sub.add_parser("order", help="Generators sorted by index")
    _add_slopes(order)
    order.add_argument("--max-index", type=int, required=True)
    wk = ech_sub.add_parser("wk", help="Ranks w(k) of the widths in the N-sequence")
    _add_slopes(wk)
    wk.add_argument("--kmax", type=int, required=True)
    nseq = ech_sub.add_parser("nseq", help="Sorted nonnegative combinations of a and b")
    _add_slopes(nseq, with_p=False)
    nseq.add_argument("--count", type=int, required=True)
    nseq.add_argument("--reciprocal", action="store_true", help="Use 1/a and 1/b instead")
    bound = ech_sub.add_parser("bound", help="Lower bound on N_w(k)")
    _add_slopes(bound)
    bound.add_argument("--kmax", type=int, required=True)

    penultimate = sub.add_parser("bound", help="Harmonic-mean upper bound on the smallest mean action")
    penultimate.add_argument("mapspec")
    penultimate.add_argument("--N", type=int, nargs="+", default=[0], help="Offsets to tabulate")

    classify = sub.add_parser("classify", help="Case split of the hypothesis and disk-collapse criterion")
    classify.add_argument("mapspec")
    classify.add_argument("--y-plus-rational", type=_flag, help="Declare y+ rational (true/false)")
    classify.add_argument("--y-minus-rational", type=_flag, help="Declare y- rational (true/false)")
    classify.add_argument("--inner-radius", type=float, default=0.0, help="Collar radius for the collapse")
    classify.add_argument("--perturb", type=float, nargs=2, metavar=("DELTA", "EPSILON"), help="Build the perturbing shear")

    suite = sub.add_parser("verify-suite", help="Acceptance checks")
    suite.add_argument("--quick", action="store_true", help="Reduced sizes")
    return parser


def _apply_overrides(config: AppConfig, args: argparse.Namespace) -> AppConfig:
    run = config.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if args.threads is not None:
        run = replace(run, threads=args.threads)
    if args.format is not None:
        run = replace(run, output_format=args.format)
    ech = config.ech if args.precision is None else replace(config.ech, precision=args.precision)
    return replace(config, run=run, ech=ech)


def _context(m: LiftedMap, offset: int, config: AppConfig) -> ActionContext:
    return ActionContext(m, offset, config.quadrature, config.run.threads or None)


def _load(path: str, config: AppConfig) -> LiftedMap:
    return load_map_spec(path, config.integrator)


def _invariants(ctx: ActionContext) -> MapInvariants:
    return MapInvariants.from_context(ctx).shifted(ctx.y_plus_offset)


def _slopes(args: argparse.Namespace, config: AppConfig) -> SlopeData:
    a, p = args.a, args.p
    b = p - a if args.b is None else args.b
    gap = abs(a + b - p)
    if gap > SLOPE_INPUT_TOL:
        raise UsageError(f"a + b = {a + b!r} is not p = {p}")
    if gap > SLOPE_SUM_TOL:
        LOGGER.warning("Replacing b = %r by p - a = %r", b, p - a)
        b = p - a
    ech = config.ech
    return SlopeData(a, b, p, ech.guard_eps, ech.precision, ech.digits)


def _analyze(args: argparse.Namespace, config: AppConfig) -> Report:
    m = _load(args.mapspec, config)
    ctx = _context(m, args.offset, config)
    summary = map_summary(ctx)
    inv = MapInvariants(m.y_plus, m.y_minus, summary["flux"], summary["calabi"] - args.offset).shifted(args.offset)
    verdict = hypothesis_classifier(inv, max_denominator=config.ech.rational_max_denominator)
    samples = [AnnulusPoint(x, y) for x, y in ((0.5, 1.0), (0.0, 3.0), (-0.5, 5.0))]
    payload = dict(summary)
    payload.update(
        {
            # every invariant refers to the lift with the offset applied
            "y_plus": inv.y_plus,
            "y_minus": inv.y_minus,
            "flux": inv.F,
            "calabi": inv.calabi,
            "invariants": inv.as_dict(),
            "hypothesis_main_theorem": verdict.hypothesis_holds,
            "admissibility": check_admissibility(m, h=config.quadrature.fd_step).as_dict(),
            "path_independence": path_independence_check(ctx, samples),
            "disk_collapse": disk_collapse_stats(inv).as_dict(),
        }
    )
    if args.power is not None:
        payload["power_scaling"] = power_map_scaling_check(ctx, args.power).as_dict()
    return Report("analyze", payload)


def _orbit_row(orbit) -> Dict[str, object]:
    start = orbit.points[0]
    return {
        "period": orbit.period,
        "winding": orbit.winding,
        "x0": start.x,
        "y0": start.y,
        "total_action": orbit.total_action,
        "mean_action": orbit.mean_action,
        "residual": orbit.residual,
        "family_suspected": orbit.family_suspected,
    }


def _orbits(args: argparse.Namespace, config: AppConfig) -> Report:
    m = _load(args.mapspec, config)
    overrides: Dict[str, object] = {"threads": config.run.threads or None, "fd_step": config.quadrature.fd_step}
    if args.winding:
        overrides["winding_range"] = tuple(args.winding)
    if args.seed_grid:
        overrides["seed_grid"] = tuple(args.seed_grid)
    cfg = SearchConfig.from_settings(config.search, q_max=args.qmax, **overrides)
    ctx = _context(m, 0, config)
    if args.witness:
        report = verify_main_inequality(m, cfg, ctx=ctx)
        rows = [_orbit_row(report.witness_orbit)] if report.witness_orbit else []
        return Report("orbits", report.as_dict(), rows, ORBIT_COLUMNS, passed=report.inequality_holds is not False)
    result = search_periodic_orbits(m, cfg, ctx)
    payload = {
        "q_max": cfg.q_max,
        "orbits": [o.as_dict() for o in result.orbits],
        "dropped_seeds": result.dropped_seeds,
        "families": result.families,
    }
    return Report("orbits", payload, [_orbit_row(o) for o in result.orbits], ORBIT_COLUMNS)


def _contact(args: argparse.Namespace, config: AppConfig) -> Report:
    m = _load(args.mapspec, config)
    report = contact_report(_context(m, args.offset, config), args.offset, args.samples, config.run.seed)
    passed = (
        report.contact["min_wedge_coeff"] > 0.0
        and report.return_time_deviation <= CONTACT_RETURN_TOL
        and report.volume["diff"] <= CONTACT_VOLUME_TOL
    )
    return Report("contact-check", report.as_dict(), passed=passed)


def _with_guard(rows: Sequence[Dict[str, object]], s: SlopeData) -> List[Dict[str, object]]:
    return [dict(row, guard_eps=s.guard_eps) for row in rows]


def _ech_index(args: argparse.Namespace, config: AppConfig) -> Report:
    s = _slopes(args, config)
    g = Generator.from_exponents(args.mplus, args.mminus, s.p)
    payload: Dict[str, object] = {
        "slopes": s.as_dict(),
        "generator": g.as_dict(),
        "label": g.label,
        "index": ech_index(s, g),
        "relative_invariants": relative_invariant_constants(s, g.d),
        "guard_eps": s.guard_eps,
    }
    passed = True
    if args.oracle:
        payload["oracle_index"] = ech_index_oracle(s, g)
        passed = payload["oracle_index"] == payload["index"]
    return Report("ech index", payload, passed=passed)


def _ech_order(args: argparse.Namespace, config: AppConfig) -> Report:
    s = _slopes(args, config)
    rows = _with_guard(generator_table(s, generators_by_index(s, args.max_index)), s)
    columns = ("index", "m_plus", "m_minus", "d", "width", "f_plus", "f_minus", "sum", "guard_eps")
    return Report("ech order", {"slopes": s.as_dict(), "count": len(rows)}, rows, columns)


def _ech_wk(args: argparse.Namespace, config: AppConfig) -> Report:
    s = _slopes(args, config)
    table = width_ranks(s, args.kmax)
    rows = [
        {
            "k": k,
            "w": int(table.ranks[k]),
            "m_plus": g.m_plus,
            "m_minus": g.m_minus,
            "width": float(table.widths[k]),
            "N": table.N(k),
            "guard_eps": s.guard_eps,
        }
        for k, g in enumerate(table.generators)
    ]
    payload = {"slopes": s.as_dict(), "w": [int(r) for r in table.ranks]}
    return Report("ech wk", payload, rows, ("k", "w", "m_plus", "m_minus", "width", "N", "guard_eps"))


def _ech_nseq(args: argparse.Namespace, config: AppConfig) -> Report:
    if args.b is None:
        raise UsageError("ech nseq needs both --a and --b")
    alpha, beta = (1.0 / args.a, 1.0 / args.b) if args.reciprocal else (args.a, args.b)
    values = n_sequence(alpha, beta, args.count)
    guard = config.ech.guard_eps
    rows = [{"k": k, "N": v, "guard_eps": guard} for k, v in enumerate(values)]
    payload = {"alpha": alpha, "beta": beta, "count": args.count, "guard_eps": guard}
    return Report("ech nseq", payload, rows, ("k", "N", "guard_eps"))


def _ech_bound(args: argparse.Namespace, config: AppConfig) -> Report:
    s = _slopes(args, config)
    report = nk_lower_bound_check(s, args.kmax)
    rows = _with_guard([r.as_dict() for r in report.rows], s)
    payload = dict(report.as_dict(), slopes=s.as_dict())
    columns = ("k", "N", "X", "quadratic_ok", "root_ok", "final_ok", "guard_eps")
    return Report("ech bound", payload, rows, columns, passed=report.all_pass)


ECH_COMMANDS: Dict[str, Callable[[argparse.Namespace, AppConfig], Report]] = {
    "index": _ech_index,
    "order": _ech_order,
    "wk": _ech_wk,
    "nseq": _ech_nseq,
    "bound": _ech_bound,
}


def _ech(args: argparse.Namespace, config: AppConfig) -> Report:
    return ECH_COMMANDS[args.ech_command](args, config)


def _bound(args: argparse.Namespace, config: AppConfig) -> Report:
    m = _load(args.mapspec, config)
    inv = _invariants(_context(m, 0, config))
    rows = [b.as_dict() for b in penultimate_table(inv, args.N)]
    return Report("bound", {"invariants": inv.as_dict(), "bounds": rows}, rows)


def _classify(args: argparse.Namespace, config: AppConfig) -> Report:
    m = _load(args.mapspec, config)
    inv = _invariants(_context(m, 0, config))
    flags = RationalFlags(args.y_plus_rational, args.y_minus_rational)
    verdict = hypothesis_classifier(inv, flags, config.ech.rational_max_denominator)
    payload: Dict[str, object] = {
        "invariants": inv.as_dict(),
        "classification": verdict.as_dict(),
        "disk_collapse": disk_collapse_stats(inv, args.inner_radius).as_dict(),
    }
    if args.perturb:
        delta, epsilon = args.perturb
        payload["perturbation"] = perturbation_plan(verdict.case, inv, delta, epsilon).as_dict()
    return Report("classify", payload)


def _verify_suite(args: argparse.Namespace, config: AppConfig) -> Report:
    suite = run_suite(config, quick=args.quick)
    rows = [{"name": c.name, "passed": c.passed} for c in suite.checks]
    return Report("verify-suite", suite.as_dict(), rows, ("name", "passed"), passed=suite.passed)


COMMANDS: Dict[str, Callable[[argparse.Namespace, AppConfig], Report]] = {
    "analyze": _analyze,
    "orbits": _orbits,
    "contact-check": _contact,
    "ech": _ech,
    "bound": _bound,
    "classify": _classify,
    "verify-suite": _verify_suite,
}


def _report_error(exc: MeanActionError) -> None:
    sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT, force=True)
        config = _apply_overrides(load_config(args.config), args)
        report = COMMANDS[args.command](args, config)
    except (UsageError, MapSpecError) as exc:
        _report_error(exc)
        return 1
    except MeanActionError as exc:
        LOGGER.error("%s failed: %s", exc.code, exc)
        _report_error(exc)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except ValueError as exc:
        _report_error(UsageError(str(exc)))
        return 1
    sys.stdout.write(render(report, config))
    return 0 if report.passed else 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
