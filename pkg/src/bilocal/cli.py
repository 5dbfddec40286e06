"""Command-line interface: check, simulate, export, selftest."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from .oracle import (ModelError, entanglement_swapping_model, parse_model, random_classical_bilocal,
                     simulate_distribution)
from .relaxation import (INFLATION, POLARIZATION, IndexSetTooLarge, RelaxationError, RelaxationParams,
                         assemble, solve_level)
from .scenario import DistributionError, Scenario, parse_distribution, serialize_distribution, uniform_distribution
from .sdp import NUMERICAL_FAILURE, SolverOptions, export_sdpa

EXIT_INPUT = 1
EXIT_SIZE = 2
EXIT_SOLVER = 3

DEFAULT_N = {INFLATION: 2, POLARIZATION: 4}
MODELS = ("entanglement-swapping", "classical", "uniform")

log = logging.getLogger("bilocal")


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _triple(text: str) -> tuple[int, int, int]:
    parts = [int(t) for t in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated integers, e.g. 2,1,2")
    return tuple(parts)


def _load_distribution(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}", EXIT_INPUT)
    try:
        return parse_distribution(text)
    except DistributionError as e:
        raise CliError(f"{path}: {e}", EXIT_INPUT)


def _params(args, hierarchy: str) -> RelaxationParams:
    n = args.n if args.n is not None else DEFAULT_N[hierarchy]
    try:
        return RelaxationParams(hierarchy, n, args.k, args.fact_depth, cap=args.cap)
    except RelaxationError as e:
        raise CliError(str(e), EXIT_INPUT)


def _hierarchies(name: str) -> list[str]:
    return [INFLATION, POLARIZATION] if name == "both" else [name]


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _fmt(v) -> str:
    return "nan" if v is None else repr(float(v))


def _verdict(bound, epsilon: float) -> str:
    return "incompatible" if bound is not None and bound > epsilon else "compatible-at-this-level"


def run_check(args) -> int:
    d = _load_distribution(args.input)
    params = [_params(args, h) for h in _hierarchies(args.hierarchy)]
    opts = SolverOptions()
    lines, results = [], []
    for p in params:
        try:
            res = solve_level(d, p, opts)
        except IndexSetTooLarge as e:
            raise CliError(str(e), EXIT_SIZE)
        log.info("%s", res.problem.summary())
        if res.status == NUMERICAL_FAILURE:
            raise CliError(f"solver failed at hierarchy={p.hierarchy}, n={p.n}, k={p.k}", EXIT_SOLVER)
        results.append(res)
        lines.append(f"hierarchy={p.hierarchy}, n={p.n}, k={p.k}, value={_fmt(res.value)}, "
                     f"certified_lower_bound={_fmt(res.certified)}, status={res.status}, "
                     f"verdict={_verdict(res.certified, args.epsilon)}")
    if len(results) > 1:
        best = max(results, key=lambda r: r.certified)
        ns = "/".join(str(p.n) for p in params)
        status = "optimal" if all(r.status == "optimal" for r in results) else best.status
        lines.append(f"hierarchy=both, n={ns}, k={args.k}, value={_fmt(max(r.value for r in results))}, "
                     f"certified_lower_bound={_fmt(best.certified)}, status={status}, "
                     f"verdict={_verdict(best.certified, args.epsilon)}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def run_simulate(args) -> int:
    if args.model_file:
        try:
            model = parse_model(Path(args.model_file).read_text())
        except (OSError, ValueError) as e:
            raise CliError(f"{args.model_file}: {e}", EXIT_INPUT)
        d = simulate_distribution(model)
    elif args.model == "entanglement-swapping":
        d = simulate_distribution(entanglement_swapping_model())
    elif args.model in ("classical", "uniform"):
        try:
            scen = Scenario(args.settings, args.outcomes)
        except ValueError as e:
            raise CliError(str(e), EXIT_INPUT)
        if args.model == "classical":
            d = random_classical_bilocal(args.seed, scen)
        else:
            d = uniform_distribution(scen)
    else:
        raise CliError(f"unknown model {args.model!r}; choose from {', '.join(MODELS)}", EXIT_INPUT)
    _write(serialize_distribution(d), args.out)
    return 0


def run_export(args) -> int:
    if args.hierarchy == "both":
        raise CliError("export needs a single hierarchy", EXIT_INPUT)
    d = _load_distribution(args.input)
    params = _params(args, args.hierarchy)
    try:
        problem = assemble(d, params)
    except IndexSetTooLarge as e:
        raise CliError(str(e), EXIT_SIZE)
    summary = problem.summary()
    print(summary, file=sys.stderr)
    comments = [summary, f"objective constant {problem.objective_const!r}"]
    _write(export_sdpa(problem.sdp, comments), args.out)
    return 0


def run_selftest(args) -> int:
    from .acceptance import run_all
    opts = SolverOptions(gap_tol=args.gap_tol) if args.gap_tol is not None else None
    results = run_all(solver_options=opts, corpus_dir=args.corpus, quick=args.quick)
    for r in results:
        print(r.line(), flush=True)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bilocal", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def level_flags(p):
        p.add_argument("--input", required=True, help="distribution JSON file, or - for stdin")
        p.add_argument("--hierarchy", choices=(POLARIZATION, INFLATION, "both"), default=INFLATION)
        p.add_argument("--n", type=int, default=None, help="copy count (default 2 inflation, 4 polarization)")
        p.add_argument("--k", type=int, default=2, help="word length level")
        p.add_argument("--fact-depth", type=int, default=None, help="factorization word depth (default k-1)")
        p.add_argument("--cap", type=int, default=2000, help="maximum moment index set size")
        p.add_argument("--out", default=None)

    p = sub.add_parser("check", help="solve a relaxation level and report a verdict")
    level_flags(p)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.set_defaults(func=run_check)

    p = sub.add_parser("simulate", help="write the distribution of a built-in or saved model")
    p.add_argument("model", nargs="?", help=f"one of {', '.join(MODELS)}")
    p.add_argument("--model-file", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--settings", type=_triple, default=(2, 2, 2))
    p.add_argument("--outcomes", type=_triple, default=(2, 2, 2))
    p.add_argument("--out", default=None)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("export", help="write the assembled SDP in SDPA sparse format")
    level_flags(p)
    p.set_defaults(func=run_export)

    p = sub.add_parser("selftest", help="run the acceptance checks")
    p.add_argument("--corpus", default=None, help="directory of corpus distributions (regenerated if missing)")
    p.add_argument("--gap-tol", type=float, default=None, help="override the solver duality-gap tolerance")
    p.add_argument("--quick", action="store_true", help="skip the largest instances")
    p.set_defaults(func=run_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate" and not (args.model or args.model_file):
        print("error: give a model name or --model-file", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = int(os.environ.get("BILOC_THREADS", "0"))
    except ValueError:
        print("error: BILOC_THREADS must be an integer", file=sys.stderr)
        return EXIT_INPUT
    limit = threadpool_limits(threads) if threads > 0 else nullcontext()
    try:
        with limit:
            return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ModelError, DistributionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
