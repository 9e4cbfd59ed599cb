"""Command-line front end.

Exit codes: 0 success or passing experiment, 1 failed experiment or self-test,
2 usage or configuration error, 3 internal-consistency error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from contextlib import ExitStack
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from unittest import mock

from . import __version__, asymptotics, combinatorics, harness, moments
from .errors import ConsistencyError, HpypError
from .params import Params

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONSISTENCY = 0, 1, 2, 3


@dataclass
class RunManifest:
    tool: str
    version: str
    command: str
    config: dict
    seed: int | None = None
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _csv_block(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit_json(manifest: RunManifest, result: dict, out=None) -> str:
    text = json.dumps({"manifest": manifest.to_dict(), "result": result}, indent=2, allow_nan=False)
    print(text, file=out or sys.stdout)
    return text


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _common(p, theta=False):
    p.add_argument("--m", type=int, required=True, help="homozygosity order")
    p.add_argument("--L", type=int, default=1, help="number of groups")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    if theta:
        p.add_argument("--theta", type=float, required=True)
    p.add_argument("--c", type=float, required=True, help="ratio theta0 / theta")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _time_change(p):
    p.add_argument("--time-change", choices=asymptotics.TIME_CHANGES, default="shared",
                   help="one gamma time for all groups, or one per group")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hpyp-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("coeffs", help="coefficient table A, A~, C, B")
    _common(p)
    p = sub.add_parser("variance", help="limiting variance and its components")
    _common(p)
    _time_change(p)
    p = sub.add_parser("mean", help="exact E[H_{m,L}] with per-j terms")
    _common(p, theta=True)
    _time_change(p)
    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("config_file")
    p.add_argument("--out", dest="out_file", default=None, help="report path (default: stdout)")
    p = sub.add_parser("selftest", help="fast invariant checks")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--inject-gfc-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def _manifest(args, config: dict, seed=None) -> RunManifest:
    return RunManifest(tool="hpyp-lab", version=__version__, command=args.command,
                       config=config, seed=seed, started=_now())


def cmd_coeffs(args) -> int:
    t = asymptotics.coeff_table(args.m, args.L, args.alpha, args.beta, args.c)
    if args.format == "csv":
        blocks = [
            _csv_block(["j", "A_j"], enumerate(t.A.tolist(), start=1)),
            _csv_block(["j", "A_tilde_j"], enumerate(t.A_tilde.tolist(), start=1)),
            _csv_block(["composition", "C"], [("-".join(map(str, k)), v) for k, v in t.C.items()]),
            _csv_block(["k", "B_k"], enumerate(t.B.tolist(), start=1)),
        ]
        sys.stdout.write("\n".join(blocks))
        return EXIT_OK
    m = _manifest(args, {k: getattr(args, k) for k in ("m", "L", "alpha", "beta", "c")})
    m.finished = _now()
    _emit_json(m, t.to_dict())
    return EXIT_OK


def cmd_variance(args) -> int:
    cfg = {k: getattr(args, k) for k in ("m", "L", "alpha", "beta", "c", "time_change")}
    b = asymptotics.sigma2_total(args.m, args.L, args.alpha, args.beta, args.c, args.time_change)
    if args.format == "csv":
        sys.stdout.write(_csv_block(["component", "value"], b.to_dict().items()))
        return EXIT_OK
    m = _manifest(args, cfg)
    m.finished = _now()
    _emit_json(m, b.to_dict())
    return EXIT_OK


def cmd_mean(args) -> int:
    params = Params.from_ratio(args.alpha, args.beta, args.theta, args.c)
    r = moments.ev_homozygosity_hpyp(args.m, args.L, params, args.time_change)
    if args.format == "csv":
        sys.stdout.write(_csv_block(["j", "term"], r.terms.items()))
        sys.stdout.write("\n")
        sys.stdout.write(_csv_block(["quantity", "value"], [("value", r.value), ("log_value", r.log_value)]))
        return EXIT_OK
    cfg = {k: getattr(args, k) for k in ("m", "L", "alpha", "beta", "theta", "c", "time_change")}
    m = _manifest(args, cfg)
    m.finished = _now()
    _emit_json(m, r.to_dict())
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        with open(args.config_file) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise _UsageError(f"cannot read config {args.config_file}: {exc}") from exc
    if not isinstance(raw, dict):
        raise _UsageError("config must be a JSON object")
    config = harness.ExperimentConfig.from_dict(raw)
    m = _manifest(args, config.to_dict(), seed=config.master_seed)
    report = harness.run_experiment(config)
    m.finished = _now()
    if args.out_file:
        m.outputs.append(args.out_file)
        with open(args.out_file, "w") as fh:
            _emit_json(m, report.to_dict(), out=fh)
        print(f"{config.kind}: {'pass' if report.passed else 'FAIL'} -> {args.out_file}", file=sys.stderr)
    else:
        _emit_json(m, report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAIL


def _close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def _selftest_checks():
    C = combinatorics
    betas = (0.1, 0.3, 0.5, 0.7, 0.9)

    def gfc_triple():
        return all(
            _close(C.gfc(m, j, b), C.gfc_direct(m, j, b), 1e-9)
            and _close(C.gfc(m, j, b), C.gfc_stirling_expansion(m, j, b), 1e-9)
            for b in betas for m in range(1, 13) for j in range(1, m + 1)
        )

    def gfc_remark():
        return all(_close(C.gfc(m, 1, b), b * C.rising(1 - b, m - 1), 1e-12)
                   for b in betas for m in range(1, 13))

    def stirling_limit():
        b = 1e-6
        return all(_close(C.gfc(m, j, b) / b**j, C.stirling_first_unsigned(m, j), 1e-4)
                   for m in range(1, 9) for j in range(1, m + 1))

    def rising_expansion():
        return all(
            _close(sum(C.stirling_first_unsigned(n, k) * x**k for k in range(n + 1)), C.rising(x, n), 1e-10)
            for x in (1.0, 2.0, 0.5) for n in range(11)
        )

    def partial_sums():
        for a in (0.1, 0.4, 0.7):
            for t0 in (0.5, 5.0, 50.0):
                for j in (1, 2, 3):
                    terms = [moments.ev_vk_power(1, j, a, t0)]
                    for s in range(1, 1000):
                        terms.append(terms[-1] * (t0 + s * a) / (t0 + s * a + j))
                    direct = math.fsum(terms)
                    if not _close(moments.ev_partial_sum(1000, j, a, t0), direct, 1e-10):
                        return False
        return True

    def l1_collapse():
        for b in (0.3, 0.6):
            for m in (2, 3, 4):
                t = asymptotics.coeff_table(m, 1, 0.4, b, 1.5)
                if not all(_close(t.A[j - 1], C.gfc(m, j, b), 1e-12) for j in range(1, m + 1)):
                    return False
                if not all(_close(t.A_tilde[j - 1], C.gfc(2 * m, j, b), 1e-12) for j in range(1, 2 * m + 1)):
                    return False
                if not _close(asymptotics.delta_method_term(m, 1, 0.4, b, 1.5), m * m, 1e-12):
                    return False
        return True

    def handa():
        return all(
            _close(asymptotics.sigma2_total(m, 1, a, b, 1e6).total, asymptotics.handa_limit(m, b), 1e-3)
            for m in (2, 3) for a in (0.3, 0.6) for b in (0.3, 0.6)
        )

    return [
        ("gfc recurrence vs direct sum vs Stirling expansion", gfc_triple),
        ("gfc(m, 1) = beta (1-beta)_(m-1)", gfc_remark),
        ("gfc / beta^j -> unsigned Stirling numbers", stirling_limit),
        ("Stirling expansion of rising factorials", rising_expansion),
        ("partial-sum telescoping identity", partial_sums),
        ("L = 1 coefficient collapse", l1_collapse),
        ("Handa limit of the total variance", handa),
    ]


def cmd_selftest(args) -> int:
    failures = 0
    with ExitStack() as stack:
        if args.inject_gfc_fault:
            real = combinatorics.gfc
            stack.enter_context(mock.patch.object(
                combinatorics, "gfc", lambda m, j, b: real(m, j, b) * (1 + 1e-6)))
        for name, check in _selftest_checks():
            t0 = time.perf_counter()
            try:
                ok = bool(check())
            except HpypError as exc:
                ok, name = False, f"{name} ({exc})"
            failures += not ok
            if args.verbose:
                print(f"{'ok  ' if ok else 'FAIL'} {name} [{time.perf_counter() - t0:.3f}s]")
    print(f"selftest: {'all checks passed' if not failures else f'{failures} check(s) failed'}")
    return EXIT_OK if not failures else EXIT_FAIL


_COMMANDS = {
    "coeffs": cmd_coeffs,
    "variance": cmd_variance,
    "mean": cmd_mean,
    "experiment": cmd_experiment,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"hpyp-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConsistencyError as exc:
        print(f"hpyp-lab: internal consistency error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (HpypError, ValueError) as exc:
        print(f"hpyp-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
