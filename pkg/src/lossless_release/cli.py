"""Command-line interface.

Subcommands: release, histogram, fact-release, account, suite, fig2.
Exit codes: 0 success, 1 statistical suite failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import accounting, histogram
from .experiment import ExperimentConfig, parse_grid_spec, rows_to_csv, simulate
from .factorization import FactorizedQuery, FactLedger, fact_release
from .ledger import Ledger, LedgerFormatError, ledger_init
from .suite import DEFAULT_SEED, run_suite

SEED_ENV = "LOSSLESS_DP_SEED"


class UsageError(Exception):
    pass


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def make_rng(seed):
    return np.random.default_rng(resolve_seed(seed))


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def parse_rho_inf(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def read_vector(arg: str) -> np.ndarray:
    """Inline comma list, or a path to a JSON list / one-column CSV."""
    if os.path.exists(arg):
        with open(arg) as fh:
            text = fh.read()
        if arg.endswith(".json"):
            return np.asarray(json.loads(text), dtype=float)
        return np.asarray([float(row[0]) for row in csv.reader(io.StringIO(text)) if row], dtype=float)
    return np.asarray(parse_floats(arg))


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        return np.asarray([[float(v) for v in row] for row in csv.reader(fh) if row], dtype=float)


def read_histogram(path) -> histogram.Histogram:
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        doc = json.loads(text)
        return histogram.Histogram(int(doc["d"]), {int(k): v for k, v in doc["counts"].items()})
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if rows and len(rows[0]) >= 2:
        # index,count pairs; the domain size comes from a "d" row or max index + 1
        counts, d = {}, None
        for row in rows:
            if row[0] == "d":
                d = int(row[1])
            else:
                counts[int(row[0])] = float(row[1])
        return histogram.Histogram(d if d is not None else max(counts) + 1, counts)
    return histogram.Histogram.from_dense([float(r[0]) for r in rows])


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def emit(args, payload, csv_rows=None, header=None):
    if args.format == "csv" and csv_rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(csv_rows)
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------


def cmd_release(args):
    rng = make_rng(args.seed)
    if args.init:
        if args.value is None:
            raise UsageError("--init needs --value")
        rho_inf = parse_rho_inf(args.rho_inf)
        if math.isinf(rho_inf) and not args.trusted:
            raise UsageError("rho_inf=inf keeps the exact query value; pass --trusted to store it")
        ledger = ledger_init(read_vector(args.value), args.sensitivity, args.mechanism, rho_inf, rng)
        trusted = args.trusted
    else:
        with open(args.ledger) as fh:
            doc = json.load(fh)
        ledger = Ledger.from_document(doc)
        trusted = "secret" in doc
    out = {}
    if args.rho is not None:
        value = ledger.release(args.rho, rng)
        out = {"rho": args.rho, "value": value.tolist()}
    with open(args.ledger, "w") as fh:
        fh.write(ledger.dumps(trusted=trusted))
    if out:
        emit(args, out, [[i, v] for i, v in enumerate(out["value"])], ["index", "value"])


def load_fact_ledger(doc) -> tuple[FactLedger, bool]:
    inner = Ledger.from_document(doc)
    query = FactorizedQuery(np.asarray(doc["L"]), np.asarray(doc["R"]), inner.sensitivity)
    trusted = "secret" in doc
    if "offset" in doc:
        offset = np.asarray(doc["offset"], dtype=float)
    elif math.isinf(inner.rho_inf):
        offset = None
    else:
        offset = np.zeros(query.L.shape[0])
    return FactLedger(query, inner, offset), trusted


def dump_fact_ledger(ledger: FactLedger, trusted: bool) -> str:
    doc = ledger.inner.to_document(trusted)
    doc["L"] = ledger.query.L.tolist()
    doc["R"] = ledger.query.R.tolist()
    if ledger.offset is not None and (trusted or not math.isinf(ledger.inner.rho_inf)):
        doc["offset"] = ledger.offset.tolist()
    return json.dumps(doc, indent=1)


def cmd_fact_release(args):
    from .factorization import fact_init

    rng = make_rng(args.seed)
    if args.init:
        if args.x is None:
            raise UsageError("--init needs --x")
        if args.matrices:
            with open(args.matrices) as fh:
                m = json.load(fh)
            L, R = np.asarray(m["L"], dtype=float), np.asarray(m["R"], dtype=float)
        elif args.L and args.R:
            L, R = read_matrix_csv(args.L), read_matrix_csv(args.R)
        else:
            raise UsageError("--init needs --matrices or both --L and --R")
        rho_inf = parse_rho_inf(args.rho_inf)
        if math.isinf(rho_inf) and not args.trusted:
            raise UsageError("rho_inf=inf keeps A x; pass --trusted to store it")
        ledger = fact_init(FactorizedQuery(L, R, args.sensitivity), read_vector(args.x), rho_inf, rng)
        trusted = args.trusted
    else:
        with open(args.ledger) as fh:
            ledger, trusted = load_fact_ledger(json.load(fh))
    out = {}
    if args.rho is not None:
        if ledger.offset is None:
            raise UsageError("ledger was stored without A x; only stored releases are available")
        y = fact_release(ledger, args.rho, rng)
        out = {"rho": args.rho, "value": y.tolist()}
    with open(args.ledger, "w") as fh:
        fh.write(dump_fact_ledger(ledger, trusted))
    if out:
        emit(args, out, [[i, v] for i, v in enumerate(out["value"])], ["index", "value"])


def cmd_histogram(args):
    seed = resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    hist = read_histogram(args.input)
    budgets = parse_floats(args.budgets)
    thresholds = parse_floats(args.thresholds)
    if len(thresholds) == 1:
        thresholds = thresholds * len(budgets)
    if len(thresholds) != len(budgets):
        raise UsageError("need one threshold per budget (or a single threshold)")
    rounds = []
    if args.algorithm == "naive":
        state = histogram.NaiveHistState()
        for rho, tau in zip(budgets, thresholds):
            y = histogram.naive_release(hist, state, rho, tau, args.delta2, rng)
            rounds.append({int(i): float(y[i]) for i in np.flatnonzero(y)})
        draws, activated = len(budgets) * hist.d, None
    else:
        state = histogram.EffHistState()
        for rho, tau in zip(budgets, thresholds):
            rounds.append(histogram.efficient_release(hist, state, rho, tau, args.delta2, rng, args.path))
        draws, activated = state.draws, state.activated
    payload = {
        "rounds": [
            {"round": r + 1, "rho": budgets[r], "tau": thresholds[r], "released": {str(i): v for i, v in rel.items()}}
            for r, rel in enumerate(rounds)
        ],
        "manifest": {
            "algorithm": args.algorithm,
            "d": hist.d,
            "k": hist.k,
            "budgets": budgets,
            "thresholds": thresholds,
            "delta2": args.delta2,
            "seed": seed,
            "gaussian_draws": draws,
            "activated_zero_counts": activated,
        },
    }
    rows = [[r + 1, i, v] for r, rel in enumerate(rounds) for i, v in rel.items()]
    emit(args, payload, rows, ["round", "index", "value"])


def cmd_account(args):
    op = args.op
    if op in ("compose", "max"):
        if not args.rhos:
            raise UsageError(f"{op} needs at least one rho")
        fn = accounting.zcdp_compose if op == "compose" else accounting.multiple_release_budget
        rho = fn(args.rhos).rho
        emit(args, {"op": op, "rho": rho}, [[op, rho]], ["op", "rho"])
    elif op == "sigma":
        sigma = accounting.gaussian_sigma(args.delta2, args.rho)
        emit(args, {"op": op, "sigma": sigma}, [[op, sigma]], ["op", "sigma"])
    else:
        try:
            if op == "poisson-unit":
                res = accounting.poisson_epsilon_unit(args.lam, args.delta, args.d)
            else:
                res = accounting.poisson_epsilon(
                    args.lam, args.delta, args.d, args.delta1, args.delta2, args.delta_inf
                )
        except accounting.PreconditionError as exc:
            raise UsageError(f"precondition failed: {exc}") from None
        emit(
            args,
            {"op": op, "epsilon": res.epsilon, "delta": res.delta},
            [[op, res.epsilon, res.delta]],
            ["op", "epsilon", "delta"],
        )


def cmd_suite(args):
    seed = resolve_seed(args.seed)
    results = run_suite(seed=DEFAULT_SEED if seed is None else seed, quick=args.quick, report=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_fig2(args):
    seed = resolve_seed(args.seed)
    config = ExperimentConfig(parse_grid_spec(args.grid_log), args.reps, 0 if seed is None else seed)
    rows = simulate(config)
    if args.format == "json":
        emit(args, rows)
    else:
        text = rows_to_csv(rows)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV})")
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    p = argparse.ArgumentParser(prog="lossless-release", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("release", parents=[common], help="release from a JSON ledger")
    r.add_argument("--ledger", required=True)
    r.add_argument("--rho", type=float)
    r.add_argument("--init", action="store_true", help="create the ledger first")
    r.add_argument("--value", help="query value: comma list or JSON/CSV file")
    r.add_argument("--mechanism", default="gaussian", choices=("gaussian", "laplace", "poisson", "exponential"))
    r.add_argument("--sensitivity", type=float, default=1.0)
    r.add_argument("--rho-inf", default="inf")
    r.add_argument("--trusted", action="store_true", help="store the exact query value in the ledger")
    r.set_defaults(func=cmd_release, default_format="json")

    h = sub.add_parser("histogram", parents=[common], help="gradual sparse histogram release")
    h.add_argument("--input", required=True, help="JSON {d, counts} or CSV")
    h.add_argument("--budgets", required=True)
    h.add_argument("--thresholds", required=True)
    h.add_argument("--delta2", type=float, default=1.0)
    h.add_argument("--algorithm", choices=("efficient", "naive"), default="efficient")
    h.add_argument("--path", choices=("exact", "sequential"), default="exact")
    h.set_defaults(func=cmd_histogram, default_format="json")

    f = sub.add_parser("fact-release", parents=[common], help="factorization mechanism release")
    f.add_argument("--ledger", required=True)
    f.add_argument("--rho", type=float)
    f.add_argument("--init", action="store_true")
    f.add_argument("--matrices", help="JSON file with L and R")
    f.add_argument("--L", help="CSV file for L")
    f.add_argument("--R", help="CSV file for R")
    f.add_argument("--x", help="data vector: comma list or JSON/CSV file")
    f.add_argument("--sensitivity", type=float, default=1.0)
    f.add_argument("--rho-inf", default="inf")
    f.add_argument("--trusted", action="store_true")
    f.set_defaults(func=cmd_fact_release, default_format="json")

    a = sub.add_parser("account", parents=[common], help="privacy accounting")
    a.add_argument("op", choices=("compose", "max", "sigma", "poisson", "poisson-unit"))
    a.add_argument("rhos", nargs="*", type=float)
    a.add_argument("--rho", type=float, default=1.0)
    a.add_argument("--lam", type=float, default=1000.0)
    a.add_argument("--delta", type=float, default=1e-6)
    a.add_argument("--d", type=int, default=1)
    a.add_argument("--delta1", type=float, default=1.0)
    a.add_argument("--delta2", type=float, default=1.0)
    a.add_argument("--delta-inf", type=float, default=1.0)
    a.set_defaults(func=cmd_account, default_format="json")

    s = sub.add_parser("suite", parents=[common], help="run the statistical batteries")
    s.add_argument("--quick", action="store_true", help="reduced sample sizes")
    s.set_defaults(func=cmd_suite, default_format="csv")

    g = sub.add_parser("fig2", parents=[common], help="lossless vs independent variance experiment")
    g.add_argument("--reps", type=int, default=1_000_000)
    g.add_argument("--grid-log", default="0.001:5:20", help="lo:hi:n log-spaced budgets")
    g.set_defaults(func=cmd_fig2, default_format="csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        return args.func(args) or 0
    except (UsageError, LedgerFormatError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
