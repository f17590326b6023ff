"""Command-line entry point: generate, check-axioms, run, bench."""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import matrix as mx
from . import oracles
from .axioms import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA, check_all
from .engine import RoundLimitExceeded
from .mst import AxiomCheckFailed, log2ceil, run_cp_mst
from .services import SendMsgBoundExceeded
from .topology import GENERATORS, from_spec, load_network

TASKS = ("mst", "transpose", "vmm", "mm", "rank", "median", "mode", "distinct", "topk")
FAMILIES = ("cp", "lollipop", "sun", "dumbbell", "gb", "ge", "gc")
# families sized by k rather than n
K_FAMILIES = ("gb", "ge", "gc")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class BenchRow:
    task: str
    n: int
    k_or_r: object
    seed: int
    rounds: int
    setup_rounds: object
    phases: object
    max_edge_load: object
    oracle_match: object


COLUMNS = [f.name for f in fields(BenchRow)]


# -- inputs ------------------------------------------------------------------------

def load_net(spec: str, seed: int):
    if os.path.exists(spec):
        return load_network(spec)
    try:
        return from_spec(spec, seed)
    except ValueError as e:
        raise UsageError(f"{spec!r} is neither a file nor a network spec like cp:1024") from e


def parse_values(spec: str | None, task: str, n: int, seed: int):
    """Returns (values, areas, interests); areas is None unless the task is topk."""
    if spec is None:
        spec = "uniform:5" if task == "mode" else "uniform"
    if os.path.exists(spec):
        values, areas, interests = agg.values_from_text(Path(spec).read_text())
        if task == "topk" and areas is None:
            raise UsageError("topk needs a four-column values file: node value area interest")
        return values, areas, interests
    name, _, hi = spec.partition(":")
    if name not in ("uniform", "random"):
        raise UsageError(f"--values must be a file, 'uniform' or 'uniform:H', got {spec!r}")
    if task == "topk":
        return agg.random_area_instance(n, seed)
    if hi and not hi.isdigit():
        raise UsageError(f"bad value range in {spec!r}")
    return agg.random_values(n, seed, int(hi) if hi else None), None, None


def _matrix(path, n, k, seed):
    if path is None:
        return mx.random_sparse(n, k, seed)
    fn, fk, rows = mx.rows_from_text(Path(path).read_text())
    if fn != n:
        raise UsageError(f"{path}: matrix is {fn}x{fn} but the network has {n} nodes")
    if k is not None and k != fk:
        raise UsageError(f"{path}: file declares k={fk}, --k says {k}")
    return rows


def _file_k(path):
    if path is None:
        return None
    return mx.rows_from_text(Path(path).read_text())[1]


# -- one run -----------------------------------------------------------------------

def execute(task: str, net_spec: str, seed: int, opts: dict):
    """Run one task; returns (BenchRow, answer text).

    opts carries k, r, values, matrix, matrix_b, vector, alpha, beta, gamma,
    round_limit, force and verify.
    """
    net = load_net(net_spec, seed)
    n = net.n
    common = dict(seed=seed, force=opts.get("force", False), alpha=opts.get("alpha", DEFAULT_ALPHA),
                  beta=opts.get("beta", DEFAULT_BETA), gamma=opts.get("gamma", DEFAULT_GAMMA))
    limit = opts.get("round_limit")
    verify = opts.get("verify", False)
    phases = load = setup = ""
    k_or_r: object = ""

    if task == "mst":
        if net.weights is None:
            net = net.with_random_weights(seed)
        res = run_cp_mst(net, round_limit=limit, **common)
        answer = res.edges
        rounds, phases, load = res.stats.rounds, res.stats.phases, res.stats.max_edge_load
        text = "".join(f"{u} {v}\n" for u, v in sorted(answer))
        expect = oracles.network_mst(net) if verify else None
    elif task in ("transpose", "vmm", "mm"):
        k = opts.get("k") or _file_k(opts.get("matrix")) or 4
        k_or_r = k
        a = _matrix(opts.get("matrix"), n, k, seed)
        if task == "transpose":
            run = mx.mt(net, a, k, round_limit=limit, **common)
            text = mx.rows_to_text(n, k, run.result)
            expect = oracles.dense_transpose(a, n) if verify else None
        elif task == "vmm":
            if opts.get("vector"):
                vn, svec = mx.vector_from_text(Path(opts["vector"]).read_text())
                if vn != n:
                    raise UsageError(f"vector has length {vn} but the network has {n} nodes")
            else:
                svec = mx.random_vector(n, seed)
            run = mx.vmm(net, svec, a, k, round_limit=limit, **common)
            text = mx.vector_to_text(n, run.result)
            expect = oracles.dense_vmm(svec, a, n) if verify else None
        else:
            b = _matrix(opts.get("matrix_b"), n, k, seed + 1)
            run = mx.mm(net, a, b, k, round_limit=limit, **common)
            text = mx.rows_to_text(n, k * k, run.result)
            expect = oracles.dense_mm(a, b, n) if verify else None
        answer, rounds, setup = run.result, run.rounds, run.setup_rounds
    else:
        values, areas, interests = parse_values(opts.get("values"), task, n, seed)
        if task == "topk":
            r = opts.get("r") or 4
            k_or_r = r
            run = agg.topk_by_area(net, values, areas, interests, r, round_limit=limit, **common)
            text = "".join(f"{v} " + " ".join(map(str, run.result[v])) + "\n" for v in sorted(run.result))
            expect = oracles.topk_c(values, areas, interests, r) if verify else None
        else:
            fn = {"rank": agg.rank, "median": agg.median, "mode": agg.mode,
                  "distinct": agg.distinct_count}[task]
            run = fn(net, values, round_limit=limit, **common)
            text = "".join(f"{v} {_fmt(run.result[v])}\n" for v in sorted(run.result))
            expect = oracles.solve(task, values=values).answer if verify else None
            if verify and task != "rank":
                expect = {v: expect for v in values}
        answer, rounds, setup = run.result, run.rounds, run.setup_rounds

    match = (answer == expect) if verify else ""
    row = BenchRow(task, n, k_or_r, seed, rounds, setup, phases, load, match)
    return row, text


def _fmt(x):
    if isinstance(x, agg.ModeAnswer):
        return " ".join(map(str, (x.frequency,) + x.values))
    return str(x)


def rows_to_csv(rows, header=True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, COLUMNS, lineterminator="\n")
    if header:
        w.writeheader()
    for r in rows:
        w.writerow(asdict(r))
    return buf.getvalue()


def append_csv(path, rows) -> None:
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a") as f:
        f.write(rows_to_csv(rows, header=fresh))


# -- bench -------------------------------------------------------------------------

def model_terms(task: str, n: int, k_or_r) -> list[float]:
    """Regressors for the least-squares fit: the growth term and a constant."""
    if task == "mst":
        return [log2ceil(n) ** 2, 1.0]
    if task in ("transpose", "vmm"):
        return [float(k_or_r), 1.0]
    if task == "mm":
        return [float(k_or_r) ** 2, 1.0]
    if task == "topk":
        return [float(k_or_r), 1.0]
    return [1.0]


def fit_growth(task: str, rows) -> dict:
    """Least squares of rounds on the task's model; also the max/min normalized-mean ratio."""
    X = np.array([model_terms(task, r.n, r.k_or_r) for r in rows])
    y = np.array([r.rounds for r in rows], dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.n, r.k_or_r), []).append(r.rounds)
    means = {key: sum(v) / len(v) for key, v in sorted(cells.items())}
    norm = [m / model_terms(task, n, kr)[0] for (n, kr), m in means.items()]
    return {"coef": [float(c) for c in coef], "rms_residual": resid, "means": means,
            "ratio": max(norm) / min(norm) if min(norm) > 0 else math.inf}


def _bench_cell(args):
    task, spec, seed, opts = args
    return execute(task, spec, seed, opts)[0]


def bench_cells(task, family, sizes, ks, seeds, opts):
    cells = []
    for n in sizes:
        for kr in ks:
            o = dict(opts)
            if task == "topk":
                o["r"] = kr
            elif task in ("transpose", "vmm", "mm"):
                o["k"] = kr
            for s in seeds:
                cells.append((task, f"{family}:{n}", s, o))
    return cells


# -- commands ----------------------------------------------------------------------

def _opts(a) -> dict:
    return dict(k=getattr(a, "k", None), r=getattr(a, "r", None), values=getattr(a, "values", None),
                matrix=getattr(a, "matrix", None), matrix_b=getattr(a, "matrix_b", None),
                vector=getattr(a, "vector", None), alpha=a.alpha, beta=a.beta, gamma=a.gamma,
                round_limit=a.round_limit, force=a.force, verify=a.verify)


def cmd_generate(a) -> int:
    fam = a.family
    if fam in K_FAMILIES:
        if a.k is None:
            raise UsageError(f"{fam} is sized by --k")
        size = a.k
    else:
        if a.n is None:
            raise UsageError(f"{fam} is sized by --n")
        size = a.n
    net = from_spec(f"{fam}:{size}", a.seed)
    if a.weights and net.weights is None:
        net = net.with_random_weights(a.seed)
    text = net.to_text()
    if a.output:
        Path(a.output).write_text(text)
        print(f"wrote {a.output}: {net.n} nodes, {len(net.core)} core, {net.m} edges")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(a) -> int:
    net = load_net(a.network, a.seed)
    report = check_all(net, alpha=a.alpha, beta=a.beta, gamma=a.gamma)
    print(report.summary())
    if a.out:
        row = {"network": a.network, "n": net.n, **report.csv_row()}
        fresh = not os.path.exists(a.out) or os.path.getsize(a.out) == 0
        with open(a.out, "a") as f:
            w = csv.DictWriter(f, list(row), lineterminator="\n")
            if fresh:
                w.writeheader()
            w.writerow(row)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_run(a) -> int:
    row, text = execute(a.task, a.network, a.seed, _opts(a))
    if a.answer:
        Path(a.answer).write_text(text)
    if a.out:
        append_csv(a.out, [row])
    sys.stdout.write(rows_to_csv([row]))
    if a.verify and not row.oracle_match:
        print(f"{a.task}: answer differs from the oracle", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bench(a) -> int:
    task = a.task
    if task in ("transpose", "vmm", "mm", "topk"):
        sizes = [a.n]
        ks = a.ks or ([1, 4, 16] if task == "topk" else [2, 4, 8, 16])
        if len(ks) < 3:
            raise UsageError("bench needs at least 3 values of k or r")
    else:
        sizes = a.sizes or [64, 256, 1024]
        ks = [""]
        if len(sizes) < 3:
            raise UsageError("bench needs at least 3 sizes")
    if a.seeds < 5:
        raise UsageError("bench needs at least 5 seeds")
    seeds = list(range(a.seed, a.seed + a.seeds))
    opts = _opts(a)
    opts["verify"] = True
    cells = bench_cells(task, a.family, sizes, ks, seeds, opts)
    if a.jobs > 1:
        with ProcessPoolExecutor(a.jobs) as pool:
            rows = list(pool.map(_bench_cell, cells))
    else:
        rows = [_bench_cell(c) for c in cells]
    if a.out:
        append_csv(a.out, rows)
    else:
        sys.stdout.write(rows_to_csv(rows))
    fit = fit_growth(task, rows)
    out = sys.stderr if not a.out else sys.stdout
    for (n, kr), m in fit["means"].items():
        print(f"mean rounds n={n}" + (f" k_or_r={kr}" if kr != "" else "") + f": {m:.2f}", file=out)
    print(f"fit coefficients {['%.4f' % c for c in fit['coef']]}, rms residual {fit['rms_residual']:.3f}, "
          f"normalized max/min {fit['ratio']:.3f}", file=out)
    bad = sum(1 for r in rows if not r.oracle_match)
    if bad:
        print(f"{bad} run(s) disagree with the oracle", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--round-limit", type=int, default=None)
    common.add_argument("--alpha", type=int, default=DEFAULT_ALPHA)
    common.add_argument("--beta", type=int, default=DEFAULT_BETA)
    common.add_argument("--gamma", type=int, default=DEFAULT_GAMMA)
    common.add_argument("--verify", action="store_true", help="compare with the centralized oracle")
    common.add_argument("--out", help="append CSV rows here")
    common.add_argument("--force", action="store_true", help="run even if an axiom check fails")

    p = argparse.ArgumentParser(prog="cpnet", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a network file")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--weights", action="store_true", help="attach distinct random weights")
    g.add_argument("-o", "--output", help="network file (default: stdout)")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("check-axioms", parents=[common], help="test A_B, A_E and A_C")
    c.add_argument("network", help="network file or spec such as cp:256")
    c.set_defaults(func=cmd_check)

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--k", type=int, help="row sparsity for random matrices")
    inputs.add_argument("--r", type=int, help="answer length for topk")
    inputs.add_argument("--values", help="values file, or uniform / uniform:H")
    inputs.add_argument("--matrix", help="matrix A file")
    inputs.add_argument("--matrix-b", help="matrix B file (mm)")
    inputs.add_argument("--vector", help="vector file (vmm)")

    r = sub.add_parser("run", parents=[common, inputs], help="run one algorithm")
    r.add_argument("task", choices=TASKS)
    r.add_argument("--network", required=True, help="network file or spec such as cp:1024")
    r.add_argument("--answer", help="write the answer here")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", parents=[common, inputs], help="round counts over sizes and seeds")
    b.add_argument("task", choices=TASKS)
    b.add_argument("--family", default="cp", choices=sorted(GENERATORS))
    b.add_argument("--sizes", type=_int_list, help="node counts, e.g. 64,256,1024")
    b.add_argument("--n", type=int, default=256, help="node count for matrix and topk benches")
    b.add_argument("--ks", type=_int_list, help="k values (matrix) or r values (topk)")
    b.add_argument("--seeds", type=int, default=5, help="number of seeds, starting at --seed")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return a.func(a)
    except AxiomCheckFailed as e:
        print(f"axiom precheck failed (use --force to run anyway):\n{e}", file=sys.stderr)
        return EXIT_FAIL
    except (RoundLimitExceeded, SendMsgBoundExceeded) as e:
        print(f"round limit exceeded: {e}", file=sys.stderr)
        return EXIT_LIMIT
    except (ValueError, agg.ModeSetTooLarge, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
