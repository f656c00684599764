"""``meta`` command line: gen, solve, online, sweep.

All randomness comes from the master seed (``--seed``, else ``$META_SEED``,
else 0). Outputs are written atomically. Wall-clock columns are left empty
unless ``--timing`` is given, so that repeated runs are byte-identical.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import setcover
from .engine import MetaroundingConfig, metaround
from .exceptions import IterationLimitExceeded, MetaroundingError
from .online import OnlineConfig, run_fpl_baseline, run_online

log = logging.getLogger("metarounding.cli")

TRACE_HEADER = ["k", "eps_k", "hstar", "best_oracle", "alpha_emp", "ms"]
SWEEP_HEADER = ["n", "repeat", "iters", "ms", "alpha_emp", "certified_value", "status"]
DEFAULT_N_LIST = [10, 50, 100, 200, 500, 1000]


class UsageError(Exception):
    pass


def _fmt(v):
    return format(float(v), ".9g")


def _default_seed():
    raw = os.environ.get("META_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"META_SEED must be an integer, got {raw!r}") from None


def _output_path(path, force):
    p = Path(path).expanduser().resolve()
    if p.exists() and not force:
        raise UsageError(f"{p} exists (use --force to overwrite)")
    if not p.parent.is_dir():
        raise UsageError(f"directory {p.parent} does not exist")
    return p


def _input_path(path):
    p = Path(path).expanduser().resolve()
    if not p.is_file():
        raise UsageError(f"no such file: {p}")
    return p


def write_atomic(path, text):
    """Write UTF-8 text with LF endings via a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def load_instance(path):
    return setcover.SetCoverInstance.from_json(Path(path).read_text(encoding="utf-8"))


def _cost_rng(seed):
    # the instance file keeps its own costs; solves draw a fresh cost from the master seed
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])


def solve_instance(instance, eps, seed, use_instance_cost=False, refine=True, trace=None):
    """Relaxed LP at a cost vector, then metarounding of its solution."""
    cost = instance.cost if use_instance_cost else _cost_rng(seed).random(instance.n)
    x, lp_value = setcover.relaxed_lp(instance, cost)
    oracle = setcover.GreedySetCoverOracle(instance)
    res = metaround(x, oracle, MetaroundingConfig(eps=eps, refine=refine), trace=trace)
    return cost, x, lp_value, res


# -- gen ------------------------------------------------------------------------


def cmd_gen(args):
    out = _output_path(args.out, args.force) if args.out else None
    inst = setcover.generate(args.m, args.n, density=args.density, seed=args.seed)
    text = inst.to_json() + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
        log.info("wrote %dx%d instance to %s", inst.m, inst.n, out)
    return 0


# -- solve ----------------------------------------------------------------------


def cmd_solve(args):
    src = _input_path(args.instance)
    trace_out = _output_path(args.trace_out, args.force) if args.trace_out else None
    out = _output_path(args.out, args.force) if args.out else None
    inst = load_instance(src)

    records = []
    cost, x, lp_value, res = solve_instance(
        inst, args.eps, args.seed, args.use_instance_cost, not args.no_refine, records.append
    )
    summary = {
        "n": inst.n,
        "m": inst.m,
        "seed": args.seed,
        "eps": args.eps,
        "eta": res.eta,
        "cost": cost.tolist(),
        "x": x.tolist(),
        "lp_value": lp_value,
        "iterations": res.iterations,
        "oracle_calls": res.n_oracle_calls,
        "alpha_emp": res.alpha_emp,
        "certified_value": res.certified_value,
        "unrefined_value": res.unrefined_value,
        "bound": res.alpha_emp + res.eps,
        "certified": bool(res.certified_value <= res.alpha_emp + res.eps + 1e-6),
        "refined": res.refined,
        "weights": res.weights.tolist(),
        "columns": res.columns.tolist(),
    }
    if args.timing:
        summary["wall_time"] = res.wall_time
    text = json.dumps(summary, indent=2) + "\n"
    if trace_out is not None:
        rows = [
            [r.k, _fmt(r.eps_k), _fmt(r.hstar), _fmt(r.best_oracle), _fmt(r.alpha_emp),
             _fmt(r.ms) if args.timing else ""]
            for r in records
        ]
        write_atomic(trace_out, _csv_text(TRACE_HEADER, rows))
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
    return 0


# -- online ---------------------------------------------------------------------


def cmd_online(args):
    src = _input_path(args.instance)
    losses_path = _input_path(args.losses) if args.losses else None
    out = _output_path(args.out, args.force)
    inst = load_instance(src)
    losses = None
    if losses_path is not None:
        losses = np.atleast_2d(np.loadtxt(losses_path, delimiter=",", dtype=np.float64))
    cfg = OnlineConfig(
        T=args.T,
        eps=args.eps,
        step0=args.step0,
        losses=losses,
        seed=args.seed,
        projection=args.projection,
        cache=not args.no_cache,
    )
    run = run_online if args.mode == "metaround" else run_fpl_baseline
    try:
        ledger = run(inst, cfg)
    except IterationLimitExceeded as exc:
        partial = getattr(exc, "ledger", None)
        if partial is not None:
            side = out.with_name(out.name + ".partial")
            write_atomic(side, partial.to_csv(timing=args.timing))
            log.error("aborted after %d rounds; partial ledger in %s", partial.T, side)
        raise
    write_atomic(out, ledger.to_csv(timing=args.timing))
    log.info("wrote %d rounds to %s", ledger.T, out)
    return 0


# -- sweep ----------------------------------------------------------------------


def _cell_seeds(seed, n_index, repeat):
    inst_ss, cost_ss = np.random.SeedSequence([seed, n_index, repeat]).spawn(2)
    return inst_ss, int(cost_ss.generate_state(1)[0])


def _sweep_cell(job):
    n, repeat, n_index, m, density, eps, seed = job
    inst_ss, cost_seed = _cell_seeds(seed, n_index, repeat)
    t0 = time.perf_counter()
    try:
        inst = setcover.generate(m, n, density=density, random_state=np.random.default_rng(inst_ss))
        _, _, _, res = solve_instance(inst, eps, cost_seed)
    except (MetaroundingError, ValueError, RuntimeError) as exc:
        ms = 1000.0 * (time.perf_counter() - t0)
        return n, repeat, None, ms, None, None, f"error:{type(exc).__name__}"
    ms = 1000.0 * (time.perf_counter() - t0)
    return n, repeat, res.iterations, ms, res.alpha_emp, res.certified_value, "ok"


def run_sweep(m, n_list, eps, repeats, seed, density=0.3, workers=1):
    """Rows ``(n, repeat, iters, ms, alpha_emp, certified_value, status)`` in (n, repeat) order."""
    jobs = [(n, r, i, m, density, eps, seed) for i, n in enumerate(n_list) for r in range(repeats)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    return sorted(rows, key=lambda r: (r[0], r[1]))


def cmd_sweep(args):
    out = _output_path(args.out, args.force) if args.out else None
    workers = args.workers or os.cpu_count() or 1
    rows = run_sweep(args.m, args.n_list, args.eps, args.repeats, args.seed, args.density, workers)
    text_rows = []
    for n, rep, iters, ms, alpha, cert, status in rows:
        log.info("n=%d repeat=%d %s iters=%s %.0fms", n, rep, status, iters, ms)
        ok = status == "ok"
        text_rows.append([
            n,
            rep,
            iters if ok else "",
            _fmt(ms) if args.timing else "",
            _fmt(alpha) if ok else "",
            _fmt(cert) if ok else "",
            status,
        ])
    text = _csv_text(SWEEP_HEADER, text_rows)
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
    return 0 if all(r[-1] == "ok" for r in rows) else 2


# -- parser ---------------------------------------------------------------------


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("n-list needs positive integers")
    return vals


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def build_parser():
    p = argparse.ArgumentParser(prog="meta", description="Metarounding toolkit for set cover.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--seed", type=int, default=None, help="master seed (default $META_SEED or 0)")
        sp.add_argument("--out", "--out-path", dest="out", required=out_required, help="output file (default stdout)")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    g = sub.add_parser("gen", help="generate a random set-cover instance (JSON)")
    g.add_argument("--m", type=_positive(int), required=True, help="number of items")
    g.add_argument("--n", type=_positive(int), required=True, help="number of sets")
    g.add_argument("--density", type=float, default=0.3)
    common(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="relaxed LP at a random cost, then metaround its solution")
    s.add_argument("--instance", "--instance-path", dest="instance", required=True)
    s.add_argument("--eps", type=_positive(float), default=0.1)
    s.add_argument("--trace-out", help="per-iteration trace CSV")
    s.add_argument("--no-refine", action="store_true", help="skip the final LP polish of the weights")
    s.add_argument("--use-instance-cost", action="store_true", help="use the instance's cost vector")
    s.add_argument("--timing", action="store_true", help="fill wall-clock fields")
    common(s)
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("online", help="online set cover with metarounding or the FPL baseline")
    o.add_argument("--instance", "--instance-path", dest="instance", required=True)
    o.add_argument("--T", type=_positive(int), default=1000)
    o.add_argument("--eps", type=_positive(float), default=0.1)
    o.add_argument("--mode", choices=["metaround", "fpl"], default="metaround")
    o.add_argument("--step0", type=_positive(float), default=None, help="OGD step scale (default 1/sqrt(n))")
    o.add_argument("--projection", choices=["polytope", "box"], default="polytope")
    o.add_argument("--losses", help="CSV with one loss vector per row (default: uniform losses)")
    o.add_argument("--no-cache", action="store_true")
    o.add_argument("--timing", action="store_true", help="fill the meta_ms column")
    common(o, out_required=True)
    o.set_defaults(func=cmd_online)

    w = sub.add_parser("sweep", help="running-time sweep over n")
    w.add_argument("--m", type=_positive(int), default=10)
    w.add_argument("--n-list", type=_int_list, default=DEFAULT_N_LIST)
    w.add_argument("--eps", type=_positive(float), default=0.1)
    w.add_argument("--repeats", type=_positive(int), default=1)
    w.add_argument("--density", type=float, default=0.3)
    w.add_argument("--workers", type=_positive(int), default=None, help="worker processes (default: all CPUs)")
    w.add_argument("--timing", action="store_true", help="fill the ms column")
    common(w)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"meta: {exc}", file=sys.stderr)
        return 1
    except (MetaroundingError, ValueError, RuntimeError, OSError) as exc:
        print(f"meta {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
