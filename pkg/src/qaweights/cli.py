"""``qaw`` command line: JSON results on stdout, logs on stderr, artifacts in ``--out``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import approx, classifier, determinacy, moments, ostrowski, pathology
from .spec_io import SpecError, dumps, load_json, parse_basis, parse_spec
from .weights import BasisSpec

log = logging.getLogger("qaw")

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _grid_arg(text):
    """``RANGE:COUNT`` with ``RANGE`` either ``T`` (meaning ``[-T, T]``) or ``A,B``."""
    try:
        rng, count = text.rsplit(":", 1)
        parts = [float(x) for x in rng.split(",")]
        a, b = (-abs(parts[0]), abs(parts[0])) if len(parts) == 1 else parts
        n = int(count)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("grid must look like 20:2001 or -5,5:1001") from exc
    if n < 2 or not b > a:
        raise argparse.ArgumentTypeError("grid needs COUNT >= 2 and a nonempty range")
    return a, b, n


def _out_dir(args):
    if args.out is None:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    log.info("wrote %s", path)


def _load_weight(path):
    return parse_spec(load_json(path))


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj) + "\n")


def _verdict_code(cls: str) -> int:
    return EXIT_INCONCLUSIVE if cls == classifier.INCONCLUSIVE else EXIT_OK


def _moment_rows(M):
    rows = [["m", "value", "log_value"]]
    for m, (v, lv) in enumerate(zip(M.values, M.log_values)):
        rows.append([m, repr(float(v)), repr(float(lv))])
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_classify(args) -> int:
    w = _load_weight(args.weight)
    cands = [parse_basis(load_json(args.basis))] if args.basis else None
    v = classifier.classify(w, cands, numeric=args.numeric, m_max=args.max_m)
    _emit(v.to_dict())
    return _verdict_code(v.cls)


def cmd_moments(args) -> int:
    w = _load_weight(args.weight)
    basis = parse_basis(load_json(args.basis)) if args.basis else BasisSpec.standard(w.dimension)
    out = _out_dir(args)
    m_max = args.max_m or 40
    result = []
    for j, v in enumerate(basis.vectors):
        M = moments.moment_sequence(w, v, m_max, rtol=args.rtol or 1e-9)
        result.append({"vector": v.tolist(), "log_values": M.log_values.tolist(),
                       "log_convex": M.log_convex, "provenance": M.provenance,
                       "unbounded": bool(np.any(M.unbounded)) if M.unbounded is not None else False})
        if out:
            _write_csv(out / f"moments_{j}.csv", _moment_rows(M))
    _emit({"moments": result})
    return EXIT_OK


def cmd_regularize(args) -> int:
    w = _load_weight(args.weight)
    reg = ostrowski.convex_regularization(w)
    out = _out_dir(args)
    if out:
        rows = [["t", "log_wbar"]] + [[repr(float(t)), repr(float(lv))]
                                       for t, lv in zip(reg.t, reg.log_values)]
        _write_csv(out / "regularization.csv", rows)
    _emit({"grid": {"t_min": float(reg.t[0]), "t_max": float(reg.t[-1]), "count": int(reg.t.size)},
           "log_wbar_at_grid_end": float(reg.log_values[-1]) if np.isfinite(reg.log_values[-1]) else "-inf",
           "vanishes_beyond": _num(reg.vanishes_beyond()),
           "log_integral": classifier.log_integral_test(reg, classifier.default_R(w)).to_dict()})
    return EXIT_OK


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def cmd_pathology(args) -> int:
    k = args.k
    blocks = args.blocks if args.blocks is not None else max(2, k)
    pair = pathology.tangentialize_sequences(k, blocks, args.max_m or 4096)
    out = _out_dir(args)
    if out:
        _write_csv(out / "sequences.csv", pair.csv_rows())
        (out / "blocks.json").write_text(dumps(pair.to_dict()) + "\n", encoding="utf-8")
    if args.which == "sequences":
        _emit({"pair": pair.to_dict(), "window_partial_sums": pair.window_sums(),
               "off_block_tail": pathology.off_block_tail(pair)})
        return EXIT_OK
    if args.which == "unique-basis":
        rep = pathology.unique_basis_report(pair)
        verdict = classifier.classify(rep["weight"], numeric="never")
        _emit({"verdict": verdict.to_dict(), "axes": [e.to_dict() for e in rep["axes"]],
               "cross_vector": rep["vector"].tolist(), "cross": rep["cross"].to_dict()})
        return _verdict_code(verdict.cls)
    if k != 2:
        raise ValueError("the sum counterexample needs --k 2")
    w1, w2, v = pathology.sum_counterexample(pair)
    _emit({"summands": [classifier.classify(w1).to_dict(), classifier.classify(w2).to_dict()],
           "sum": v.to_dict()})
    return _verdict_code(v.cls)


def cmd_determinacy(args) -> int:
    mu = determinacy.parse_measure(load_json(args.measure))
    result = {}
    code = EXIT_OK
    if mu.form != "moments":
        if not args.weight:
            raise ValueError("--weight is required for density and atom measures")
        ev = determinacy.integral_criterion(mu, _load_weight(args.weight))
        result["integral_criterion"] = ev.to_dict()
        if ev.conclusion != determinacy.FINITE:
            code = EXIT_INCONCLUSIVE
    K = args.max_m or 400
    result["carleman"] = [determinacy.carleman_test(M).to_dict()
                          for M in determinacy.moments_of_measure(mu, K)]
    _emit(result)
    return code


def cmd_approx(args) -> int:
    w = _load_weight(args.weight)
    if args.grid:
        a, b, n = args.grid
    else:
        (a, b), n = approx.default_range(w), 2001
    grid = approx.chebyshev_grid(a, b, n)
    T = max(abs(a), abs(b))
    top = args.max_degree if args.max_degree is not None else 40
    spectral = None
    if args.family == "trig":
        lo, hi, cnt = (float(x) for x in (args.spectral or "0:1:64").split(":"))
        spectral = np.linspace(lo, hi, int(cnt))
        top = min(top if args.max_degree is not None else int(cnt), int(cnt))
        schedule = sorted({max(1, top // 16), max(1, top // 4), max(1, top // 2), top})
    else:
        schedule = sorted({0, top // 4, top // 2, (3 * top) // 4, top})
    targets = [approx.named_target(t, w, T) for t in args.target or ("runge", "bump")]
    rep = approx.density_experiment(w, targets, args.family, schedule,
                                    grid=grid, spectral_set=spectral)
    out = _out_dir(args)
    if out:
        (out / "approx.csv").write_text(rep.to_csv(), encoding="utf-8")
        (out / "approx.json").write_text(rep.to_json() + "\n", encoding="utf-8")
        (out / "approx.svg").write_text(rep.to_svg(), encoding="utf-8")
        log.info("wrote approx.csv, approx.json, approx.svg to %s", out)
    _emit(rep.header())
    return EXIT_OK


def cmd_hall(args) -> int:
    ev = classifier.hall_test(_load_weight(args.weight))
    _emit(ev.to_dict())
    return EXIT_INCONCLUSIVE if ev.conclusion == classifier.UNDETERMINED else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qaw", description="Workbench for weights on R^n.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, weight=True):
        if weight:
            sp.add_argument("--weight", required=True, help="weight spec JSON file")
        sp.add_argument("--out", help="directory for CSV/SVG artifacts")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
        sp.add_argument("--rtol", type=_positive_float, help="relative tolerance override")
        sp.add_argument("--max-m", type=int, help="largest moment order")

    sp = sub.add_parser("classify", help="classify a weight")
    common(sp)
    sp.add_argument("--basis", help="candidate basis JSON file")
    sp.add_argument("--numeric", choices=("auto", "always", "never"), default="auto")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("moments", help="moment sequences along basis vectors")
    common(sp)
    sp.add_argument("--basis", help="basis JSON file (default: standard)")
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("regularize", help="log-log convex regularization of a weight on R")
    common(sp)
    sp.set_defaults(func=cmd_regularize)

    sp = sub.add_parser("pathology", help="tangentialized sequences and counterexamples")
    sp.add_argument("which", choices=("sequences", "unique-basis", "sum"))
    common(sp, weight=False)
    sp.add_argument("--blocks", type=int, help="number of blocks (default: k)")
    sp.add_argument("--k", type=int, default=2, help="number of sequences")
    sp.set_defaults(func=cmd_pathology)

    sp = sub.add_parser("determinacy", help="integral criterion and Carleman cross-check")
    common(sp, weight=False)
    sp.add_argument("--measure", required=True, help="measure JSON file")
    sp.add_argument("--weight", help="weight spec JSON file")
    sp.set_defaults(func=cmd_determinacy)

    sp = sub.add_parser("approx", help="best weighted approximation sweep")
    common(sp)
    sp.add_argument("--family", choices=("poly", "trig"), default="poly")
    sp.add_argument("--max-degree", type=int, help="largest degree (or frequency count for trig)")
    sp.add_argument("--grid", type=_grid_arg, help="RANGE:COUNT, e.g. 20:2001")
    sp.add_argument("--target", action="append",
                    help="runge | gauss | bump[:T0[:WIDTH]] (repeatable)")
    sp.add_argument("--spectral", help="LO:HI:COUNT evenly spaced frequencies (trig)")
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("hall", help="logarithmic integral of the raw weight")
    common(sp)
    sp.set_defaults(func=cmd_hall)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except classifier.ContradictionError as exc:
        print(f"contradiction: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SpecError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
