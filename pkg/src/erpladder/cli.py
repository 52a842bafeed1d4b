"""Command-line entry point: ``erpladder <subcommand> ...``.

Exit status is 0 on success, 2 on bad input or configuration and 3 when the
ladder program is infeasible.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .bdrate import bd_rate, format_curve, read_curve
from .domain import Config, ContentType, EncodingFeatures, ModelKind, load_config
from .features import centroids_from_mapping, classify, extract_features, parse_frame_stats
from .rdmodel import distortion_at, fit_power_series, read_rd_samples
from .solver import (
    InfeasibleError,
    candidates_from_bitrates,
    generate_candidates,
    ladder_to_dict,
    rungs_from_dict,
    solve,
    validate_ladder,
)
from .sphere import parse_grid, parse_y4m, sequence_ws_mse, tile_grid, ws_psnr

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 2, 3

# Vendor ladders as (width, height, z_mbps), highest rung first.
REFERENCE_LADDERS: Dict[str, Tuple[Tuple[int, int, float], ...]] = {
    "apple": ((8192, 4096, 45.0), (8192, 4096, 30.0), (4096, 2048, 20.0), (3072, 1536, 11.0)),
    "axinom": ((8192, 4096, 45.0), (8192, 4096, 30.0), (4096, 2048, 21.0), (3072, 1536, 12.0)),
    "netflix": ((8192, 4096, 43.0), (4096, 2048, 30.0), (4096, 2048, 23.5), (3072, 1536, 17.5)),
}


class UsageError(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _parse_features(text: str) -> EncodingFeatures:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError("--features must be 'f_spa,f_tmp'") from None
    return EncodingFeatures(a, b)


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError("bitrate list must contain numbers") from None


def _content_type(cfg: Config, args) -> int:
    if args.content_type:
        ct = ContentType.parse(args.content_type)
        if not any(k[0] == ct.index for k in cfg.models):
            raise UsageError(f"content type {ct} not in configuration")
        return ct.index
    if args.features:
        return classify(_parse_features(args.features), centroids_from_mapping(cfg.centroids)).index
    raise UsageError("give --content-type or --features")


# --- subcommands -------------------------------------------------------------------

def cmd_extract(args) -> int:
    stats = parse_frame_stats(_read_text(args.stats))
    f = extract_features(stats, args.normalizer)
    print(f"f_spa={f.f_spa:.3f} f_tmp={f.f_tmp:.3f}")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = load_config(args.config)
    if args.features:
        f = _parse_features(args.features)
    elif args.stats and args.normalizer is not None:
        f = extract_features(parse_frame_stats(_read_text(args.stats)), args.normalizer)
    else:
        raise UsageError("give --features, or --stats with --normalizer")
    print(classify(f, centroids_from_mapping(cfg.centroids)))
    return EXIT_OK


def cmd_fit(args) -> int:
    with open(args.samples, encoding="utf-8") as fh:
        samples = read_rd_samples(fh)
    p = fit_power_series(samples, ModelKind(args.kind))
    print(f"k={p.k:.6g} omega={p.omega:.6g} phi={p.phi:.6g}")
    return EXIT_OK


def _print_ladder(ladder, ct: int, n_candidates: int, elapsed: float) -> None:
    print(f"content type: o{ct}  candidates: {n_candidates}  gamma: {ladder.gamma:.2f}")
    print(f"{'#':>3}  {'profile':<7}  {'WxH':<10}  {'z (Mbps)':>8}  {'d':>10}  {'c':>10}")
    for n, e in enumerate(ladder.entries, start=1):
        r = e.rep
        print(
            f"{n:>3}  {'p%d' % (e.profile + 1):<7}  {str(r.resolution):<10}  "
            f"{r.z:>8.2f}  {r.distortion:>10.3f}  {r.cost:>10.3f}"
        )
    print(
        f"objective={ladder.objective:.6f} total_cost={ladder.total_cost:.3f} "
        f"total_distortion={ladder.total_distortion:.3f} time={elapsed:.2f}s"
    )


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    if args.gamma is not None:
        cfg = cfg.with_gamma(args.gamma)
    if args.normalize:
        cfg = replace(cfg, solver=replace(cfg.solver, normalize=True))
    ct = _content_type(cfg, args)
    t0 = time.perf_counter()
    if args.bitrates:
        cands = candidates_from_bitrates(cfg, ct, _parse_floats(args.bitrates))
    else:
        cands = generate_candidates(cfg, ct)
    ladder = solve(cands, cfg.solver)
    elapsed = time.perf_counter() - t0
    problems = validate_ladder(ladder, cfg.solver)
    if problems:  # solver bug guard; should never trigger
        raise RuntimeError("; ".join(map(str, problems)))
    _print_ladder(ladder, ct, len(cands), elapsed)
    if args.json:
        Path(args.json).write_text(
            json.dumps(ladder_to_dict(ladder), indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def _load_rungs(name: str) -> List[Tuple[int, int, float]]:
    if name.lower() in REFERENCE_LADDERS:
        return list(REFERENCE_LADDERS[name.lower()])
    if Path(name).is_file():
        return _rungs_from_file(name)
    raise UsageError(f"unknown reference ladder {name!r} (apple, axinom, netflix or a JSON file)")


def _rungs_from_file(path: str) -> List[Tuple[int, int, float]]:
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg})") from None
    return rungs_from_dict(doc)


def _evaluate(cfg: Config, ct: int, rungs) -> List[Tuple[int, int, float, float]]:
    out = []
    for w, h, z in sorted(rungs, key=lambda r: r[2]):
        res = cfg.resolution_for(w, h)
        out.append((w, h, z, distortion_at(cfg.model(ct, res.index, ModelKind.DISTORTION), z)))
    return out


def cmd_compare(args) -> int:
    cfg = load_config(args.models)
    ct = ContentType.parse(args.content_type).index
    ours = _evaluate(cfg, ct, _rungs_from_file(args.ladder))
    ref = _evaluate(cfg, ct, _load_rungs(args.reference))
    for label, rows in (("ladder", ours), ("reference", ref)):
        print(f"[{label}]")
        print(f"{'WxH':<10}  {'z (Mbps)':>8}  {'ws_mse':>10}")
        for w, h, z, d in rows:
            print(f"{f'{w}x{h}':<10}  {z:>8.2f}  {d:>10.3f}")
        print(f"sum_d={math.fsum(r[3] for r in rows):.3f}")
    delta = math.fsum(r[3] for r in ours) - math.fsum(r[3] for r in ref)
    print(f"delta_d={delta:.3f}")
    if args.curves:
        prefix = Path(args.curves)
        for label, rows in (("ladder", ours), ("reference", ref)):
            pts = [(z, ws_psnr(d)) for _, _, z, d in rows]
            Path(f"{prefix}_{label}.csv").write_text(format_curve(pts), encoding="utf-8")
    return EXIT_OK


def _fmt_psnr(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.4f}"


def cmd_score(args) -> int:
    rows, cols = parse_grid(args.grid)
    with open(args.ref, "rb") as fr, open(args.test, "rb") as ft:
        wr, hr, ref = parse_y4m(fr)
        wt, ht, test = parse_y4m(ft)
        if (wr, hr) != (wt, ht):
            raise UsageError("streams differ in frame size")
        score = sequence_ws_mse(ref, test, rows, cols)
    tiles = tile_grid(wr, hr, rows, cols)
    print("region,ws_mse,ws_psnr")
    for j, (t, m) in enumerate(zip(tiles, score.tile_ws_mse)):
        print(f"tile{j}@{t.x0}:{t.y0}:{t.w}x{t.h},{m:.6f},{_fmt_psnr(ws_psnr(m))}")
    print(f"full,{score.full_ws_mse:.6f},{_fmt_psnr(score.full_ws_psnr)}")
    return EXIT_OK


def cmd_bdrate(args) -> int:
    with open(args.reference, encoding="utf-8") as fa, open(args.test, encoding="utf-8") as fb:
        a, b = read_curve(fa), read_curve(fb)
    print(f"{bd_rate(a, b):.3f}")
    return EXIT_OK


# --- wiring ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="erpladder", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-features", help="encoding-complexity features from frame sizes")
    p.add_argument("--stats", required=True, help="CSV of KIND,SIZE_BYTES lines")
    p.add_argument("--normalizer", required=True, type=float, help="I-frame size normalizer (bytes)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("classify", help="assign a content type")
    p.add_argument("--config")
    p.add_argument("--features", help="f_spa,f_tmp")
    p.add_argument("--stats")
    p.add_argument("--normalizer", type=float)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fit", help="fit k*z^omega+phi to a z,value sample file")
    p.add_argument("--samples", required=True)
    p.add_argument("--kind", choices=[k.value for k in ModelKind], default="distortion")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("optimize", help="solve for the encoding ladder")
    p.add_argument("--config")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--content-type", help="o1, o2, ...")
    g.add_argument("--features", help="f_spa,f_tmp (classified against the configured centroids)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--bitrates", help="explicit candidate bitrates (Mbps), comma separated")
    p.add_argument("--normalize", action="store_true", help="scale cost and distortion by their means")
    p.add_argument("--json", help="write the ladder as JSON to this path")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="model distortion of a ladder against a reference ladder")
    p.add_argument("--ladder", required=True, help="ladder JSON from optimize --json")
    p.add_argument("--reference", required=True, help="apple, axinom, netflix, or a ladder JSON")
    p.add_argument("--models", help="config file with the models (defaults built in)")
    p.add_argument("--content-type", required=True)
    p.add_argument("--curves", help="write PREFIX_ladder.csv and PREFIX_reference.csv RD curves")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("score", help="per-tile WS-MSE and WS-PSNR of two Y4M streams")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--grid", default="2x5", help="tile grid RxC (default 2x5)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bdrate", help="BD-rate of test against reference (rate_mbps,quality_db CSVs)")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=cmd_bdrate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"erpladder: {exc} [{exc.constraint}]", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ValueError, OSError) as exc:
        # ConfigError and the parsers' errors are ValueErrors.
        msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else str(exc)
        if isinstance(exc, OSError) and exc.filename:
            msg = f"{exc.filename}: {msg}"
        print(f"erpladder: {msg}", file=sys.stderr)
        return EXIT_INPUT
