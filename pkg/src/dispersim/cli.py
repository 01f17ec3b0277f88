"""Command line: ``dispersim run | sweep | replay | verify-uxs``.

Exit codes: 0 pass, 1 a predicate failed, 2 invalid input, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

from .errors import EngineError, ReplayError, ValidationError

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3


def _load_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _cache(args):
    from .uxs import UxsCache

    return UxsCache(args.uxs_cache) if args.uxs_cache else None


def cmd_run(args) -> int:
    from .scenario import ScenarioConfig, run_scenario, verdict_dict

    cfg = ScenarioConfig.from_dict(_load_json(args.scenario))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = run_scenario(cfg, uxs_cache=_cache(args), round_cap=args.round_cap)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = Path(args.trace) if args.trace else out / "trace.jsonl"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    trace_path.write_text(res.trace.to_jsonl())
    verdict = verdict_dict(res)
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True) + "\n")
    print(json.dumps(verdict, sort_keys=True))
    return EXIT_PASS if res.verdict.ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    from .sweep import sweep

    spec = _load_json(args.sweep)
    rows, summary = sweep(spec, args.out_dir, jobs=args.jobs, uxs_dir=args.uxs_cache)
    failed = sum(1 for r in rows if r.status == "fail")
    print(f"{len(rows)} runs in {len(summary)} cells; {failed} failed; outputs in {args.out_dir}")
    return EXIT_FAIL if failed else EXIT_PASS


def cmd_replay(args) -> int:
    from .scenario import replay

    try:
        lines = Path(args.trace).read_text().splitlines()
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {args.trace}") from exc
    verdict = replay(lines, uxs_cache=_cache(args))
    print(json.dumps(verdict.to_dict(), sort_keys=True))
    return EXIT_PASS if verdict.match else EXIT_FAIL


def cmd_verify_uxs(args) -> int:
    from .uxs import EXHAUSTIVE_CEILING, DEFAULT_CACHE, UxsFamily, verify_coverage

    cache = _cache(args) or DEFAULT_CACHE
    report: list[dict[str, Any]] = []
    for n in args.n:
        if n > EXHAUSTIVE_CEILING:
            raise ValidationError(f"exhaustive check only available for n <= {EXHAUSTIVE_CEILING}")
        seq = cache.get(n, None, args.seed)
        cov = verify_coverage(seq.steps, n)
        report.append({"n": n, "mode": seq.mode, "length": seq.length, "graphs": cov.graphs_checked,
                       "starts": cov.starts_checked, "failures": len(cov.failures), "ok": cov.ok})
    if args.scenario:
        from .graph import build_graph
        from .scenario import ScenarioConfig

        cfg = ScenarioConfig.from_dict(_load_json(args.scenario))
        g = build_graph(cfg.graph)
        fam = UxsFamily(g, seed=cfg.seed("uxs"), cache=cache)
        seq = fam.sequence(g.n)
        cov = verify_coverage(seq.steps, g)
        report.append({"n": g.n, "mode": seq.mode, "length": seq.length, "graphs": 1,
                       "starts": cov.starts_checked, "failures": len(cov.failures), "ok": cov.ok})
    print(json.dumps(report, sort_keys=True))
    return EXIT_PASS if all(r["ok"] for r in report) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispersim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--uxs-cache", help="directory for cached exploration sequences")

    p = sub.add_parser("run", help="run one scenario, write its trace and verdict")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--trace", help="trace path (default: OUT_DIR/trace.jsonl)")
    p.add_argument("--round-cap", type=int)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of sampled scenarios")
    p.add_argument("--sweep", required=True)
    p.add_argument("--out-dir", default="sweep-out")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="re-execute a trace and compare")
    p.add_argument("--trace", required=True)
    common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("verify-uxs", help="check exploration sequences by enumeration")
    p.add_argument("--n", type=int, nargs="*", default=[1, 2, 3, 4])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", help="also verify the sequence used on this scenario's graph")
    common(p)
    p.set_defaults(func=cmd_verify_uxs)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ReplayError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EngineError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
