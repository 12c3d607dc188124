"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure (training, failed gradient check),
2 usage problems (bad flags, missing or malformed files, invalid config).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report as rp
from .config import TrainConfig, load_config, parse_flat
from .data import MixedSbmSpec, SbmSpec, gen_mixed_sbm, gen_sbm, load_bundle, save_bundle
from .errors import NcgcnError
from .gradcheck import check_all
from .model import VARIANTS
from .trainer import run_seeds

log = logging.getLogger("ncgcn")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """``a..b`` (inclusive), ``a,b,c`` or a single integer."""
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split(".."))
            if hi < lo:
                raise UsageError(f"seed range {text!r} is empty")
            return list(range(lo, hi + 1))
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}; use a..b, a,b,c or a single integer") from None


def _emit(doc: dict, out: str | None) -> None:
    if out:
        rp.save_report(doc, out)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(rp.dumps_report(doc))


def _config(path: str | None) -> TrainConfig:
    return load_config(path) if path else TrainConfig().validate()


def cmd_metrics(args) -> int:
    data = load_bundle(args.bundle)
    cfg = TrainConfig(k=args.k, T=args.T).validate()
    doc = rp.metrics_report(data, cfg.k, cfg.T)
    _emit(doc, args.out)
    if args.out:
        csv_path = Path(args.out).with_suffix(".deciles.csv")
        csv_path.write_text(rp.table_csv(doc, "deciles"), encoding="utf-8", newline="\n")
    m = doc["metrics"]
    print(f"high-NC proportion: {100 * m['high_nc_proportion']:.2f}%  "
          f"mean NC {m['nc']['mean']:.4f}  mean NH {m['nh']['mean']:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args.config)
    data = load_bundle(args.bundle)
    results, _ = run_seeds(cfg, data, parse_seeds(args.seeds), workers=args.workers)
    block = rp.run_block(cfg, results)
    _emit(rp.runs_report(cfg, data, [block]), args.out)
    print(f"{cfg.variant}: test accuracy {block['summary']} (%)", file=sys.stderr)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args.config)
    data = load_bundle(args.bundle)
    seeds = parse_seeds(args.seeds)
    blocks = []
    for variant in VARIANTS:
        vcfg = cfg.replace(variant=variant).validate()
        results, _ = run_seeds(vcfg, data, seeds, workers=args.workers)
        blocks.append(rp.run_block(vcfg, results))
        print(f"{variant}: test accuracy {blocks[-1]['summary']} (%)", file=sys.stderr)
    _emit(rp.runs_report(cfg, data, blocks), args.out)
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    path = Path(args.spec)
    if not path.is_file():
        raise UsageError(f"spec file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if args.mixed:
        data = gen_mixed_sbm(parse_flat(text, MixedSbmSpec, str(path)))
    else:
        data = gen_sbm(parse_flat(text, SbmSpec, str(path)))
    save_bundle(data, args.out)
    print(f"wrote {data.name}: n={data.n} edges={len(data.edge_list())} to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_grad_check(args) -> int:
    worst = check_all(seed=args.seed, n_graphs=args.graphs, tol=args.tol)
    failed = False
    for variant, err in worst.items():
        ok = err <= args.tol
        failed |= not ok
        print(f"{variant:24s} max relative error {err:.3e}  {'ok' if ok else 'FAIL'}")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_report(args) -> int:
    doc = rp.load_report(args.report)
    sys.stdout.write(rp.table_csv(doc, args.table))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ncgcn", description="Confusion-guided separated GCN training and analysis.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("metrics", help="ground-truth NC/NH/entropy statistics of a bundle")
    m.add_argument("bundle")
    m.add_argument("--k", type=int, default=1)
    m.add_argument("--T", type=float, default=0.5)
    m.add_argument("--out", help="report path (a .deciles.csv is written next to it)")
    m.set_defaults(func=cmd_metrics)

    for name, func, help_ in (("train", cmd_train, "train one variant over a seed range"),
                              ("ablate", cmd_ablate, "train all four variants on shared seeds")):
        t = sub.add_parser(name, help=help_)
        t.add_argument("bundle")
        t.add_argument("--config", help="flat key = value config file")
        t.add_argument("--seeds", default="0..9")
        t.add_argument("--workers", type=int, default=1)
        t.add_argument("--out", help="report path (stdout if omitted)")
        t.set_defaults(func=func)

    g = sub.add_parser("gen-synth", help="write a synthetic SBM bundle")
    g.add_argument("--spec", required=True, help="flat key = value generator spec")
    g.add_argument("--out", required=True)
    g.add_argument("--mixed", action="store_true", help="two-region mixed-confusion generator")
    g.set_defaults(func=cmd_gen_synth)

    c = sub.add_parser("grad-check", help="finite-difference check of every variant")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--graphs", type=int, default=5)
    c.add_argument("--tol", type=float, default=1e-4)
    c.set_defaults(func=cmd_grad_check)

    r = sub.add_parser("report", help="print a CSV table from a report")
    r.add_argument("report")
    r.add_argument("--table", required=True, choices=rp.TABLES)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        # ConfigError, DataError, SchemaError and InputError are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NcgcnError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
