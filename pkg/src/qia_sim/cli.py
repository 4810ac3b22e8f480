"""Command-line front end: ``qia-sim {run,curve,info-tables,verify}``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import analysis, experiments
from .experiments import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3

_CONFIG_KEYS = {f.name: f.type for f in fields(ExperimentConfig)}
_ALIASES = {"coeffs": "coefficients", "out": "out_path"}


def _typed(name: str, raw: str):
    if name in ("protocol", "n", "trials", "seed", "decoys_per_hop", "n_min", "n_max", "samples"):
        return int(raw, 0)
    if name in ("qber_threshold", "auth_threshold"):
        return float(raw)
    return raw


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = _ALIASES.get(k.replace("-", "_"), k.replace("-", "_"))
            try:
                out[k] = _typed(k, v)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {k}: {v!r}") from None
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qia-sim", description="Quantum identity authentication simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, out_help="CSV output path"):
        sp.add_argument("--config", help="flat key=value file; command-line flags win")
        sp.add_argument("--protocol", type=int, choices=experiments.PROTOCOLS)
        sp.add_argument("--attack", choices=experiments.ATTACKS)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--qber-threshold", dest="qber_threshold", type=float)
        sp.add_argument("--auth-threshold", dest="auth_threshold", type=float)
        sp.add_argument("--coeffs", dest="coefficients", help="a0,b0,c0,d0[,a1,b1,c1,d1] (complex literals)")
        sp.add_argument("--forge-policy", dest="forge_policy", help="uniform, 0, 1, + or -")
        sp.add_argument("--decoys-per-hop", dest="decoys_per_hop", type=int)
        sp.add_argument("--out", dest="out_path", help=out_help)
        sp.add_argument("--deterministic", action="store_true", help="omit the timestamp line")

    r = sub.add_parser("run", help="Monte Carlo detection rate for one setting")
    common(r)
    r.add_argument("--n", type=int)

    c = sub.add_parser("curve", help="detection rate against n, CSV plus SVG")
    common(c, out_help="CSV path; the chart goes next to it with an .svg suffix")
    c.add_argument("--n-min", dest="n_min", type=int)
    c.add_argument("--n-max", dest="n_max", type=int)

    i = sub.add_parser("info-tables", help="information quantities, closed form against Monte Carlo")
    i.add_argument("--out", dest="out_path")
    i.add_argument("--seed", type=int)
    i.add_argument("--samples", type=int)

    v = sub.add_parser("verify", help="exact structural checks of the three-party scheme")
    v.add_argument("--out", dest="out_path")

    k = sub.add_parser("key-size", help="smallest key length reaching a detection threshold")
    k.add_argument("--threshold", type=float, default=0.98)
    return p


def _merge(args: argparse.Namespace) -> tuple[ExperimentConfig, dict]:
    """Defaults < config file < command line."""
    settings = {}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config", "deterministic"):
            settings[k] = v
    extra = {k: settings.pop(k) for k in ("n_min", "n_max", "samples") if k in settings}
    unknown = set(settings) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown setting(s): {', '.join(sorted(unknown))}")
    return replace(ExperimentConfig(), **settings), extra


def _print_row(row, cfg) -> None:
    exact = experiments.exact_value(cfg)
    print(f"protocol {row.protocol} attack {row.attack} n={row.n}: {row.detections}/{row.trials} detected, "
          f"rate {row.detection_rate:.6f} [{row.ci_low:.6f}, {row.ci_high:.6f}]; "
          f"closed form {row.closed_form:.6f}; exact for simulated attack {exact:.6f}")


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "verify":
            checks = experiments.verify_checks()
            text = experiments.format_checks(checks)
            sys.stdout.write(text)
            if args.out_path:
                Path(args.out_path).write_text(text, encoding="utf-8")
            return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY

        if args.command == "key-size":
            for row in analysis.min_key_bits_report(args.threshold):
                flag = "" if row.reproducible else f"  [not reproducible: {row.note}]"
                print(f"protocol {row.protocol}: {row.bits} bits (n={row.rounds}), quoted {row.quoted}{flag}")
            return EXIT_OK

        if args.command == "info-tables":
            rows = experiments.info_tables(args.samples or 100_000, args.seed or experiments.DEFAULT_SEED)
            text = experiments.format_info(rows)
            sys.stdout.write(text)
            if args.out_path:
                Path(args.out_path).write_text(text, encoding="utf-8")
            return EXIT_OK if all(r.within for r in rows) else EXIT_VERIFY

        cfg, extra = _merge(args)
        cfg.validate()
        if args.command == "run":
            row = experiments.run(cfg)
            _print_row(row, cfg)
            if cfg.out_path:
                experiments.write_rows(cfg.out_path, [row], append=True, deterministic=args.deterministic)
            return EXIT_OK

        n_min, n_max = extra.get("n_min", 1), extra.get("n_max", 10)
        rows = experiments.curve(cfg, n_min, n_max)
        exact = [experiments.exact_value(replace(cfg, n=r.n)) for r in rows]
        for row in rows:
            _print_row(row, replace(cfg, n=row.n))
        if cfg.out_path:
            experiments.write_rows(cfg.out_path, rows, deterministic=args.deterministic)
            svg = experiments.render_svg(rows, exact, f"Detection probability, protocol {cfg.protocol}, {cfg.attack}")
            Path(cfg.out_path).with_suffix(".svg").write_text(svg, encoding="utf-8")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
