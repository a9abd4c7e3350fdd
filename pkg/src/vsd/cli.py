"""Command-line entry point.

Subcommands: ``forward``, ``invert``, ``oracle-check`` and ``verify``.
Exit status is 0 on success, 2 on invalid input and 1 on runtime failure
(including a verification check that does not pass).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import ConfigError, load_config, load_preset, preset_names

log = logging.getLogger("vsd")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _load(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        return load_preset(args.preset)
    if args.config:
        return load_config(args.config)
    raise ConfigError("one of --config or --preset is required")


def _add_common(p: argparse.ArgumentParser, with_config: bool = True):
    if with_config:
        p.add_argument("--config", help="experiment JSON file")
        p.add_argument("--preset", help=f"bundled experiment ({', '.join(preset_names())})")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vsd", description="Variable-exponent sub-diffusion: forward and inverse source solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="solve the forward problem and write the trajectory")
    _add_common(p)

    p = sub.add_parser("invert", help="reconstruct the source from (synthetic or supplied) interior data")
    _add_common(p)
    p.add_argument("--data", help="observation CSV written by a previous run (data.csv)")
    p.add_argument("--seed", type=int, help="override the noise seed")

    p = sub.add_parser("oracle-check", help="compare the grid solver with the spectral oracle")
    _add_common(p)

    p = sub.add_parser("verify", help="kernel, oracle, adjoint and Duhamel self-checks")
    _add_common(p, with_config=False)
    p.add_argument("--fast", action="store_true", help="smaller grids (smoke test)")
    return ap


def _run(args) -> int:
    from . import experiments as ex

    plots = not args.no_plots
    t0 = time.perf_counter()
    if args.command == "verify":
        rep = ex.run_verify(plots=plots, fast=args.fast)
        for r in rep["rows"]:
            print(f"{r['check']:<16} {'pass' if r['passed'] else 'FAIL'}  value={r['value']:.4g}  "
                  f"threshold={r['threshold']:.4g}  {r['detail']}")
        print(f"report: {rep['out'] / 'verify_report.csv'}")
        return EXIT_OK if rep["passed"] else EXIT_RUNTIME

    cfg = _load(args)
    if args.command == "forward":
        res = ex.run_forward(cfg, plots=plots)
        print(f"forward: ||u||_L2 = {res['l2_norm']:.6g}; output in {res['out']}")
        status = EXIT_OK
    elif args.command == "oracle-check":
        res = ex.run_oracle_check(cfg, plots=plots)
        for r in res["rows"]:
            print(f"{r['mode']:>8} lambda={r['lambda']:.5g} max_dev={r['max_deviation']:.3e} {r['verdict']}")
        print(f"overall relative L2 deviation {res['overall']:.3e}: {'pass' if res['passed'] else 'FAIL'}")
        status = EXIT_OK if res["passed"] else EXIT_RUNTIME
    else:
        res = ex.run_inversion(cfg, data_path=args.data, seed=args.seed, plots=plots)
        s = res["summary"]
        print(
            f"invert: stop={s['stop_reason']} iterations={s['iterations']} rel_error={s['rel_error']:.4g} "
            f"residual={s['final_residual']:.4g} (tau*delta_abs={s['threshold']:.4g}); output in {res['out']}"
        )
        status = EXIT_OK
    log.info("elapsed %.1f s", time.perf_counter() - t0)
    return status


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID if isinstance(err, FileNotFoundError) else EXIT_RUNTIME
    except Exception as err:  # noqa: BLE001 - report any stage failure as a runtime error
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
