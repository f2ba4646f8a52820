"""``armalign`` command line.

Exit status: 0 on success, 2 for usage or input errors, 3 when a solver diverges.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import Config, ConfigError, load_config
from .jacobian import SolverDivergedError
from .metrics import aggregate, write_records_csv, write_summary_csv
from .relay import RelayConfig, RelayStartupError, TransportError, parse_address, serve, subscribe
from .replay import ReplayOptions, replay, solver_names
from .session import (SessionParseError, format_frame, format_header, pose_catalog, read_session,
                      therapy_trajectory, write_session)

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED = 0, 2, 3

CATALOG_RATE = 1.0

# CLI flag -> config key
_OVERRIDES = {
    "alpha_e": "onia.alpha_e",
    "lam": "jacobian.lambda",
    "w_e": "jacobian.w_e",
    "max_iters": "jacobian.max_iters",
    "tol": "jacobian.tol",
    "eps_w": "fabrik.eps_w",
    "eps_max": "fabrik.eps_max",
    "d_eps": "fabrik.d_eps",
    "n_init": "fabrik.n_init",
    "n_refine": "fabrik.n_refine",
    "width": "render.width",
    "height": "render.height",
}


class InputError(Exception):
    pass


@dataclass
class RunSpec:
    solver: str
    input: str
    frames_csv: Path | None = None
    summary_csv: Path | None = None
    overrides: dict = field(default_factory=dict)
    overlay: bool = True
    overlay_stride: int = 1


def load_frames(source: str):
    if source == "catalog":
        return pose_catalog()
    if source == "therapy":
        return therapy_trajectory()
    try:
        return read_session(source)[1]
    except FileNotFoundError:
        raise InputError(f"input file not found: {source}") from None
    except OSError as e:
        raise InputError(f"cannot read {source}: {e.strerror}") from None
    except SessionParseError as e:
        raise InputError(f"{source}: {e}") from None


def cmd_poses(out, cfg: Config | None = None) -> int:
    write_session(pose_catalog(), out, CATALOG_RATE)
    return EXIT_OK


def cmd_therapy(duration: float, rate: float, out, cfg: Config | None = None) -> int:
    write_session(therapy_trajectory(duration, rate), out, rate)
    return EXIT_OK


def cmd_run(spec: RunSpec, cfg: Config | None = None) -> int:
    cfg = cfg or Config()
    for key, val in spec.overrides.items():
        cfg.set(key, val)
    names = solver_names(spec.solver)
    frames = load_frames(spec.input)
    records = replay(frames, names, cfg, ReplayOptions(spec.overlay, spec.overlay_stride))
    if spec.frames_csv:
        write_records_csv(records, spec.frames_csv)
    if spec.summary_csv:
        write_summary_csv(records, spec.summary_csv)
    _print_summary(records)
    return EXIT_OK


def _print_summary(records):
    print(f"{'solver':<9} {'overlay':>8} {'dx_e mm':>9} {'dx_w mm':>9} {'|Su-1|':>7} {'|Sf-1|':>7} {'time us':>9}")
    for name, s in aggregate(records).items():
        print(f"{name:<9} {s['overlay'][0]:8.3f} {1e3 * s['dx_e'][0]:9.3f} {1e3 * s['dx_w'][0]:9.3f} "
              f"{s['su_dev'][0]:7.3f} {s['sf_dev'][0]:7.3f} {s['solve_time_us'][0]:9.1f}")


def cmd_serve(session, rate: float, bind: str, wait_for: int = 0) -> int:
    frames = load_frames(session)
    host, port = parse_address(bind)
    srv = serve(frames, RelayConfig(host=host, port=port, rate=rate, wait_for=wait_for))
    h, p = srv.address
    print(f"serving {len(frames)} frames on {h}:{p} at {rate} Hz", file=sys.stderr, flush=True)
    try:
        srv.wait()
    except KeyboardInterrupt:
        pass
    finally:
        srv.close()
    return EXIT_OK


def cmd_subscribe(addr: str, filter_beta: float | None = None, out=None, count: int | None = None) -> int:
    """Write the received stream as a session (header plus frame lines)."""
    fh = open(out, "w", encoding="utf-8", newline="\n") if out else sys.stdout

    def header(rate):
        fh.write(format_header(rate) + "\n")

    stream = subscribe(parse_address(addr), filter_beta, on_header=header)
    try:
        for n, frame in enumerate(stream, start=1):
            fh.write(format_frame(frame) + "\n")
            if count is not None and n >= count:
                break
    finally:
        stream.close()
        fh.flush()
        if out:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="armalign", description="Align a human arm model to a robot arm.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", metavar="FILE", help="key = value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("poses", help="write the 12-pose catalog as a session file")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("therapy", help="write the emulated therapy session")
    sp.add_argument("--duration", type=float, default=20.0, help="seconds (default 20)")
    sp.add_argument("--rate", type=float, default=100.0, help="Hz (default 100)")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("run", help="replay frames through solvers and write metrics")
    sp.add_argument("--solver", default="all", help="onia, jacobian, fabrik or all")
    sp.add_argument("--input", default="catalog", help="catalog, therapy or a session file")
    sp.add_argument("--frames-csv", type=Path, help="per-frame metrics")
    sp.add_argument("--summary-csv", type=Path, help="median/min/max per solver")
    sp.add_argument("--no-overlay", dest="overlay", action="store_false", help="skip ray casting")
    sp.add_argument("--overlay-stride", type=int, default=1, metavar="K",
                    help="render the overlay on every K-th frame only")
    g = sp.add_argument_group("solver and render overrides")
    g.add_argument("--alpha-e", type=float)
    g.add_argument("--lambda", dest="lam", type=float, help="DLS damping")
    g.add_argument("--w-e", type=float, help="elbow task weight")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float, help="wrist convergence radius in m")
    g.add_argument("--eps-w", type=float)
    g.add_argument("--eps-max", type=float)
    g.add_argument("--d-eps", type=float)
    g.add_argument("--n-init", type=int)
    g.add_argument("--n-refine", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any configuration key, repeatable")

    sp = sub.add_parser("serve", help="stream a session to subscribers")
    sp.add_argument("--session", required=True, help="session file, or catalog/therapy")
    sp.add_argument("--rate", type=float, default=100.0)
    sp.add_argument("--bind", default="127.0.0.1:8765")
    sp.add_argument("--wait-for", type=int, default=0, metavar="N",
                    help="hold the stream until N subscribers are connected")

    sp = sub.add_parser("subscribe", help="print frames received from a relay")
    sp.add_argument("--addr", required=True)
    sp.add_argument("--filter-beta", type=float)
    sp.add_argument("--out", help="write frame lines here instead of stdout")
    sp.add_argument("--count", type=int, help="stop after this many frames")
    return p


def _run_spec(args) -> RunSpec:
    overrides = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = val.strip()
    for flag, key in _OVERRIDES.items():
        v = getattr(args, flag)
        if v is not None:
            overrides[key] = v
    return RunSpec(args.solver, args.input, args.frames_csv, args.summary_csv, overrides,
                   args.overlay, args.overlay_stride)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config()
        if args.config:
            try:
                cfg = load_config(args.config)
            except FileNotFoundError:
                raise InputError(f"config file not found: {args.config}") from None
        if args.command == "poses":
            return cmd_poses(args.out, cfg)
        if args.command == "therapy":
            return cmd_therapy(args.duration, args.rate, args.out, cfg)
        if args.command == "run":
            return cmd_run(_run_spec(args), cfg)
        if args.command == "serve":
            return cmd_serve(args.session, args.rate, args.bind, args.wait_for)
        if args.command == "subscribe":
            return cmd_subscribe(args.addr, args.filter_beta, args.out, args.count)
    except SolverDivergedError as e:
        print(f"armalign: solver diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InputError, ValueError, RelayStartupError, TransportError) as e:
        print(f"armalign: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"armalign: error: {e.filename or ''}: {e.strerror}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE
