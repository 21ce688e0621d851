"""qfract command line.

Exit codes: 0 success, 1 usage or input error, 2 a numerical check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_BURN_IN, DEFAULT_GRIDS, EXACT_COST_CAP, default_threads
from .export import (
    CsvAppender,
    graph_raster,
    log_normalize,
    read_csv,
    read_manifest,
    sha256_file,
    write_csv,
    write_manifest,
    write_pgm,
)

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2

# point evaluations of the exact recursion accepted by --method auto
AUTO_EXACT_BUDGET = 5 * 10**7
SURFACE_GRIDS = {"slice": (512, 256), "torus": (512, 512)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# argument parsing helpers


def parse_grid(spec: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(p) for p in spec.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid spec {spec!r} is not of the form M, AxB or AxBxC") from None
    if not shape or any(v < 2 for v in shape):
        raise argparse.ArgumentTypeError(f"grid sizes must be >= 2, got {spec!r}")
    return shape


def parse_slice(spec: str) -> tuple[int, float, float]:
    """1-based 'axis:lo:hi' -> (0-based axis, lo, hi)."""
    parts = spec.split(":")
    try:
        axis, lo, hi = int(parts[0]), float(parts[1]), float(parts[2])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"slice {spec!r} is not of the form axis:lo:hi") from None
    if len(parts) != 3 or axis < 1 or lo >= hi:
        raise argparse.ArgumentTypeError(f"slice {spec!r} needs axis >= 1 and lo < hi")
    return axis - 1, lo, hi


def parse_surface(spec: str) -> tuple:
    """'sphere', 'slice:axis:value' (1-based axis) or 'torus:family'."""
    kind, _, rest = spec.partition(":")
    if kind == "sphere" and not rest:
        return ("sphere",)
    if kind == "slice":
        try:
            axis, value = rest.split(":")
            return ("slice", int(axis) - 1, float(value))
        except ValueError:
            raise argparse.ArgumentTypeError(f"slice surface {spec!r} is not slice:axis:value") from None
    if kind == "torus" and rest:
        return ("torus", rest)
    raise argparse.ArgumentTypeError(f"unknown surface {spec!r}")


def _unparse(key: str, value):
    """Flag text that parses back to ``value``; used for manifests and replay."""
    if value is None:
        return None
    if isinstance(value, Path):
        return str(value)
    if key in ("grid", "chart_grid"):
        return "x".join(str(v) for v in value)
    if key == "slice":
        return f"{value[0] + 1}:{value[1]!r}:{value[2]!r}"
    if key == "surface":
        if value[0] == "slice":
            return f"slice:{value[1] + 1}:{value[2]!r}"
        return ":".join(str(v) for v in value)
    return value


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $QFRACT_THREADS or 1)")
    common.add_argument("--config", type=Path, default=None, help="JSON file of option defaults; flags given on the command line win")

    parser = _Parser(prog="qfract", description="Quantum-fractal toolkit: Clifford algebra, conformal maps, IFS sampling, densities, dimensions.")
    parser.add_argument("--version", action="version", version=f"qfract {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{polytope,sample,density,dim,verify}")
    subs: dict[str, _Parser] = {}

    p = sub.add_parser("polytope", parents=[common], help="list or print vertex configurations")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?", help="configuration name for 'show'")
    p.add_argument("--out", type=Path, help="write vertices to this CSV instead of stdout")
    p.add_argument("--manifest", type=Path, help="manifest path (default: <out stem>.manifest.json)")
    subs["polytope"] = p

    p = sub.add_parser("sample", parents=[common], help="chaos-game sample of an attractor")
    p.add_argument("--polytope", help="configuration name, e.g. pentagon, octahedron, cell600")
    p.add_argument("--alpha", type=float, help="boost parameter in [0, 1)")
    p.add_argument("--points", type=int, help="recorded points per chain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--chains", type=int, default=1, help="independent chains, written in chain order")
    p.add_argument("--slice", type=parse_slice, help="keep lo < x[axis] < hi and drop that coordinate; axis is 1-based")
    p.add_argument("--out", type=Path, help="points CSV")
    p.add_argument("--manifest", type=Path)
    subs["sample"] = p

    p = sub.add_parser("density", parents=[common], help="density f_k of the k-th Markov iterate on a surface")
    p.add_argument("--polytope")
    p.add_argument("--alpha", type=float)
    p.add_argument("--depth", type=int, help="iteration level k")
    p.add_argument("--surface", type=parse_surface, default=("sphere",), help="sphere | slice:axis:value | torus:<aa|ab|ba|bb>")
    p.add_argument("--grid", type=parse_grid, help="surface resolution, e.g. 8192, 1024x512, 128x128x128")
    p.add_argument("--chart-grid", type=parse_grid, help="full-sphere grid used to interpolate onto slices and tori")
    p.add_argument("--method", choices=["auto", "exact", "grid"], default="auto")
    p.add_argument("--out", type=Path, help="density CSV: coordinates, weight, f")
    p.add_argument("--image", type=Path, help="16-bit PGM of log10(f+1)")
    p.add_argument("--manifest", type=Path)
    subs["density"] = p

    p = sub.add_parser("dim", parents=[common], help="correlation dimension of a point CSV")
    p.add_argument("--input", type=Path, help="CSV with x1, x2, ... columns")
    p.add_argument("--rmin", type=float, help="smallest radius (default 1e-3 of the diameter)")
    p.add_argument("--rmax", type=float, help="largest radius (default 1e-1 of the diameter)")
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--subsample", type=int, help="use a random subset of this many points")
    p.add_argument("--seed", type=int, default=0, help="seed for --subsample")
    p.add_argument("--out", type=Path, help="curve CSV: r, C, pairs")
    p.add_argument("--json", type=Path, help="fit summary JSON")
    p.add_argument("--manifest", type=Path)
    subs["dim"] = p

    p = sub.add_parser("verify", parents=[common], help="run self-check suites or replay a manifest")
    p.add_argument("--suite", action="append", help="suite name (repeatable); default: all")
    p.add_argument("--manifest", type=Path, help="replay this run and compare output hashes")
    subs["verify"] = p
    return parser, subs


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} needs {', '.join(missing)}")


def _manifest_path(args, primary: Path) -> Path:
    return args.manifest if args.manifest is not None else primary.with_name(primary.stem + ".manifest.json")


def _params(args, skip=("config", "manifest", "command")) -> dict:
    return {k: _unparse(k, v) for k, v in vars(args).items() if k not in skip}


def _set_threads(n: int) -> None:
    # numba warns about an old TBB on import of its threading layers; it falls back on its own
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _system(name: str, alpha: float):
    from .ifs import IFSSystem
    from .polytopes import get_configuration

    return IFSSystem(get_configuration(name), alpha)


# commands


def cmd_polytope(args, out=sys.stdout) -> tuple[dict, dict | None]:
    from .polytopes import available, get_configuration

    if args.action == "list":
        out.write("name,vertices,sphere_dim\n")
        for name in available():
            if "<" in name:
                out.write(f"{name},N,1\n")
                continue
            c = get_configuration(name)
            out.write(f"{name},{len(c)},{c.dim}\n")
        return {}, None
    if args.name is None:
        raise UsageError("polytope show needs a configuration name")
    c = get_configuration(args.name)
    header = [f"x{i + 1}" for i in range(c.dim + 1)]
    if args.out is None:
        out.write(",".join(header) + "\n")
        for row in c.vertices:
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return {}, None
    write_csv(args.out, header, list(c.vertices.T))
    return {"vertices": args.out}, None


def cmd_sample(args, out=sys.stdout) -> tuple[dict, dict | None]:
    from .ifs import iter_chunks, run_chains

    _require(args, "polytope", "alpha", "points", "out")
    s = _system(args.polytope, args.alpha)
    d = s.dim + 1
    names = [f"x{i + 1}" for i in range(d)]
    if args.slice is not None:
        axis, lo, hi = args.slice
        if d < 3 or axis >= d:
            raise UsageError(f"slice axis {axis + 1} needs a configuration on S^n with n >= 2 and axis <= {d}")
        names.pop(axis)
    header = ["chain", "step", "map_index", *names]
    fmt = ["%d", "%d", "%d"] + ["%.17g"] * len(names)

    def rows(part):
        pts, keep = part.points, slice(None)
        if args.slice is not None:
            keep = (pts[:, axis] > lo) & (pts[:, axis] < hi)
            pts = np.delete(pts[keep], axis, axis=1)
        steps, maps = part.steps[keep], part.maps[keep]
        return [np.full(len(steps), part.chain), steps, maps, *pts.T]

    written = 0
    with CsvAppender(args.out, header, fmt) as csv:
        if args.chains == 1:
            parts = iter_chunks(s, args.points, args.seed, burn_in=args.burn_in)
        else:
            parts = run_chains(s, args.points, args.seed, chains=args.chains, threads=args.threads, burn_in=args.burn_in)
        for part in parts:
            cols = rows(part)
            written += len(cols[0])
            csv.append(cols)
    out.write(f"wrote {written} points to {args.out}\n")
    return {"points": args.out}, {"written": written}


def _density_surface(args, s):
    from .markov import slice_surface, sphere_grid, torus_surface

    kind = args.surface[0]
    if kind == "sphere":
        return sphere_grid(s.dim, args.grid)
    if s.dim != 3:
        raise UsageError(f"{kind} surfaces live in S^3; {args.polytope} acts on S^{s.dim}")
    shape = args.grid or SURFACE_GRIDS[kind]
    if len(shape) != 2:
        raise UsageError(f"{kind} surface needs a 2D grid such as 512x256")
    if kind == "slice":
        return slice_surface(args.surface[1], args.surface[2], *shape)
    return torus_surface(args.surface[1], *shape)


def cmd_density(args, out=sys.stdout) -> tuple[dict, dict | None]:
    from .markov import density_exact, density_grid, evaluate_surface, integrate_density

    _require(args, "polytope", "alpha", "depth", "out")
    if args.depth < 0:
        raise UsageError("--depth must be >= 0")
    s = _system(args.polytope, args.alpha)
    surf = _density_surface(args, s)
    leaves = s.count**args.depth
    method = args.method
    if method == "auto":
        method = "exact" if leaves * len(surf.points) <= AUTO_EXACT_BUDGET and leaves <= EXACT_COST_CAP else "grid"
    if surf.full_sphere:
        if method == "grid":
            surf = density_grid(s, args.depth, surf.shape)
        else:
            surf = surf.with_values(density_exact(s, surf.points, args.depth), args.depth)
    elif method == "grid":
        via = density_grid(s, args.depth, args.chart_grid or DEFAULT_GRIDS[3])
        surf = evaluate_surface(s, surf, args.depth, via=via)
    else:
        surf = evaluate_surface(s, surf, args.depth)

    header = [f"x{i + 1}" for i in range(surf.points.shape[1])] + ["weight", "f"]
    weights = surf.weights if surf.weights is not None else np.full(len(surf.points), np.nan)
    write_csv(args.out, header, [*surf.points.T, weights, surf.values])
    outputs = {"density": args.out}
    extra = {"method": method}
    if surf.weights is not None:
        total = integrate_density(surf)
        extra["integral"] = total
        out.write(f"f_{args.depth} integral over the surface: {total:.10g}\n")
    if args.image is not None:
        scaled, lo, hi = log_normalize(surf.values)
        if surf.kind == "circle":
            image = graph_raster(scaled)
        elif surf.shape is not None and len(surf.shape) == 2:
            image = scaled.reshape(surf.shape)
        else:
            raise UsageError("images need a 2D surface; use a slice or torus surface on S^3")
        write_pgm(args.image, image)
        outputs["image"] = args.image
        extra["image"] = {"transform": "log10(f+1)", "min": lo, "max": hi, "maxval": 65535}
    out.write(f"wrote {len(surf.points)} values to {args.out} ({method} route)\n")
    return outputs, extra


def cmd_dim(args, out=sys.stdout) -> tuple[dict, dict | None]:
    from .fracdim import correlation_integral, diameter_estimate, fit_dimension, log_radii

    _require(args, "input")
    header, data = read_csv(args.input)
    cols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not cols:
        raise UsageError(f"{args.input} has no x1, x2, ... columns")
    pts = data[:, cols]
    if args.subsample is not None and args.subsample < len(pts):
        idx = np.sort(np.random.default_rng(args.seed).choice(len(pts), args.subsample, replace=False))
        pts = pts[idx]
    if len(pts) < 2:
        raise UsageError("need at least 2 points")
    if args.bins < 5:
        raise UsageError("--bins must be >= 5")
    diam = diameter_estimate(pts)
    rmin = args.rmin if args.rmin is not None else 1e-3 * diam
    rmax = args.rmax if args.rmax is not None else 1e-1 * diam
    curve = correlation_integral(pts, log_radii(rmin, rmax, args.bins))
    fit = fit_dimension(curve)
    summary = {
        "dimension": fit.dimension,
        "intercept": fit.intercept,
        "rmin": fit.rmin,
        "rmax": fit.rmax,
        "residual": fit.residual,
        "slope_spread": fit.slope_spread,
        "staircase": fit.staircase,
        "points": curve.n_points,
    }
    out.write(f"D = {fit.dimension:.4f}  residual = {fit.residual:.4f}{'  (staircase)' if fit.staircase else ''}\n")
    outputs = {}
    if args.out is not None:
        write_csv(args.out, ["r", "C", "pairs"], [curve.radii, curve.counts, curve.pairs])
        outputs["curve"] = args.out
    if args.json is not None:
        Path(args.json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        outputs["fit"] = args.json
    return outputs, {"fit": summary, "inputs": {"input": {"path": str(args.input), "sha256": sha256_file(args.input)}}}


HANDLERS = {"polytope": cmd_polytope, "sample": cmd_sample, "density": cmd_density, "dim": cmd_dim}
OUTPUT_FLAGS = {"vertices": "out", "points": "out", "density": "out", "image": "image", "curve": "out", "fit": "json"}


def _run_artifact_command(args, out) -> None:
    outputs, extra = HANDLERS[args.command](args, out)
    if outputs:
        primary = Path(next(iter(outputs.values())))
        path = _manifest_path(args, primary)
        write_manifest(path, args.command, _params(args), outputs, extra)
        out.write(f"manifest: {path}\n")


def replay_manifest(path: Path, out) -> bool:
    """Re-run a recorded command into a scratch directory and compare output hashes."""
    manifest = read_manifest(path)
    command = manifest["command"]
    if command not in HANDLERS:
        raise UsageError(f"manifest records unknown command {command!r}")
    for role, rec in manifest.get("inputs", {}).items():
        if sha256_file(rec["path"]) != rec["sha256"]:
            out.write(f"FAIL replay: input {role} ({rec['path']}) changed since the run\n")
            return False
    parser, subs = build_parser()
    with tempfile.TemporaryDirectory() as tmp:
        argv = [command]
        params = dict(manifest["params"])
        if command == "polytope":
            argv += [params.pop("action")] + ([params.pop("name")] if params.get("name") else [])
            params.pop("name", None)
        for role, rec in manifest["outputs"].items():
            params[OUTPUT_FLAGS[role]] = str(Path(tmp) / Path(rec["path"]).name)
        for key, value in params.items():
            if value is None or key in ("threads",):
                continue
            argv += [f"--{key.replace('_', '-')}", str(value)]
        args = parser.parse_args(argv)
        args.threads = params.get("threads") or 1
        args.manifest = Path(tmp) / "replay.manifest.json"
        HANDLERS[command](args, _Sink())
        ok = True
        for role, rec in manifest["outputs"].items():
            fresh = sha256_file(Path(tmp) / Path(rec["path"]).name)
            same = fresh == rec["sha256"]
            ok &= same
            out.write(f"{'PASS' if same else 'FAIL'} replay {role}: {rec['path']}\n")
    return ok


class _Sink:
    def write(self, _):
        pass


def cmd_verify(args, out) -> int:
    from .verify import SUITES, run_suite

    ok = True
    if args.manifest is not None:
        ok &= replay_manifest(args.manifest, out)
        if not args.suite:
            return EXIT_OK if ok else EXIT_CHECK
    for name in args.suite or list(SUITES):
        for r in run_suite(name):
            ok &= r.ok
            out.write(f"{'PASS' if r.ok else 'FAIL'} {r.suite}: {r.name} ({r.detail})\n")
    return EXIT_OK if ok else EXIT_CHECK


def _apply_config(args, argv, parser, subs):
    if args.config is None:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - set(vars(args)) | ({"config", "command"} & set(cfg)))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    # defaults from the file, then the command line again on top
    subs[args.command].set_defaults(**{k: (str(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v) for k, v in cfg.items()})
    return parser.parse_args(argv)


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(out)
            return EXIT_USAGE
        args = _apply_config(args, argv, parser, subs)
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        _set_threads(args.threads)
        if args.command == "verify":
            return cmd_verify(args, out)
        _run_artifact_command(args, out)
        return EXIT_OK
    except UsageError as exc:
        print(f"qfract: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"qfract: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
