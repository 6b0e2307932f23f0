"""Command-line front end: ``maxlab <scenario|utility> [flags]``.

Exit codes: 0 PASS, 1 FAIL, 2 usage or parameter error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from typing import Optional

from .experiments import SCENARIOS, ParameterError, ScenarioConfig, run_scenario

UTILITIES = ("distance", "volume", "maximal", "discretise")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class CliInvocation:
    subcommand: str
    flags: dict
    config_path: Optional[str]
    out_dir: str
    config: Optional[ScenarioConfig] = None
    extra: dict = field(default_factory=dict)


def _parse_number(text: str) -> float:
    """Float, or ``eK`` for exp(K)."""
    text = text.strip()
    if text.startswith("e") and len(text) > 1:
        return math.exp(float(text[1:]))
    return float(text)


def parse_t_grid(text: str) -> list:
    """``lo:hi:n`` (geometric) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"t-grid must be lo:hi:n, got {text!r}")
        try:
            lo, hi, n = _parse_number(parts[0]), _parse_number(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"bad t-grid {text!r}: {exc}") from None
        if not (0 < lo < hi) or n < 2:
            raise UsageError(f"t-grid needs 0 < lo < hi and n >= 2, got {text!r}")
        return [math.exp(math.log(lo) + (math.log(hi) - math.log(lo)) * k / (n - 1)) for k in range(n)]
    try:
        return [_parse_number(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad t-grid {text!r}: {exc}") from None


_KEYS = {"a": float, "b": float, "m": int, "tau": float, "nu": float, "delta": float, "c_m": float,
         "omega": float, "kappa": float, "mesh_res": float, "tol": float, "seed": int, "t_grid": parse_t_grid}


def read_config_file(path: str) -> dict:
    """key=value lines; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _KEYS[key](value)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maxlab", description="Maximal operator experiments on negatively curved spaces.")
    sub = p.add_subparsers(dest="subcommand", metavar="subcommand")
    sub.required = True
    for name in SCENARIOS:
        s = sub.add_parser(name, help=f"run the {name} scenario")
        s.add_argument("--a", type=float)
        s.add_argument("--b", type=float)
        s.add_argument("--m", type=int)
        s.add_argument("--t-grid", dest="t_grid", type=str)
        s.add_argument("--mesh-res", dest="mesh_res", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--config", type=str)
        s.add_argument("--out", type=str, default="maxlab-out")
    d = sub.add_parser("distance", help="distance between two half-plane points")
    d.add_argument("--a", type=float, default=1.0)
    d.add_argument("--b", type=float, default=1.0)
    d.add_argument("--from", dest="z1", required=True, help="x,y")
    d.add_argument("--to", dest="z2", required=True, help="x,y")
    d.add_argument("--mesh-res", dest="mesh_res", type=float)
    d.add_argument("--out", type=str, default="maxlab-out")
    v = sub.add_parser("volume", help="measure of a geodesic ball in the half plane")
    v.add_argument("--a", type=float, default=1.0)
    v.add_argument("--b", type=float, default=1.0)
    v.add_argument("--center", required=True, help="x,y")
    v.add_argument("--radius", type=float, required=True)
    v.add_argument("--mesh-res", dest="mesh_res", type=float, default=0.02)
    v.add_argument("--out", type=str, default="maxlab-out")
    mx = sub.add_parser("maximal", help="exact maximal function on a finite space")
    mx.add_argument("--edges", required=True)
    mx.add_argument("--weights", required=True)
    mx.add_argument("--field", required=True, help="CSV point_id,value,weight")
    mx.add_argument("--mode", choices=("centred", "uncentred", "omega"), default="centred")
    mx.add_argument("--r-min", dest="r_min", type=float, default=0.0)
    mx.add_argument("--r-max", dest="r_max", type=float, default=math.inf)
    mx.add_argument("--omega", type=float, default=1.5)
    mx.add_argument("--out", type=str, default="maxlab-out")
    ds = sub.add_parser("discretise", help="maximal eta-separated net of a finite space")
    ds.add_argument("--edges", required=True)
    ds.add_argument("--weights", required=True)
    ds.add_argument("--eta", type=float, required=True)
    ds.add_argument("--seed", type=int, default=0)
    ds.add_argument("--out", type=str, default="maxlab-out")
    return p


def parse_invocation(argv) -> CliInvocation:
    """Resolve defaults, then the config file, then flags."""
    ns = _build_parser().parse_args(list(argv))
    flags = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "config", "out") and v is not None}
    inv = CliInvocation(ns.subcommand, flags, getattr(ns, "config", None), ns.out)
    if ns.subcommand in SCENARIOS:
        cfg = ScenarioConfig.defaults(ns.subcommand)
        merged = {}
        if inv.config_path:
            try:
                merged.update(read_config_file(inv.config_path))
            except OSError as exc:
                raise UsageError(f"cannot read config {inv.config_path}: {exc}") from None
        if "t_grid" in flags:
            flags["t_grid"] = parse_t_grid(flags["t_grid"])
        merged.update(flags)
        for k, val in merged.items():
            setattr(cfg, k, val)
        try:
            cfg.validate()
        except ParameterError as exc:
            raise UsageError(str(exc)) from None
        inv.config = cfg
    elif ns.subcommand in ("distance", "volume"):
        _check_half_plane_flags(flags)
    return inv


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def manifest_text(inv: CliInvocation) -> str:
    lines = [f"# maxlab {inv.subcommand}"]
    if inv.config is not None:
        for k, v in sorted(inv.config.resolved().items()):
            if k == "scenario" or v is None:
                continue
            lines.append(f"{k}={_fmt(v)}")
    else:
        for k, v in sorted(inv.flags.items()):
            lines.append(f"{k}={_fmt(v)}")
    return "\n".join(lines) + "\n"


def _apply_thread_cap() -> None:
    cap = os.environ.get("MAXLAB_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise UsageError(f"MAXLAB_THREADS must be an integer, got {cap!r}") from None
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _point(text: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected x,y, got {text!r}") from None
    return x, y


def _check_half_plane_flags(flags: dict) -> None:
    if flags["a"] <= 0 or flags["b"] <= 0:
        raise UsageError("a and b must be positive")
    for key in ("z1", "z2", "center"):
        if key in flags and not _point(flags[key])[1] > 0:
            raise UsageError(f"{flags[key]!r} is not in the upper half plane")
    if "radius" in flags and not flags["radius"] > 0:
        raise UsageError("radius must be positive")


def _half_plane_profile(a: float, b: float):
    from .geometry_profiles import ConformalProfile
    return ConformalProfile.hyperbolic(a) if a == b else ConformalProfile.stromberg(a, b)


def _run_utility(inv: CliInvocation) -> dict:
    f = inv.flags
    if inv.subcommand == "distance":
        from .geodesy import HalfPlanePoint, numeric_distance_halfplane
        prof = _half_plane_profile(f["a"], f["b"])
        r = numeric_distance_halfplane(prof, HalfPlanePoint(*_point(f["z1"])), HalfPlanePoint(*_point(f["z2"])),
                                       resolution=f.get("mesh_res"))
        return {"distance": r.value, "error_estimate": r.error_estimate}
    if inv.subcommand == "volume":
        from .measure_lorentz import ball_volume_numeric
        prof = _half_plane_profile(f["a"], f["b"])
        r = ball_volume_numeric(prof, _point(f["center"]), f["radius"], h=f["mesh_res"])
        return {"volume": r.value, "error_estimate": r.error_estimate}
    from .discrete_spaces import FiniteMetricMeasureSpace, build_discretisation
    space = FiniteMetricMeasureSpace.from_csv(f["edges"], f["weights"])
    if inv.subcommand == "discretise":
        disc = build_discretisation(space, f["eta"], seed=f["seed"])
        disc.to_csv(os.path.join(inv.out_dir, "net.csv"))
        return {"eta": disc.eta, "net_size": len(disc.net), "covering_radius": disc.covering_radius,
                "separation": disc.separation}
    from .maximal_ops import RadiusWindow, centred_maximal, omega_maximal, uncentred_maximal
    from .measure_lorentz import SampledField
    fld = SampledField.from_csv(f["field"])
    if f["mode"] == "omega":
        rep = omega_maximal(fld, space, f["omega"], r_min=max(f["r_min"], 0.0))
    else:
        win = RadiusWindow(f["r_min"], f["r_max"])
        rep = (centred_maximal if f["mode"] == "centred" else uncentred_maximal)(fld, space, win)
    rep.to_csv(os.path.join(inv.out_dir, "maximal.csv"))
    return rep.summary()


def run_and_emit(inv: CliInvocation) -> int:
    try:
        os.makedirs(inv.out_dir, exist_ok=True)
        with open(os.path.join(inv.out_dir, "manifest.txt"), "w") as fh:
            fh.write(manifest_text(inv))
    except OSError as exc:
        print(f"maxlab: cannot write to {inv.out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO
    if inv.config is not None:
        result = run_scenario(inv.config)
        try:
            result.write(inv.out_dir)
        except OSError as exc:
            print(f"maxlab: cannot write report to {inv.out_dir}: {exc}", file=sys.stderr)
            return EXIT_IO
        verdict = "PASS" if result.verdict else "FAIL"
        print(f"{inv.subcommand}: {verdict}")
        for name, ok in result.checks.items():
            print(f"  {name}: {'ok' if ok else 'FAILED'}")
        return EXIT_PASS if result.verdict else EXIT_FAIL
    try:
        payload = _run_utility(inv)
    except OSError as exc:
        print(f"maxlab: {exc}", file=sys.stderr)
        return EXIT_IO
    path = os.path.join(inv.out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump({"schema_version": 1, "subcommand": inv.subcommand, **payload}, fh, indent=2,
                  sort_keys=True, default=str)
        fh.write("\n")
    print(json.dumps(payload, sort_keys=True, default=str))
    return EXIT_PASS


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        _apply_thread_cap()
        inv = parse_invocation(argv)
    except UsageError as exc:
        print(f"maxlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run_and_emit(inv)
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"maxlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
