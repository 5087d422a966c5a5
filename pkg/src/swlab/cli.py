"""Command-line driver: ``swlab <command> [--config FILE] [--out DIR] [--jobs N] [--seed S]``.

Each command reads a key=value config, composes library calls and writes
SWF1 fields, JSON reports (sorted keys), CSV tables (17 significant digits)
and a ``manifest.json`` listing every emitted file with its SHA-256.  Wall
times go to ``timings.json`` so that the manifest itself is reproducible.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger("swlab")

REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists one message per field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ----------------------------------------------------------------- parsing

def parse_complex(text: str) -> complex:
    s = text.strip().replace(" ", "")
    if not s:
        raise ValueError("empty number")
    if s.endswith("i"):
        s = s[:-1] + "j"
        if s in ("j", "+j", "-j"):
            s = s.replace("j", "1j")
    return complex(s)


def parse_centers(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    return [parse_complex(p) for p in text.split(",")]


def parse_floats(text: str) -> list:
    return [float(p) for p in text.split(",") if p.strip()]


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def fmt_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real!r}{'+' if z.imag >= 0 else '-'}{abs(z.imag)!r}i"


# key -> (parser, default)
SCHEMAS = {
    "solve-vortex": {
        "centers": (parse_centers, []),
        "grid": (int, 256),
        "radius": (float, 10.0),
        "tol": (float, 1e-10),
        "polish": (parse_bool, False),
    },
    "pullback": {
        "centers": (parse_centers, []),
        "grid": (int, 97),
        "radius": (float, 12.0),
        "nz": (int, 17),
        "t": (float, 1.0),
        "epsilon": (float, 1.25),
        "polish": (parse_bool, False),
    },
    "spectrum": {
        "centers": (parse_centers, []),
        "grid": (int, 61),
        "radius": (float, 7.5),
        "gap": (float, 100.0),
        "kernel_dim": (int, None),
        "polish": (parse_bool, True),
    },
    "fredholm1d": {
        "eps": (float, 1.25),
        "R": (float, 4.0),
        "L": (float, None),
        "m": (int, 4096),
        "variant": (str, "plain"),
        "nu": (str, "none"),
        "nu_amplitude": (float, 0.5),
    },
    "glue": {
        "base": (parse_centers, []),
        "far": (parse_centers, REQUIRED),
        "R": (float, 12.0),
        "h": (float, 0.18),
        "margin": (float, 9.0),
        "tol": (float, 1e-10),
        "rtol": (float, 1e-6),
        "polish": (parse_bool, True),
    },
    "sweep": {
        "R_list": (parse_floats, [8.0, 12.0, 16.0, 24.0]),
        "h": (float, 0.4),
        "epsilon": (float, 1.25),
        "margin": (float, 8.0),
    },
    "decay-fit": {
        "centers": (parse_centers, [0j]),
        "grid": (int, 161),
        "radius": (float, 10.0),
        "r0": (float, 4.0),
        "r1": (float, 8.0),
    },
}

COMMANDS = tuple(SCHEMAS)

USAGE = ("usage: swlab <command> [--config FILE] [--out DIR] [--jobs N] [--seed S]\n"
         "commands: " + ", ".join(COMMANDS))


def read_config_text(text: str) -> dict:
    """key=value lines with # comments -> {key: (raw value, line number)}."""
    out, problems = {}, []
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            problems.append(f"line {no}: expected key=value, got {body!r}")
            continue
        key, val = (s.strip() for s in body.split("=", 1))
        if not key:
            problems.append(f"line {no}: empty key")
        elif key in out:
            problems.append(f"line {no}: duplicate key {key!r} (first on line {out[key][1]})")
        else:
            out[key] = (val, no)
    if problems:
        raise ConfigError(problems)
    return out


def validate(command: str, raw: dict) -> dict:
    """Typed parameters for a command.  ``raw`` maps keys to strings, to
    (string, line) pairs from :func:`read_config_text`, or to typed values."""
    schema = SCHEMAS[command]
    params, problems = {}, []
    for key in raw:
        if key not in schema:
            where = f"line {raw[key][1]}: " if isinstance(raw[key], tuple) else ""
            problems.append(f"{where}unknown key {key!r} for {command} (known: {', '.join(schema)})")
    for key, (parser, default) in schema.items():
        if key not in raw:
            if default is REQUIRED:
                problems.append(f"missing required key {key!r}")
            else:
                params[key] = default
            continue
        val = raw[key]
        where = ""
        if isinstance(val, tuple):
            val, line = val
            where = f"line {line}: "
        if isinstance(val, str):
            try:
                params[key] = parser(val)
            except (ValueError, TypeError) as exc:
                problems.append(f"{where}key {key!r}: cannot parse {val!r} ({exc})")
        else:
            params[key] = val
    if problems:
        raise ConfigError(problems)
    return params


def echo(params: dict) -> dict:
    """JSON-safe echo of typed parameters."""
    def one(v):
        if isinstance(v, complex):
            return fmt_complex(v)
        if isinstance(v, (list, tuple)):
            return [one(x) for x in v]
        return v
    return {k: one(params[k]) for k in sorted(params)}


# ------------------------------------------------------------------ output

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return fmt_complex(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return path


def write_csv(header, rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def vortex_field(sol):
    from .fieldio import Field, complex_parts
    comps = complex_parts("alpha", sol.alpha)
    comps.update({"a1": np.asarray(sol.a1, float), "a2": np.asarray(sol.a2, float)})
    return Field(sol.grid, comps)


def sw3_field(c):
    from .fieldio import Field, complex_parts
    comps = {"A1": c.A1, "A2": c.A2, "A3": c.A3}
    comps.update(complex_parts("alpha", c.alpha))
    comps.update(complex_parts("beta", c.beta))
    return Field(c.grid, comps)


@dataclass
class RunContext:
    out: Path
    jobs: int = 1
    seed: int = 0

    def path(self, name) -> Path:
        return self.out / name


# ---------------------------------------------------------------- commands

def _planar_grid(n, radius):
    from .grid import Grid2
    return Grid2(n, n, 2.0 * radius / n)


def cmd_solve_vortex(p, ctx):
    from .fieldio import write_field
    from .vortex import solve_vortex, vortex_number
    sol = solve_vortex(p["centers"], _planar_grid(p["grid"], p["radius"]), tol=p["tol"],
                       polish=p["polish"])
    files = [write_field(vortex_field(sol), ctx.path("sol.swf1"))]
    rep = {"residual": sol.residual_report, "iterations": sol.iterations,
           "vortex_number": vortex_number(sol), "h": sol.grid.h,
           "centers": [[z, m] for z, m in sol.centers.points]}
    files.append(write_json(rep, ctx.path("sol.json")))
    checks = {"reduced_residual_le_tol": sol.residual_report["reduced_sup"] <= p["tol"]}
    return files, checks


def cmd_pullback(p, ctx):
    from .fieldio import write_field
    from .grid import Grid3, WeightSpec
    from .sw3d import linf_bound_check, pullback, sw_residual
    from .vortex import solve_vortex
    g2 = _planar_grid(p["grid"], p["radius"])
    sol = solve_vortex(p["centers"], g2, polish=p["polish"])
    g3 = Grid3(g2.nx, g2.ny, p["nz"], g2.h)
    c = pullback(sol, p["t"], g3)
    res = sw_residual(c, WeightSpec(p["epsilon"], 4.0, "x3"))
    m, ok = linf_bound_check(c)
    files = [write_field(sw3_field(c), ctx.path("pullback.swf1"))]
    files.append(write_json({"residual": res.to_json(), "linf": m, "h": g3.h, "t": p["t"]},
                            ctx.path("pullback.json")))
    return files, {"linf_bound": ok}


def cmd_spectrum(p, ctx):
    from .linear_ops import assemble_theta, kernel_analysis
    from .vortex import solve_vortex
    sol = solve_vortex(p["centers"], _planar_grid(p["grid"], p["radius"]), polish=p["polish"])
    rep = kernel_analysis(assemble_theta(sol), gap_policy=p["gap"], kernel_dim=p["kernel_dim"])
    files = [write_json(rep.to_json(), ctx.path("spectrum.json")),
             write_csv(["k", "singular_value"], list(enumerate(rep.singular_values)),
                       ctx.path("singular_values.csv"))]
    n = sol.centers.n
    return files, {"kernel_dim_2n": rep.dim_ker == 2 * n, "cokernel_zero": rep.dim_coker == 0}


def cmd_fredholm1d(p, ctx):
    from . import fredholm1d as f1
    from .grid import WeightSpec
    L = p["L"] if p["L"] is not None else 80.0 * p["R"]
    space = f1.Weighted1DSpace(L, p["m"], WeightSpec(p["eps"], p["R"], "x"))
    nu = None
    variant = p["variant"]
    if variant == "perturbed":
        if p["nu"] == "decay":
            nu = f1.decaying_nu(p["nu_amplitude"], p["R"])
        elif p["nu"] == "bump":
            nu = f1.bump_nu(p["nu_amplitude"])
        else:
            raise ConfigError([f"key 'nu': perturbed variant needs nu = decay | bump, got {p['nu']!r}"])
    elif variant not in f1.VARIANTS:
        raise ConfigError([f"key 'variant': expected one of {', '.join(f1.VARIANTS)}, got {variant!r}"])
    op = f1.build_weighted_d(space, variant, nu=nu)
    rep = f1.numerical_index(op, f1.Index1DPolicy(seed=ctx.seed))
    files = [write_json(rep.to_dict(), ctx.path("report.json")),
             write_csv(["k", "singular_value"], list(enumerate(rep.singular_values)),
                       ctx.path("singular_values.csv"))]
    expected = -1 if variant in ("plain", "perturbed") else 1
    return files, {"index": rep.index == expected}


def cmd_glue(p, ctx):
    from .fieldio import write_field
    from .gluing import GluingJob, newton_correct, preglue
    from .vortex import CenterSet, centers_of, solve_vortex, vortex_number
    far = CenterSet.of(p["far"])
    radius = far.max_modulus() + p["margin"]
    n = 2 * int(np.ceil(radius / p["h"])) + 1
    from .grid import Grid2
    g = Grid2(n, n, p["h"])
    base = solve_vortex(p["base"], g, polish=p["polish"])
    c = preglue(GluingJob(base, far, p["R"]), polish=p["polish"])
    sol, rec = newton_correct(c, tol=p["tol"], rtol=p["rtol"], seed=ctx.seed)
    files = [write_field(vortex_field(c), ctx.path("preglued.swf1")),
             write_field(vortex_field(sol), ctx.path("glued.swf1"))]
    rep = {"record": rec.to_json(), "vortex_number": vortex_number(sol),
           "centers": [[z, m] for z, m in centers_of(sol).points]}
    files.append(write_json(rep, ctx.path("glue.json")))
    return files, {"converged": rec.converged}


def cmd_sweep(p, ctx):
    from .gluing import residual_sweep
    rows, slope, overlap = residual_sweep(p["R_list"], h=p["h"], epsilon=p["epsilon"],
                                          margin=p["margin"], jobs=ctx.jobs)
    keys = ["R", "residual_w", "residual_sup", "residual_overlap", "bound"]
    files = [write_csv(keys, [[r[k] for k in keys] for r in rows], ctx.path("sweep.csv")),
             write_json({"rows": rows, "log_slope": slope, "overlap_log_slope": overlap},
                        ctx.path("sweep.json"))]
    w = [r["residual_w"] for r in rows]
    return files, {"decreasing": all(b < a for a, b in zip(w, w[1:])),
                   "bounded": all(r["residual_w"] <= r["bound"] * (1 + 1e-12) for r in rows)}


def cmd_decay_fit(p, ctx):
    from .vortex import solve_vortex, tail_decay_fit
    sol = solve_vortex(p["centers"], _planar_grid(p["grid"], p["radius"]))
    out = {}
    for q in ("deficit", "covariant"):
        rate, quality = tail_decay_fit(sol, p["r0"], p["r1"], q)
        out[q] = {"rate": rate, "quality": quality}
    files = [write_json(out, ctx.path("decay.json"))]
    return files, {q: out[q]["rate"] >= 0.5 and out[q]["quality"] >= 0.98 for q in out}


HANDLERS = {
    "solve-vortex": cmd_solve_vortex,
    "pullback": cmd_pullback,
    "spectrum": cmd_spectrum,
    "fredholm1d": cmd_fredholm1d,
    "glue": cmd_glue,
    "sweep": cmd_sweep,
    "decay-fit": cmd_decay_fit,
}


def run(command: str, config=None, out=".", jobs: int = 1, seed: int = 0) -> dict:
    """Run one command; returns the manifest.  ``config`` is a dict of raw
    strings or typed values."""
    if command not in HANDLERS:
        raise ConfigError([f"unknown command {command!r}\n{USAGE}"])
    if jobs < 1:
        raise ConfigError([f"--jobs must be >= 1, got {jobs}"])
    params = validate(command, config or {})
    ctx = RunContext(Path(out), jobs, seed)
    ctx.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files, checks = HANDLERS[command](params, ctx)
    wall = time.perf_counter() - t0
    manifest = {
        "command": command,
        "config": echo(params),
        "seed": seed,
        "artifacts": {Path(f).name: sha256(f) for f in files},
        "checks": {k: bool(v) for k, v in sorted(checks.items())},
    }
    write_json(manifest, ctx.path("manifest.json"))
    write_json({"command": command, "wall_seconds": wall}, ctx.path("timings.json"))
    return manifest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE, file=sys.stderr if not argv else sys.stdout)
        return 2 if not argv else 0
    command, rest = argv[0], argv[1:]
    if command not in HANDLERS:
        print(f"swlab: unknown command {command!r}\n{USAGE}", file=sys.stderr)
        return 2
    ap = argparse.ArgumentParser(prog=f"swlab {command}")
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("."))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    try:
        args = ap.parse_args(rest)
    except SystemExit as exc:
        return int(exc.code or 2)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = read_config_text(args.config.read_text()) if args.config else {}
        manifest = run(command, raw, args.out, args.jobs, args.seed)
    except ConfigError as exc:
        for prob in exc.problems:
            print(f"swlab {command}: config error: {prob}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"swlab {command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"swlab {command}: error: {exc}", file=sys.stderr)
        return 1
    failed = [k for k, v in manifest["checks"].items() if not v]
    for k, v in manifest["checks"].items():
        print(f"{k}: {'pass' if v else 'FAIL'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
