"""Batch driver: `vfl <kind> --config FILE [--seed N] [--out DIR]`.

Exit codes: 0 success, 1 computational failure, 2 configuration error.  Every
run writes a manifest.json with SHA-256 hashes of its artifacts; failed runs
leave nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import random
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import chain, gridio, spinc, symprod, svg
from . import torus as tg
from . import transport as tr
from . import vortex as vx
from .errors import VflError
from .novikov import NovikovScalar

KINDS = ("solve", "transport", "decay-study", "symprod", "lefschetz", "nielsen", "bifurcation", "spinc")

_NUM = {"type": "number"}
_TORUS = {
    "type": "object",
    "properties": {"modulus_re": _NUM, "modulus_im": {"type": "number", "exclusiveMinimum": 0},
                   "grid_n": {"type": "integer", "minimum": 8}, "area": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["modulus_re", "modulus_im"],
    "additionalProperties": False,
}
_DIVISOR = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}}
_TAU = {"type": "number", "exclusiveMinimum": 0}
_TAUS = {"type": "array", "items": _TAU, "minItems": 1}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_TERMS = {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3}}
_COMMON = {"kind": {"enum": list(KINDS)}, "seed": {"type": "integer"}, "output_dir": {"type": "string"}}


def _obj(props: dict, required: list) -> dict:
    return {"type": "object", "properties": {**_COMMON, **props}, "required": required,
            "additionalProperties": False}


SCHEMAS = {
    "solve": _obj({"torus": _TORUS, "tau": _TAU, "divisor": _DIVISOR, "dump_fields": {"type": "boolean"}},
                  ["torus", "tau", "divisor"]),
    "transport": _obj({"torus": {"type": "object", "properties": {"grid_n": {"type": "integer", "minimum": 8}},
                                 "additionalProperties": False},
                       "tau": _TAU, "taus": _TAUS, "divisor": _DIVISOR,
                       "path": {"type": "object", "properties": {"rho0": _PAIR, "rho1": _PAIR},
                                "required": ["rho0", "rho1"], "additionalProperties": False},
                       "steps": {"type": "integer", "minimum": 1}},
                      ["divisor", "path"]),
    "decay-study": _obj({"torus": _TORUS, "taus": _TAUS, "divisor": _DIVISOR}, ["torus", "taus"]),
    "symprod": _obj({"g": {"type": "integer", "minimum": 1}, "d": {"type": "integer", "minimum": 0},
                     "betti": {"type": "boolean"}, "euler": {"type": "boolean"}}, ["g", "d"]),
    "lefschetz": _obj({"g": {"type": "integer", "minimum": 1}, "d": {"type": "integer", "minimum": 0},
                       "matrix": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}},
                      ["g", "d", "matrix"]),
    "nielsen": _obj({"g": {"type": "integer", "minimum": 1}, "trials": {"type": "integer", "minimum": 1},
                     "length": {"type": "integer", "minimum": 1}}, ["g", "trials"]),
    "bifurcation": _obj({"complex": {"type": "object",
                                     "properties": {"generators": {"type": "array"}, "differential": {"type": "array"},
                                                    "cutoff": {}},
                                     "required": ["generators"]},
                         "moves": {"type": "array", "items": {"type": "object", "properties": {
                             "type": {"enum": ["handleslide", "death_birth"]}}, "required": ["type"]}}},
                        ["complex"]),
    "spinc": _obj({"e": {"type": "array", "items": {"type": "integer"}},
                   "h2pd": {"type": "array", "items": {"type": "integer"}},
                   "c": {"type": "array", "items": _NUM},
                   "fiber_index": {"type": "integer", "minimum": 0}}, ["e", "h2pd", "c"]),
}


class ConfigError(Exception):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(message)
        self.pointer = pointer


def validate(kind: str, cfg: dict) -> None:
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown kind {kind!r}", "/kind")
    if cfg.get("kind", kind) != kind:
        raise ConfigError(f"config kind {cfg.get('kind')!r} does not match {kind!r}", "/kind")
    errors = sorted(jsonschema.Draft7Validator(SCHEMAS[kind]).iter_errors(_plain(cfg)),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(err.message, pointer)


def _plain(obj):
    # Fractions from the JSON parser are plain numbers to the schema
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    return obj


def _threads() -> int:
    return tg.fft_workers()


def _parallel_map(fn, items):
    items = list(items)
    n = min(_threads(), len(items)) or 1
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _torus(cfg: dict) -> tg.FlatTorus:
    t = cfg["torus"]
    return tg.FlatTorus(complex(float(t["modulus_re"]), float(t["modulus_im"])), int(t.get("grid_n", 256)),
                        float(t.get("area", 1.0)))


def _divisor(rows) -> vx.Divisor:
    return vx.Divisor.from_list([[float(r[0]), float(r[1]), int(r[2]) if len(r) > 2 else 1] for r in rows])


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def _num(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, Fraction):
        return float(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    raise TypeError(f"not serializable: {type(o)}")


# --- kinds ------------------------------------------------------------------

def run_solve(cfg, seed, out: Path) -> dict:
    torus = _torus(cfg)
    div = _divisor(cfg["divisor"])
    vf, rep = vx.solve_vortex(torus, div, float(cfg["tau"]))
    rh, rc = vx.vortex_residual(vf)
    wmin, gex = vx.sup_bounds_check(vf)
    record = {**rep.as_dict(), "r_holo": rh, "r_curv": rc, "w_min": wmin, "gradient_excess": gex,
              "expected_mass": 2 * math.pi * div.degree / float(cfg["tau"])}
    (out / "solve.json").write_text(_json(record))
    if cfg.get("dump_fields"):
        gridio.write_field(out / "u.bin", vf.u)
        gridio.write_field(out / "theta.bin", vf.theta)
    return record


def run_decay(cfg, seed, out: Path) -> dict:
    torus = _torus(cfg)
    div = _divisor(cfg.get("divisor", [[0.5, 0.5, 1]]))
    taus = [float(t) for t in cfg["taus"]]

    def cell(tau):
        vf, _ = vx.solve_vortex(torus, div, tau)
        c, r2 = vx.decay_fit(vf)
        return tau, c, r2

    rows = _parallel_map(cell, taus)
    rows.sort()
    slope = _loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    (out / "decay.csv").write_text(_csv([(t, c, r2, c / math.sqrt(t)) for t, c, r2 in rows],
                                        ["tau", "c_fit", "r2", "c_over_sqrt_tau"]))
    notes = [f"slope {slope:.4f}" if slope is not None else "slope n/a"]
    ref = [rows[0][1] * math.sqrt(t / rows[0][0]) for t, _, _ in rows]
    plot = svg.line_plot([("c_fit", [r[0] for r in rows], [r[1] for r in rows], True),
                          ("sqrt(tau) reference", [r[0] for r in rows], ref, False)],
                         "decay rate against tau", "tau", "c_fit", loglog=True, notes=notes)
    (out / "decay.svg").write_text(plot)
    summary = {"slope": slope, "rows": [{"tau": t, "c_fit": c, "r2": r2} for t, c, r2 in rows]}
    (out / "summary.json").write_text(_json(summary))
    return summary


def _loglog_slope(xs, ys):
    if len(xs) < 2:
        return None
    lx = np.log(np.array(xs))
    ly = np.log(np.array(ys))
    A = np.stack([np.ones_like(lx), lx], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(coef[1])


def run_transport(cfg, seed, out: Path) -> dict:
    p = cfg["path"]
    rho0 = complex(*map(float, p["rho0"]))
    rho1 = complex(*map(float, p["rho1"]))
    div = _divisor(cfg["divisor"])
    taus = [float(t) for t in cfg.get("taus", [cfg.get("tau", 400.0)])]
    steps = int(cfg.get("steps", 1))
    n = int(cfg.get("torus", {}).get("grid_n", 256))

    def cell(tau):
        return tau, tr.transport((rho0, rho1), div, tau, steps, grid_n=n)

    results = sorted(_parallel_map(cell, taus), key=lambda r: r[0])
    summary = {"path": {"rho0": [rho0.real, rho0.imag], "rho1": [rho1.real, rho1.imag]}, "runs": []}
    for tau, trace in results:
        rows = []
        for t, d, trk, res in zip(trace.times, trace.divisors, trace.tracked, trace.residuals):
            coords = [c for pt in d.expanded() for c in pt]
            rows.append([t, *coords, *[float(c) for c in np.ravel(trk)], res])
        deg = div.degree
        header = ["t"] + [f"{a}{k}" for k in range(deg) for a in ("x", "y")] \
            + [f"tracked_{a}{k}" for k in range(deg) for a in ("x", "y")] + ["residual"]
        (out / f"trace_tau{_tag(tau)}.csv").write_text(_csv(rows, header))
        summary["runs"].append({"tau": tau, "delta": trace.displacement,
                                "tracked_delta": trace.tracked_displacement,
                                "max_residual": max(trace.residuals), "steps": len(trace.times) - 1,
                                "delta_scaled": trace.displacement * math.sqrt(tau) / math.log(tau)
                                if tau > 1 else None})
    if len(results) > 1:
        ts = [r["tau"] for r in summary["runs"]]
        plot = svg.line_plot([("located zeros", ts, [r["delta"] for r in summary["runs"]], True),
                              ("tracked zeros", ts, [r["tracked_delta"] for r in summary["runs"]], True)],
                             "displacement against tau", "tau", "delta")
        (out / "displacement.svg").write_text(plot)
    (out / "summary.json").write_text(_json(summary))
    return summary


def _tag(tau: float) -> str:
    return str(int(tau)) if float(tau).is_integer() else repr(tau).replace(".", "p")


def run_symprod(cfg, seed, out: Path) -> dict:
    g, d = int(cfg["g"]), int(cfg["d"])
    rec = {"g": g, "d": d}
    want_b = cfg.get("betti", not cfg.get("euler", False))
    if want_b:
        rec["betti"] = symprod.betti(g, d)
    if cfg.get("euler", False) or not want_b:
        rec["euler"] = symprod.euler(g, d)
    rec["pi2_chern"] = symprod.pi2_chern(g, d)
    rec["monotone_range"] = symprod.monotone_range(g, d)
    (out / "symprod.json").write_text(_json(rec))
    return rec


def run_lefschetz(cfg, seed, out: Path) -> dict:
    g, d = int(cfg["g"]), int(cfg["d"])
    A = cfg["matrix"]
    rec = {"g": g, "d": d, "lefschetz": symprod.lefschetz(A, g, d),
           "series": symprod.lefschetz_series(A, d)}
    rec["series_agrees"] = rec["series"][d] == rec["lefschetz"]
    (out / "lefschetz.json").write_text(_json(rec))
    return rec


def run_nielsen(cfg, seed, out: Path) -> dict:
    g, trials = int(cfg["g"]), int(cfg["trials"])
    rng = random.Random(seed)
    violations = 0
    rows = []
    for k in range(trials):
        A = symprod.random_symplectic(g, rng, cfg.get("length"))
        l1, l2, lk, ok = symprod.nielsen_triple(A, g)
        rows.append((k, l1, l2, lk, int(ok)))
        if not ok:
            violations += 1
    (out / "nielsen.csv").write_text(_csv(rows, ["trial", "L1", "L2", "L2g-2", "any_nonzero"]))
    rec = {"g": g, "trials": trials, "seed": seed, "violations": violations,
           "claim_applies": g >= 3}
    (out / "nielsen.json").write_text(_json(rec))
    return rec


def _scalar(terms, cutoff) -> NovikovScalar:
    return chain.scalar_from_json(terms, cutoff)


def run_bifurcation(cfg, seed, out: Path) -> dict:
    C = chain.complex_from_json(cfg["complex"])
    record = {"initial_ranks": chain.homology_ranks(C), "moves": []}
    for k, mv in enumerate(cfg.get("moves", [])):
        if mv["type"] == "handleslide":
            slides = [(int(s["from"]), int(s["to"]), _scalar(s["weight"], C.cutoff), int(s.get("sign", 1)))
                      for s in mv.get("slides", [])]
            C, _ = chain.handleslide_transform(C, slides)
        else:
            v = [_scalar(t, C.cutoff) for t in mv["v"]]
            mu = [_scalar(t, C.cutoff) for t in mv["mu"]]
            db = chain.death_birth_extend(C, v, mu, _scalar(mv["alpha"], C.cutoff))
            C = db.dplus
        rep = chain.check_complex(C, require_positive=False)
        record["moves"].append({"index": k, "type": mv["type"], "ranks": chain.homology_ranks(C),
                                "complex_ok": rep.ok})
    record["final_ranks"] = chain.homology_ranks(C)
    (out / "bifurcation.json").write_text(_json(record))
    (out / "complex.json").write_text(_json(chain.complex_to_json(C)))
    return record


def run_spinc(cfg, seed, out: Path) -> dict:
    c = [float(v) if isinstance(v, (float, Fraction)) else int(v) for v in cfg["c"]]
    lat = spinc.SpincLattice(tuple(cfg["e"]), tuple(cfg["h2pd"]), tuple(c), cfg.get("fiber_index"))
    desc = spinc.ring_descriptors(lat)
    rec = {"grading_divisor": spinc.grading_divisor(lat), "c1": list(lat.c1_vector), **desc.as_dict()}
    (out / "spinc.json").write_text(_json(rec))
    return rec


RUNNERS = {"solve": run_solve, "transport": run_transport, "decay-study": run_decay,
           "symprod": run_symprod, "lefschetz": run_lefschetz, "nielsen": run_nielsen,
           "bifurcation": run_bifurcation, "spinc": run_spinc}


# --- driver -------------------------------------------------------------------

def write_manifest(out: Path, kind: str, seed: int) -> dict:
    arts = []
    for f in sorted(out.rglob("*")):
        if f.is_file() and f.name != "manifest.json":
            data = f.read_bytes()
            arts.append({"path": f.relative_to(out).as_posix(), "sha256": hashlib.sha256(data).hexdigest(),
                         "bytes": len(data)})
    man = {"kind": kind, "seed": seed, "artifacts": arts}
    (out / "manifest.json").write_text(_json(man))
    return man


def run(kind: str, cfg: dict, seed: int, out_dir: Path) -> int:
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".vfl-", dir=out_dir.parent))
    try:
        RUNNERS[kind](cfg, seed, tmp)
        write_manifest(tmp, kind, seed)
    except VflError as exc:
        shutil.rmtree(tmp, ignore_errors=True)
        _emit_error(1, type(exc).__name__, str(exc))
        return 1
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out_dir.exists():
        shutil.rmtree(out_dir)
    os.replace(tmp, out_dir)
    return 0


def _emit_error(code: int, kind: str, message: str, pointer: str | None = None) -> None:
    rec = {"error": kind, "message": message, "exit_code": code}
    if pointer is not None:
        rec["pointer"] = pointer
    sys.stdout.write(json.dumps(rec, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vfl", description="vortex and symmetric-product experiments")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--g", type=int)
    ap.add_argument("--d", type=int)
    ap.add_argument("--betti", action="store_true")
    ap.add_argument("--euler", action="store_true")
    ap.add_argument("--matrix", help="JSON file holding the symplectic matrix")
    ap.add_argument("--trials", type=int)
    return ap


def _config_from_args(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh, parse_float=Fraction)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", "")
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object", "")
    for key in ("g", "d", "trials"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.betti:
        cfg["betti"] = True
    if args.euler:
        cfg["euler"] = True
    if args.matrix:
        try:
            with open(args.matrix) as fh:
                cfg["matrix"] = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read matrix: {exc}", "/matrix")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        validate(args.kind, cfg)
    except ConfigError as exc:
        _emit_error(2, "ConfigError", str(exc), exc.pointer)
        return 2
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = Path(args.out or cfg.get("output_dir") or f"vfl-{args.kind}")
    return run(args.kind, cfg, seed, out)


if __name__ == "__main__":
    sys.exit(main())
