"""Command line entry point: ``sle-lab <suite> --config FILE``.

Suites: algebra-verify, simulate, drift-test, symmetry-verify.  The exit
status is 0 only if every asserted check of the suite passes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from . import suites as S
from . import symmetry as sym
from .martingales import (
    ObservableSpec,
    heisenberg_observables,
    reports_to_csv,
    residue_identity_report,
    sl2_observables,
    virasoro_bb,
)
from .sde import PathConfig, n_threads, run_paths, validate_path_config

SUITES = ("algebra-verify", "simulate", "drift-test", "symmetry-verify")

_NUM = {"type": "number"}
_FRAC = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "sle-lab experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["suite"],
    "properties": {
        "suite": {"enum": list(SUITES)},
        "kappa": {"type": "number", "minimum": 0},
        "case": {"enum": ["virasoro-only", "heisenberg", "sl2"]},
        "rank": {"type": "integer", "minimum": 1},
        "lam": _FRAC,
        "tau": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "minimum": 0},
        "N": {"type": "integer", "minimum": 4},
        "M": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "integrator": {"enum": ["coefficient-euler", "multiplicative"]},
        "sign_convention": {"enum": ["appC", "sec5"]},
        "loewner_scheme": {"enum": ["trapezoid", "euler"]},
        "allow_violation": {"type": "boolean"},
        "n_paths": {"type": "integer", "minimum": 0},
        "sample_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "probe_z": {"type": "number"},
        "observables": {"type": "array", "items": {"type": "string"}},
        "variant": {"enum": ["corrected", "printed", "both"]},
        "threshold": {"type": "number", "exclusiveMinimum": 0},
        "residue_report": {"type": "boolean"},
        "degree": {"type": "integer", "minimum": 1, "maximum": 6},
        "windows": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_min": {"type": "integer", "maximum": -1},
                "d_max": {"type": "integer", "minimum": 1, "maximum": 15},
                "J": {"type": "integer", "minimum": 0, "maximum": 15},
            },
        },
        "levels": {"type": "integer", "minimum": 0, "maximum": 5},
        "gf_terms": {"type": "integer", "minimum": 0, "maximum": 5},
        "scalar_mode": {"enum": ["exact", "complex"]},
        "out": {"type": "string"},
    },
    "allOf": [
        {
            "if": {"properties": {"suite": {"enum": ["simulate", "drift-test"]}}, "required": ["suite"]},
            "then": {"required": ["case", "kappa"]},
        }
    ],
}

_PATH_FIELDS = {f.name for f in fields(PathConfig)}


class ConfigErrors(Exception):
    def __init__(self, errors: Sequence[str]) -> None:
        super().__init__("\n".join(errors))
        self.errors = list(errors)


@dataclass
class ExperimentConfig:
    suite: str
    path: PathConfig | None = None
    n_paths: int = 1000
    sample_times: list[float] = field(default_factory=list)
    probe_z: float = 4.0
    observables: list[str] | None = None
    variant: str = "corrected"
    threshold: float = S.DRIFT_SIGMA
    residue_report: bool = False
    degree: int = 4
    windows: sym.Windows = sym.Windows()
    levels: int = 2
    gf_terms: int = 3
    scalar_mode: str = "exact"
    seed: int = 0
    out: str = "results"
    raw: dict = field(default_factory=dict)


def _fraction(x: Any) -> Fraction:
    return Fraction(str(x)) if not isinstance(x, str) else Fraction(x)


def parse_config(doc: dict | str | Path, suite: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Validate and build the config, collecting every error before raising."""
    if isinstance(doc, (str, Path)):
        text = Path(doc).read_text(encoding="utf-8")
        try:
            doc = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigErrors([f"{doc}: invalid JSON ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ConfigErrors(["config must be a JSON object"])
    doc = dict(doc)
    errors: list[str] = []
    if suite is not None:
        if "suite" in doc and doc["suite"] != suite:
            errors.append(f"config suite {doc['suite']!r} does not match command {suite!r}")
        doc["suite"] = suite
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    bad: set[str] = set()
    for err in sorted(validator.iter_errors(doc), key=lambda e: (list(e.path), e.message)):
        where = "/".join(str(p) for p in err.path) or "<root>"
        errors.append(f"{where}: {err.message}")
        if err.path:
            bad.add(str(err.path[0]))
        elif err.validator == "required" and err.validator_value != ["suite"]:
            bad.add("<required>")
    # keep validating what is well-formed, so every problem is reported at once
    doc = {k: v for k, v in doc.items() if k in CONFIG_SCHEMA["properties"] and k not in bad}
    if "suite" not in doc or "<required>" in bad:
        raise ConfigErrors(errors)

    seed = int(doc.get("seed", 0))
    cfg = ExperimentConfig(suite=doc["suite"], seed=seed, raw=dict(doc))
    if "case" in doc or "kappa" in doc:
        kw = {k: doc[k] for k in _PATH_FIELDS if k in doc}
        kw.setdefault("kappa", 2.0)
        if "lam" in kw:
            kw["lam"] = _fraction(kw["lam"])
        if isinstance(kw.get("tau"), list):
            kw["tau"] = tuple(float(t) for t in kw["tau"])
        kw["seed"] = seed
        path = PathConfig(**kw)
        errors += validate_path_config(path)
        cfg.path = path
    for key in ("n_paths", "probe_z", "observables", "variant", "threshold", "residue_report",
                "degree", "levels", "gf_terms", "scalar_mode", "out"):
        if key in doc:
            setattr(cfg, key, doc[key])
    if cfg.path is not None:
        T = cfg.path.T
        cfg.sample_times = [float(t) for t in doc.get("sample_times", [T / 2, T])]
        for t in cfg.sample_times:
            k = round(t / cfg.path.dt)
            if t > T + 1e-12 or abs(k * cfg.path.dt - t) > 1e-9:
                errors.append(f"sample_times: {t} is not a grid time in [0, T={T}]")
        if abs(cfg.probe_z) < 3.0:
            errors.append(f"probe_z: |z| = {abs(cfg.probe_z)} is below the exactness radius 3")
    if "windows" in doc:
        cfg.windows = sym.Windows(**doc["windows"])
    if cfg.suite == "symmetry-verify":
        span = 2 * cfg.levels
        if not cfg.windows.feasible(span) or not cfg.windows.feasible(cfg.gf_terms):
            errors.append(
                f"windows {asdict(cfg.windows)} cannot host levels up to {span} "
                f"(need < {cfg.windows.reach})"
            )
    if cfg.suite == "symmetry-verify" and cfg.scalar_mode != "exact":
        errors.append("scalar_mode: symmetry-verify runs in exact arithmetic only")
    if errors:
        raise ConfigErrors(errors)
    return cfg


# ---------------------------------------------------------------------------
# manifest and artifacts


def config_echo(cfg: ExperimentConfig) -> dict:
    echo = json.loads(json.dumps(cfg.raw, sort_keys=True, default=str))
    if cfg.path is not None:
        echo["derived"] = cfg.path.metadata()
    return echo


def manifest_hash(cfg: ExperimentConfig) -> str:
    payload = json.dumps({"config": config_echo(cfg), "seed": cfg.seed, "version": __version__}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    suite: str
    manifest: str
    version: str
    seed: int
    config: dict
    passed: bool
    checks_total: int
    checks_failed: list[str]
    wall_clock_seconds: float
    threads: int
    artifacts: list[str]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _fmt(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, Fraction):
        return str(v)
    return v


def _write_csv(path: Path, rows: list[dict], manifest: str, columns: Sequence[str] | None = None) -> None:
    cols = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["manifest", *cols], lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({"manifest": manifest, **{k: _fmt(r.get(k, "")) for k in cols}})
    path.write_text(buf.getvalue(), encoding="utf-8")


def _split_complex(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, (complex, np.complexfloating)):
            out[f"{k}_re"] = float(v.real)
            out[f"{k}_im"] = float(v.imag)
        elif isinstance(v, Fraction):
            out[f"{k}_re"] = float(v)
            out[f"{k}_im"] = 0.0
        else:
            out[k] = v
    return out


def _check_rows(checks: Sequence[S.CheckResult]) -> list[dict]:
    return [{"check": c.name, "passed": c.passed, "detail": json.dumps(c.detail, sort_keys=True, default=str)}
            for c in checks]


# ---------------------------------------------------------------------------
# suites


def _observables(cfg: ExperimentConfig) -> list[ObservableSpec]:
    p = cfg.path
    assert p is not None
    z = cfg.probe_z
    corrected: list[ObservableSpec] = []
    printed: list[ObservableSpec] = []
    if p.case == "sl2":
        corrected = sl2_observables(z)
        printed = [o for o in sl2_observables(z, variant="printed") if o.kind == "Sl2Current"]
    elif p.case == "heisenberg":
        corrected = heisenberg_observables(Fraction(p.lam), p.rank, z)
    bb = []
    if p.kappa > 0:
        bb.append(virasoro_bb(Fraction(p.kappa).limit_denominator(10**6), z))
        if p.kappa != 6:
            bb.append(virasoro_bb(Fraction(6), z))
    if cfg.observables is None:
        pool = {"corrected": corrected, "printed": printed, "both": corrected + printed}[cfg.variant]
        return pool + bb
    by_id = {o.id: o for o in corrected + printed + bb}
    missing = [i for i in cfg.observables if i not in by_id]
    if missing:
        raise ConfigErrors([f"observables: unknown ids {missing}; available: {sorted(by_id)}"])
    return [by_id[i] for i in cfg.observables]


def run_suite(cfg: ExperimentConfig, out_dir: Path) -> RunManifest:
    t0 = time.perf_counter()
    out_dir.mkdir(parents=True, exist_ok=True)
    mh = manifest_hash(cfg)
    artifacts: list[str] = []

    def emit(name: str, rows: list[dict], columns: Sequence[str] | None = None) -> None:
        _write_csv(out_dir / name, rows, mh, columns)
        artifacts.append(name)

    checks: list[S.CheckResult] = []
    if cfg.suite == "algebra-verify":
        checks = S.algebra_suite(cfg.seed, cfg.degree)
    elif cfg.suite == "symmetry-verify":
        checks, comms, gfs = S.symmetry_suite(cfg.windows, range(-cfg.levels, cfg.levels + 1), cfg.seed, cfg.gf_terms)
        report = {"manifest": mh, "windows": asdict(cfg.windows),
                  "brackets": {f"({r.idA},{r.l},{r.idB},{r.m})": r.as_dict() for r in comms}}
        (out_dir / "commutators.json").write_text(json.dumps(report, indent=1, sort_keys=True), encoding="utf-8")
        artifacts.append("commutators.json")
        rows = []
        for g in gfs:
            for r in g.rows:
                rows.append(_split_complex({**r, "sign": g.sign, "symbolic_residual": g.symbolic_residual}))
        emit("generating_functions.csv", rows)
    elif cfg.suite == "simulate":
        checks = _simulate(cfg, emit)
    elif cfg.suite == "drift-test":
        assert cfg.path is not None
        obs = _observables(cfg)
        dchecks, reports = S.drift_suite(cfg.path, obs, cfg.n_paths, cfg.sample_times, cfg.threshold)
        checks += dchecks
        if cfg.path.violation:
            checks.append(S.negative_control(reports))
        drift_csv = reports_to_csv(reports)
        rows = list(csv.DictReader(io.StringIO(drift_csv)))
        emit("drift.csv", rows)
        if cfg.residue_report and cfg.path.case == "heisenberg":
            rep = residue_identity_report(cfg.path, cfg.n_paths, cfg.sample_times, cfg.probe_z)
            emit("residue_identity.csv", rep.rows())
            vanish = rep.t0_lhs == 0 and rep.t0_rhs == 0
            checks.append(S.CheckResult("residue identity sides vanish at t=0", vanish,
                                        {"t0_lhs": str(rep.t0_lhs), "t0_rhs": str(rep.t0_rhs)}))
    emit("checks.csv", _check_rows(checks), ["check", "passed", "detail"])
    failed = [c.name for c in checks if not c.passed]
    man = RunManifest(
        suite=cfg.suite, manifest=mh, version=__version__, seed=cfg.seed, config=config_echo(cfg),
        passed=not failed and bool(checks), checks_total=len(checks), checks_failed=failed,
        wall_clock_seconds=round(time.perf_counter() - t0, 3), threads=n_threads(), artifacts=sorted(artifacts),
    )
    (out_dir / "manifest.json").write_text(man.to_json(), encoding="utf-8")
    return man


def _simulate(cfg: ExperimentConfig, emit) -> list[S.CheckResult]:
    p = cfg.path
    assert p is not None
    obs = _observables(cfg) if p.case != "virasoro-only" or p.kappa > 0 else []
    from .martingales import eval_observable

    probes = {"a1": lambda s: s.P[:, 2], "x": lambda s: s.B0.astype(complex)}
    for o in obs:
        probes[o.id] = lambda s, o=o: eval_observable(s, o)
    times = sorted({round(t, 12) for t in [0.0, p.T, *cfg.sample_times]})
    tab = run_paths(p, probes, times, cfg.n_paths)
    rows = []
    for ti, t in enumerate(tab.times):
        for name, arr in tab.values.items():
            for path_idx, v in enumerate(arr[ti]):
                rows.append({"time": float(t), "path": path_idx, "probe": name,
                             "value_re": float(v.real), "value_im": float(v.imag)})
    emit("trajectories.csv", rows, ["time", "path", "probe", "value_re", "value_im"])
    a1 = tab.values["a1"]
    err = float(np.max(np.abs(a1 - 2 * tab.times[:, None]))) if a1.size else 0.0
    checks = [S.CheckResult("a1 = 2t on all paths", err <= S.A1_TOL, {"max_abs_error": err})]
    if p.kappa == 0 and tab.final_state is not None:
        ref = S.sqrt_expansion(p.T, 9)
        got = tab.final_state.P[0, :9].real
        mask = ref != 0
        rel = float(np.max(np.abs(got[mask] - ref[mask]) / np.abs(ref[mask])))
        checks.append(S.CheckResult("kappa=0 matches sqrt(z^2+4t)", rel <= S.KAPPA0_REL_TOL, {"max_rel_error": rel}))
    return checks


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sle-lab", description=__doc__.splitlines()[0])
    ap.add_argument("suite", choices=SUITES)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="output directory (default: config 'out' or ./results)")
    ap.add_argument("--sign-convention", choices=["appC", "sec5"], dest="sign_convention")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(Path(args.config), args.suite,
                           {"seed": args.seed, "sign_convention": args.sign_convention})
    except ConfigErrors as exc:
        print("configuration invalid:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config {args.config}: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.out)
    try:
        man = run_suite(cfg, out)
    except ConfigErrors as exc:
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error writing to {out}: {exc}", file=sys.stderr)
        return 3
    status = "PASS" if man.passed else "FAIL"
    print(f"{cfg.suite}: {status} ({man.checks_total - len(man.checks_failed)}/{man.checks_total} checks) "
          f"manifest={man.manifest} -> {out}")
    for name in man.checks_failed:
        print(f"  failed: {name}")
    return 0 if man.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
