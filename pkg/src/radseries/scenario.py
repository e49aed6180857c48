"""Scenario files, deterministic orchestration and result emission."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import distribution as D
from .errors import InputError, RadseriesError, StageError
from .spaces import CoefficientFamily, Family, SpaceSpec, parse_space
from .verify import CHECKS, DEFAULT_GRIDS, Model, VerificationReport, applicable_checks, run_checks
from .weaknorms import kw12, kw_profile

__all__ = ["Scenario", "ResultBundle", "load_scenario", "parse_grid", "run_scenario", "emit_plotdata", "write_dist_csv"]

log = logging.getLogger(__name__)

GRID_NAMES = ("t", "p", "q", "s", "lambda", "cor1_t")


def parse_grid(spec) -> list:
    """``[..]``, ``{"start", "stop", "step"}``, ``"a:b:h"`` (inclusive) or ``"x,y,z"``."""
    if isinstance(spec, str):
        spec = spec.strip()
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise InputError(f"grid spec {spec!r} must be start:stop:step")
            try:
                spec = {"start": float(parts[0]), "stop": float(parts[1]), "step": float(parts[2])}
            except ValueError:
                raise InputError(f"grid spec {spec!r} has non-numeric fields") from None
        else:
            try:
                return [float(x) for x in spec.split(",") if x.strip()]
            except ValueError:
                raise InputError(f"grid spec {spec!r} has non-numeric entries") from None
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError):
            raise InputError("range grid needs numeric start, stop and step") from None
        if step <= 0:
            raise InputError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(n, 0))]
    if isinstance(spec, (list, tuple)):
        try:
            return [float(x) for x in spec]
        except (TypeError, ValueError):
            raise InputError("grid entries must be numbers") from None
    raise InputError(f"unrecognised grid spec {spec!r}")


@dataclass
class Scenario:
    family: CoefficientFamily
    mode: str = "EXACT"
    samples: int | None = None
    seed: int = 0
    max_n: int = D.DEFAULT_EXACT_MAX_N
    grids: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GRIDS.items()})
    checks: list = field(default_factory=list)
    out_dir: Path | None = None
    name: str = "scenario"

    def canonical(self) -> dict:
        return {
            "name": self.name,
            "space": self.family.space.to_json(),
            "coefficients": [[repr(float(x)) for x in row] for row in self.family.coeffs],
            "mode": {"kind": self.mode, "samples": self.samples, "max_n": self.max_n},
            "seed": self.seed,
            "grids": {k: [repr(float(x)) for x in self.grids[k]] for k in GRID_NAMES},
            "checks": list(self.checks),
        }

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _space_from(raw, dim, errors):
    try:
        if isinstance(raw, str):
            return parse_space(raw, dim=dim)
        if isinstance(raw, dict):
            fam = str(raw.get("family", "")).upper()
            d = raw.get("dim", dim)
            if dim is not None and d != dim:
                errors.append(f"space.dim={d} does not match coefficient columns {dim}")
                return None
            return SpaceSpec(Family(fam) if fam in Family.__members__ else fam, d, raw.get("p"))
        errors.append("space must be a string like 'linf:3' or an object {family, dim, p}")
    except (InputError, ValueError) as exc:
        errors.append(f"space: {exc}")
    return None


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON file; every violation is reported at once."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    return scenario_from_dict(raw, base=path.parent, source=str(path))


def scenario_from_dict(raw: dict, base=Path("."), source="<scenario>") -> Scenario:
    errors = []
    known = {"name", "space", "coefficients", "coefficients_csv", "mode", "seed", "grids", "checks", "output"}
    for key in sorted(set(raw) - known):
        errors.append(f"unknown field {key!r}")

    coeffs = None
    if "coefficients" in raw and "coefficients_csv" in raw:
        errors.append("give either coefficients or coefficients_csv, not both")
    elif "coefficients" in raw:
        try:
            coeffs = np.array(raw["coefficients"], dtype=float)
            if coeffs.ndim == 1:
                coeffs = coeffs.reshape(-1, 1)
            if coeffs.ndim != 2 or coeffs.size == 0:
                errors.append("coefficients must be a nonempty N x m matrix")
                coeffs = None
        except (TypeError, ValueError):
            errors.append("coefficients must be a rectangular numeric matrix")
    elif "coefficients_csv" in raw:
        csv_path = Path(base) / raw["coefficients_csv"]
        if not csv_path.exists():
            errors.append(f"coefficients_csv not found: {csv_path}")
        else:
            try:
                coeffs = CoefficientFamily.from_csv(csv_path).coeffs
            except InputError as exc:
                errors.append(str(exc))
    else:
        errors.append("missing coefficients (inline matrix or coefficients_csv)")

    dim = coeffs.shape[1] if coeffs is not None else None
    space = _space_from(raw.get("space", "linf"), dim, errors) if "space" in raw else None
    if "space" not in raw:
        errors.append("missing field 'space'")
    family = None
    if space is not None and coeffs is not None:
        try:
            family = CoefficientFamily(space, coeffs)
        except InputError as exc:
            errors.append(str(exc))

    mode = raw.get("mode", {"kind": "EXACT"})
    if isinstance(mode, str):
        mode = {"kind": mode}
    kind = str(mode.get("kind", "EXACT")).upper()
    if kind == "MONTE_CARLO":
        kind = "MC"
    samples = mode.get("samples")
    max_n = mode.get("max_n", D.DEFAULT_EXACT_MAX_N)
    if kind not in ("EXACT", "MC"):
        errors.append(f"mode.kind must be EXACT or MC, got {kind!r}")
    if kind == "MC" and not (isinstance(samples, int) and samples >= 1):
        errors.append("mode.samples must be a positive integer for MC mode")
    if not (isinstance(max_n, int) and max_n >= 1):
        errors.append("mode.max_n must be a positive integer")
    seed = raw.get("seed", mode.get("seed", 0))
    if not (isinstance(seed, int) and seed >= 0):
        errors.append("seed must be a nonnegative integer")
        seed = 0

    grids = {k: list(v) for k, v in DEFAULT_GRIDS.items()}
    raw_grids = raw.get("grids", {})
    if not isinstance(raw_grids, dict):
        errors.append("grids must be an object")
        raw_grids = {}
    for name, spec in raw_grids.items():
        if name not in GRID_NAMES:
            errors.append(f"unknown grid {name!r}")
            continue
        try:
            grids[name] = parse_grid(spec)
        except InputError as exc:
            errors.append(f"grid {name}: {exc}")
    for name in GRID_NAMES:
        g = np.asarray(grids[name], dtype=float)
        if g.size == 0:
            errors.append(f"grid {name} is empty")
        elif np.any(np.diff(g) <= 0):
            errors.append(f"grid {name} must be strictly increasing")
    if grids["t"] and min(grids["t"]) < 0:
        errors.append("grid t must be nonnegative")
    if grids["cor1_t"] and (min(grids["cor1_t"]) <= 0 or max(grids["cor1_t"]) > 0.1):
        errors.append("grid cor1_t must lie in (0, 0.1]")
    if grids["lambda"] and (min(grids["lambda"]) <= 0 or max(grids["lambda"]) >= 1):
        errors.append("grid lambda must lie in (0, 1)")
    if grids["s"] and min(grids["s"]) < 1:
        errors.append("grid s must be >= 1")
    if grids["p"] and min(grids["p"]) < 1:
        errors.append("grid p must be >= 1")

    checks = raw.get("checks")
    if checks is None or checks == "all":
        checks = applicable_checks(family) if (family is not None and kind == "EXACT") else []
    elif not isinstance(checks, list):
        errors.append("checks must be a list of check ids or 'all'")
        checks = []
    else:
        for c in checks:
            if c not in CHECKS:
                errors.append(f"unknown check id {c!r}")
        if kind == "MC" and checks:
            errors.append("verification checks need EXACT mode")
        if family is not None:
            bad = [c for c in checks if c in CHECKS and c not in applicable_checks(family)]
            if bad:
                errors.append(f"checks not supported for space {family.space.describe()}: {', '.join(bad)}")

    out = raw.get("output", {})
    out_dir = None
    if isinstance(out, dict) and out.get("dir"):
        out_dir = Path(base) / out["dir"]

    if errors:
        raise InputError(f"{source}: invalid scenario:\n  - " + "\n  - ".join(errors))
    return Scenario(
        family=family,
        mode=kind,
        samples=samples,
        seed=seed,
        max_n=max_n,
        grids=grids,
        checks=[c for c in CHECKS if c in checks],
        out_dir=out_dir,
        name=str(raw.get("name", "scenario")),
    )


@dataclass
class ResultBundle:
    scenario: Scenario
    dist: D.DistSummary
    profile: object
    report: VerificationReport | None
    provenance: dict
    files: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.report is None or self.report.all_pass

    def summary(self) -> dict:
        out = {"provenance": self.provenance, "files": {k: str(v) for k, v in sorted(self.files.items())}}
        if self.report is not None:
            out["verification"] = self.report.summary()
        return out


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except RadseriesError as exc:
        raise StageError(name, exc) from exc


def _fmt(x) -> str:
    return repr(float(x))


def _header(prov) -> str:
    return f"# scenario_hash={prov['scenario_hash']} instance_hash={prov['instance_hash']} version={prov['version']}\n"


def write_dist_csv(d: D.DistSummary, path, prov=None) -> None:
    with Path(path).open("w") as fh:
        if prov:
            fh.write(_header(prov))
        fh.write("value,probability,cumulative\n")
        for v, p, c in d.to_rows():
            fh.write(f"{_fmt(v)},{_fmt(p)},{_fmt(c)}\n")


def dist_summary(d: D.DistSummary, p_grid, q_grid) -> dict:
    return {
        "kind": d.kind.value,
        "atoms": int(d.values.size),
        "total": int(d.total),
        "samples": d.samples,
        "seed": d.seed,
        "mean": d.mean,
        "median": D.median(d),
        "max": d.max_value,
        "moments": {_fmt(p): D.moment(d, p) for p in p_grid},
        "weak_lp": {_fmt(p): D.weak_lp_rv(d, p) for p in p_grid},
        "orlicz_psi_q": {_fmt(q): D.orlicz_norm(d, q) for q in q_grid},
    }


def write_profile_csv(profile, path, prov=None) -> None:
    m = profile.witnesses.shape[1]
    with Path(path).open("w") as fh:
        if prov:
            fh.write(_header(prov))
        fh.write(",".join(["t", "kw", "exactness"] + [f"w{j + 1}" for j in range(m)]) + "\n")
        for t, v, e, w in profile.rows():
            fh.write(",".join([_fmt(t), _fmt(v), e] + [_fmt(x) for x in w]) + "\n")


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_xy(path, xs, ys, prov) -> None:
    with Path(path).open("w") as fh:
        fh.write(_header(prov))
        for x, y in zip(xs, ys):
            fh.write(f"{_fmt(x)} {_fmt(y)}\n")


def emit_plotdata(bundle: ResultBundle, out_dir) -> dict:
    """Two-column files: tail vs 4exp(-t^2/8), and S*(t) vs E S + K^w(sqrt(log 1/t))."""
    s = bundle.scenario
    if not s.checks:
        return {}
    out_dir = Path(out_dir)
    d, prof, prov = bundle.dist, bundle.profile, bundle.provenance
    ts = np.asarray(prof.grid)
    es = d.mean
    tails = D.tail_many(d, 2 * es + 6 * np.asarray(prof.values))
    files = {
        "plot_tail": out_dir / "tail.dat",
        "plot_tail_envelope": out_dir / "tail_envelope.dat",
        "plot_sstar": out_dir / "sstar.dat",
        "plot_sstar_envelope": out_dir / "sstar_envelope.dat",
    }
    _write_xy(files["plot_tail"], ts, tails, prov)
    _write_xy(files["plot_tail_envelope"], ts, 4 * np.exp(-(ts**2) / 8), prov)
    ct = np.asarray(s.grids["cor1_t"])
    sstar = [D.rearrangement(d, t) for t in ct]
    env = [es + kw12(s.family, math.sqrt(math.log(1 / t)), seed=s.seed).value for t in ct]
    _write_xy(files["plot_sstar"], ct, sstar, prov)
    _write_xy(files["plot_sstar_envelope"], ct, env, prov)
    return files


def run_scenario(s: Scenario, *, workers: int = 1, out_dir=None) -> ResultBundle:
    """dist -> kwprofile -> verify, then write every output file."""
    fam = s.family
    if s.mode == "EXACT":
        dist = _stage("dist", D.enumerate_exact, fam, workers=workers, max_n=s.max_n)
    else:
        dist = _stage("dist", D.sample_mc, fam, s.samples, seed=s.seed, workers=workers)
    profile = _stage("kwprofile", kw_profile, fam, s.grids["t"], seed=s.seed)
    report = None
    if s.checks:
        model = Model(fam, dist, seed=s.seed)
        grids = {k: v for k, v in s.grids.items()}
        report = _stage("verify", run_checks, model, s.checks, grids)
    prov = {
        "version": __version__,
        "seed": s.seed,
        "scenario_hash": s.hash(),
        "instance_hash": fam.instance_hash(),
        "mode": s.mode,
    }
    bundle = ResultBundle(s, dist, profile, report, prov)
    out_dir = Path(out_dir) if out_dir is not None else s.out_dir
    if out_dir is not None:
        _stage("emit", _emit_all, bundle, out_dir)
    return bundle


def _emit_all(bundle: ResultBundle, out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out_dir}: {exc}") from None
    s, prov = bundle.scenario, bundle.provenance
    files = {
        "dist": out_dir / "dist.csv",
        "dist_summary": out_dir / "dist_summary.json",
        "kprofile": out_dir / "kprofile.csv",
    }
    try:
        write_dist_csv(bundle.dist, files["dist"], prov)
        summary = dist_summary(bundle.dist, s.grids["p"], s.grids["q"])
        summary["provenance"] = prov
        _write_json(summary, files["dist_summary"])
        write_profile_csv(bundle.profile, files["kprofile"], prov)
        if bundle.report is not None:
            files["report"] = out_dir / "report.json"
            _write_json(report_json(bundle), files["report"])
        files.update(emit_plotdata(bundle, out_dir))
    except OSError as exc:
        raise InputError(f"cannot write output: {exc}") from None
    bundle.files.update(files)


def report_json(bundle: ResultBundle) -> dict:
    out = bundle.report.to_json() if bundle.report is not None else {"summary": {}, "checks": []}
    out["provenance"] = bundle.provenance
    out["space"] = bundle.scenario.family.space.describe()
    return out
