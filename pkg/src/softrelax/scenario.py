"""Scenario files: parsing, validation, and batch runs that write CSV/JSON artifacts.

A scenario is a JSON object with a top-level ``version`` and the sections
``material``, ``initial``, ``load``, ``time``, ``solver``, ``verify`` and
``output``. Unknown keys are rejected.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .evolution import (
    MonotoneAffine,
    PiecewiseLinear,
    SolverError,
    TimeGrid,
    energy_balance_residual,
    run_evolution,
    stability_check,
)
from .geometry import Ball, Ellipsoid, MaterialModel, Polytope, SqrtPotential, YieldSet, a_K
from .laminates import convergence_table
from .tensors import DevTensor2, Elasticity, SymTensor2, deviatoric

SCHEMA_VERSION = 1

SERIES_COLUMNS = (
    "t", "e11", "e12", "e22", "p11", "p12",
    "sigma11", "sigma12", "sigma22", "sigma_dev_norm",
    "z_atom", "conc_zhat", "alpha", "Q", "diss_H", "v_total", "work", "residual",
)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


class ScenarioError(ValueError):
    """Invalid scenario; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class MaterialSpec:
    mu: float
    kappa: float
    yield_set: dict
    b_V: float


@dataclass(frozen=True)
class InitialSpec:
    p0: tuple = (0.0, 0.0)
    z0: float = 0.0


@dataclass(frozen=True)
class LoadSpec:
    mode: str
    xi0: tuple | None = None
    knots: tuple | None = None


@dataclass(frozen=True)
class TimeSpec:
    t_end: float | None = None
    steps: int | None = None
    times: tuple | None = None


@dataclass(frozen=True)
class SolverSpec:
    tol: float = 1e-10
    max_iter: int = 200
    integration: str = "exact"


@dataclass(frozen=True)
class VerifySpec:
    energy: bool = True
    stability: bool = False
    stability_times: int = 20
    stability_samples: int = 10000
    laminate_study: tuple | None = None
    laminate_beta: float = 1.0


@dataclass(frozen=True)
class OutputSpec:
    directory: str | None = None
    formats: tuple = ("csv", "json", "gnuplot")


@dataclass(frozen=True)
class Scenario:
    name: str
    material: MaterialSpec
    initial: InitialSpec
    load: LoadSpec
    time: TimeSpec
    solver: SolverSpec = field(default_factory=SolverSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    version: int = SCHEMA_VERSION

    def build_model(self) -> MaterialModel:
        return MaterialModel(Elasticity(self.material.mu, self.material.kappa), _yield_set(self.material.yield_set), SqrtPotential(self.material.b_V))

    def build_load(self):
        if self.load.mode == "monotone":
            return MonotoneAffine(self.load.xi0)
        if self.load.mode == "zero":
            return MonotoneAffine(((0.0, 0.0), (0.0, 0.0)))
        return PiecewiseLinear(self.load.knots)

    def build_grid(self) -> TimeGrid:
        if self.time.times is not None:
            return TimeGrid(self.time.times)
        return TimeGrid.uniform(self.time.t_end, self.time.steps)


# ---------------------------------------------------------------------------
# parsing


def _section(raw: Any, key: str, required: set, optional: set) -> dict:
    if not isinstance(raw, dict):
        raise ScenarioError(key, "expected an object")
    for k in raw:
        if k not in required | optional:
            raise ScenarioError(f"{key}.{k}" if key else k, "unknown key")
    for k in sorted(required):
        if k not in raw:
            raise ScenarioError(f"{key}.{k}" if key else k, "missing required key")
    return raw


def _num(raw, key, positive=False, nonneg=False) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not math.isfinite(raw):
        raise ScenarioError(key, f"expected a finite number, got {raw!r}")
    if positive and not raw > 0:
        raise ScenarioError(key, f"must be positive, got {raw}")
    if nonneg and raw < 0:
        raise ScenarioError(key, f"must be nonnegative, got {raw}")
    return float(raw)


def _int(raw, key, minimum=1) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < minimum:
        raise ScenarioError(key, f"expected an integer >= {minimum}, got {raw!r}")
    return raw


def _matrix(raw, key) -> tuple:
    if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(r, list) and len(r) == 2 for r in raw)):
        raise ScenarioError(key, "expected a 2x2 matrix [[a, b], [c, d]]")
    return tuple(tuple(_num(x, f"{key}[{i}][{j}]") for j, x in enumerate(r)) for i, r in enumerate(raw))


def _yield_set(spec: dict) -> YieldSet:
    kind = spec["type"]
    if kind == "ball":
        return Ball(spec["radius"])
    if kind == "ellipsoid":
        return Ellipsoid(spec["s_sigma"], spec["s_zeta"])
    return Polytope(spec["vertices"])


def _parse_yield_set(raw, key) -> dict:
    if not isinstance(raw, dict) or "type" not in raw:
        raise ScenarioError(f"{key}.type", "missing required key")
    kinds = {"ball": {"radius"}, "ellipsoid": {"s_sigma", "s_zeta"}, "polytope": {"vertices"}}
    kind = raw["type"]
    if kind not in kinds:
        raise ScenarioError(f"{key}.type", f"unknown yield set {kind!r}; expected one of {sorted(kinds)}")
    _section(raw, key, kinds[kind] | {"type"}, set())
    if kind == "polytope":
        v = raw["vertices"]
        if not (isinstance(v, list) and v and all(isinstance(r, list) and len(r) == 3 for r in v)):
            raise ScenarioError(f"{key}.vertices", "expected a list of [d11, d12, zeta] triples")
        verts = [[_num(x, f"{key}.vertices[{i}]") for x in r] for i, r in enumerate(v)]
        return {"type": kind, "vertices": verts}
    return {"type": kind, **{k: _num(raw[k], f"{key}.{k}", positive=True) for k in kinds[kind]}}


def parse_scenario(data: Any, name: str = "scenario") -> Scenario:
    top = _section(data, "", {"version", "material", "load", "time"}, {"initial", "solver", "verify", "output", "name"})
    if top["version"] != SCHEMA_VERSION:
        raise ScenarioError("version", f"unsupported version {top['version']!r}; expected {SCHEMA_VERSION}")
    name = str(top.get("name", name))

    m = _section(top["material"], "material", {"mu", "kappa", "yield_set", "b_V"}, set())
    material = MaterialSpec(
        mu=_num(m["mu"], "material.mu", positive=True),
        kappa=_num(m["kappa"], "material.kappa", positive=True),
        yield_set=_parse_yield_set(m["yield_set"], "material.yield_set"),
        b_V=_num(m["b_V"], "material.b_V", positive=True),
    )
    try:
        K = _yield_set(material.yield_set)
    except ValueError as exc:
        raise ScenarioError("material.yield_set", str(exc)) from None
    if not material.b_V < a_K(K):
        raise ScenarioError("material.b_V", f"softening asymptote must be below yield height a_K (b_V={material.b_V}, a_K={a_K(K)})")

    ini = _section(top.get("initial", {}), "initial", set(), {"p0", "z0"})
    p0 = ini.get("p0", [0.0, 0.0])
    if not (isinstance(p0, list) and len(p0) == 2):
        raise ScenarioError("initial.p0", "expected deviator components [p11, p12]")
    initial = InitialSpec(p0=tuple(_num(x, "initial.p0") for x in p0), z0=_num(ini.get("z0", 0.0), "initial.z0"))

    ld = top["load"]
    if not isinstance(ld, dict) or "mode" not in ld:
        raise ScenarioError("load.mode", "missing required key")
    mode = ld["mode"]
    if mode == "monotone":
        _section(ld, "load", {"mode", "xi0"}, set())
        load = LoadSpec(mode, xi0=_matrix(ld["xi0"], "load.xi0"))
    elif mode == "zero":
        _section(ld, "load", {"mode"}, set())
        load = LoadSpec(mode)
    elif mode == "piecewise":
        _section(ld, "load", {"mode", "knots"}, set())
        ks = ld["knots"]
        if not isinstance(ks, list) or len(ks) < 2:
            raise ScenarioError("load.knots", "expected at least two [t, matrix] pairs")
        knots = []
        for i, kn in enumerate(ks):
            if not (isinstance(kn, list) and len(kn) == 2):
                raise ScenarioError(f"load.knots[{i}]", "expected [t, [[a, b], [c, d]]]")
            knots.append((_num(kn[0], f"load.knots[{i}]", nonneg=True), _matrix(kn[1], f"load.knots[{i}]")))
        if any(b[0] <= a[0] for a, b in zip(knots, knots[1:])):
            raise ScenarioError("load.knots", "knot times must be strictly increasing")
        load = LoadSpec(mode, knots=tuple(knots))
    else:
        raise ScenarioError("load.mode", f"unknown mode {mode!r}; expected monotone, piecewise or zero")

    tm = _section(top["time"], "time", set(), {"t_end", "steps", "times"})
    if "times" in tm:
        if "t_end" in tm or "steps" in tm:
            raise ScenarioError("time.times", "give either explicit times or t_end with steps")
        ts = tm["times"]
        if not isinstance(ts, list) or len(ts) < 2:
            raise ScenarioError("time.times", "expected at least two times")
        ts = tuple(_num(t, "time.times", nonneg=True) for t in ts)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError("time.times", "times must be strictly increasing")
        time = TimeSpec(times=ts)
    else:
        for k in ("t_end", "steps"):
            if k not in tm:
                raise ScenarioError(f"time.{k}", "missing required key")
        time = TimeSpec(t_end=_num(tm["t_end"], "time.t_end", positive=True), steps=_int(tm["steps"], "time.steps"))

    sv = _section(top.get("solver", {}), "solver", set(), {"tol", "max_iter", "integration"})
    integration = sv.get("integration", "exact")
    if integration not in ("exact", "trapezoid"):
        raise ScenarioError("solver.integration", f"expected 'exact' or 'trapezoid', got {integration!r}")
    solver = SolverSpec(
        tol=_num(sv.get("tol", 1e-10), "solver.tol", positive=True),
        max_iter=_int(sv.get("max_iter", 200), "solver.max_iter"),
        integration=integration,
    )

    vf = _section(
        top.get("verify", {}), "verify", set(),
        {"energy", "stability", "stability_times", "stability_samples", "laminate_study", "laminate_beta"},
    )
    for k in ("energy", "stability"):
        if k in vf and not isinstance(vf[k], bool):
            raise ScenarioError(f"verify.{k}", "expected true or false")
    lam = vf.get("laminate_study")
    if lam is not None:
        if not isinstance(lam, list) or not lam:
            raise ScenarioError("verify.laminate_study", "expected a list of refinement indices")
        lam = tuple(_int(k, "verify.laminate_study", minimum=2) for k in lam)
        if load.mode == "zero":
            raise ScenarioError("verify.laminate_study", "needs a nonzero load direction")
    verify = VerifySpec(
        energy=vf.get("energy", True),
        stability=vf.get("stability", False),
        stability_times=_int(vf.get("stability_times", 20), "verify.stability_times"),
        stability_samples=_int(vf.get("stability_samples", 10000), "verify.stability_samples"),
        laminate_study=lam,
        laminate_beta=_num(vf.get("laminate_beta", 1.0), "verify.laminate_beta", positive=True),
    )

    out = _section(top.get("output", {}), "output", set(), {"directory", "formats"})
    formats = out.get("formats", ["csv", "json", "gnuplot"])
    if not isinstance(formats, list) or any(f not in ("csv", "json", "gnuplot") for f in formats):
        raise ScenarioError("output.formats", "expected a subset of ['csv', 'json', 'gnuplot']")
    directory = out.get("directory")
    if directory is not None and not isinstance(directory, str):
        raise ScenarioError("output.directory", "expected a path string")
    output = OutputSpec(directory=directory, formats=tuple(formats))

    return Scenario(name, material, initial, load, time, solver, verify, output)


def bundled_scenarios() -> list[str]:
    root = resources.files("softrelax") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(ref: str) -> Path:
    """A filesystem path, or the name of a bundled scenario with or without ``.json``."""
    p = Path(ref)
    if p.exists():
        return p
    name = ref if ref.endswith(".json") else ref + ".json"
    bundled = resources.files("softrelax") / "scenarios" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no scenario file {ref!r} (bundled: {', '.join(bundled_scenarios())})")


def load_scenario(path) -> Scenario:
    path = resolve_scenario_path(str(path))
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data, name=path.stem)


# ---------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    status: int
    out_dir: Path
    summary: dict | None = None
    messages: list = field(default_factory=list)


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def series_rows(record):
    a = record[0]
    for s in record:
        m = s.measure
        residual = (s.Q + s.diss_H + s.v_total) - (a.Q + a.diss_H + a.v_total) - (s.work - a.work)
        yield (
            s.t, s.e.m11, s.e.m12, s.e.m22, s.p.d11, s.p.d12,
            s.sigma.m11, s.sigma.m12, s.sigma.m22, s.sigma_dev_norm,
            m.atom_z, m.conc_zhat, m.alpha, s.Q, s.diss_H, s.v_total, s.work, residual,
        )


def _series_csv(record) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for row in series_rows(record):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _laminate_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "functional", "gap"])
    for k, v, g in rows:
        w.writerow([k, repr(v), repr(g)])
    return buf.getvalue()


def _plot_script(has_laminate: bool) -> str:
    lines = [
        "# gnuplot script; run from this directory: gnuplot plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        "set output 'stress.png'",
        "set xlabel 't'",
        "plot 'series.csv' using 't':'sigma_dev_norm' with lines",
        "set output 'energies.png'",
        "plot 'series.csv' using 't':'Q' with lines, '' using 't':'diss_H' with lines, \\",
        "     '' using 't':'v_total' with lines, '' using 't':'work' with lines",
        "set output 'residual.png'",
        "plot 'series.csv' using 't':'residual' with lines",
    ]
    if has_laminate:
        lines += [
            "set output 'laminate.png'",
            "set logscale xy",
            "set xlabel 'k'",
            "plot 'laminate.csv' using 'k':'gap' with linespoints",
        ]
    return "\n".join(lines) + "\n"


def _first_yield(record):
    p0 = record[0].p
    for prev, s in zip(record, record[1:]):
        if (s.p - p0).norm() > 0.0:
            return s.t, [prev.t, s.t]
    return None, None


def _stability_indices(n: int, count: int):
    if n <= count:
        return list(range(n))
    return sorted({round(i * (n - 1) / (count - 1)) for i in range(count)})


def _laminate_direction(sc: Scenario) -> DevTensor2:
    if sc.load.mode == "monotone":
        return deviatoric(SymTensor2.from_matrix(sc.load.xi0))
    (t0, m0), (t1, m1) = sc.load.knots[0], sc.load.knots[-1]
    return deviatoric(SymTensor2.from_matrix(m1) - SymTensor2.from_matrix(m0)) * (1.0 / (t1 - t0))


def run_scenario(
    sc: Scenario,
    out_dir=None,
    verify: str | None = None,
    laminate: tuple | None = None,
    steps: int | None = None,
    seed: int = 0,
) -> RunResult:
    """Run a scenario and write its artifacts.

    ``verify`` ("all", "energy", "stability", "none") and ``laminate``
    override the scenario's own verify section; ``steps`` replaces the
    uniform step count. Returns the exit status together with the summary.
    """
    if steps is not None:
        if sc.time.times is not None:
            raise ScenarioError("time.steps", "cannot override steps for explicit time lists")
        sc = replace(sc, time=replace(sc.time, steps=int(steps)))
    vspec = sc.verify
    if verify is not None:
        if verify not in ("all", "energy", "stability", "none"):
            raise ScenarioError("--verify", f"expected all, energy, stability or none, got {verify!r}")
        vspec = replace(vspec, energy=verify in ("all", "energy"), stability=verify in ("all", "stability"))
    if laminate is not None:
        vspec = replace(vspec, laminate_study=tuple(laminate))

    out = Path(out_dir or sc.output.directory or Path("runs") / sc.name)
    out.mkdir(parents=True, exist_ok=True)
    result = RunResult(status=EXIT_OK, out_dir=out)

    model = sc.build_model()
    try:
        record = run_evolution(
            model, sc.build_load(), sc.build_grid(),
            p0=DevTensor2(*sc.initial.p0), z0=sc.initial.z0,
            tol=sc.solver.tol, max_iter=sc.solver.max_iter, integration=sc.solver.integration, seed=seed,
        )
    except SolverError as exc:
        diag = {
            "error": "solver_failure",
            "message": str(exc),
            "step_index": exc.step_index,
            "residual": exc.residual,
            "last_iterate": None if exc.last_iterate is None else [exc.last_iterate.d11, exc.last_iterate.d12],
        }
        _atomic_write(out / "diagnostic.json", _json(diag))
        result.status = EXIT_SOLVER
        result.messages.append(str(exc))
        return result
    except ValueError as exc:
        _atomic_write(out / "diagnostic.json", _json({"error": "invalid_initial_state", "message": str(exc)}))
        result.status = EXIT_VALIDATION
        result.messages.append(str(exc))
        return result

    final = record[-1]
    n_steps = len(record) - 1
    t0, bracket = _first_yield(record)
    residual = energy_balance_residual(record)
    energy_tol = 1e-10 if final.work_exact else 5.0 / n_steps
    checks = {}
    if vspec.energy:
        checks["energy"] = abs(residual) <= energy_tol
    worst = None
    if vspec.stability:
        worst = max(
            stability_check(model, record[i], n_samples=vspec.stability_samples, rng_seed=seed + i)
            for i in _stability_indices(len(record), vspec.stability_times)
        )
        checks["stability"] = worst <= 1e-12

    lam_rows = None
    if vspec.laminate_study:
        xi0s = _laminate_direction(sc)
        if xi0s.norm() == 0.0:
            raise ScenarioError("verify.laminate_study", "needs a load with nonzero deviatoric part")
        lam_rows = convergence_table(model.yield_set, model.potential, sc.initial.z0, xi0s, vspec.laminate_beta, vspec.laminate_study)
        gaps = [g for _, _, g in lam_rows]
        checks["laminate"] = all(b < a for a, b in zip(gaps, gaps[1:]))

    summary = {
        "scenario": sc.name,
        "version": sc.version,
        "steps": n_steps,
        "t_end": final.t,
        "t0_detected": t0,
        "t0_bracket": bracket,
        "final_stress": {"sigma11": final.sigma.m11, "sigma12": final.sigma.m12, "sigma22": final.sigma.m22, "sigma_dev_norm": final.sigma_dev_norm},
        "final_plastic_strain": {"p11": final.p.d11, "p12": final.p.d12, "norm": final.p.norm()},
        "conc_zhat": final.measure.conc_zhat,
        "diss_H": final.diss_H,
        "v_total": final.v_total,
        "work": final.work,
        "energy_residual": residual,
        "energy_tolerance": energy_tol,
        "work_exact": final.work_exact,
        "worst_stability_violation": worst,
        "path_dependent": final.measure.path_dependent,
        "laminate": None if lam_rows is None else [{"k": k, "functional": v, "gap": g} for k, v, g in lam_rows],
        "checks": checks,
        "scenario_spec": asdict(sc),
    }
    fmts = sc.output.formats
    if "csv" in fmts:
        _atomic_write(out / "series.csv", _series_csv(record))
        if lam_rows is not None:
            _atomic_write(out / "laminate.csv", _laminate_csv(lam_rows))
    if "gnuplot" in fmts:
        _atomic_write(out / "plot.gp", _plot_script(lam_rows is not None))
    if "json" in fmts:
        _atomic_write(out / "summary.json", _json(summary))

    result.summary = summary
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        result.status = EXIT_VERIFY
        result.messages.append(f"verification failed: {', '.join(failed)}")
    return result
