"""Batch scenario runner.

``balayage run --scenario FILE [--out FILE] [--seed N] [--eps X] [--csv FILE]``
loads a scenario, dispatches its task and writes a JSON report.  Numbers in
the report are decimal strings with 17 significant digits.  Exit codes:
0 pass, 1 fail, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .checker import check, mass_relations, verify_arens_singer, verify_jensen
from .construct import (ConstructionError, ShiftFamily, convolution_balayage,
                        default_radius, family_integral_balayage, harmonic_measure_ball,
                        jensen_mixture, smooth)
from .geom import Ball, as_point, constants, set_from_json
from .hull import inward_filled_hull, koc_check, rasterize
from .lyons import (DEFAULT_M_LIST, LyonsFixture, build_example5, hull_equality_fixture,
                    verify_example5)
from .measure import DiscreteCharge, ball_mass, coalesce, mix, same_atoms, total_mass
from .testfn import (Constant, Negation, PointPotential, family_from_descriptor,
                     harmonic_poly_basis, truncate, riesz_measure_grid)

EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2
TASKS = ("check", "jensen", "as", "construct", "hull", "lyons", "riesz", "masses")

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 1}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "balayage scenario",
    "type": "object",
    "required": ["task", "dimension"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "task": {"enum": list(TASKS)},
        "dimension": {"type": "integer", "minimum": 2},
        "domain": {"type": "object"},
        "charges": {"type": "object",
                    "additionalProperties": {"type": "object"}},
        "family": {"type": "object",
                   "properties": {"class": {"enum": ["harmonic", "subharmonic", "smooth"]},
                                  "harmonic_degree": {"type": "integer", "minimum": 0,
                                                      "maximum": 12}}},
        "tolerances": {"type": "object", "additionalProperties": False,
                       "properties": {"eps": {"type": "number", "minimum": 0},
                                      "compose": {"type": "boolean"}}},
        "seed": {"type": "integer", "minimum": 0},
        "params": {"type": "object"},
    },
}


class ScenarioError(ValueError):
    """Invalid scenario content (exit code 2)."""


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------

def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the innermost key on a JSON path."""
    keys = [p for p in path if isinstance(p, str)]
    pos = 0
    for k in keys:
        m = re.compile(r'"%s"\s*:' % re.escape(k)).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1 if keys else 1


def load_scenario(path) -> dict:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(map(str, e.path)))
    if errors:
        msgs = [f"{path}:{_line_of(text, e.path)}: {'/'.join(map(str, e.path)) or '<root>'}: "
                f"{e.message}" for e in errors]
        raise ScenarioError("\n".join(msgs))
    return obj


def list_fixtures() -> list[str]:
    root = resources.files("balayage") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("balayage") / "scenarios" / f"{name}.json"))


# --------------------------------------------------------------------------
# charges
# --------------------------------------------------------------------------

class ChargeTable:
    """Resolves named charge specs lazily, with cycle detection."""

    def __init__(self, specs: dict, d: int, domain):
        self.specs = specs
        self.d = d
        self.domain = domain
        self.cache: dict[str, DiscreteCharge] = {}
        self.stack: list[str] = []

    def get(self, ref) -> DiscreteCharge:
        if isinstance(ref, dict):
            return self.build(ref)
        if ref in self.cache:
            return self.cache[ref]
        if ref not in self.specs:
            raise ScenarioError(f"unknown charge {ref!r}")
        if ref in self.stack:
            raise ScenarioError(f"charge references form a cycle: {' -> '.join(self.stack + [ref])}")
        self.stack.append(ref)
        try:
            m = self.build(self.specs[ref])
        finally:
            self.stack.pop()
        if m.d != self.d:
            raise ScenarioError(f"charge {ref!r} has dimension {m.d}, scenario has {self.d}")
        self.cache[ref] = m
        return m

    def build(self, spec: dict) -> DiscreteCharge:
        b = spec.get("builder")
        if b is None:
            if "d" not in spec:
                raise ScenarioError("charge spec needs either 'builder' or measure JSON with 'd'")
            return DiscreteCharge.from_json(spec).flatten()
        if b == "dirac":
            return DiscreteCharge.dirac(spec["x"], spec.get("weight", 1.0))
        if b == "component":
            return DiscreteCharge.component(spec["kind"], spec["center"], spec["radius"],
                                            spec.get("total", 1.0),
                                            spec.get("level", 32)).flatten()
        if b == "harmonic_measure":
            return harmonic_measure_ball(Ball(spec["center"], spec["radius"]), spec["x"],
                                         spec.get("n", 256))
        if b == "jensen_mixture":
            return jensen_mixture(spec["a"], spec["x"], spec["b"],
                                  Ball(spec["center"], spec["radius"]), spec.get("n", 256),
                                  self.domain)
        if b == "mix":
            return mix([(float(w), self.get(r)) for w, r in spec["parts"]])
        if b == "example5":
            fx = LyonsFixture.from_json(spec.get("fixture", {"d": self.d, "r0": 0.3, "r": 0.8,
                                                              "excisions": []}))
            parts = dict(zip(("theta", "mu", "mu_E"), build_example5(fx, spec.get("level", 128))))
            return parts[spec.get("which", "mu")]
        if b == "convolution":
            return convolution_balayage(self.get(spec["mu"]), self.get(spec["iota0"]),
                                        self.domain, verify=spec.get("verify", True))
        if b == "shift_integral":
            return family_integral_balayage(self.get(spec["mu"]),
                                            ShiftFamily(self.get(spec["iota0"])), self.domain)
        if b == "smooth":
            r = spec.get("r", 0.05)
            rad = default_radius(self.domain, r) if self.domain is not None else r
            return smooth(self.get(spec["mu"]), rad, spec.get("level", 16),
                          self.domain).flatten()
        raise ScenarioError(f"unknown charge builder {b!r}")


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------

class Context:
    def __init__(self, sc: dict, seed: int | None, eps: float | None):
        self.sc = sc
        self.d = int(sc["dimension"])
        self.domain = set_from_json(sc["domain"]) if "domain" in sc else Ball(np.zeros(self.d), 1.0)
        self.seed = int(sc.get("seed", 0)) if seed is None else seed
        tol = sc.get("tolerances", {})
        self.eps = float(tol.get("eps", 1e-7)) if eps is None else eps
        self.compose = bool(tol.get("compose", True))
        self.params = sc.get("params", {})
        self.charges = ChargeTable(sc.get("charges", {}), self.d, self.domain)
        self.csv: str | None = None

    def family(self, avoid=()):
        desc = dict(self.sc.get("family", {"class": "subharmonic"}))
        desc.setdefault("seed", self.seed)
        return family_from_descriptor(desc, self.d, self.domain, avoid)

    def p(self, key, default=None):
        return self.params.get(key, default)


def task_check(ctx: Context) -> dict:
    theta = ctx.charges.get(ctx.p("theta", "theta"))
    mu = ctx.charges.get(ctx.p("mu", "mu"))
    fam = ctx.family(avoid=(theta, mu))
    v = check(theta, mu, fam, ctx.eps, ctx.compose)
    out = v.to_json()
    out.pop("details", None)
    out["margins"] = v.margins.tolist()
    return out


def task_jensen(ctx: Context) -> dict:
    mu = ctx.charges.get(ctx.p("mu", "mu"))
    x = as_point(ctx.p("x"))
    fam = ctx.family(avoid=(mu, DiscreteCharge.dirac(x)))
    v = verify_jensen(mu, x, fam, ctx.eps, ctx.compose)
    out = v.to_json()
    out["details"] = {"mass": v.details["mass"], "mass_ok": v.details["mass_ok"]}
    return out


def task_as(ctx: Context) -> dict:
    mu = ctx.charges.get(ctx.p("mu", "mu"))
    basis = harmonic_poly_basis(ctx.d, int(ctx.p("harmonic_degree", 6)))
    v = verify_arens_singer(mu, ctx.p("x"), basis, ctx.eps, ctx.compose)
    return v.to_json()


def task_construct(ctx: Context) -> dict:
    theta = ctx.charges.get(ctx.p("theta", "theta"))
    beta = ctx.charges.get(ctx.p("beta", "beta"))
    fam = ctx.family(avoid=(theta, beta))
    v = check(theta, beta, fam, ctx.eps, ctx.compose)
    out = {"pass": bool(v.passed), "verdict": v.to_json(),
           "beta": {"atoms": beta.n_atoms, "mass": total_mass(beta), "budget": beta.budget}}
    out["verdict"].pop("details", None)
    same = ctx.p("compare_with")
    if same is not None:
        gap = same_atoms(beta, ctx.charges.get(same))
        out["atom_discrepancy"] = gap
        out["atoms_match"] = bool(gap <= 1e-12)
        out["pass"] = out["pass"] and out["atoms_match"]
    return out


def task_masses(ctx: Context) -> dict:
    theta = ctx.charges.get(ctx.p("theta", "theta"))
    mu = ctx.charges.get(ctx.p("mu", "mu"))
    rep = mass_relations(theta, mu, bool(ctx.p("has_one", True)),
                         bool(ctx.p("has_minus_one", False)))
    return rep.to_json()


def task_hull(ctx: Context) -> dict:
    box = ctx.p("box")
    h = float(ctx.p("h", 1 / 256))
    O = rasterize(set_from_json(ctx.p("O")), box, h) if ctx.p("O") else \
        rasterize(ctx.domain, box, h)
    K = rasterize(set_from_json(ctx.p("K")), box, h)
    if np.any(K.cells & ~O.cells):
        raise ScenarioError("K must lie inside O")
    rep = inward_filled_hull(O, K)
    out = rep.to_json()
    passed = rep.agree
    if ctx.p("expected_area") is not None:
        rel = abs(rep.hull.volume - ctx.p("expected_area")) / ctx.p("expected_area")
        out["area_relative_error"] = rel
        out["area_ok"] = bool(rel <= ctx.p("area_tol", 0.03))
        passed = passed and out["area_ok"]
    if ctx.p("O_big"):
        koc = koc_check(O, rasterize(set_from_json(ctx.p("O_big")), box, h), K,
                        ctx.p("expected_components"))
        out["theorem_checks"] = koc.to_json()
        passed = passed and koc.passed
    out["pass"] = bool(passed)
    ctx.csv = rep.hull.to_csv()
    return out


def task_lyons(ctx: Context) -> dict:
    fx = LyonsFixture.from_json(ctx.p("fixture", {"d": ctx.d, "r0": 0.3, "r": 0.8,
                                                  "excisions": [{"center": [0.5, 0.0],
                                                                 "radius": 0.1}]}))
    theta, mu, mu_E = build_example5(fx, int(ctx.p("level", 128)))
    rep = verify_example5(fx, theta, mu, mu_E, None, ctx.p("M_list", DEFAULT_M_LIST),
                          eps_sbh=ctx.eps, eps_har=float(ctx.p("eps_harmonic", 1e-6)),
                          eps_sweep=ctx.eps, seed=ctx.seed)
    out = rep.to_json()
    for part in ("subharmonic_theta_mu", "harmonic_theta_muE"):
        out[part].pop("details", None)
    if ctx.p("hull_fixture", False):
        hq = hull_equality_fixture(fx.d, int(ctx.p("hull_fixture_n", 512)), ctx.eps)
        out["hull_fixture"] = hq.to_json()
        out["pass"] = out["pass"] and hq.passed
    sw = out["polar_witness"]
    ctx.csv = "M,margin\n" + "".join(f"{M!r},{m!r}\n" for M, m in zip(sw["levels"],
                                                                      sw["margins"]))
    return out


def _function_from_json(obj: dict, d: int):
    kind = obj.get("kind", "point_potential")
    if kind == "point_potential":
        f = PointPotential(obj.get("pole", [0.0] * d))
    elif kind == "constant":
        f = Constant(d, obj.get("value", 1.0))
    else:
        raise ScenarioError(f"unsupported function kind {kind!r} for the riesz task")
    if obj.get("negate"):
        f = Negation(f)
    if "truncate" in obj:
        f = truncate(f, float(obj["truncate"]))
    return f


def task_riesz(ctx: Context) -> dict:
    f = _function_from_json(ctx.p("function", {}), ctx.d)
    h = float(ctx.p("h", 1 / 400))
    box = ctx.p("box")
    m = riesz_measure_grid(f, box, h)
    ball = ctx.p("ball", {"center": [0.0] * ctx.d, "radius": 0.2})
    found = ball_mass(m, ball["center"], ball["radius"])
    expected = float(ctx.p("expected_mass", 1.0))
    tol = float(ctx.p("mass_tol", 0.02))
    cs = {str(k): constants(k).c for k in (2, 3)}
    return {"pass": bool(abs(found - expected) <= tol), "ball_mass": found,
            "expected_mass": expected, "mass_tol": tol, "grid_nodes": m.n_atoms,
            "total_mass": total_mass(m), "c_d": cs, "h": h}


DISPATCH = {"check": task_check, "jensen": task_jensen, "as": task_as,
            "construct": task_construct, "hull": task_hull, "lyons": task_lyons,
            "riesz": task_riesz, "masses": task_masses}


# --------------------------------------------------------------------------
# report formatting
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def stringify(obj):
    """Floats to 17-significant-digit strings, recursively; other scalars kept."""
    if isinstance(obj, dict):
        return {str(k): stringify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [stringify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return stringify(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    return obj


def run_scenario(sc: dict, seed: int | None = None, eps: float | None = None):
    """(report dict, csv text or None) for a validated scenario."""
    ctx = Context(sc, seed, eps)
    body = DISPATCH[sc["task"]](ctx)
    report = {"scenario": sc.get("name", ""), "task": sc["task"], "dimension": ctx.d,
              "seed": ctx.seed, "eps": ctx.eps, "compose": ctx.compose,
              "pass": bool(body.get("pass", False)),
              "inconclusive": bool(body.get("inconclusive", False)), "result": body}
    return stringify(report), ctx.csv


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="balayage", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario file or bundled fixture name")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--eps", type=float)
    r.add_argument("--csv", help="write plot data (hull cells, sweep margins) here")
    sub.add_parser("fixtures", help="list bundled scenarios")
    sub.add_parser("schema", help="print the scenario JSON schema")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "fixtures":
        print("\n".join(list_fixtures()))
        return EXIT_PASS
    if args.cmd == "schema":
        print(json.dumps(SCENARIO_SCHEMA, indent=2))
        return EXIT_PASS
    path = Path(args.scenario)
    if not path.exists() and args.scenario in list_fixtures():
        path = fixture_path(args.scenario)
    try:
        if not path.exists():
            raise ScenarioError(f"{args.scenario}: no such file or bundled fixture")
        if args.eps is not None and not args.eps >= 0:
            raise ScenarioError("--eps must be non-negative")
        sc = load_scenario(path)
        report, csv = run_scenario(sc, args.seed, args.eps)
    except (ScenarioError, ConstructionError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv and csv is not None:
        Path(args.csv).write_text(csv)
    return EXIT_PASS if report["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
