"""Certification battery: every comparison inequality and identity, case by case.

A suite is a list of cases (graph, coupling, families).  Each family expands
to named checks; an exception inside a family becomes a failed check carrying
the error message, so one broken kernel never hides the rest of the report.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from . import bonds, duality, joint, spin
from .graph import Graph, PlanarEmbedding, build_dual, graph_from_json, load_graph, parse_builtin
from .joint import CheckResult, check_leq, check_small
from .kernels import (
    hb_potts_matrix,
    hb_rc_matrix,
    metropolis_sb_matrix,
    sb_rc_matrix,
    sw_potts_matrix,
    sw_rc_matrix,
)
from .measures import ModelParams
from .spectral import (
    exact_mixing_time,
    gap_from_norm,
    mixing_envelopes,
    spectral_gap,
    tv_mixing_curve,
)

FAMILIES = (
    "tree_gap",
    "sw_equivalence",
    "sw_sb_sandwich",
    "representation",
    "norm_bounds",
    "duality",
    "spin_bound",
    "pinned_spin_bound",
    "entrywise",
    "sb_hb",
    "metropolis",
    "mixing",
    "boundary_pinning",
)

DEFAULT_TOLERANCES = {
    "slack": 1e-8,
    "identity": 1e-12,
    "eigenvalue": 1e-9,
    "tree_gap": 1e-10,
}

SMALL_GRAPHS = ("single_edge", "path:3", "cycle:3", "cycle:4", "tree:5", "square:2")
TREES = ("single_edge", "path:3", "tree:5")
NORM_GRAPHS = ("cycle:4", "square:2")
SPIN_BETAS = (0.25, 0.5, 1.0)
BATTERY_PS = (0.2, 0.5, 0.8)
MIXING_T = 200


@dataclass(frozen=True)
class Case:
    graph: str
    q: float
    families: tuple[str, ...]
    p: float | None = None
    beta: float | None = None
    pinned: int | None = None

    def params(self) -> ModelParams:
        if (self.p is None) == (self.beta is None):
            raise ValueError("a case needs exactly one of p and beta")
        if self.p is not None:
            return ModelParams.from_p(self.q, self.p)
        return ModelParams.from_beta(self.q, self.beta)

    def to_json(self) -> dict:
        out = {"graph": self.graph, "q": self.q, "families": list(self.families)}
        for key in ("p", "beta", "pinned"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Case":
        unknown = set(data.get("families", [])) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown families {sorted(unknown)}")
        graph = data["graph"]
        if isinstance(graph, dict):
            graph = json.dumps(graph, sort_keys=True)
        return cls(graph, data["q"], tuple(data.get("families", FAMILIES)), data.get("p"), data.get("beta"),
                   data.get("pinned"))


def battery_ps(q: float) -> list[float]:
    ps = list(BATTERY_PS) + [duality.self_dual_p(q)]
    return sorted(set(ps))


def default_battery() -> list[Case]:
    """The fixed default list of cases."""
    cases: list[Case] = []
    for name in SMALL_GRAPHS:
        g, _ = parse_builtin(name)
        for q in (1, 2, 3):
            for p in battery_ps(q):
                fam = ["sw_sb_sandwich", "representation", "duality", "sb_hb", "metropolis", "mixing"]
                if name in NORM_GRAPHS:
                    fam.append("norm_bounds")
                if q >= 2:
                    fam.insert(0, "sw_equivalence")
                    if name in TREES:
                        fam.insert(0, "tree_gap")
                cases.append(Case(name, q, tuple(fam), p=p))
    for q in (1, 2, 3):
        for p in battery_ps(q):
            cases.append(Case("square:3", q, ("duality", "sb_hb"), p=p))
    spin_graphs = SMALL_GRAPHS + ("square:3", "dual_square:3")
    for name in spin_graphs:
        g, _ = parse_builtin(name)
        for q in (2, 3):
            if q**g.n > 4096:
                continue
            for beta in SPIN_BETAS + (duality.critical_beta(q),):
                fam = ["entrywise"]
                if name != "square:3":
                    fam = ["spin_bound", "pinned_spin_bound"] + fam
                if name == "dual_square:3":
                    fam.append("boundary_pinning")
                cases.append(Case(name, q, tuple(fam), beta=beta, pinned=g.n - 1))
    return cases


def filter_cases(cases: list[Case], selected) -> list[Case]:
    """Keep only the requested families; drop cases left empty."""
    if not selected:
        return cases
    wanted = set(selected)
    unknown = wanted - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown families {sorted(unknown)}")
    out = []
    for c in cases:
        fam = tuple(f for f in c.families if f in wanted)
        if fam:
            out.append(Case(c.graph, c.q, fam, c.p, c.beta, c.pinned))
    return out


def resolve_graph(spec: str) -> tuple[Graph, PlanarEmbedding | None]:
    if spec.lstrip().startswith("{"):
        return graph_from_json(json.loads(spec))
    if os.path.exists(spec):
        return load_graph(spec)
    return parse_builtin(spec)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


def _label(g: Graph, prm: ModelParams) -> str:
    return f"{g.name}|q={prm.q}|p={prm.p!r}|beta={prm.beta!r}"


def _tree_gap(g, emb, prm, case, tol):
    got = spectral_gap(sw_potts_matrix(g, prm)).gap
    want = 1 - prm.p * (1 - 1 / prm.q)
    return [check_small("gap(sw) = 1 - p(1 - 1/q) on trees", _label(g, prm), abs(got - want), tol["tree_gap"],
                        gap=got, formula=want)]


def _sw_equivalence(g, emb, prm, case, tol):
    a = spectral_gap(sw_potts_matrix(g, prm)).gap
    b = spectral_gap(sw_rc_matrix(g, prm)).gap
    return [check_small("gap(sw colourings) = gap(sw bonds)", _label(g, prm), abs(a - b), tol["eigenvalue"],
                        potts_gap=a, rc_gap=b)]


def _sw_sb_sandwich(g, emb, prm, case, tol):
    return joint.certify_sw_sb_sandwich(g, prm, tol["slack"])


def _representation(g, emb, prm, case, tol):
    space = joint.joint_space(g, prm)
    out = joint.certify_representation(space, tol["identity"])
    m = g.m
    alphas = [tuple([1.0] * m), tuple([0.5] * m), tuple(float(i + 1) for i in range(m)),
              tuple([0.0] + [1.0] * (m - 1)), tuple([0.0] + [2.0] * (m - 1))]
    out += joint.certify_alpha_products(space, alphas, tol["identity"])
    out += joint.certify_cross_projections(space, tol["identity"])
    return out


def _norm_bounds(g, emb, prm, case, tol):
    return joint.certify_norm_bounds(joint.joint_space(g, prm), eps=0.5, slack=tol["slack"])


def _duality(g, emb, prm, case, tol):
    if emb is None:
        raise ValueError(f"{g.name} has no plane embedding")
    link = build_dual(g, emb)
    back = build_dual(link.dual_graph, link.dual_embedding)
    dual_prm = duality.dual_params(prm)
    with_gaps = g.m <= 8
    out = []
    for graph, linkage, params in ((g, link, prm), (link.dual_graph, back, dual_prm)):
        out += duality.certify_measure_duality(graph, linkage, params, tol["identity"])
        out += duality.certify_hb_duality(graph, linkage, params, tol["identity"], with_gap=with_gaps)
        if with_gaps:
            out += duality.certify_dual_gap_bounds(graph, linkage, params, tol["slack"])
    return out


def _spin_bound(g, emb, prm, case, tol):
    return spin.certify_spin_bound(g, prm, tol["slack"])


def _pinned_spin_bound(g, emb, prm, case, tol):
    pinned = g.n - 1 if case.pinned is None else case.pinned
    return spin.certify_pinned_spin_bound(g, pinned, prm, tol["slack"])


def _entrywise(g, emb, prm, case, tol):
    t = tol["identity"]
    out = spin.certify_single_vertex_perturbation(g, prm, t)
    out += spin.certify_flip_invariance(g, prm, t)
    out += spin.certify_subgraph_sandwich(g, prm, [0], t)
    out += spin.certify_subgraph_sandwich(g, prm, list(range(0, g.m, 2)), t)
    if spin.is_simple(g):
        out += spin.certify_dobrushin(g, prm, t)
    return out


def _sb_hb(g, emb, prm, case, tol):
    if g.m > 8:
        lo, hi = bonds.sb_hb_ratio_range(g, prm)
        top = 1 / (1 - prm.p * (1 - 1 / prm.q))
        lab = _label(g, prm)
        return [check_leq("1 <= thb/sb on flips", lab, 1.0, lo, tol["identity"]),
                check_leq("thb/sb <= 1/(1-p(1-1/q)) on flips", lab, hi, top, tol["identity"])]
    return bonds.certify_sb_hb(g, prm, tol["slack"])


def _metropolis(g, emb, prm, case, tol):
    return bonds.certify_metropolis(g, prm, None, tol["slack"])


def _mixing(g, emb, prm, case, tol):
    lab = _label(g, prm)
    builders = [sw_rc_matrix, sb_rc_matrix, hb_rc_matrix, metropolis_sb_matrix]
    if prm.q >= 2:
        builders = [hb_potts_matrix, sw_potts_matrix] + builders
    out = []
    t = np.arange(MIXING_T + 1)
    for build in builders:
        tm = build(g, prm)
        rep = spectral_gap(tm)
        name = tm.kind
        out.append(check_small(f"{name}: eigen gap = 1 - ||P - S||", lab, abs(rep.gap - gap_from_norm(tm)),
                               tol["eigenvalue"]))
        lo, hi = rep.mixing_time_bounds
        tmix = exact_mixing_time(tm)
        out.append(check_leq(f"{name}: 1/gap - 1 <= t_mix", lab, lo, tmix, tol["slack"], t_mix=tmix))
        out.append(check_leq(f"{name}: t_mix <= log(2e/pi_min)/gap", lab, tmix, hi, tol["slack"], t_mix=tmix))
        curve = tv_mixing_curve(tm, MIXING_T)
        low_env, up_env = mixing_envelopes(rep.gap, rep.pi_min, t)
        below = float((low_env - curve).max())
        above = float((curve - up_env).max())
        out.append(check_leq(f"{name}: (1/2)(1-gap)^t <= maxTV(t)", lab, below, 0.0, tol["slack"], t_max=MIXING_T))
        out.append(check_leq(f"{name}: maxTV(t) <= (1-gap)^t / pi_min", lab, above, 0.0, tol["slack"], t_max=MIXING_T))
    return out


def _boundary_pinning(g, emb, prm, case, tol):
    side = int(g.name.partition(":")[2])
    dev = spin.pinned_boundary_deviation(side, prm)
    return [check_small("pinned dual lattice = boundary-coloured grid", _label(g, prm), dev, tol["identity"])]


RUNNERS = {
    "tree_gap": _tree_gap,
    "sw_equivalence": _sw_equivalence,
    "sw_sb_sandwich": _sw_sb_sandwich,
    "representation": _representation,
    "norm_bounds": _norm_bounds,
    "duality": _duality,
    "spin_bound": _spin_bound,
    "pinned_spin_bound": _pinned_spin_bound,
    "entrywise": _entrywise,
    "sb_hb": _sb_hb,
    "metropolis": _metropolis,
    "mixing": _mixing,
    "boundary_pinning": _boundary_pinning,
}


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------


@dataclass
class CaseReport:
    index: int
    case: Case
    family_checks: dict[str, list[CheckResult]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for checks in self.family_checks.values() for c in checks)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "case": self.case.to_json(),
            "pass": self.passed,
            "families": {f: [c.to_json() for c in checks] for f, checks in self.family_checks.items()},
        }


@dataclass
class CertificationSuite:
    cases: list[Case]
    results: list[CaseReport]
    tolerances: dict
    name: str = "default"

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[dict]:
        out = []
        for r in self.results:
            for fam, checks in r.family_checks.items():
                for c in checks:
                    if not c.passed:
                        out.append({"case_index": r.index, "family": fam, "check": c.name, "case": c.case,
                                    "lhs": c.lhs, "rhs": c.rhs, "detail": c.detail})
        return out

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "overall": "pass" if self.passed else "fail",
            "versions": versions(),
            "seeds": {},
            "tolerances": dict(sorted(self.tolerances.items())),
            "cases": [c.to_json() for c in self.cases],
            "results": [r.to_json() for r in self.results],
            "failures": self.failures(),
        }

    def dumps(self) -> str:
        return dumps(self.to_json())


def versions() -> dict:
    out = {}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _clean(obj):
    """Replace non-finite floats (not valid JSON) by strings and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    """JSON with round-trip float precision and sorted keys, so reruns are byte-identical."""
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False)


def run_case(index: int, case: Case, tolerances: dict) -> CaseReport:
    report = CaseReport(index, case)
    try:
        g, emb = resolve_graph(case.graph)
        prm = case.params()
    except Exception as exc:  # a broken case is a failed case
        report.family_checks["setup"] = [_error_check("setup", case.graph, exc)]
        return report
    for fam in case.families:
        try:
            report.family_checks[fam] = RUNNERS[fam](g, emb, prm, case, tolerances)
        except Exception as exc:
            report.family_checks[fam] = [_error_check(fam, _label(g, prm), exc)]
    return report


def _error_check(family: str, label: str, exc: Exception) -> CheckResult:
    return CheckResult(f"{family} raised {type(exc).__name__}", label, math.nan, math.nan, "ok", False, 0.0,
                       {"error": str(exc)})


def run_suite(cases: list[Case], tolerances: dict | None = None, workers: int | None = None,
              name: str = "default") -> CertificationSuite:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    if workers is None:
        from .sampler import worker_count

        workers = worker_count()
    if workers <= 1:
        results = [run_case(i, c, tol) for i, c in enumerate(cases)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ic: run_case(ic[0], ic[1], tol), enumerate(cases)))
    return CertificationSuite(cases, results, tol, name)


def load_suite(path: str) -> tuple[list[Case], dict, str]:
    with open(path) as fh:
        data = json.load(fh)
    cases = [Case.from_json(c) for c in data["cases"]]
    return cases, data.get("tolerances", {}), data.get("name", os.path.basename(path))
