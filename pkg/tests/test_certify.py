import json

import numpy as np
import pytest

from swgap import certify as C
from swgap import kernels
from swgap.duality import self_dual_p

DUALITY_CH = {"duality"}


def test_default_battery_layout():
    cases = C.default_battery()
    graphs = {c.graph for c in cases}
    assert graphs == {"single_edge", "path:3", "cycle:3", "cycle:4", "tree:5", "square:2", "square:3", "dual_square:3"}
    q1 = sorted(c.p for c in cases if c.graph == "cycle:4" and c.q == 1)
    assert q1 == [0.2, 0.5, 0.8]
    q2 = sorted(c.p for c in cases if c.graph == "cycle:4" and c.q == 2 and c.p is not None)
    assert q2 == sorted([0.2, 0.5, 0.8, self_dual_p(2)])
    big = [c for c in cases if c.graph == "square:3"]
    assert all(set(c.families) <= {"duality", "sb_hb", "entrywise"} for c in big)
    pinned = [c for c in cases if c.graph == "dual_square:3"]
    assert pinned and all(c.pinned == 4 and "pinned_spin_bound" in c.families for c in pinned)
    assert all(c.q >= 2 for c in cases if "spin_bound" in c.families)


def test_filter_keeps_only_requested_family():
    cases = C.filter_cases(C.default_battery(), ["duality"])
    assert cases and all(c.families == ("duality",) for c in cases)
    with pytest.raises(ValueError):
        C.filter_cases(cases, ["nope"])


def test_case_json_roundtrip():
    case = C.Case("cycle:4", 2, ("sw_sb_sandwich", "mixing"), p=0.3)
    assert C.Case.from_json(json.loads(json.dumps(case.to_json()))) == case
    with pytest.raises(ValueError):
        C.Case.from_json({"graph": "cycle:4", "q": 2, "p": 0.3, "families": ["nope"]})


def test_case_needs_one_coupling():
    with pytest.raises(ValueError):
        C.Case("cycle:4", 2, ("sw_sb_sandwich",)).params()


def test_reruns_are_byte_identical():
    cases = [C.Case("cycle:4", 3, ("sw_sb_sandwich", "duality", "mixing"), p=0.5),
             C.Case("path:3", 2, ("spin_bound", "entrywise"), beta=0.5, pinned=2)]
    a = C.run_suite(cases, workers=1).dumps()
    b = C.run_suite(cases, workers=2).dumps()
    assert a == b
    data = json.loads(a)
    assert data["overall"] == "pass"
    assert data["tolerances"]["slack"] == 1e-8
    assert set(data["versions"]) == {"artifact", "numpy", "scipy", "numba"}


def test_full_precision_floats():
    x = {"a": 0.1 + 0.2, "b": 1 / 3, "c": float("inf"), "d": np.float64(2.5), "e": np.int64(3)}
    back = json.loads(C.dumps(x))
    assert back["a"] == 0.1 + 0.2 and back["b"] == 1 / 3
    assert back["c"] == "inf" and back["d"] == 2.5 and back["e"] == 3


def test_exceptions_become_failed_checks():
    suite = C.run_suite([C.Case("complete:4", 2, ("duality", "sw_sb_sandwich"), p=0.5)], workers=1)
    assert not suite.passed
    fails = suite.failures()
    assert [f["check"] for f in fails] == ["duality raised ValueError"]
    assert "embedding" in fails[0]["detail"]["error"]


def test_inline_graph_and_suite_file(tmp_path):
    graph = {"n": 3, "edges": [[0, 1], [1, 2], [0, 2]], "name": "tri"}
    path = tmp_path / "suite.json"
    path.write_text(json.dumps({"name": "mine", "tolerances": {"slack": 1e-9},
                                "cases": [{"graph": graph, "q": 2, "p": 0.4, "families": ["sw_sb_sandwich", "sb_hb"]}]}))
    cases, tol, name = C.load_suite(str(path))
    suite = C.run_suite(cases, tol, workers=1, name=name)
    data = json.loads(suite.dumps())
    assert data["suite"] == "mine" and data["overall"] == "pass"
    assert data["tolerances"]["slack"] == 1e-9


def test_corrupted_single_bond_kernel_is_caught(monkeypatch):
    monkeypatch.setattr(kernels, "sb_inclusion_probability", lambda p, q, connected: np.full(connected.shape, p))
    suite = C.run_suite([C.Case("cycle:3", 2, ("sb_hb",), p=0.5)], workers=1)
    assert not suite.passed
    assert "1 <= thb/sb on flips" in {f["check"] for f in suite.failures()}
