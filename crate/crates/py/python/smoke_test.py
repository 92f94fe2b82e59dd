"""Smoke test for the chemoflow_py extension module.

Build first, e.g. ``maturin develop -m crates/py/Cargo.toml``, or copy
``target/release/libchemoflow_py.so`` to ``chemoflow_py.so`` on PYTHONPATH.
"""

import json
import math

import chemoflow_py as cf

SCENARIO = """
[grid]
dim = 2
points = 16
half_width = 4.0

[exponents]
p = 4
q = 3
r = 4

[time]
t_max = 1.0
count = 6

[solver]
quad_nodes = 8

[data]
profile = "gaussian"
amplitude = 1e-3
variance = 0.5
"""


def grid_points(points, half_width):
    h = 2.0 * half_width / points
    return [-half_width + j * h for j in range(points)]


def main():
    v = cf.check_admissible(3, 4.0, 3.0, 4.0, p1=8 / 3, q1=2.0, r1=8 / 3, n1=2.0)
    assert v["admissible"] and v["case"] == "(ii)", v
    bad = cf.check_admissible(3, 4.0, 1.0, 4.0, p1=8 / 3, q1=1.0, r1=8 / 3, n1=2.0)
    assert not bad["admissible"]
    assert any("(i) q-range" in f for f in bad["failures"])
    assert cf.suggest_subindices(2, 4.0, 3.0, 4.0) is not None

    assert abs(cf.beta(0.5, 0.5) - math.pi) < 1e-12
    nodes, weights = cf.gauss_jacobi(0.5, 0.0, 16)
    assert len(nodes) == 16 and abs(sum(weights) - 2.0) < 1e-12

    xs = grid_points(32, 8.0)
    f = [math.exp(-(x * x + y * y) / 2.0) for x in xs for y in xs]
    g = cf.heat_apply(2, 32, 8.0, f, 0.5)
    assert max(g) < max(f)
    # variance 1 -> 2: peak halves in two dimensions
    assert abs(max(g) - 0.5) < 1e-6, max(g)

    m = cf.morrey_norm(2, 32, 8.0, f, 3.0, 2.0)
    assert m > 0.0

    report, tables = cf.run(SCENARIO, "solve", seed=1)
    doc = json.loads(report)
    assert doc["format_version"] == cf.FORMAT_VERSION
    assert doc["status"] == "pass", doc.get("error")
    assert doc["trace"]["converged"]
    assert tables and all(csv.count("\n") >= 2 for _, csv in tables)

    try:
        cf.run(SCENARIO.replace("count = 6", "count = = 6"), "solve")
    except ValueError as e:
        assert "line" in str(e)
    else:
        raise AssertionError("parse error not raised")

    print("chemoflow_py smoke test passed")


if __name__ == "__main__":
    main()
