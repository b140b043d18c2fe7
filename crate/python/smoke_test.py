"""Smoke test for the affsel_py extension module.

Build and install the module first, e.g.

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/affsel_py-*.whl

then run `python3 python/smoke_test.py`.
"""

from fractions import Fraction as F

import affsel_py as af


def check_worked_instance():
    inst = af.Instance(1, ["x"], [[-1], [2]], [[0, 1]])
    (sel,) = af.select_affine(inst)
    assert sel["B"] == [F(1, 2)], sel
    assert sel["C"] == F(1), sel
    passed, slacks = af.verify(inst, [sel["B"]], [sel["C"]])
    assert passed and slacks == [F(1, 2)], slacks

    # Lowering C by one breaks domination at y = -1.
    passed, slacks = af.verify(inst, [sel["B"]], [sel["C"] - 1])
    assert not passed and slacks[0] < 0


def check_generated_families():
    inst = af.generate("affine", seed=3, n=2, nx=4, ny=8)
    sels = af.select_affine(inst, sandwich="staged", depth=12)
    passed, _ = af.verify(inst, [s["B"] for s in sels], [s["C"] for s in sels])
    assert passed
    assert all(ok for ok, _ in af.fm_feasible(inst))

    meager = af.generate("meager", seed=4, n=1, nx=3, ny=5, origin_bump=True)
    lin = af.select_linear(meager, lambda_max_log2=8, doublings=1)
    assert not any(s["exact"] for s in lin)
    passed, _ = af.verify(meager, [s["A"] for s in lin], [s["epsilon"] for s in lin], kind="linear")
    assert passed
    assert not any(ok for ok, _ in af.fm_feasible(meager, homogeneous=True))

    convex = af.generate("convex", seed=5, n=2, nx=3, ny=8, k=3, shift=True)
    subs = af.select_subgradient(convex, shift=True)
    assert all(s["epsilon"] == 0 for s in subs)


def check_round_trip_and_sandwich():
    inst = af.generate("convex", seed=6, n=1, nx=2, ny=5)
    again = af.Instance.from_json(inst.to_json())
    assert again.to_json() == inst.to_json()
    assert again.f == inst.f and len(again) == 2

    u = [F(1, 3), 0, F(-7, 2)]
    lo = [F(1, 2), 0, 4]
    mid = af.sandwich(u, lo)
    assert all(a <= f <= b for a, f, b in zip(u, mid, lo))

    try:
        af.sandwich([1], [0])
    except ValueError:
        pass
    else:
        raise AssertionError("expected a bracket error")


if __name__ == "__main__":
    check_worked_instance()
    check_generated_families()
    check_round_trip_and_sandwich()
    print("python smoke test: ok")
