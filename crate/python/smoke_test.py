"""Smoke test for the Python bindings.

Build and install first:
    cd crates/py && maturin build --release --out dist && pip install dist/herald-*.whl
"""
import math

import herald


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    assert herald.golden_cases() == ["example2-k1", "example2-k2"]

    inst, expected = herald.load_golden("example2-k1")
    assert (inst.n, inst.m, inst.l) == (5, 7, 7)
    assert inst.validate() == []

    out = herald.run_auction(inst)
    assert close(out["threshold"], 125.44)
    winners = [(w["subset"], w["worker"]) for w in out["winners"]["pairs"]]
    assert winners == [(0, 0), (3, 3), (1, 1)], winners
    for got, want in zip(out["payments"]["payments"], expected["payments"]):
        assert close(got, want), (got, want)
    assert close(herald.expected_opt(inst), 1.96)
    assert herald.min_cover(inst, [1, 4]) == (3.3, [5])

    probs = herald.matching_distribution([1.0, 2.0], "lin", 0.1, 5.0)
    assert close(probs[0], 0.5031249593105317, 1e-12)

    k2, exp2 = herald.load_golden("example2-k2")
    assert close(herald.run_auction(k2, k=2)["threshold"], exp2["threshold"])

    # a losing worker that gains from underbidding on the example
    rep = herald.truthfulness_audit(inst, 2)
    assert not rep["pass"] and close(rep["max_gain"], 3.0)

    gen = herald.Instance.generate(12, 8, seed=3)
    assert gen.validate() == []
    again = herald.Instance.from_json(gen.to_json())
    assert again.subsets == gen.subsets
    assert len(herald.sample_matching(gen, seed=1)) == gen.l

    assert close(herald.ratio_ceiling(12, 8), 64 * math.log(12) + 8 * math.log(24) + 16 * math.log(8))

    small = herald.Instance.generate(4, 4, seed=1, sizes=(2, 3))
    assert herald.dp_audit(small, "log", 0.3)["pass"]

    records = herald.run_experiment("I", runs=1, seed=5)
    assert len(records) == 10 * 4
    assert {r["mechanism"] for r in records} == {"herald", "cone", "cosy"}

    try:
        herald.load_golden("nope")
    except ValueError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown case accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
