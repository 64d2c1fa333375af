"""Smoke test for the `meow` extension module.

Build and run from the repository root:

    cargo build --release -p meow-py
    cp target/release/libmeow.so python/meow.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import meow  # noqa: E402


def main():
    records = meow.simulate(40, seed=3)
    assert len(records) == 40
    first = json.loads(records[0])
    assert first["game_index"] == 0 and first["winner"] in ("folk", "spy")

    again = meow.simulate(40, seed=3)
    assert again == records, "same seed, same games"

    d1, d2 = meow.build_graphs(records)
    assert len(d1) == 40
    assert 0 < len(d2) < 40
    g = json.loads(d1[0])
    assert len(g["x"]) == 4 and sum(g["y"]) == 1

    # 2-2 split: the earliest vote decides
    assert meow.tally_votes([(0, 1), (1, 2), (2, 1), (3, 2)]) == 1
    assert meow.tally_votes([(0, 2), (1, 2), (2, 1)]) == 2

    acc, wa = meow.scores([0, 1, 1, 3], [0, 0, 1, 2])
    assert acc == 0.5
    assert math.isclose(wa, 0.5, abs_tol=1e-12)

    err = meow.grad_check(round=1, trials=2, coords=8)
    assert err < 1e-4, err

    try:
        meow.tally_votes([(0, 7)])
    except ValueError:
        pass
    else:
        raise AssertionError("seat 7 must be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
