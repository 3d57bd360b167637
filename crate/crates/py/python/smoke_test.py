"""Smoke test for the apopt extension module.

Build and install into the active virtualenv first (`cd crates/py &&
maturin develop --release`), then run `python3 crates/py/python/smoke_test.py`.
"""

import json
import math

import apopt


def main():
    cfg = apopt.Config(json.dumps({
        "geometry": {"length_m": 60},
        "grid": {"spacing_m": 0.5},
        "env": {"initial_positions": [0, 30, 60]},
        "agent": {"episodes": 20},
    })).with_seed(3)
    assert cfg.length_m == 60

    m = apopt.PathLossMap.synthetic(cfg)
    assert len(m) == 61
    assert m.positions()[:3] == [0, 1, 2]
    assert len(m.profile(30)) == len(m.receivers()) == 121

    for i in range(apopt.Env.num_actions):
        assert apopt.encode_action(apopt.decode_action(i)) == i
    assert apopt.decode_action(13) == [0, 0, 0]

    f1, f2, g = apopt.evaluate([0, 30, 60], m, alpha=0.5)
    assert math.isclose(g, 0.5 * f1 + 0.5 * f2, rel_tol=1e-12)
    assert apopt.combined_cost([0, 30, 60], m, alpha=1.0) == f1

    env = apopt.Env(m, cfg)
    positions, cost = env.reset()
    assert list(positions) == [0, 30, 60] and cost == g
    positions, cost, reward, done, truncated = env.step(apopt.encode_action([1, 0, -1]))
    assert list(positions) == [1, 30, 59]
    assert reward == -cost
    assert len(env.observe()) == 4

    hj = apopt.hooke_jeeves(m, cfg)
    assert hj.cost <= hj.initial_cost
    agent = apopt.train_agent(m, cfg, method="dueling")
    assert agent.cost <= agent.initial_cost
    assert agent.cost == apopt.combined_cost(list(agent.positions), m)

    assert apopt.masked_mse([10, 20], [11, 18], [1, 1]) == 2.5
    assert apopt.masked_mae([10, 20], [11, 18], [1, 1]) == 1.5
    assert math.isclose(apopt.percentile(list(range(1, 11)), 0.9), 9.1)
    try:
        apopt.masked_mae([1.0], [2.0], [0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("all-zero mask accepted")

    print(hj)
    print(agent)
    print("smoke test passed")


if __name__ == "__main__":
    main()
