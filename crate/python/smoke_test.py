"""Smoke test for the `mmpd` extension module.

Build and install first, e.g. `pip install ./crates/py` or `maturin develop -m crates/py/Cargo.toml`.
"""
import json
import math
import tempfile

import mmpd

TINY = {
    "sac": {"hidden_sizes": [8], "batch_size": 16, "warmup_steps": 100},
    "train_steps": 300,
    "demo_episodes": 2,
    "eval_episodes": 3,
    "compare": {"episodes": 2, "chunk_len": 8},
}


def main():
    arena = mmpd.Arena(seed=3)
    obs = arena.reset(3)
    assert len(obs) == 16
    done = False
    while not done:
        obs, reward, done, outcome = arena.step([0, 0])
        assert math.isfinite(reward)
    assert outcome == "timeout", outcome

    assert mmpd.frechet_distance([[0, 0], [1, 0]], [[0, 1], [1, 1]]) == 1.0
    report = mmpd.mmd([[1.0, 0.0]], [[1.0, 0.0]], sigma=1.0)
    assert report["mmd"] <= 1e-12

    defaults = json.loads(mmpd.default_config())
    assert defaults["train_steps"] > 0

    with tempfile.TemporaryDirectory() as reg:
        schedule = json.dumps([{"id": "base"}, {"id": "l1", "agents": [1], "known": ["base"]}])
        ids = mmpd.diversify(reg, schedule, seed=1, config=json.dumps(TINY))
        assert ids == ["base", "l1"], ids
        assert mmpd.registry_ids(reg) == ["base", "l1"]
        policy = mmpd.load_policy(reg, "l1")
        actions = policy.greedy_actions(obs)
        assert all(0 <= a < 7 for a in actions)
        probs = policy.distribution(0, obs)
        assert abs(sum(probs) - 1.0) < 1e-12
        ev = policy.evaluate(episodes=2, seed=0)
        assert ev["episodes"] == 2
        cmp = mmpd.compare(reg, "base", "base", config=json.dumps(TINY))
        assert cmp["frechet_mean"] == [0.0, 0.0]

        gun = mmpd.Policy.train(200, seed=2, skill="gun", sac=json.dumps(TINY["sac"]))
        for log in gun.trajectories(episodes=2, seed=4):
            for rec in log["records"]:
                assert all(a in (0, 1, 2, 3, 4, 5) for a in rec["actions"])

    try:
        mmpd.Arena(config=json.dumps({"gun_range_m": -1}))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("mmpd smoke test passed")


if __name__ == "__main__":
    main()
