"""Trial orchestration, metrics, and statistics tests.

Numeric oracles here are independent of the code under test: ANOVA
reference values come from scipy.stats.f_oneway (and a hand computation
for the small fixed case), obstruction examples from the closed-form
definition, and the trip-count oracles from trip-time arithmetic.
"""

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import f_oneway

from tunnelswarm.config import ConfigError
from tunnelswarm.experiment import (
    TrialConfig,
    canonical_json,
    compare,
    obstruction_index,
    one_way_anova,
    pellet_timeseries_rows,
    result_to_dict,
    run_trial,
    trial_configs_for_compare,
    write_compare_outputs,
    write_trial_outputs,
)
from tunnelswarm.world import Tunnel


def short_trial(seed=3, mode="acr", duration=60.0, **extra):
    overrides = {"mode": mode, "seed": seed, "duration_s": duration}
    overrides.update(extra)
    return TrialConfig.from_dict(overrides)


class TestObstructionIndex:
    def test_parked_at_home_parallel(self):
        assert obstruction_index((0.0, 35.0, 0.0), Tunnel()) == 0.0

    def test_dig_end_lying_across(self):
        assert obstruction_index((300.0, 35.0, math.pi / 2), Tunnel()) == pytest.approx(1.0)

    def test_mid_tunnel_across(self):
        # position term 150/300 = 0.5, angle term |sin 90| = 1, equal weights
        idx = obstruction_index((150.0, 35.0, math.pi / 2), Tunnel())
        assert idx == pytest.approx(0.75, abs=1e-12)

    def test_weights_are_normalized(self):
        pose = (90.0, 10.0, 0.6)
        a = obstruction_index(pose, Tunnel(), w_position=1.0, w_angle=1.0)
        b = obstruction_index(pose, Tunnel(), w_position=2.0, w_angle=2.0)
        assert a == pytest.approx(b, abs=1e-15)

    @given(
        x=st.floats(-100.0, 500.0),
        theta=st.floats(-10.0, 10.0),
        w_pos=st.floats(0.0, 5.0),
        w_ang=st.floats(0.0, 5.0),
    )
    def test_bounds(self, x, theta, w_pos, w_ang):
        if w_pos + w_ang == 0.0:
            w_ang = 1.0
        idx = obstruction_index((x, 0.0, theta), Tunnel(), w_pos, w_ang)
        assert 0.0 <= idx <= 1.0


class TestOneWayAnova:
    def test_identical_group_means(self):
        assert one_way_anova([[1, 2, 3], [1, 2, 3], [1, 2, 3]]) == (0.0, 1.0)

    def test_hand_computed_example(self):
        # SSB = 4, SSW = 1.5, df = (2, 3), MSB = 2.0, MSW = 0.5, so
        # F = 4.0; p is the F(2,3) survival value at 4.0 (reference:
        # scipy.stats.f_oneway gives 0.14242717305466185)
        f_stat, p = one_way_anova([[1, 2], [2, 3], [3, 4]])
        assert f_stat == pytest.approx(4.0, rel=1e-9)
        assert p == pytest.approx(0.14242717305466185, rel=1e-6)

    def test_separated_groups_small_p(self):
        groups = [[1.0, 1.0, 1.0], [50.0, 50.1, 49.9], [100.0, 100.1, 99.9]]
        f_stat, p = one_way_anova(groups)
        assert f_stat > 100.0
        assert p < 0.01

    def test_distinct_constant_groups(self):
        f_stat, p = one_way_anova([[1.0, 1.0], [2.0, 2.0]])
        assert math.isinf(f_stat)
        assert p == 0.0

    def test_degenerate_input_rejected(self):
        with pytest.raises(ValueError):
            one_way_anova([[2.0, 2.0], [2.0, 2.0]])

    def test_shape_requirements(self):
        with pytest.raises(ValueError):
            one_way_anova([[1.0, 2.0]])
        with pytest.raises(ValueError):
            one_way_anova([[1.0], [2.0, 3.0]])

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            groups = [
                (rng.normal(rng.uniform(-3, 3), rng.uniform(0.5, 2.0),
                            size=int(rng.integers(2, 9)))).tolist()
                for _ in range(k)
            ]
            f_stat, p = one_way_anova(groups)
            ref = f_oneway(*groups)
            assert f_stat == pytest.approx(ref.statistic, rel=1e-9)
            assert p == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)


class TestTrialConfig:
    def test_defaults_resolve(self):
        tc = TrialConfig.from_dict({})
        assert tc.mode == "baseline"
        assert tc.n_active == 3 and tc.n_faulty == 1
        assert tc.n_bins == 30
        assert tc.faulty_pose == (150.0, 35.0, pytest.approx(math.pi / 2))

    def test_bad_mode_named(self):
        with pytest.raises(ConfigError, match="mode"):
            TrialConfig.from_dict({"mode": "turbo"})

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="velocity"):
            TrialConfig.from_dict({"velocity": 3.0})

    def test_out_of_range_field_named(self):
        with pytest.raises(ConfigError, match="omega_r"):
            TrialConfig.from_dict({"map": {"omega_r": 0.4}})

    def test_bin_width_must_tile_tunnel(self):
        with pytest.raises(ConfigError, match="bin_width_cm"):
            TrialConfig.from_dict({"map": {"bin_width_cm": 7.0}})

    def test_robots_need_slots(self):
        with pytest.raises(ConfigError, match="n_active"):
            TrialConfig.from_dict({"n_active": 4})

    def test_faulty_inside_tunnel(self):
        with pytest.raises(ConfigError, match="faulty"):
            TrialConfig.from_dict({"faulty": {"x": 900.0}})


class TestRunTrial:
    def test_deterministic_across_runs(self):
        a = run_trial(short_trial())
        b = run_trial(short_trial())
        assert canonical_json(result_to_dict(a)) == canonical_json(result_to_dict(b))
        assert a.trajectories == b.trajectories
        assert a.events == b.events

    def test_seed_changes_trajectories(self):
        a = run_trial(short_trial(seed=1))
        b = run_trial(short_trial(seed=2))
        assert a.trajectories != b.trajectories

    def test_deposits_cumulative(self):
        r = run_trial(short_trial(mode="baseline", duration=600.0, n_faulty=0))
        counts = [c for _, c in r.deposits]
        assert counts == list(range(1, len(counts) + 1))
        times = [t for t, _ in r.deposits]
        assert times == sorted(times)
        assert r.pellets == len(r.deposits)

    def test_single_robot_trip_count(self):
        # one healthy robot with nothing in its way completes a trip about
        # every 85 s of travel plus the 30 s dig dwell: 20 deposits in 1800 s
        tc = short_trial(mode="baseline", duration=1800.0, seed=7,
                         n_active=1, n_faulty=0)
        r = run_trial(tc)
        assert abs(r.pellets - 20) <= 1

    def test_three_robots_unobstructed(self):
        tc = short_trial(mode="baseline", duration=1800.0, seed=7, n_faulty=0)
        r = run_trial(tc)
        assert 48 <= r.pellets <= 72
        # staggered lanes keep healthy traffic contact-free
        assert not any(e["event"] == "contact" for e in r.events)
        assert r.unresolved_steps == 0

    def test_trajectory_sampling(self):
        r = run_trial(short_trial())
        # one row per body at t = 0 and at each 1 s sample
        assert len(r.trajectories) == 61 * 4
        assert {row[1] for row in r.trajectories} == {0, 1, 2, 3}

    def test_per_robot_stats_shape(self):
        r = run_trial(short_trial())
        for stats in r.per_robot.values():
            assert set(stats) == {
                "trips", "deposits", "reversals", "active_pushes", "give_ups",
                "rests", "passive_maneuvers", "final_p_e", "k",
            }
            assert 0.0 <= stats["final_p_e"] <= 1.0

    def test_maps_only_kept_in_acr_mode(self):
        acr = run_trial(short_trial(mode="acr"))
        base = run_trial(short_trial(mode="baseline"))
        assert set(acr.final_maps) == {0, 1, 2}
        assert all(len(m["robot"]) == 30 for m in acr.final_maps.values())
        assert base.final_maps == {}

    def test_faulty_summary_fields(self):
        r = run_trial(short_trial())
        assert r.final_faulty_pose is not None
        assert 0.0 <= r.obstruction <= 1.0
        none = run_trial(short_trial(n_faulty=0))
        assert none.final_faulty_pose is None and none.obstruction is None


class TestCompare:
    def test_short_horizon_equivalence(self):
        s = compare({"duration_s": 10.0}, n_trials=2, seed_base=0)
        assert sum(len(rs) for rs in s.results.values()) == 4
        assert s.ratio == 1.0

    def test_trial_order_cannot_matter(self):
        configs = trial_configs_for_compare(
            {"duration_s": 60.0}, ["baseline", "acr"], n_trials=2, seed_base=5)
        forward = [run_trial(tc) for tc in configs]
        backward = [run_trial(tc) for tc in reversed(configs)]
        by_key = {(r.mode, r.seed): canonical_json(result_to_dict(r))
                  for r in backward}
        for r in forward:
            assert canonical_json(result_to_dict(r)) == by_key[(r.mode, r.seed)]

    def test_parallel_matches_serial(self):
        base = {"duration_s": 60.0}
        serial = compare(base, n_trials=2, seed_base=0, jobs=1)
        parallel = compare(base, n_trials=2, seed_base=0, jobs=2)
        for mode in serial.modes:
            for a, b in zip(serial.results[mode], parallel.results[mode]):
                assert canonical_json(result_to_dict(a)) == canonical_json(result_to_dict(b))
        assert serial.per_mode == parallel.per_mode

    def test_requires_two_trials(self):
        with pytest.raises(ConfigError, match="n_trials"):
            compare({}, n_trials=1)

    def test_summary_fields(self):
        s = compare({"duration_s": 60.0}, n_trials=2, seed_base=0)
        for mode in ("baseline", "acr"):
            ps = s.per_mode[mode]
            assert len(ps["final_pellets"]) == 2
            assert ps["mean_pellets"] >= 0.0
            assert len(ps["active_push_counts"]) == 2
        assert s.per_mode["baseline"]["total_active_pushes"] == 0

    def test_timeseries_ends_at_final_means(self):
        s = compare({"duration_s": 60.0}, n_trials=2, seed_base=0)
        rows = pellet_timeseries_rows(s, grid_s=10.0)
        assert rows[0] == ["t", "mean_baseline", "std_baseline",
                           "mean_acr", "std_acr"]
        last = rows[-1]
        assert last[0] == 60.0
        assert last[1] == pytest.approx(s.per_mode["baseline"]["mean_pellets"])
        assert last[3] == pytest.approx(s.per_mode["acr"]["mean_pellets"])


class TestOutputs:
    def test_trial_output_files(self, tmp_path):
        r = run_trial(short_trial())
        out = tmp_path / "trial"
        write_trial_outputs(r, str(out), config_echo={"mode": "acr", "seed": 3})
        payload = json.loads((out / "result.json").read_text())
        assert payload["pellets"] == r.pellets
        assert payload["config"]["seed"] == 3
        with open(out / "trajectories.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "id", "x", "y", "theta"]
        assert len(rows) == len(r.trajectories) + 1
        with open(out / "events.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert header[:3] == ["t", "robot", "event"]

    def test_compare_output_tree(self, tmp_path):
        s = compare({"duration_s": 60.0}, n_trials=2, seed_base=4)
        out = tmp_path / "cmp"
        write_compare_outputs(s, str(out), config_echo={"duration_s": 60.0})
        assert (out / "summary.json").is_file()
        assert (out / "pellets_timeseries.csv").is_file()
        for mode in ("baseline", "acr"):
            for seed in (4, 5):
                assert (out / f"{mode}_seed{seed}" / "result.json").is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_trials"] == 2
        assert set(summary["per_mode"]) == {"baseline", "acr"}
