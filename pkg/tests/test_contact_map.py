import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunnelswarm.contact_map import ROBOT, WALL, ContactMap, MapParams


def make_map(n_bins=30, bin_width=10.0, robot=None, wall=None):
    m = ContactMap(n_bins=n_bins, bin_width_cm=bin_width)
    if robot is not None:
        m.robot_channel[:] = robot
    if wall is not None:
        m.wall_channel[:] = wall
    return m


def scalar_likelihood(s_r, s_w):
    # independent oracle: raw definition, no shift
    return math.exp(s_r) / (math.exp(s_r) + math.exp(s_w))


class TestConstruction:
    def test_fresh_map_is_zero(self):
        m = make_map()
        assert np.all(m.robot_channel == 0.0)
        assert np.all(m.wall_channel == 0.0)
        assert m.length_cm == 300.0

    def test_channel_lengths_match(self):
        m = make_map()
        assert len(m.robot_channel) == len(m.wall_channel) == m.n_bins

    def test_bad_geometry_rejected(self):
        with pytest.raises(ValueError):
            ContactMap(n_bins=0, bin_width_cm=10.0)
        with pytest.raises(ValueError):
            ContactMap(n_bins=30, bin_width_cm=0.0)

    def test_param_validation(self):
        MapParams().validate()
        with pytest.raises(ValueError, match="omega_r"):
            MapParams(omega_r=0.5).validate()
        with pytest.raises(ValueError, match="omega_w"):
            MapParams(omega_w=1.1).validate()
        with pytest.raises(ValueError, match="weight"):
            MapParams(weight=0.0).validate()
        with pytest.raises(ValueError, match="beta"):
            MapParams(beta=-0.1).validate()
        with pytest.raises(ValueError, match="window_bins"):
            MapParams(window_bins=0).validate()


class TestRecordContact:
    def test_robot_contact_splits_confidence(self):
        m = make_map()
        p = MapParams(omega_r=0.9, weight=1.0)
        m.record_contact(p, ROBOT, 155.0)  # bin 15
        assert m.robot_channel[15] == pytest.approx(0.9, abs=1e-15)
        assert m.wall_channel[15] == pytest.approx(0.1, abs=1e-15)
        touched = np.zeros(30, dtype=bool)
        touched[15] = True
        assert np.all(m.robot_channel[~touched] == 0.0)
        assert np.all(m.wall_channel[~touched] == 0.0)

    def test_wall_contact_splits_confidence(self):
        m = make_map()
        p = MapParams(omega_w=0.8, weight=1.0)
        m.record_contact(p, WALL, 35.0)  # bin 3
        assert m.wall_channel[3] == pytest.approx(0.8, abs=1e-15)
        assert m.robot_channel[3] == pytest.approx(0.2, abs=1e-15)

    def test_updates_are_additive(self):
        m = make_map()
        p = MapParams(omega_r=0.9, weight=1.0)
        m.record_contact(p, ROBOT, 155.0)
        m.record_contact(p, ROBOT, 155.0)
        assert m.robot_channel[15] == pytest.approx(1.8, abs=1e-15)
        assert m.wall_channel[15] == pytest.approx(0.2, abs=1e-15)

    def test_position_out_of_range_rejected(self):
        m = make_map()
        p = MapParams()
        with pytest.raises(ValueError):
            m.record_contact(p, ROBOT, -0.01)
        with pytest.raises(ValueError):
            m.record_contact(p, ROBOT, 300.0)

    def test_unknown_type_rejected(self):
        m = make_map()
        with pytest.raises(ValueError):
            m.record_contact(MapParams(), "pellet", 10.0)

    def test_boundary_positions_bin_correctly(self):
        m = make_map()
        assert m.bin_of(0.0) == 0
        assert m.bin_of(9.999) == 0
        assert m.bin_of(10.0) == 1
        assert m.bin_of(299.999) == 29


class TestDecay:
    def test_plain_subtraction(self):
        m = make_map()
        m.robot_channel[7] = 0.5
        m.decay(0.2)
        assert m.robot_channel[7] == pytest.approx(0.3, abs=1e-15)

    def test_clamps_at_zero(self):
        m = make_map()
        m.wall_channel[2] = 0.1
        m.decay(0.2)
        assert m.wall_channel[2] == 0.0

    def test_zero_map_is_fixed_point(self):
        m = make_map()
        m.decay(0.05)
        assert np.all(m.robot_channel == 0.0)
        assert np.all(m.wall_channel == 0.0)

    def test_nonpositive_beta_rejected(self):
        m = make_map()
        with pytest.raises(ValueError):
            m.decay(0.0)


class TestFaultyLikelihood:
    def test_zero_map_gives_exactly_half(self):
        m = make_map()
        p = MapParams()
        for pos in (0.0, 150.0, 299.0):
            assert m.faulty_likelihood(p, pos) == 0.5

    def test_unit_robot_evidence(self):
        # window at 155 cm covers bins 13..16; put S_r=1 inside it
        m = make_map()
        m.robot_channel[14] = 1.0
        p = MapParams(window_bins=4)
        want = 1.0 / (1.0 + math.exp(-1.0))
        assert m.faulty_likelihood(p, 155.0) == pytest.approx(want, abs=1e-12)

    def test_wall_evidence_suppresses(self):
        m = make_map()
        m.wall_channel[15] = 2.0
        p = MapParams(window_bins=4)
        want = 1.0 / (1.0 + math.exp(2.0))
        assert m.faulty_likelihood(p, 155.0) == pytest.approx(want, abs=1e-12)

    def test_window_truncates_at_tunnel_ends(self):
        m = make_map()
        m.robot_channel[0] = 3.0
        p = MapParams(window_bins=4)
        # query at 0 cm: window is bins [0, 4)
        s = m.window_slice(p, 0.0)
        assert (s.start, s.stop) == (0, 4)
        got = m.faulty_likelihood(p, 0.0)
        assert got == pytest.approx(scalar_likelihood(3.0, 0.0), abs=1e-12)
        # query at far end: window clipped to last bins
        s = m.window_slice(p, 299.0)
        assert s.stop == 30

    def test_matches_scalar_oracle_on_random_maps(self):
        rng = np.random.default_rng(42)
        p = MapParams(window_bins=4)
        for _ in range(200):
            m = make_map(
                robot=rng.uniform(0, 5, 30),
                wall=rng.uniform(0, 5, 30),
            )
            pos = rng.uniform(0, 300)
            win = m.window_slice(p, pos)
            want = scalar_likelihood(
                float(np.sum(m.robot_channel[win])),
                float(np.sum(m.wall_channel[win])),
            )
            assert m.faulty_likelihood(p, pos) == pytest.approx(want, abs=1e-12)

    def test_overflow_guard(self):
        m = make_map()
        m.robot_channel[15] = 800.0
        m.wall_channel[15] = 750.0
        p = MapParams(window_bins=4)
        got = m.faulty_likelihood(p, 155.0)
        assert not math.isnan(got)
        assert 0.0 < got < 1.0
        # shifted form: 1/(1+e^{-50}) -> indistinguishable from 1 but finite
        assert got == pytest.approx(1.0 / (1.0 + math.exp(-50.0)), abs=1e-12)

    def test_out_of_range_query_rejected(self):
        m = make_map()
        with pytest.raises(ValueError):
            m.faulty_likelihood(MapParams(), 300.0)


# property tests ----------------------------------------------------------

contact_seq = st.lists(
    st.tuples(
        st.sampled_from([ROBOT, WALL]),
        st.floats(min_value=0.0, max_value=299.999),
        st.booleans(),  # interleave a decay after this contact?
    ),
    max_size=40,
)


@given(contact_seq)
def test_nonnegativity_under_any_sequence(seq):
    m = make_map()
    p = MapParams()
    for sensed, pos, do_decay in seq:
        m.record_contact(p, sensed, pos)
        if do_decay:
            m.decay(p.beta)
    assert np.all(m.robot_channel >= 0.0)
    assert np.all(m.wall_channel >= 0.0)


@given(contact_seq, st.floats(min_value=0.01, max_value=1.0))
def test_prior_recovery(seq, beta):
    m = make_map()
    p = MapParams()
    for sensed, pos, _ in seq:
        m.record_contact(p, sensed, pos)
    peak = max(float(np.max(m.robot_channel)), float(np.max(m.wall_channel)))
    # a few spare steps absorb float drift from the repeated subtraction
    steps = math.ceil(peak / beta) + 4 if peak > 0 else 0
    for _ in range(steps):
        m.decay(beta)
    assert np.all(m.robot_channel == 0.0)
    assert np.all(m.wall_channel == 0.0)
    q = MapParams()
    for pos in np.linspace(0, 299.9, 13):
        assert m.faulty_likelihood(q, float(pos)) == 0.5


@given(
    st.floats(min_value=0.0, max_value=299.999),
    st.integers(min_value=0, max_value=10_000),
)
def test_robot_contact_in_window_raises_likelihood(query_pos, seed):
    rng = np.random.default_rng(seed)
    m = make_map(robot=rng.uniform(0, 3, 30), wall=rng.uniform(0, 3, 30))
    p = MapParams(omega_r=0.9)
    before = m.faulty_likelihood(p, query_pos)
    win = m.window_slice(p, query_pos)
    contact_bin = win.start  # guaranteed inside the window
    m.record_contact(p, ROBOT, contact_bin * m.bin_width_cm)
    after = m.faulty_likelihood(p, query_pos)
    assert after > before


@given(st.integers(min_value=0, max_value=10_000))
def test_channel_swap_symmetry(seed):
    rng = np.random.default_rng(seed)
    robot = rng.uniform(0, 4, 30)
    wall = rng.uniform(0, 4, 30)
    p = MapParams()
    m = make_map(robot=robot, wall=wall)
    swapped = make_map(robot=wall, wall=robot)
    for pos in rng.uniform(0, 299.9, 5):
        a = m.faulty_likelihood(p, float(pos))
        b = swapped.faulty_likelihood(p, float(pos))
        assert a == pytest.approx(1.0 - b, abs=1e-12)


@given(
    st.floats(min_value=0.0, max_value=299.999),
    st.floats(min_value=0.0, max_value=299.999),
)
def test_locality_of_updates(query_pos, contact_pos):
    p = MapParams(window_bins=4)
    m = make_map()
    m.robot_channel[:] = 1.0
    m.wall_channel[:] = 0.5
    win = m.window_slice(p, query_pos)
    contact_bin = m.bin_of(contact_pos)
    if win.start <= contact_bin < win.stop:
        return  # only the disjoint case is under test
    before = m.faulty_likelihood(p, query_pos)
    m.record_contact(p, ROBOT, contact_pos)
    assert m.faulty_likelihood(p, query_pos) == before
