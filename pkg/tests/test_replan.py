import itertools

import numpy as np
import pytest

from scenarios import box_field
from pathguide.benchmark import straight_reference
from pathguide.exceptions import RejectedInput
from pathguide.replan import (
    ReplanConfig,
    ReplanRequest,
    boundary_states,
    check_collision,
    replan,
    replan_cube,
)
from pathguide.topo import TopoConfig, uvd_equivalent

CFG = ReplanConfig(topo=TopoConfig(t_max=None))
REF = straight_reference([0.3, 2.0, 0.5], [5.7, 2.0, 0.5], 1.0)
DIMS = (60, 40, 10)


def request(ref=REF, **kw):
    kw.setdefault("horizon", 30.0)
    return ReplanRequest(ref, ref.domain[0], roadmap_budget=None, optimization_budget=None, **kw)


@pytest.fixture(scope="module")
def one_pillar():
    return box_field([((2.6, 1.6, 0.0), (3.4, 2.4, 1.0))], dims=DIMS)


@pytest.fixture(scope="module")
def two_pillars():
    return box_field([((1.4, 1.5, 0.0), (2.0, 2.3, 1.0)), ((3.6, 1.7, 0.0), (4.2, 2.5, 1.0))], dims=DIMS)


class TestCheckCollision:
    def test_free_horizon(self):
        assert check_collision(REF, box_field([], dims=DIMS), REF.domain[0], 30.0, 0.4) is None

    def test_brackets_box(self, one_pillar):
        seg = check_collision(REF, one_pillar, REF.domain[0], 30.0, 0.4)
        t_a, t_b = seg
        pa, pb = REF.evaluate(t_a), REF.evaluate(t_b)
        assert one_pillar.distance_at(pa) > 0.4 and one_pillar.distance_at(pb) > 0.4
        # dense oracle: the whole colliding stretch lies inside the interval
        t = np.linspace(*REF.domain, 5001)
        hit = t[one_pillar.distance_at(REF.evaluate(t)) <= 0]
        assert t_a < hit.min() and hit.max() < t_b
        # nearest safe samples: just outside the anchors the clearance drops below s_f
        inside = np.linspace(t_a, t_b, 400)[1:-1]
        assert np.all(one_pillar.distance_at(REF.evaluate(inside)) <= 0.4 + 0.05)

    def test_padding_keeps_clear_run(self, one_pillar):
        t_a, t_b = check_collision(REF, one_pillar, REF.domain[0], 30.0, 0.4, padding=1.0)
        for t in np.linspace(t_a, t_a + 1.0, 50):  # unit speed: 1 s is 1 m
            assert one_pillar.distance_at(REF.evaluate(t)) > 0.4
        for t in np.linspace(t_b - 1.0, t_b, 50):
            assert one_pillar.distance_at(REF.evaluate(t)) > 0.4

    def test_short_horizon(self, one_pillar):
        assert check_collision(REF, one_pillar, REF.domain[0], 1.0, 0.4) is None

    def test_t_now_outside_domain(self, one_pillar):
        with pytest.raises(RejectedInput):
            check_collision(REF, one_pillar, REF.domain[1] + 1.0, 30.0, 0.4)


class TestCube:
    def test_examples(self):
        lo, hi = replan_cube([0, 0, 0], [2, 0, 0], [1, 1, 1])
        np.testing.assert_array_equal(lo, [-1, -1, -1])
        np.testing.assert_array_equal(hi, [3, 1, 1])
        lo, hi = replan_cube([1, 1, 1], [1, 1, 1], [0.5, 1, 2])
        np.testing.assert_array_equal(hi - lo, [1, 2, 4])
        lo, hi = replan_cube([0, 0, 0], [0, 4, 0], [2, 1, 0.5])
        np.testing.assert_array_equal(lo, [-2, -1, -0.5])
        np.testing.assert_array_equal(hi, [2, 5, 0.5])

    def test_request_validation(self):
        with pytest.raises(RejectedInput):
            ReplanRequest(REF, 0.0, horizon=0.0)
        with pytest.raises(RejectedInput):
            ReplanRequest(REF, 0.0, cube_inflation=(1.0, 0.0, 1.0))


class TestReplan:
    def test_not_triggered(self):
        out = replan(request(), box_field([], dims=DIMS), CFG)
        assert not out.triggered and out.candidates == [] and out.best is None

    def test_single_pillar(self, one_pillar):
        out = replan(request(), one_pillar, CFG)
        assert out.triggered and len(out.candidates) >= 2
        for a, b in itertools.combinations(out.candidates, 2):
            assert not uvd_equivalent(a.path.waypoints, b.path.waypoints, one_pillar)
        best = out.candidates[out.best].trajectory
        t = np.linspace(*best.domain, 2000)
        assert one_pillar.distance_at(best.evaluate(t)).min() > 0

    def test_selection_rule(self, two_pillars):
        out = replan(request(), two_pillars, CFG)
        assert len(out.candidates) >= 2 and out.best is not None
        ok = [c.cost for c in out.candidates if not c.failed]
        assert out.candidates[out.best].cost == min(ok)
        assert not out.candidates[out.best].failed

    def test_invariants(self, two_pillars):
        out = replan(request(), two_pillars, CFG)
        assert len(out.candidates) <= CFG.topo.k_max
        p = REF.degree
        init = out.initial
        t_a, t_b = out.segment
        np.testing.assert_allclose(init.evaluate(init.domain[0]), REF.evaluate(t_a), atol=1e-9)
        np.testing.assert_allclose(init.evaluate(init.domain[1]), REF.evaluate(t_b), atol=1e-9)
        for c in out.candidates:
            q = c.trajectory.ctrl_pts
            assert np.array_equal(q[:p], init.ctrl_pts[:p]) and np.array_equal(q[-p:], init.ctrl_pts[-p:])
            if not c.failed:
                assert two_pillars.distance_at(q[c.trajectory.free_slice]).min() > 0
        # boundary derivatives match the reference at the anchors
        lo = init.domain[0]
        np.testing.assert_allclose(boundary_states(init, lo, p), boundary_states(REF, t_a, p), atol=1e-8)

    def test_deterministic_under_threads(self, two_pillars):
        a = replan(request(), two_pillars, CFG, rng_seed=4, workers=4)
        b = replan(request(), two_pillars, CFG, rng_seed=4, workers=1)
        assert a.best == b.best
        for x, y in zip(a.candidates, b.candidates, strict=True):
            assert np.array_equal(x.trajectory.ctrl_pts, y.trajectory.ctrl_pts)
            assert x.cost == y.cost

    def test_timing_keys(self, one_pillar):
        out = replan(request(), one_pillar, CFG)
        assert set(out.timing) == {"roadmap", "paths", "optimization", "selection"}
        assert all(v >= 0 for v in out.timing.values())
