import numpy as np
import pytest

import bilevelpen as bp
from bilevelpen.continuation import EpsSchedule
from bilevelpen.model import (BilevelProblem, BoxSet, DimensionGuardError,
                              Polytope, field_from_expression)


def make_problem(f_expr, h_expr, dim_y=1, dim_x=4, box=(0.0, 1.0), name="custom",
                 A=None, b=None):
    A = [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]] if A is None else A
    b = [1.0, 1.0] if b is None else b
    return BilevelProblem(
        name=name,
        leader_objective=field_from_expression(f_expr, dim_y, dim_x),
        follower_objective=field_from_expression(h_expr, dim_y, dim_x),
        leader_set=BoxSet(lower=[box[0]] * dim_y, upper=[box[1]] * dim_y),
        follower_set=Polytope(A=A, b=b),
    )


class TestExactLowerSet:
    def test_fs_whole_segment_is_optimal(self, fs):
        desc = bp.exact_lower_set(fs, [0.37])
        assert desc.kind == "vertex_face"
        assert desc.value == 0.0
        np.testing.assert_allclose(sorted(map(tuple, desc.points)),
                                   [(0.0, 1.0), (1.0, 0.0)])

    def test_qb_band(self, qb):
        desc = bp.exact_lower_set(qb, [0.5])
        assert desc.kind == "grid_cloud"
        assert desc.value <= 1e-6
        sigma = desc.points[:, 0] + desc.points[:, 1]
        np.testing.assert_allclose(sigma, 1.0, atol=1e-4)
        assert len(desc.points) > 100  # a genuine band, not a point

    def test_strictly_convex_follower_gives_single_point(self):
        p = make_problem("1 + x[0]", "(x[0] - 0.3)^2 + (x[1] - 0.4)^2")
        desc = bp.exact_lower_set(p, [0.5])
        assert desc.kind == "single_point"
        assert desc.points[0][0] == pytest.approx(0.3, abs=1e-3)
        assert desc.points[0][1] == pytest.approx(0.4, abs=1e-3)

    def test_grid_dimension_guard(self):
        # 5 free coordinates after slack elimination, nonlinear follower objective
        n = 10
        A = np.hstack([np.eye(5), np.eye(5)])
        p = BilevelProblem(
            name="wide",
            leader_objective=field_from_expression("1 + x[0]", 1, n),
            follower_objective=field_from_expression("(x[0] + x[1] - 1)^2", 1, n),
            leader_set=BoxSet(lower=[0.0], upper=[1.0]),
            follower_set=Polytope(A=A, b=np.ones(5)),
        )
        with pytest.raises(DimensionGuardError):
            bp.exact_lower_set(p, [0.5])


class TestPessimisticSelect:
    def test_fs_low_end(self, fs):
        r = bp.pessimistic_select(fs, [0.5])
        np.testing.assert_allclose(r.x, [0.0, 1.0], atol=1e-9)
        assert r.value == pytest.approx(2.0, abs=1e-12)

    def test_qb_band_value(self, qb):
        r = bp.pessimistic_select(qb, [0.5])
        assert r.value == pytest.approx(4.0, abs=1e-9)

    def test_leader_objective_independent_of_x(self):
        p = make_problem("2 + y[0]", "(x[0] + x[1] - 1)^2")
        r = bp.pessimistic_select(p, [0.25])
        assert r.value == pytest.approx(2.25, abs=1e-12)
        assert p.follower_set.contains(r.x)


class TestSolveThreeLevel:
    def test_fs_certified(self, fs):
        sol = bp.solve_three_level(fs)
        assert abs(sol.y[0] - 0.5) <= 1e-3
        assert abs(sol.leader_value - 2.0) <= 1e-3
        np.testing.assert_allclose(sol.x, [0.0, 1.0], atol=1e-3)
        assert sol.method == "face_enum"

    def test_qb_certified(self, qb):
        sol = bp.solve_three_level(qb)
        assert abs(sol.leader_value - 4.0) <= 1e-3
        assert abs(sol.follower_value) <= 1e-6
        assert sol.method == "grid"

    def test_collapsed_leader_box(self):
        p = make_problem("1 + 4*y[0]*(1 - y[0]) + x[0]", "0",
                         dim_x=2, A=[[1.0, 1.0]], b=[1.0], box=(0.3, 0.3))
        sol = bp.solve_three_level(p)
        assert sol.y[0] == 0.3
        assert sol.leader_value == pytest.approx(1 + 4 * 0.3 * 0.7, abs=1e-9)

    def test_leader_dimension_guard(self):
        p = BilevelProblem(
            name="wide_leader",
            leader_objective=field_from_expression("1 + y[0] + y[1] + y[2] + x[0]", 3, 2),
            follower_objective=field_from_expression("0", 3, 2),
            leader_set=BoxSet(lower=[0.0] * 3, upper=[1.0] * 3),
            follower_set=Polytope(A=[[1.0, 1.0]], b=[1.0]),
        )
        with pytest.raises(DimensionGuardError):
            bp.solve_three_level(p)


@pytest.fixture(scope="module")
def qb_pair(qb):
    oracle = bp.solve_three_level(qb)
    trace = bp.run_continuation(qb, EpsSchedule(0.1, 0.5, 8))
    return oracle, trace


class TestGapTable:
    def test_matches_closed_form(self, qb_pair):
        oracle, trace = qb_pair
        for eps, gap in bp.gap_table(oracle, trace):
            assert gap == pytest.approx(16 * eps / (1 + 4 * eps), abs=5e-4)

    def test_gaps_never_meaningfully_negative(self, qb_pair):
        oracle, trace = qb_pair
        assert all(gap >= -2e-4 for _, gap in bp.gap_table(oracle, trace))

    def test_fs_gaps_tiny(self, fs):
        oracle = bp.solve_three_level(fs)
        trace = bp.run_continuation(fs, EpsSchedule(0.1, 0.5, 6))
        assert all(abs(gap) <= 2e-4 for _, gap in bp.gap_table(oracle, trace))

    def test_problem_mismatch_rejected(self, qb_pair, fs):
        oracle, _ = qb_pair
        trace = bp.run_continuation(fs, EpsSchedule(0.1, 0.5, 4))
        with pytest.raises(ValueError):
            bp.gap_table(oracle, trace)


class TestLimitCertification:
    def test_trace_limit_agrees_with_oracle_selection(self, qb, fs):
        # the continuation limit lands on the worst-case selection value
        for problem in (qb, fs):
            trace = bp.run_continuation(problem, EpsSchedule(0.1, 0.5, 12))
            est = bp.limit_estimate(trace)
            f = problem.leader_objective
            at_limit = f.evaluate(est.y_limit, est.x_limit)
            oracle_value = bp.pessimistic_select(problem, est.y_limit).value
            assert abs(at_limit - oracle_value) <= 1e-3


class TestExport:
    def test_oracle_json_schema(self, fs):
        sol = bp.solve_three_level(fs)
        doc = bp.oracle_to_json(sol)
        assert doc["schema"] == "oracle-v1"
        assert doc["problem"] == "FS"
        assert doc["leader_value"] == pytest.approx(2.0, abs=1e-3)
        assert "resolution" in doc
