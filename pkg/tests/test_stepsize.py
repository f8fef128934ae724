import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import tolerance_ratio_closed_form
from qsum.errors import ConfigurationError, InvalidArgumentError
from qsum.problem import OptimumMeta
from qsum.stepsize import (
    Constant,
    Diminishing,
    DynamicI,
    DynamicII,
    c_pm,
    incremental_error_bound,
    is_dynamic,
    next_stepsize,
    r_pm,
    randomized_error_bound,
    rule_from_dict,
    tolerance_ratio,
)


class TestConstants:
    @pytest.mark.parametrize("p,m,L,expected", [(1, 2, 1, 1.0), (2, 3, 4, 0.5), (0.5, 2, 1, 0.25)])
    def test_c_pm(self, p, m, L, expected):
        assert c_pm(p, m, L) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("p,m,L,expected", [(1, 5, 1, 1.0), (0.5, 4, 1, 0.25), (2, 2, 1, 1.0)])
    def test_r_pm(self, p, m, L, expected):
        assert r_pm(p, m, L) == pytest.approx(expected, rel=1e-15)

    @given(st.integers(1, 10_000))
    def test_order_one_is_unity(self, m):
        assert c_pm(1.0, m, 1.0) == 1.0
        assert r_pm(1.0, m, 1.0) == 1.0

    @pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
    def test_invalid(self, args):
        with pytest.raises(InvalidArgumentError):
            c_pm(*args)
        with pytest.raises(InvalidArgumentError):
            r_pm(*args)


class TestNextStepsize:
    meta = OptimumMeta(p=1.0, L_max=1.0, m=1)

    def test_constant(self):
        assert next_stepsize(Constant(1.5), 7, 3.0, self.meta) == 1.5

    def test_diminishing(self):
        rule = Diminishing(v=3.0)
        assert next_stepsize(rule, 0, 0.0, self.meta) == 3.0
        assert next_stepsize(rule, 10, 0.0, self.meta) == pytest.approx(1.5)

    def test_dynamic_one(self):
        assert next_stepsize(DynamicI(gamma=1.0, f_star=0.0), 0, 0.8, self.meta) == pytest.approx(0.8)

    def test_dynamic_two(self):
        meta = OptimumMeta(p=1.0, L_max=1.0, m=2)
        assert next_stepsize(DynamicII(gamma=1.0, f_star=0.0), 0, 1.0, meta) == pytest.approx(0.5)

    def test_dynamic_clamps_below_target(self):
        assert next_stepsize(DynamicI(f_star=1.0), 0, 0.5, self.meta) == 0.0
        assert next_stepsize(DynamicII(f_star=1.0), 0, 1.0, self.meta) == 0.0

    def test_dynamic_needs_f_star(self):
        with pytest.raises(ConfigurationError):
            next_stepsize(DynamicI(), 0, 1.0, self.meta)
        with pytest.raises(ConfigurationError):
            DynamicII().resolved(None)

    def test_resolved_fills_f_star(self):
        assert DynamicI().resolved(2.0).f_star == 2.0
        assert DynamicI(f_star=1.0).resolved(2.0).f_star == 1.0

    def test_gamma_schedule(self):
        rule = DynamicI(gamma=lambda k: 0.5 + 0.1 * (k % 2), f_star=0.0)
        assert next_stepsize(rule, 1, 1.0, self.meta) == pytest.approx(0.6)

    @pytest.mark.parametrize("gamma", [0.0, 2.0, -1.0])
    def test_gamma_range(self, gamma):
        with pytest.raises(ConfigurationError):
            DynamicI(gamma=gamma)

    def test_schedule_leaving_range(self):
        rule = DynamicI(gamma=lambda k: 2.5, f_star=0.0)
        with pytest.raises(ConfigurationError):
            next_stepsize(rule, 0, 1.0, self.meta)

    @given(st.integers(0, 10**6), st.floats(0.0, 1e6), st.sampled_from([0.5, 1.0, 2.0]), st.integers(1, 100))
    def test_nonnegative_and_positive(self, k, gap, p, m):
        meta = OptimumMeta(p=p, L_max=3.0, m=m)
        for rule in (Constant(1.0), Diminishing(2.0), DynamicI(f_star=0.0), DynamicII(f_star=0.0)):
            v = next_stepsize(rule, k, gap, meta)
            assert v >= 0.0
            if not is_dynamic(rule) or gap > 0:
                assert v > 0.0

    def test_invalid_rules(self):
        with pytest.raises(ConfigurationError):
            Constant(0.0)
        with pytest.raises(ConfigurationError):
            Diminishing(v=1.0, power=1.5)


class TestDiminishing:
    def test_tends_to_zero_not_summable(self):
        rule = Diminishing(3.0)
        assert rule(10**9) < 1e-6
        partial = math.fsum(rule(k) for k in range(100_000))
        assert partial > 3.0 * 10 * math.log(1 + 0.1 * 99_999) * 0.99

    def test_power_variant(self):
        assert Diminishing(1.0, rate=1.0, power=0.6)(3) == pytest.approx(4**-0.6)


class TestToleranceRatio:
    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("m", [2, 5, 10, 100])
    def test_identity_and_bound(self, p, m):
        r = tolerance_ratio(p, m)
        assert r == pytest.approx(tolerance_ratio_closed_form(p, m), rel=1e-12)
        assert r <= max(1.0, 2.0 ** (p - 1)) / m**p

    @given(st.floats(0.1, 3.0), st.integers(1, 200), st.floats(0.01, 10.0), st.floats(0.1, 10.0))
    def test_independent_of_v_and_L(self, p, m, v, L):
        assert tolerance_ratio(p, m, L, v) == pytest.approx(tolerance_ratio_closed_form(p, m), rel=1e-9)

    def test_bounds(self):
        meta = OptimumMeta(p=1.0, L_max=1.0, m=2)
        assert incremental_error_bound(1.0, meta) == 2.0
        assert randomized_error_bound(1.0, meta) == 1.0


class TestRuleFromDict:
    def test_constant(self):
        assert rule_from_dict({"rule": "constant", "v": 1.5}) == Constant(1.5)

    def test_diminishing(self):
        assert rule_from_dict({"rule": "diminishing", "v": 3}) == Diminishing(3)

    def test_dynamic(self):
        assert rule_from_dict({"rule": "dynamic2", "gamma": 0.5}) == DynamicII(gamma=0.5)

    @pytest.mark.parametrize(
        "spec,path",
        [
            ({"rule": "bogus"}, "stepsize.rule"),
            ({"rule": "constant", "gamma": 1}, "stepsize.gamma"),
            ({"rule": "constant", "v": "big"}, "stepsize.v"),
            ({"rule": "constant", "v": -1}, "stepsize"),
            ([], "stepsize"),
        ],
    )
    def test_errors_carry_path(self, spec, path):
        with pytest.raises(ConfigurationError) as err:
            rule_from_dict(spec)
        assert err.value.path == path

    def test_labels(self):
        assert Constant(1.5).label() == "constant(v=1.5)"
        assert Diminishing(3.0).label() == "diminishing(v=3.0,rate=0.1)"
        assert DynamicI().label() == "dynamic1(gamma=1.0)"
