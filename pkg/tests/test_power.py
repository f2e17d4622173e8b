import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subgroup_crt.design import LEVEL_ONE, LEVEL_TWO, Design, IccProfile, VarianceComponents, setting_components
from subgroup_crt.errors import DomainError, Infeasible
from subgroup_crt.inference import normal_cdf
from subgroup_crt.power import (
    PowerSpec,
    SubgroupPowerSpec,
    power_curve,
    power_lower_bound,
    required_N1_level2,
    required_n_level1,
    required_subgroup_n_level1,
    required_subgroup_n_level2,
    smallest_integer_above,
    var_delta_formula,
)

from oracles import (
    grid_n_level1,
    grid_N1_level2,
    grid_subgroup_level1,
    grid_subgroup_level2,
    z_sums,
)

VC1 = VarianceComponents(0.1, 0.05, 0.05, 0.8, LEVEL_ONE)
VC2 = setting_components("I", 2)


class TestPowerBound:
    def test_half_at_critical(self):
        z = 1.959963984540054
        assert power_lower_bound(z, 1.0, 0.05) == pytest.approx(0.5, abs=1e-12)

    def test_zero_effect(self):
        assert power_lower_bound(0.0, 0.3, 0.05) == pytest.approx(0.025, abs=1e-12)

    def test_worked_example(self):
        assert power_lower_bound(1.0, 0.0471111, 0.05) == pytest.approx(normal_cdf(1 / math.sqrt(0.0471111) - 1.959964), abs=1e-6)
        assert power_lower_bound(1.0, 0.0471111, 0.05) == pytest.approx(0.9959, abs=1e-4)

    def test_level_two_worked_example(self):
        var = var_delta_formula(Design.level_two(10, 15, 3), VC2)
        # Phi(sqrt(0.25 / 0.028444) - 1.95996) = Phi(1.0047)
        assert power_lower_bound(0.5, var, 0.05) == pytest.approx(0.8425, abs=1e-4)

    def test_bad_variance(self):
        with pytest.raises(DomainError):
            power_lower_bound(1.0, 0.0, 0.05)

    @given(st.floats(0, 3), st.floats(0, 3), st.floats(0.001, 1), st.floats(0.001, 1))
    def test_monotone(self, d1, d2, v1, v2):
        if d1 <= d2:
            assert power_lower_bound(d1, 0.05, 0.05) <= power_lower_bound(d2, 0.05, 0.05)
        if v1 <= v2:
            assert power_lower_bound(0.5, v1, 0.05) >= power_lower_bound(0.5, v2, 0.05)


class TestDifferenceSizes:
    spec = PowerSpec(alpha=0.05, power=0.8, delta=1.0)

    def test_level_one_worked_example(self):
        res = required_n_level1(self.spec, 5, 6, VC1)
        assert (res.minimal, res.size, res.clamped) == (2, 2, False)

    def test_level_one_infeasible(self):
        with pytest.raises(Infeasible) as err:
            required_n_level1(PowerSpec(0.05, 0.8, 0.5), 5, 6, VC1)
        assert err.value.reason == "B >= threshold"

    def test_strict_boundary(self):
        # sigma_grp^2 = 0 and delta^2 / (z + z)^2 == A exactly: bound is 1, answer 2
        spec = PowerSpec(0.05, 0.8, 1.0)
        a_target = spec.threshold
        n3, n2 = 5, 6
        vc = VarianceComponents(0.0, 0.0, 0.0, a_target * n3 * n2 / 4, LEVEL_ONE)
        res = required_n_level1(spec, n3, n2, vc)
        assert res.bound == pytest.approx(1.0, abs=1e-12)
        assert res.minimal == smallest_integer_above(res.bound)

    def test_smallest_integer_above(self):
        assert smallest_integer_above(1.0) == 2
        assert smallest_integer_above(1.2) == 2
        assert smallest_integer_above(0.3) == 1

    def test_level_two_worked_example(self):
        res = required_N1_level2(PowerSpec(0.05, 0.8, 0.5), 10, 15, VC2)
        assert res.size == 3

    def test_level_two_infeasible(self):
        with pytest.raises(Infeasible):
            required_N1_level2(PowerSpec(0.05, 0.8, 0.1), 10, 15, VC2)

    def test_clamp(self):
        res = required_n_level1(PowerSpec(0.05, 0.8, 3.0), 5, 6, VC1)
        assert res.minimal == 1 and res.size == 2 and res.clamped

    def test_level_checks(self):
        with pytest.raises(DomainError):
            required_n_level1(self.spec, 5, 6, VC2)
        with pytest.raises(DomainError):
            required_N1_level2(self.spec, 5, 6, VC1)

    def test_one_sided_switch(self):
        two = PowerSpec(0.05, 0.8, 0.5)
        one = PowerSpec(0.05, 0.8, 0.5, one_sided_quantile=True)
        assert one.z_sum_sq < two.z_sum_sq
        assert required_N1_level2(one, 10, 15, VC2).size <= required_N1_level2(two, 10, 15, VC2).size

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            PowerSpec(0.05, 0.04, 1.0)
        with pytest.raises(DomainError):
            PowerSpec(1.5, 0.8, 1.0)

    def test_more_clusters_never_need_more_units(self):
        for n3 in (3, 5, 10, 20):
            for n in (5, 10, 20):
                for delta in (0.3, 0.5, 1.0):
                    spec = PowerSpec(0.05, 0.8, delta)
                    try:
                        base = required_N1_level2(spec, n3, n, VC2).size
                    except Infeasible:
                        continue
                    assert required_N1_level2(spec, 2 * n3, n, VC2).size <= base


class TestSubgroupSizes:
    def test_level_one_worked_example(self):
        spec = SubgroupPowerSpec(0.05, 0.8, 0.4)
        icc = IccProfile(1.0, 0.2, 0.15, 0.1, rho_1p=0.15)
        res = required_subgroup_n_level1(spec, 6, 20, icc)
        assert res.bound == pytest.approx(9.8921 / 7.4531, rel=1e-4)
        assert res.size == 2

    def test_level_one_infeasible(self):
        icc = IccProfile(1.0, 0.2, 0.15, 0.1, rho_1p=0.15)
        with pytest.raises(Infeasible):
            required_subgroup_n_level1(SubgroupPowerSpec(0.05, 0.8, 0.3), 6, 20, icc)

    def test_level_one_exact_boundary(self):
        spec = SubgroupPowerSpec(0.05, 0.8, 1.0)
        zz2 = 2 * spec.z_sum_sq
        # choose N2 * N3 so that Delta^2 N2 N3 == 2 (z + z)^2 with zero correlations
        n2, n3 = 1, 1
        delta = math.sqrt(zz2 / (n2 * n3))
        res = required_subgroup_n_level1(SubgroupPowerSpec(0.05, 0.8, delta), n2, n3, IccProfile(1.0, 0, 0, 0, rho_1p=0))
        assert res.bound == pytest.approx(1.0, abs=1e-12)
        assert res.minimal == 1 and res.size == 2

    def test_level_two_degenerate_numerator(self):
        spec = SubgroupPowerSpec(0.05, 0.8, 0.4)
        icc = IccProfile(1.0, 0.1, 0.1, 0.1)
        res = required_subgroup_n_level2(spec, 20, 40, icc)
        zz2 = 2 * spec.z_sum_sq
        assert res.bound == pytest.approx(zz2 * 0.9 / (0.16 * 20 * 40 - zz2 * 0.1 * 20), rel=1e-12)

    def test_level_two_example_matches_grid(self):
        spec = SubgroupPowerSpec(0.05, 0.8, 0.4)
        icc = IccProfile(1.0, 0.2, 0.15, 0.1)
        oracle = grid_subgroup_level2(0.4, z_sums(0.05, 0.8, one_sided=True), 20, 10, 0.2, 0.15)
        if oracle is None:
            with pytest.raises(Infeasible):
                required_subgroup_n_level2(spec, 20, 10, icc)
        else:
            assert required_subgroup_n_level2(spec, 20, 10, icc).minimal == oracle

    def test_two_sided_switch(self):
        icc = IccProfile(1.0, 0.2, 0.15, 0.1, rho_1p=0.15)
        one = required_subgroup_n_level1(SubgroupPowerSpec(0.05, 0.8, 0.5), 6, 20, icc)
        two = required_subgroup_n_level1(SubgroupPowerSpec(0.05, 0.8, 0.5, two_sided_quantile=True), 6, 20, icc)
        assert two.bound > one.bound


def _grid_points(count=100, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield dict(
            delta=float(rng.uniform(0.1, 1.5)),
            alpha=float(rng.choice([0.01, 0.05, 0.1])),
            power=float(rng.choice([0.8, 0.9, 0.95])),
            n3=int(rng.integers(2, 40)),
            mid=int(rng.integers(2, 30)),
            s=rng.uniform(0, 0.2, size=3),
            s_e=float(rng.uniform(0.3, 1.0)),
            rho=np.sort(rng.uniform(0, 0.3, size=3))[::-1],
        )


@pytest.mark.parametrize("point", list(_grid_points()), ids=lambda p: f"d{p['delta']:.2f}-n3{p['n3']}")
def test_sizes_minimal_on_grid(point):
    p = point
    z2 = z_sums(p["alpha"], p["power"])
    spec = PowerSpec(p["alpha"], p["power"], p["delta"])
    vc1 = VarianceComponents(p["s"][0], p["s"][1], p["s"][2], p["s_e"], LEVEL_ONE)
    vc2 = VarianceComponents(p["s"][0], p["s"][1], p["s"][2], p["s_e"], LEVEL_TWO)
    cases = [
        (lambda: required_n_level1(spec, p["n3"], p["mid"], vc1), grid_n_level1(p["delta"], z2, p["n3"], p["mid"], vc1)),
        (lambda: required_N1_level2(spec, p["n3"], p["mid"], vc2), grid_N1_level2(p["delta"], z2, p["n3"], p["mid"], vc2)),
    ]
    rho1, rho_2p, rho2 = p["rho"]
    g_spec = SubgroupPowerSpec(p["alpha"], p["power"], p["delta"])
    zg = z_sums(p["alpha"], p["power"], one_sided=True)
    icc1 = IccProfile(1.0, rho1, rho_2p, rho2, rho_1p=rho1 + rho2 - rho_2p)
    icc2 = IccProfile(1.0, rho1, rho_2p, rho2)
    cases += [
        (lambda: required_subgroup_n_level1(g_spec, p["mid"], p["n3"], icc1), grid_subgroup_level1(p["delta"], zg, p["mid"], p["n3"], rho1, rho_2p)),
        (lambda: required_subgroup_n_level2(g_spec, p["mid"], p["n3"], icc2), grid_subgroup_level2(p["delta"], zg, p["mid"], p["n3"], rho1, rho_2p)),
    ]
    for compute, oracle in cases:
        if oracle is None:
            with pytest.raises(Infeasible):
                compute()
        else:
            assert compute().minimal == oracle


class TestPowerCurve:
    spec = PowerSpec(0.05, 0.8, 0.5)

    def test_single_point(self):
        rows = power_curve(self.spec, {"n3": [5], "n2": [6], "n": [15]}, VC1)
        assert len(rows) == 1
        var = var_delta_formula(Design.level_one(5, 6, 15), VC1)
        assert rows[0].power == power_lower_bound(0.5, var, 0.05)

    def test_monotone_in_n(self):
        rows = power_curve(self.spec, {"n3": [5], "n2": [6], "n": range(2, 51)}, VC1)
        powers = [r.power for r in rows]
        assert all(a <= b for a, b in zip(powers, powers[1:]))

    def test_monotone_every_dimension(self):
        grid = {"n3": [4, 8], "n": [5, 10], "n1": [3, 6]}
        rows = {r.design.triple: r.power for r in power_curve(self.spec, grid, VC2)}
        for (a, b, c), p in rows.items():
            for bigger in ((2 * a, b, c), (a, 2 * b, c), (a, b, 2 * c)):
                if bigger in rows:
                    assert rows[bigger] >= p

    def test_missing_dimension(self):
        with pytest.raises(DomainError):
            power_curve(self.spec, {"n3": [5]}, VC1)

    def test_analytic_is_lower_bound_of_simulation(self):
        # (5, 6, 15), delta = 0.5, Setting II: published empirical power 0.941
        vc = setting_components("II", 1)
        bound = power_lower_bound(0.5, var_delta_formula(Design.level_one(5, 6, 15), vc), 0.05)
        assert bound <= 0.941 + 3 * math.sqrt(0.941 * 0.059 / 1000)
