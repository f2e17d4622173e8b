import pytest
from hypothesis import given, strategies as st

from subgroup_crt.design import (
    LEVEL_ONE,
    LEVEL_TWO,
    Design,
    FixedEffects,
    IccProfile,
    SubgroupLevel,
    VarianceComponents,
    components_to_icc,
    icc_to_components,
    setting_components,
)
from subgroup_crt.errors import InvalidComponents, InvalidDesign, InvalidIcc, LevelMismatch


class TestDesign:
    def test_level_one_layout(self):
        d = Design.level_one(5, 6, 15)
        assert d.shape == (10, 6, 2, 15)
        assert d.n_obs == 2 * 5 * 6 * 30
        assert d.triple == (5, 6, 15)

    def test_level_two_layout(self):
        d = Design.level_two(10, 15, 20)
        assert d.shape == (20, 2, 15, 20)
        assert (d.mid, d.low, d.n) == (30, 20, 15)

    def test_index_is_c_order(self):
        d = Design.level_one(2, 3, 2)
        seen = [d.index(i, a, b, k) for i in range(4) for a in range(3) for b in range(2) for k in range(2)]
        assert seen == list(range(d.n_obs))

    def test_arm_by_level_three_index(self):
        d = Design.level_two(3, 2, 2)
        assert [d.arm(i) for i in range(6)] == [1, 1, 1, 0, 0, 0]

    @pytest.mark.parametrize(
        "args",
        [(0, 4, 4, 1), (2, 1, 4, 1), (2, 4, 3, 1), (2, 4, 2, 1), (2, 3, 4, 2), (2, 4, 1, 2), (2, 2, 4, 2)],
    )
    def test_rejects_invalid(self, args):
        with pytest.raises(InvalidDesign):
            Design(*args[:3], args[3])

    def test_level_parse(self):
        assert SubgroupLevel.parse("2") is LEVEL_TWO
        assert SubgroupLevel.parse(1) is LEVEL_ONE
        with pytest.raises(ValueError):
            SubgroupLevel.parse(3)


class TestFixedEffects:
    def test_subgroup_effects(self):
        fx = FixedEffects(1.0, 2.0, 3.0, 4.0)
        assert fx.delta1 == 7.0 and fx.delta2 == 3.0
        assert fx.delta1 - fx.delta2 == fx.delta

    def test_cell_means(self):
        fx = FixedEffects(1.0, 2.0, 3.0, 4.0)
        assert fx.cell_mean(True, 1) == 10.0
        assert fx.cell_mean(True, 2) == 4.0
        assert fx.cell_mean(False, 1) == 3.0
        assert fx.cell_mean(False, 2) == 1.0


class TestComponents:
    def test_negative_rejected(self):
        with pytest.raises(InvalidComponents):
            VarianceComponents(-0.1, 0, 0, 1, LEVEL_ONE)

    def test_level_mismatch(self):
        vc = VarianceComponents(0, 0, 0, 1, LEVEL_TWO)
        with pytest.raises(LevelMismatch):
            vc.check_level(Design.level_one(2, 2, 2))


class TestIcc:
    def test_setting_one_level_one(self):
        vc = icc_to_components(IccProfile(1.0, 0.2, 0.15, 0.1, rho_1p=0.15), LEVEL_ONE)
        assert vc.as_tuple() == pytest.approx((0.1, 0.05, 0.05, 0.8), abs=1e-15)

    def test_setting_two_level_two(self):
        # sigma_1^2 = rho1 - sigma3^2 - sigma2^2 = 0.1 - 0.05 - 0.025
        vc = icc_to_components(IccProfile(1.0, 0.1, 0.075, 0.05), LEVEL_TWO)
        assert vc.as_tuple() == pytest.approx((0.05, 0.025, 0.025, 0.9), abs=1e-15)

    def test_independence(self):
        vc = icc_to_components(IccProfile(1.0, 0.0, 0.0, 0.0), LEVEL_TWO)
        assert vc.as_tuple() == (0.0, 0.0, 0.0, 1.0)

    def test_inverse_examples(self):
        p = components_to_icc(VarianceComponents(0.1, 0.05, 0.05, 0.8, LEVEL_ONE))
        assert (p.sigma_sq, p.rho1, p.rho_1p, p.rho_2p, p.rho2) == pytest.approx((1, 0.2, 0.15, 0.15, 0.1), abs=1e-15)
        q = components_to_icc(VarianceComponents(0, 0, 0, 1, LEVEL_TWO))
        assert (q.sigma_sq, q.rho1, q.rho_2p, q.rho2, q.rho_1p) == (1, 0, 0, 0, None)

    def test_settings_table(self):
        assert setting_components("II", 1).as_tuple() == pytest.approx((0.05, 0.025, 0.025, 0.9))
        assert setting_components("I", 2).as_tuple() == pytest.approx((0.1, 0.05, 0.05, 0.8))

    @pytest.mark.parametrize(
        "profile,level",
        [
            (IccProfile(1.0, 0.2, 0.15, 0.1), LEVEL_ONE),  # rho_1p missing
            (IccProfile(1.0, 0.2, 0.15, 0.1, rho_1p=0.1), LEVEL_ONE),  # sum rule
            (IccProfile(1.0, 0.2, 0.25, 0.1), LEVEL_TWO),  # rho_2p > rho1
            (IccProfile(1.0, 0.2, 0.15, 0.1, rho_1p=0.15), LEVEL_TWO),  # rho_1p present
            (IccProfile(0.0, 0.2, 0.15, 0.1), LEVEL_TWO),
            (IccProfile(1.0, 0.2, 0.15, -0.01), LEVEL_TWO),
        ],
    )
    def test_invalid_profiles(self, profile, level):
        with pytest.raises(InvalidIcc):
            icc_to_components(profile, level)


unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def level_one_profiles(draw):
    rho2 = draw(st.floats(0.0, 0.3))
    a = draw(st.floats(0.0, 0.3))
    b = draw(st.floats(0.0, 0.3))
    return IccProfile(draw(st.floats(0.01, 100.0)), rho2 + a + b, rho2 + b, rho2, rho_1p=rho2 + a)


@st.composite
def level_two_profiles(draw):
    rho2 = draw(st.floats(0.0, 0.3))
    rho_2p = rho2 + draw(st.floats(0.0, 0.3))
    rho1 = rho_2p + draw(st.floats(0.0, 0.3))
    return IccProfile(draw(st.floats(0.01, 100.0)), rho1, rho_2p, rho2)


def _close(p, q):
    for name in ("sigma_sq", "rho1", "rho_2p", "rho2"):
        assert abs(getattr(p, name) - getattr(q, name)) <= 1e-12 * max(1.0, abs(getattr(p, name)))


@given(level_one_profiles())
def test_round_trip_level_one(profile):
    vc = icc_to_components(profile, LEVEL_ONE)
    back = components_to_icc(vc)
    _close(profile, back)
    assert abs(profile.rho_1p - back.rho_1p) <= 1e-12
    # components add up to the total variance
    assert abs(vc.total - profile.sigma_sq) <= 1e-12 * profile.sigma_sq


@given(level_two_profiles())
def test_round_trip_level_two(profile):
    back = components_to_icc(icc_to_components(profile, LEVEL_TWO))
    _close(profile, back)
