import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpcert.accountant import RdpCurve
from dpcert.bounds import (BoundFamily, BoundKind, CertCondition,
                           best_condition_over_orders, certified_at,
                           k_forward, k_inverse)


def adp(eps, delta):
    return BoundFamily(BoundKind.ADP, eps, delta)


def rdp(eps, alpha):
    return BoundFamily(BoundKind.RDP, eps, alpha)


# alpha stays >= 1.05: the inverse raises float error by ~alpha/(alpha-1),
# so orders arbitrarily close to 1 cannot round-trip to 1e-12 in doubles
families = st.one_of(
    st.builds(adp, st.floats(0.0, 20.0), st.floats(0.0, 0.99)),
    st.builds(rdp, st.floats(0.0, 20.0), st.floats(1.05, 128.0)),
)


class TestForward:
    def test_adp_example(self):
        assert k_forward(adp(math.log(2.0), 0.1), 0.3) == pytest.approx(0.7)

    def test_rdp_square_root(self):
        assert k_forward(rdp(0.0, 2.0), 0.25) == pytest.approx(0.5)

    def test_identity_family(self):
        assert k_forward(adp(0.0, 0.0), 0.42) == pytest.approx(0.42)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            k_forward(adp(0.0, 0.0), 1.5)
        with pytest.raises(ValueError):
            k_forward(adp(0.0, 0.0), -0.1)

    @given(families, st.floats(0.0, 1.0), st.floats(1e-9, 1.0))
    def test_strictly_increasing(self, fam, x, bump):
        x2 = min(1.0, x + bump)
        if x2 > x:
            assert k_forward(fam, x2) > k_forward(fam, x)

    def test_rdp_identity_limit(self):
        # eps=0, alpha -> inf approaches the identity pointwise
        for x in (0.05, 0.3, 0.9):
            gap = [abs(k_forward(rdp(0.0, a), x) - x) for a in (2.0, 8.0, 64.0, 4096.0)]
            assert gap == sorted(gap, reverse=True)
            assert gap[-1] < 1e-3


class TestInverse:
    def test_adp_example(self):
        assert k_inverse(adp(math.log(2.0), 0.1), 0.7) == pytest.approx(0.3)

    def test_rdp_squaring(self):
        assert k_inverse(rdp(0.0, 2.0), 0.5) == pytest.approx(0.25)

    def test_adp_clamps_below_delta(self):
        assert k_inverse(adp(0.0, 0.6), 0.5) == 0.0

    def test_domain_error(self):
        with pytest.raises(ValueError):
            k_inverse(rdp(0.0, 2.0), -0.01)

    @given(families, st.floats(0.0, 1.0))
    def test_roundtrip_identity(self, fam, x):
        # ADP below delta is clamped territory; stay on the invertible range
        y = k_forward(fam, x)
        back = k_inverse(fam, y)
        assert back == pytest.approx(x, abs=1e-12)


class TestCertifiedAt:
    def test_rdp_trivial_true(self):
        cond = CertCondition(0.9, 0.1, rdp(0.0, 2.0), rdp(0.0, 2.0))
        assert k_inverse(cond.lower_bound_fn, 0.9) == pytest.approx(0.81)
        assert k_forward(cond.upper_bound_fn, 0.1) == pytest.approx(math.sqrt(0.1))
        assert certified_at(cond)

    def test_identity_families(self):
        assert certified_at(CertCondition(0.6, 0.4, adp(0.0, 0.0), adp(0.0, 0.0)))

    def test_tie_is_not_certified(self):
        for fam in (adp(0.0, 0.0), rdp(0.0, 2.0)):
            assert not certified_at(CertCondition(0.5, 0.5, fam, fam))

    @given(families, families, st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.floats(0.0, 0.5), st.floats(0.0, 0.5))
    def test_monotone_in_bounds(self, lo_fam, up_fam, p_lo, p_up, raise_lo, drop_up):
        base = certified_at(CertCondition(p_lo, p_up, lo_fam, up_fam))
        better = CertCondition(min(1.0, p_lo + raise_lo), max(0.0, p_up - drop_up),
                               lo_fam, up_fam)
        if base:
            assert certified_at(better)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.floats(0.0, 5.0), st.floats(0.0, 5.0),
           st.floats(1.0 + 1e-6, 64.0), st.floats(0.0, 0.3))
    def test_antitone_in_epsilon(self, p_lo, p_up, eps, extra, alpha, delta):
        for make in (lambda e: adp(e, delta), lambda e: rdp(e, alpha)):
            weak = certified_at(CertCondition(p_lo, p_up, make(eps + extra),
                                              make(eps + extra)))
            if weak:
                assert certified_at(
                    CertCondition(p_lo, p_up, make(eps), make(eps)))


class TestBestCondition:
    def test_single_order(self):
        curve = RdpCurve((4.0,), (0.3,), 1)
        cond = best_condition_over_orders(0.8, 0.2, curve)
        assert cond.lower_bound_fn == rdp(0.3, 4.0)
        assert cond.upper_bound_fn == rdp(0.3, 4.0)

    def test_exhaustive_two_orders(self):
        curve = RdpCurve((2.0, 32.0), (0.1, 0.4), 1)
        cond = best_condition_over_orders(0.99, 0.2, curve)
        lowers = {a: k_inverse(rdp(e, a), 0.99)
                  for a, e in zip(curve.orders, curve.epsilons)}
        uppers = {a: k_forward(rdp(e, a), 0.2)
                  for a, e in zip(curve.orders, curve.epsilons)}
        assert k_inverse(cond.lower_bound_fn, 0.99) == max(lowers.values())
        assert k_forward(cond.upper_bound_fn, 0.2) == min(uppers.values())
        # the two sides pick different orders here
        assert cond.lower_bound_fn.second != cond.upper_bound_fn.second

    def test_all_infinite_orders_never_certify(self):
        curve = RdpCurve((2.0, 8.0), (math.inf, math.inf), 1)
        for p_lo, p_up in ((1.0, 0.0), (0.9, 0.1), (0.5, 0.5)):
            assert not certified_at(best_condition_over_orders(p_lo, p_up, curve))

    def test_empty_curve_is_an_error(self):
        class Empty:
            orders = ()
            epsilons = ()
        with pytest.raises(ValueError):
            best_condition_over_orders(0.9, 0.1, Empty())


class TestFamilyValidation:
    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            BoundFamily(BoundKind.ADP, -0.1, 0.0)
        with pytest.raises(ValueError):
            BoundFamily(BoundKind.ADP, 0.1, 1.0)
        with pytest.raises(ValueError):
            BoundFamily(BoundKind.RDP, 0.1, 1.0)
        with pytest.raises(ValueError):
            CertCondition(1.2, 0.0, adp(0.0, 0.0), adp(0.0, 0.0))
