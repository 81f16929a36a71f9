import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vdcexo.actuator import (
    ConstraintParams,
    apply_constraints,
    default_joint_limits,
    saturate_deadzone,
    split_levels,
)

SHOULDER = ConstraintParams(12.0, -12.0, 0.2, -0.2, 1.0, 1.0)


def test_examples():
    assert saturate_deadzone(20.0, SHOULDER) == pytest.approx(11.8, abs=1e-12)
    assert saturate_deadzone(-20.0, SHOULDER) == pytest.approx(-11.8, abs=1e-12)
    assert saturate_deadzone(5.0, SHOULDER) == 5.0
    assert saturate_deadzone(0.0, SHOULDER) == 0.0


def test_default_limits():
    lim = default_joint_limits()
    assert [p.upper for p in lim] == pytest.approx([11.8] * 4 + [1.15] * 3)
    assert [p.lower for p in lim] == pytest.approx([-11.8] * 4 + [-1.15] * 3)
    tau = np.array([20, -20, 3, 0, 2, -2, 0.5])
    np.testing.assert_allclose(apply_constraints(tau, lim), [11.8, -11.8, 3, 0, 1.15, -1.15, 0.5])


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.1, 20), st.floats(0, 0.09),
       st.floats(0.5, 2), st.floats(0.5, 2))
def test_properties(a, b, k, m, sr, sl):
    p = ConstraintParams(k, -k, m, -m, sr, sl)
    lo, hi = sorted((a, b))
    f_lo, f_hi = saturate_deadzone(lo, p), saturate_deadzone(hi, p)
    assert f_lo <= f_hi
    assert saturate_deadzone(f_lo, p) == f_lo
    assert p.lower <= f_lo <= p.upper
    if p.lower < a < p.upper:
        assert saturate_deadzone(a, p) == a


def test_invalid_params():
    with pytest.raises(ValueError):
        ConstraintParams(-1.0, -12.0)
    with pytest.raises(ValueError):
        ConstraintParams(12.0, -12.0, slope_right=-1.0)
    with pytest.raises(ValueError, match="straddle"):
        ConstraintParams(0.1, -12.0, m_right=0.2)


def test_split_levels():
    s = split_levels(SHOULDER, 0.5)
    assert s.body.upper == pytest.approx(5.9)
    assert s.joint.upper == pytest.approx(5.9)
    for frac in (0.01, 0.3, 0.5, 0.77, 0.999999):
        s = split_levels(SHOULDER, frac)
        assert s.upper == pytest.approx(SHOULDER.upper, abs=1e-12)
        assert s.lower == pytest.approx(SHOULDER.lower, abs=1e-12)
    assert split_levels(SHOULDER, 1 - 1e-9).joint.upper < 1e-7
    for bad in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            split_levels(SHOULDER, bad)
