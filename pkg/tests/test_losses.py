import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blackbox_reliance.errors import UsageError
from blackbox_reliance.losses import LossSpec, cross_entropy_loss, decision_utility, square_loss, utility_loss
from blackbox_reliance.tabular import ColumnSchema, Dataset


@pytest.mark.parametrize("y,yhat,expected", [(0, 0.5, 0.25), (1, 0.2, 0.64), (2.0, -1.0, 9.0), (1, 1, 0.0)])
def test_square_loss(y, yhat, expected):
    assert square_loss(y, yhat) == pytest.approx(expected)


@pytest.mark.parametrize("y,p,expected", [(1, 0.5, np.log(2)), (0, 0.25, -np.log(0.75)), (1, 0.1, -np.log(0.1))])
def test_cross_entropy_values(y, p, expected):
    assert cross_entropy_loss(y, p) == pytest.approx(expected, rel=1e-14)


def test_cross_entropy_finite_at_degenerate_predictions():
    vals = cross_entropy_loss(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert np.all(np.isfinite(vals))
    # 1 - 1e-12 is not exactly representable, hence the loose tolerance
    np.testing.assert_allclose(vals, -np.log(1e-12), rtol=1e-5)


@settings(max_examples=200, deadline=None)
@given(y=st.sampled_from([0, 1]), a=st.floats(0, 1), b=st.floats(0, 1))
def test_monotone_and_nonnegative(y, a, b):
    # closer to y never costs more
    near, far = sorted((a, b), key=lambda p: abs(y - p))
    for f in (square_loss, cross_entropy_loss):
        assert f(y, near) >= 0
        assert f(y, near) <= f(y, far) + 1e-15


@settings(max_examples=100, deadline=None)
@given(p=st.floats(0.01, 0.99), eps=st.floats(1e-12, 0.0099))
def test_cross_entropy_clip_invariance(p, eps):
    for y in (0, 1):
        assert cross_entropy_loss(y, p, eps) == cross_entropy_loss(y, p, 1e-12)


class TestUtility:
    def test_signs(self):
        # taking d=1 costs P(S=0); d=0 costs lam * P(S=1)
        assert decision_utility(1, 0.3, 0.7, 2.0) == pytest.approx(-0.3)
        assert decision_utility(0, 0.3, 0.7, 2.0) == pytest.approx(-1.4)
        assert utility_loss(1, 0, 0.3, 0.7, 2.0) == pytest.approx(1.1)
        assert utility_loss(1, 1, 0.3, 0.7, 2.0) == 0.0

    def test_affine_in_prediction(self):
        yhat = np.linspace(0, 1, 11)
        vals = utility_loss(1, yhat, 0.4, 0.6, 1.5)
        np.testing.assert_allclose(np.diff(vals, 2), 0, atol=1e-15)

    def test_spec_needs_risk_columns(self):
        with pytest.raises(UsageError):
            LossSpec("utility")
        with pytest.raises(UsageError):
            LossSpec("utility", lam=-1, risk_columns=("a", "b"))

    def test_context_from_data(self):
        schema = [ColumnSchema("p0", "real"), ColumnSchema("p1", "real")]
        spec = LossSpec("utility", lam=1.0, risk_columns=("p0", "p1"))
        p0, p1 = spec.context(Dataset(schema, {"p0": [0.2], "p1": [0.8]}))
        assert spec(np.array([1.0]), np.array([0.0]), (p0, p1))[0] == pytest.approx(0.6)
        with pytest.raises(UsageError):
            spec.context(Dataset(schema, {"p0": [1.2], "p1": [0.8]}))


class TestLossSpec:
    @pytest.mark.parametrize("kind,monotone", [("square", True), ("cross_entropy", True)])
    def test_monotone_flag(self, kind, monotone):
        assert LossSpec(kind).monotone is monotone
        assert not LossSpec("utility", risk_columns=("a", "b")).monotone

    def test_cross_entropy_checks_range(self):
        with pytest.raises(UsageError):
            LossSpec("cross_entropy").check_predictions(np.array([0.5, 1.2]))

    @pytest.mark.parametrize("eps", [0.0, 0.5, 0.7])
    def test_bad_clip(self, eps):
        with pytest.raises(UsageError):
            LossSpec("cross_entropy", clip_epsilon=eps)

    @pytest.mark.parametrize("spec", [LossSpec(), LossSpec("cross_entropy", clip_epsilon=1e-6),
                                      LossSpec("utility", lam=0.5, risk_columns=("a", "b"))])
    def test_round_trip(self, spec):
        assert LossSpec.from_dict(spec.to_dict()) == spec
