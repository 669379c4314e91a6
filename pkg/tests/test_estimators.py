import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from crowdpulse.estimators import PulseSynthesizer, WahWahSynthesizer, check_target
from crowdpulse.model import GATES, TargetRotation


def test_check_target():
    assert check_target(("X180", "Y90")) == TargetRotation(GATES["X180"], GATES["Y90"])
    assert check_target((np.pi, 0.5j)) == TargetRotation(np.pi, 0.5j)
    with pytest.raises(ValueError):
        check_target(("X180", "Q"))
    with pytest.raises(ValueError):
        check_target(3.0)


def test_pulse_synthesizer_fit_transform():
    est = PulseSynthesizer(tg=24.0, restarts=1, max_iter=10, random_state=2)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform([0.0])
    est.fit(("X180", "X180"))
    q = est.transform(np.linspace(0, 24, 13))
    assert q.shape == (13, 4)
    np.testing.assert_allclose(q[[0, -1]], 0, atol=1e-14)
    assert est.score(("X180", "X180")) == pytest.approx(1 - est.gate_error_, abs=1e-12)
    assert est.coef_.shape == (2, 3)
    assert len(est.detunings_) == 2


def test_pulse_synthesizer_rejects_bad_time():
    with pytest.raises(ValueError):
        PulseSynthesizer(tg=-1.0).fit(("X180", "X180"))


def test_wahwah_model_estimator():
    est = WahWahSynthesizer(tg_bar=1.5, optimize=False).fit()
    assert est.transform([0.0, 1.0]).shape == (2, 4)
    assert 0.0 <= est.gate_error_ < 1e-2
    assert est.score() == pytest.approx(1 - est.gate_error_, abs=1e-9)
    with pytest.raises(ValueError):
        WahWahSynthesizer().fit(("X180", "X180"))
