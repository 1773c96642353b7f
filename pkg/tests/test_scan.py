import numpy as np
import pytest

from eprb import InvalidInputError, scan_series
from eprb.scan import theta_for


class TestScanSeries:
    def test_forty_one_experiments(self):
        assert len(scan_series()) == 41

    def test_identifiers(self):
        ids = [e.experiment_id for e in scan_series()]
        assert ids[0] == "scanblue110"
        assert ids[-1] == "scanblue151"
        assert "scanblue138" not in ids
        assert len(set(ids)) == 41

    def test_angle_progression(self):
        series = scan_series()
        assert series[0].theta_over_pi == pytest.approx(-1.00)
        assert series[1].theta_over_pi == pytest.approx(-0.95)
        assert series[-1].theta_over_pi == pytest.approx(0.95)

    def test_repeated_angle_after_omission(self):
        # the run after the omitted duplicate repeats the previous angle
        by_id = {e.experiment_id: e.theta_over_pi for e in scan_series()}
        assert by_id["scanblue139"] == by_id["scanblue137"] == pytest.approx(0.35)

    def test_theta_property(self):
        e = scan_series()[2]
        assert e.theta == pytest.approx(-0.90 * np.pi)
        assert theta_for("scanblue112") == pytest.approx(-0.90 * np.pi)

    def test_truncation(self):
        assert len(scan_series(3)) == 3
        with pytest.raises(InvalidInputError):
            scan_series(0)
        with pytest.raises(InvalidInputError):
            scan_series(42)

    def test_unknown_id(self):
        with pytest.raises(InvalidInputError):
            theta_for("scanblue138")

    def test_geometries_build(self):
        for e in scan_series():
            g = e.geometry()
            assert g.alice_ops.shape == (2, 2, 2, 2)
