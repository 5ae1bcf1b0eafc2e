import csv

import numpy as np
import pytest

from semiscat.flow import PhasePoint, certify_nontrapping, hamiltonian, integrate_flow
from semiscat.potential import AngularProfile, HomogeneousTerm, PotentialExpansion

from .conftest import iso


def free():
    return PotentialExpansion((HomogeneousTerm(2.0, AngularProfile.zero()),))


@pytest.mark.parametrize("t_end", [5.0, -5.0, 0.0])
def test_free_flow_is_a_straight_line(t_end):
    z0, q0 = np.array([0.3, -1.0, 2.0]), np.array([1.0, 0.5, -0.25])
    rec = integrate_flow(free(), PhasePoint(z0, q0), t_end)
    assert rec.ok
    assert np.allclose(rec.z, z0 + 2 * rec.times[:, None] * q0, atol=1e-12)
    assert np.allclose(rec.zeta, q0)


def test_time_reversal(two_layer):
    start = PhasePoint([2.0, 1.0, -0.5], [0.1, -0.7, 0.4])
    fwd = integrate_flow(two_layer, start, 6.0, tol=1e-12)
    back = integrate_flow(two_layer, PhasePoint(fwd.z[-1], -fwd.zeta[-1]), 6.0, tol=1e-12)
    assert np.allclose(back.z[-1], start.z, atol=1e-8)


def test_energy_conserved(two_layer):
    rec = integrate_flow(two_layer, PhasePoint([1.5, 0.0, 0.2], [0.0, 0.9, 0.0]), 30.0, tol=1e-11)
    assert rec.energy_drift < 1e-9
    assert rec.energy[0] == pytest.approx(hamiltonian(two_layer, rec.z[0], rec.zeta[0]))


def test_trajectory_csv(two_layer, tmp_path):
    rec = integrate_flow(two_layer, PhasePoint([3.0, 0.0, 0.0], [0.0, 1.0, 0.0]), 1.0)
    rec.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "z0", "z1", "z2", "zeta0", "zeta1", "zeta2", "E"]
    assert len(rows) == len(rec.times) + 1


@pytest.mark.parametrize("bad", [dict(lam=0.0), dict(R=0.5), dict(N=0)])
def test_certifier_validates(bad):
    kw = dict(lam=1.0, R=2.0, T_max=5.0, N=2) | bad
    with pytest.raises(ValueError):
        certify_nontrapping(iso((2.0, 1.0)), **kw)


def test_certifier_reports_infeasible_energy():
    with pytest.raises(ValueError, match="no admissible sample"):
        certify_nontrapping(iso((2.0, 100.0), core=2.0), lam=0.01, R=1.0, T_max=1.0, N=1)


def test_certifier_seeded_and_repulsive_escapes():
    a = certify_nontrapping(iso((2.0, 1.0)), 1.0, 3.0, 30.0, 5, seed=3)
    b = certify_nontrapping(iso((2.0, 1.0)), 1.0, 3.0, 30.0, 5, seed=3)
    assert a.certified and a.to_dict() == b.to_dict()
    assert a.T_estimate < 30.0
