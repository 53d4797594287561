import dataclasses

import numpy as np
import pytest

from achgjms.background import (
    BuildError, ChartSpec, build_background_from_chart, cartan_tensor, constant_background,
    heisenberg, heisenberg_chart, jet_table, obstruction_density, structure_residuals,
    sublaplacian, torus_chart, tw_derivative,
)
from achgjms.series import QI

PERTURBED = torus_chart("0.05*sin(x) + 0.03*cos(y + t)", "0.04*cos(x)")


@pytest.fixture(scope="module")
def hgrid():
    return build_background_from_chart(heisenberg_chart(), (12, 12, 1), derivatives="symbolic")


@pytest.fixture(scope="module")
def pgrid():
    return build_background_from_chart(PERTURBED, (16, 16, 16))


def test_heisenberg_constant_model_is_flat():
    bg = heisenberg()
    assert all(v == 0 for v in structure_residuals(bg).values())
    assert cartan_tensor(bg).data == QI(0)
    assert obstruction_density(bg).data == QI(0)
    assert tw_derivative(bg, bg.a11, "11", "0").data == QI(0)
    assert tw_derivative(bg, bg.scal, "", "1").data == QI(0)


def test_heisenberg_chart_has_vanishing_curvature_and_torsion(hgrid):
    assert np.abs(hgrid.scal).max() < 1e-12
    assert np.abs(hgrid.a11).max() < 1e-12
    assert max(structure_residuals(hgrid).values()) < 1e-10


def test_contact_failure_is_rejected():
    spec = ChartSpec((2 * np.pi,) * 3, ("0", "0", "1"), ("1", "I", "0"))
    with pytest.raises(BuildError, match="contact"):
        build_background_from_chart(spec, (4, 4, 4))


def test_non_tangent_generator_is_rejected():
    spec = ChartSpec((2 * np.pi,) * 3, ("-2*y", "2*x", "1"), ("1/2", "-I/2", "1"))
    with pytest.raises(BuildError):
        build_background_from_chart(spec, (4, 4, 1), derivatives="symbolic")


def test_perturbed_grid_structure_residuals(pgrid):
    assert max(structure_residuals(pgrid).values()) <= 1e-10
    assert pgrid.info["imag_scal"] < 1e-10


def test_spectral_convergence_under_refinement():
    coarse = max(structure_residuals(build_background_from_chart(PERTURBED, (8, 8, 8),
                                                                 residual_tol=1.0)).values())
    fine = max(structure_residuals(build_background_from_chart(PERTURBED, (16, 16, 16))).values())
    assert fine < coarse / 10


def test_corrupted_connection_is_flagged(pgrid):
    bad = dataclasses.replace(pgrid, omega=pgrid.omega * np.array([1.0, 1.02, 1.02])[:, None, None, None])
    rep = structure_residuals(bad)
    assert rep["dtheta1"] > 1e-4


def test_torsion_commutator_on_scalars(pgrid):
    x, y, t = pgrid.grid.coords
    f = np.sin(x) * np.cos(y - t) + 0j
    f1 = tw_derivative(pgrid, f, "", "1")
    fb = tw_derivative(pgrid, f, "", "b")
    # f_{,1 1bar} - f_{,1bar 1} = i f_{,0}
    lhs = tw_derivative(pgrid, f1, "1", "b").data - tw_derivative(pgrid, fb, "b", "1").data
    rhs = 1j * tw_derivative(pgrid, f, "", "0").data
    assert np.abs(lhs - rhs).max() < 1e-9


def test_conjugation_covariance(pgrid):
    x, y, t = pgrid.grid.coords
    f = np.sin(x + 2 * y) + 0.5j * np.cos(t)
    a = tw_derivative(pgrid, f, "", "1").data
    b = tw_derivative(pgrid, np.conjugate(f), "", "b").data
    assert np.abs(np.conjugate(a) - b).max() < 1e-12


def test_cartan_tensor_without_torsion(hgrid):
    # the chart has h = 2, so Z_1 = ((d_x - i d_y)/2 + (...) d_t) / sqrt(2) and
    # Z_1 Z_1 sin(x) = -sin(x)/8
    x = hgrid.grid.coords[0]
    bg = dataclasses.replace(hgrid, scal=np.sin(x) + 0j)
    assert np.abs(cartan_tensor(bg).data - (-np.sin(x) / 48)).max() < 1e-12


def test_obstruction_is_real_on_perturbed_grid():
    bg = build_background_from_chart(torus_chart("0.01*sin(x)", "0.01*cos(x)"), (16, 16, 16))
    rep = {}
    O = obstruction_density(bg, rep)
    assert rep["imag_defect"] <= 1e-10
    assert np.abs(O.data).max() > 1e-6


@pytest.mark.parametrize("s,a", [(1, 0), (3, QI(1, 2)), (-2, QI(0, 1))])
def test_constant_model_invariants(s, a):
    bg = constant_background(s, a)
    a, s = QI(a) if not isinstance(a, QI) else a, QI(s)
    assert all(v == 0 for v in structure_residuals(bg).values())
    # Q_11 = (i/2) s A - A_{11,0} with A_{11,0} = 2 i s A on the homogeneous model
    assert tw_derivative(bg, bg.a11, "11", "0").data == QI(0, 2) * s * a
    assert cartan_tensor(bg).data == QI(0, -3) * s * a / 2
    assert obstruction_density(bg).data == QI(-3) * s * a.abs2() / 2


def test_jets_are_checked_not_trusted():
    s, a = QI(3), QI(1, 2)
    good = {"Scal,1": 0, "A11,0": QI(0, 2) * s * a, "Abb,0": (QI(0, 2) * s * a).conjugate()}
    constant_background(s, a, jets=good)
    with pytest.raises(BuildError):
        constant_background(s, a, jets={"A11,0": QI(1)})
    with pytest.raises(BuildError):
        constant_background(QI(1, 1))


def test_jet_table_depth_and_conjugation():
    table = jet_table(constant_background(2, QI(1, -1)), 2)
    assert not table.conjugation_defect()
    assert table["Scal,b1"] == QI(0)
    with pytest.raises(KeyError):
        table["A11,011"]


def test_bad_direction_rejected():
    with pytest.raises(ValueError):
        tw_derivative(heisenberg(), heisenberg().scal, "", "2")


def test_sublaplacian_on_heisenberg_chart(hgrid):
    x, y, _ = hgrid.grid.coords
    f = np.cos(2 * x) * np.sin(y) + 0j
    want = -0.25 * (-4 - 1) * f
    assert np.abs(sublaplacian(hgrid, f).data - want).max() < 1e-12
