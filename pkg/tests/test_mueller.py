import numpy as np
import pytest

from polartof import mueller as M

RNG = np.random.default_rng(7)


# ---------------------------------------------------------------------------
# Rotation and element matrices
# ---------------------------------------------------------------------------

def test_rotation_zero_is_identity():
    assert np.allclose(M.rotation_mueller(0.0), np.eye(4), atol=1e-15)


def test_rotation_pi_is_identity():
    assert np.allclose(M.rotation_mueller(np.pi), np.eye(4), atol=1e-12)


def test_rotation_quarter_turn_rows():
    r = np.asarray(M.rotation_mueller(np.pi / 4))
    assert np.allclose(r[1], [0, 0, 1, 0], atol=1e-12)
    assert np.allclose(r[2], [0, -1, 0, 0], atol=1e-12)


def test_rotation_additivity():
    for a, b in RNG.uniform(-np.pi, np.pi, size=(100, 2)):
        lhs = np.asarray(M.rotation_mueller(a)) @ np.asarray(
            M.rotation_mueller(b))
        rhs = np.asarray(M.rotation_mueller(a + b))
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_lp_on_unpolarized():
    out = np.asarray(M.element_mueller("lp", 0.0)) @ np.array([1, 0, 0, 0.0])
    assert np.allclose(out, [0.5, 0.5, 0, 0], atol=1e-15)


def test_hwp_axis_aligned():
    assert np.allclose(M.element_mueller("hwp", 0.0),
                       np.diag([1.0, 1.0, -1.0, -1.0]), atol=1e-15)


def test_hwp_rotates_linear_by_45deg():
    out = np.asarray(M.element_mueller("hwp", np.pi / 8)) \
        @ np.array([1, 1, 0, 0.0])
    assert np.allclose(out, [1, 0, 1, 0], atol=1e-12)


def test_qwp_circular_to_linear():
    out = np.asarray(M.element_mueller("qwp", 0.0)) @ np.array([1, 0, 0, 1.0])
    assert abs(out[0] - 1.0) < 1e-15
    assert abs(out[3]) < 1e-15
    assert abs(abs(out[2]) - 1.0) < 1e-15


def test_lp_idempotent():
    # L = 0.5 v v^T with v^T v = 2, so L is exactly idempotent
    for theta in RNG.uniform(0, np.pi, size=20):
        lp = np.asarray(M.element_mueller("lp", theta))
        assert np.allclose(lp @ lp, lp, atol=1e-12)


def test_hwp_squared_identity():
    for theta in RNG.uniform(0, np.pi, size=20):
        h = np.asarray(M.element_mueller("hwp", theta))
        assert np.allclose(h @ h, np.eye(4), atol=1e-12)


def test_qwp_fourth_power_identity():
    for theta in RNG.uniform(0, np.pi, size=20):
        q = np.asarray(M.element_mueller("qwp", theta))
        assert np.allclose(q @ q @ q @ q, np.eye(4), atol=1e-12)


# ---------------------------------------------------------------------------
# Fresnel
# ---------------------------------------------------------------------------

def test_fresnel_reflect_normal_incidence():
    fr = np.asarray(M.fresnel_mueller("reflect", 1.5, 0.0))
    assert abs(fr[0, 0] - 0.04) < 1e-12


def test_fresnel_transmit_normal_incidence_energy():
    ft = np.asarray(M.fresnel_mueller("transmit", 1.5, 0.0))
    assert abs(ft[0, 0] - 0.96) < 1e-12


def test_fresnel_energy_accounting():
    for theta in np.linspace(0.0, 1.4, 15):
        r = np.asarray(M.fresnel_mueller("reflect", 1.5, theta))[0, 0]
        t = np.asarray(M.fresnel_mueller("transmit", 1.5, theta))[0, 0]
        assert abs(r + t - 1.0) < 1e-12


def test_fresnel_brewster_fully_polarizes():
    brewster = np.arctan(1.5)
    fr = np.asarray(M.fresnel_mueller("reflect", 1.5, brewster))
    out = fr @ np.array([1, 0, 0, 0.0])
    assert float(M.degree_of_polarization(out)) > 1.0 - 1e-9


def test_fresnel_reflect_normal_is_block_diagonal():
    fr = np.asarray(M.fresnel_mueller("reflect", 1.5, 0.0))
    off = fr - np.diag(np.diag(fr))
    assert np.max(np.abs(off)) < 1e-12


def test_fresnel_invalid_angle():
    with pytest.raises(M.InvalidAngle):
        M.fresnel_mueller("reflect", 1.5, np.pi / 2)


def test_fresnel_total_internal_reflection():
    crit = np.arcsin(1.0 / 1.5)
    with pytest.raises(M.TotalInternalReflection):
        M.fresnel_mueller("transmit", 1.0 / 1.5, crit + 0.05)


def test_fresnel_outputs_physical():
    for eta in (1.2, 1.5, 2.0):
        for theta in np.linspace(0.0, 1.5, 12):
            fr = np.asarray(M.fresnel_mueller("reflect", eta, theta))
            assert M.is_physical(fr, 1e-9)


# ---------------------------------------------------------------------------
# Stokes helpers
# ---------------------------------------------------------------------------

def test_dop_values():
    assert abs(float(M.degree_of_polarization(
        np.array([1, 1, 0, 0.0]))) - 1.0) < 1e-15
    assert float(M.degree_of_polarization(np.array([1, 0, 0, 0.0]))) == 0.0
    got = float(M.degree_of_polarization(np.array([2, 1, 1, 0.0])))
    assert abs(got - np.sqrt(2) / 2) < 1e-12


def test_dop_zero_intensity():
    with pytest.raises(M.ZeroIntensity):
        M.degree_of_polarization(np.array([0.0, 0, 0, 0]))


def test_poincare_states_unit():
    states = np.asarray(M.poincare_uniform_states(32))
    assert states.shape == (32, 4)
    assert np.allclose(states[:, 0], 1.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(states[:, 1:], axis=1), 1.0,
                       atol=1e-12)


def test_poincare_single_state():
    s = np.asarray(M.poincare_uniform_states(1))
    assert abs(float(M.degree_of_polarization(s[0])) - 1.0) < 1e-12


def test_poincare_nearest_neighbor_spread():
    pts = np.asarray(M.poincare_uniform_states(100))[:, 1:]
    cos = np.clip(pts @ pts.T, -1.0, 1.0)
    np.fill_diagonal(cos, -1.0)
    nn = np.arccos(np.max(cos, axis=1))
    cv = np.std(nn) / np.mean(nn)
    assert cv < 0.25


def test_poincare_deterministic():
    a = np.asarray(M.poincare_uniform_states(17))
    b = np.asarray(M.poincare_uniform_states(17))
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# Coordinate conversion
# ---------------------------------------------------------------------------

def _geom(omega_i, omega_o, n):
    return M.LocalGeometry(np.asarray(omega_i, float),
                           np.asarray(omega_o, float),
                           np.asarray(n, float))


def test_conversion_coplanar_identity():
    # halfway vector, normal, and propagation all in the x-z plane
    wi = np.array([np.sin(0.3), 0.0, np.cos(0.3)])
    wo = np.array([-np.sin(0.3), 0.0, np.cos(0.3)])
    geom = _geom(wi, wo, [0.0, 0.0, 1.0])
    conv = np.asarray(M.coordinate_conversion(geom, "incident_to_normal"))
    assert np.allclose(conv, np.eye(4), atol=1e-12)


def test_conversion_inverse_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        wi = rng.normal(size=3)
        wi /= np.linalg.norm(wi)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        if abs(np.dot(wi, n)) < 0.1:
            continue
        if np.dot(wi, n) < 0:
            wi = -wi
        geom = _geom(wi, wi, n)
        conv = np.asarray(M.coordinate_conversion(geom,
                                                  "incident_to_normal"))
        s = np.array([1.0, 0.3, -0.2, 0.1])
        back = conv.T @ (conv @ s)  # R(-phi) = R(phi)^T for this family
        assert np.allclose(back, s, atol=1e-12)


def test_conversion_coaxial_matches_rotation():
    # coaxial: the halfway frame degenerates to the lab frame; the
    # conversion must equal rotation_mueller of the measured frame angle
    w = np.array([0.2, -0.3, 0.93])
    w /= np.linalg.norm(w)
    n = np.array([0.1, 0.25, 0.96])
    n /= np.linalg.norm(n)
    geom = M.LocalGeometry.coaxial(w, n)
    conv = np.asarray(M.coordinate_conversion(geom, "incident_to_normal"))
    phi = M.frame_rotation_angle(-geom.omega_i, geom.h, n)
    assert np.allclose(conv, np.asarray(M.rotation_mueller(phi)), atol=1e-12)


def test_degenerate_halfway_raises():
    geom = _geom([0, 0, 1.0], [0, 0, -1.0], [0, 0, 1.0])
    with pytest.raises(M.DegenerateFrame):
        _ = geom.h


# ---------------------------------------------------------------------------
# Physicality oracle
# ---------------------------------------------------------------------------

def test_is_physical_identity():
    assert M.is_physical(np.eye(4), 1e-9)


def test_is_physical_rejects_circular_amplifier():
    assert not M.is_physical(np.diag([1.0, 1.0, 1.0, 1.5]), 1e-9)


def test_physical_outputs_have_dop_below_one():
    states = np.asarray(M.poincare_uniform_states(16))
    mats = [np.asarray(M.element_mueller(k, t))
            for k in ("lp", "hwp", "qwp")
            for t in np.linspace(0, np.pi, 7)]
    mats += [np.asarray(M.fresnel_mueller("reflect", 1.5, t))
             for t in np.linspace(0, 1.4, 7)]
    for mat in mats:
        out = states @ mat.T
        ok = out[:, 0] > 1e-12
        dop = np.linalg.norm(out[ok, 1:], axis=1) / out[ok, 0]
        assert np.all(dop <= 1.0 + 1e-9)
