import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twisty import geometry as geo
from twisty import observations as ob
from twisty.geometry import FlowSpec, KleinParams, Manifold, ManifoldPoint
from twisty.observations import FourierSupport

rng = np.random.default_rng(11)


def lattice_brute_force(vectors, box=6):
    """Does the integer span of ``vectors`` (coefficients in [-box, box]) hit e1 and e2?"""
    V = np.asarray(vectors, dtype=np.int64).reshape(-1, 2)
    coeffs = np.array(list(itertools.product(range(-box, box + 1), repeat=len(V))), dtype=np.int64)
    reach = {tuple(r) for r in coeffs @ V}
    return (1, 0) in reach and (0, 1) in reach


def gcd_all(values):
    g = 0
    for v in values:
        g = math.gcd(g, int(v))
    return g


def determinantal_divisors(A):
    """(d1, d2) from gcds of 1x1 and 2x2 minors: an independent SNF oracle for two columns."""
    A = np.asarray(A, dtype=np.int64)
    g1 = gcd_all(A.ravel())
    minors = [A[i, 0] * A[j, 1] - A[i, 1] * A[j, 0] for i, j in itertools.combinations(range(len(A)), 2)]
    g2 = gcd_all(minors)
    if g1 == 0:
        return (0, 0)
    return (g1, g2 // g1 if g2 else 0)


# --- evaluation --------------------------------------------------------------

def test_distance_observation_zero_at_x_hat():
    for m, x in [("torus", (6.0, math.pi)), ("klein", (4.5, 2.5)), ("sphere", (1.0, math.pi / 4)),
                 ("rp2", (1.0, math.pi / 4)), ("genus2", (0.3, 0.2))]:
        G = ob.DistanceTo(m, x)
        assert ob.observe(G, ManifoldPoint(Manifold.parse(m), x)) == pytest.approx(0.0, abs=1e-7)


def test_cos_cos_support_evaluates_to_cos_plus_cos():
    G = ob.Fourier(ob.cos_cos_support())
    P = rng.uniform(-10, 10, size=(1000, 2))
    assert np.allclose(G(P), np.cos(P[:, 0]) + np.cos(P[:, 1]), atol=1e-14)


def test_klein_fourier_boundary_values():
    G = ob.Fourier(ob.klein_fourier_support())
    x = np.linspace(0, 2 * math.pi, 257)
    assert np.allclose(G(np.c_[x, np.zeros_like(x)]), np.cos(2 * x) + 1, atol=1e-14)
    assert np.allclose(G(np.c_[x, np.full_like(x, math.pi)]), np.cos(2 * x) - 1, atol=1e-14)
    P = rng.uniform(-10, 10, size=(1000, 2))
    want = np.cos(2 * P[:, 0]) + np.cos(P[:, 0]) * np.sin(P[:, 1]) + np.cos(P[:, 1])
    assert np.allclose(G(P), want, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4),
                          st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False)),
                min_size=1, max_size=6))
def test_fourier_evaluation_is_real(terms):
    d = {}
    for n, m, re, im in terms:
        c = complex(re, im) if (n, m) != (0, 0) else complex(re, 0)
        d[(n, m)] = d.get((n, m), 0) + c
        d[(-n, -m)] = d.get((-n, -m), 0) + c.conjugate()
    if all(v == 0 for v in d.values()):
        return
    S = FourierSupport(d)
    P = rng.uniform(-20, 20, size=(10_000, 2))
    z = np.zeros(len(P), dtype=complex)
    for (n, m), c in S.terms:
        z += c * np.exp(1j * (n * P[:, 0] + m * P[:, 1]))
    assert np.max(np.abs(z.imag)) < 1e-12 * max(1.0, np.abs(z.real).max())
    assert np.allclose(S.evaluate(P), z.real)


def test_non_conjugate_symmetric_support_rejected():
    with pytest.raises(ob.ObservationError):
        FourierSupport({(1, 0): 1.0})
    with pytest.raises(ob.ObservationError):
        FourierSupport({(1, 0): 1j, (-1, 0): 1j})


def test_kappa_invariance_of_klein_observations():
    P = rng.uniform(-10, 10, size=(10_000, 2))
    K = geo.kappa(P)
    for G in (ob.DistanceTo("klein", (4.5, 2.5), (1.0, 0.5)), ob.Fourier(ob.klein_fourier_support())):
        assert np.max(np.abs(G(P) - G(K))) < 1e-12
    assert ob.klein_fourier_support().is_kappa_invariant()
    assert not ob.cos_cos_support().is_kappa_invariant()


def test_records_round_trip():
    S = ob.klein_fourier_support()
    assert FourierSupport.from_records(S.to_records()) == S


def test_observe_trajectory_examples():
    flow = FlowSpec("torus", (math.sqrt(2), 1.0), 0.01)
    tr = geo.flow_trajectory(flow, (0.0, 0.0), 2000)
    ts = ob.observe_trajectory(ob.Fourier(ob.cos_cos_support()), tr)
    t = tr.times
    assert np.allclose(ts.values, np.cos(math.sqrt(2) * t) + np.cos(t), atol=1e-9)
    assert ts.dt == 0.01 and ts.t0 == 0.0
    ts = ob.observe_trajectory(ob.Constant(2.5), tr)
    assert np.all(ts.values == 2.5)


def test_sphere_series_matches_helix_formula():
    flow = FlowSpec("sphere", (1.0, 1e-3), 0.05)
    tr = geo.flow_trajectory(flow, (0.0, 0.05), 5000)
    x_hat = (1.0, math.pi / 4)
    ts = ob.observe_trajectory(ob.DistanceTo("sphere", x_hat), tr)
    t = tr.times
    phi, theta = t, 0.05 + 1e-3 * t  # the helix, written out
    cos_d = (np.sin(theta) * math.sin(x_hat[1]) * np.cos(phi - x_hat[0])
             + np.cos(theta) * math.cos(x_hat[1]))
    assert np.allclose(ts.values, np.arccos(np.clip(cos_d, -1, 1)), atol=1e-7)


def test_observe_manifold_mismatch():
    with pytest.raises(ob.ObservationError):
        ob.observe(ob.DistanceTo("torus", (0, 0)), ManifoldPoint(Manifold.KLEIN, (0, 0)))
    tr = geo.flow_trajectory(FlowSpec("sphere", (1, 0.01), 0.1), (0, 0.1), 5)
    with pytest.raises(ob.ObservationError):
        ob.observe_trajectory(ob.Fourier(ob.cos_cos_support()), tr)


# --- lattice generation ---------------------------------------------------------

TRUTH_TABLE = [
    ([(1, 0), (0, 1)], True, (1, 1)),
    ([(1, 0), (0, 1)], True, (1, 1)),  # cos x + cos y
    ([(2, 0), (0, 2)], False, (2, 2)),
    ([(2, 0), (1, 1), (1, -1), (0, 1)], True, (1, 1)),
]


@pytest.mark.parametrize("vectors,good,diag", TRUTH_TABLE)
def test_fourier_support_truth_table(vectors, good, diag):
    S = FourierSupport.from_vectors(vectors)
    report = ob.fourier_support_generates(S)
    assert report.good is good
    assert tuple(report.details["snf_diagonal"]) == diag


def test_cos_cos_support_is_good():
    assert ob.fourier_support_generates(ob.cos_cos_support()).verdict == "Good"


def test_empty_support_is_an_error():
    with pytest.raises(ob.ObservationError):
        ob.fourier_support_generates(FourierSupport({}))


def test_snf_matches_determinantal_divisors():
    for _ in range(300):
        A = rng.integers(-5, 6, size=(int(rng.integers(1, 6)), 2))
        got = tuple(ob.smith_normal_form(A)) + (0, 0)
        assert got[:2] == determinantal_divisors(A)


def test_generation_agrees_with_brute_force_enumeration():
    r = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(200):
        k = int(r.integers(1, 4))
        V = r.integers(-3, 4, size=(k, 2))
        V = [tuple(v) for v in V if tuple(v) != (0, 0)]
        if not V:
            V = [(1, 1)]
        report = ob.fourier_support_generates(FourierSupport.from_vectors(V))
        mismatches += report.good != lattice_brute_force(V)
    assert mismatches == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=4),
       st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_adding_a_vector_keeps_good(vectors, extra):
    vectors = [v for v in vectors if v != (0, 0)] or [(1, 0)]
    if not ob.fourier_support_generates(FourierSupport.from_vectors(vectors)).good:
        return
    if extra == (0, 0):
        extra = (1, 1)
    assert ob.fourier_support_generates(FourierSupport.from_vectors(vectors + [extra])).good


# --- Klein check ------------------------------------------------------------------

def test_klein_check_good_support():
    report = ob.klein_observation_check(ob.klein_fourier_support())
    assert report.verdict == "Good", report.reasons


def test_klein_check_constant_boundaries_bad():
    report = ob.klein_observation_check(ob.klein_fourier_support(with_cos2x=False))
    assert report.verdict == "Bad"


def test_klein_check_index_two_sublattice_bad():
    report = ob.klein_observation_check(FourierSupport.from_vectors([(2, 0), (0, 1)]))
    assert report.verdict == "Bad"
    assert tuple(report.details["snf_diagonal"]) == (1, 2)


def test_klein_check_shifted_boundaries_bad():
    # G = cos 2x cos y - cos x sin y generates Z^2, but its boundary curves
    # cos 2x (y = 0) and -cos 2x (y = pi) differ by the shift x -> x + pi/2
    S = FourierSupport({(2, 1): 0.25, (2, -1): 0.25, (-2, -1): 0.25, (-2, 1): 0.25,
                        (1, 1): 0.25j, (1, -1): -0.25j, (-1, -1): -0.25j, (-1, 1): 0.25j})
    assert S.is_kappa_invariant()
    assert ob.fourier_support_generates(S).good
    report = ob.klein_observation_check(S)
    assert report.verdict == "Bad"


def test_klein_check_rejects_non_invariant_support():
    with pytest.raises(ob.ObservationError):
        ob.klein_observation_check(ob.cos_cos_support())


# --- diagnostics ---------------------------------------------------------------------

def test_takens_rank_full_on_torus():
    flow = FlowSpec("torus", (math.sqrt(2), 1.0), 0.05)
    pts = rng.uniform(0, 2 * math.pi, size=(50, 2))
    rep = ob.takens_rank_diagnostic(ob.Fourier(ob.cos_cos_support()), flow, pts, 10, 1.0)
    assert rep["n_deficient"] == 0


def test_takens_rank_constant_is_zero():
    flow = FlowSpec("torus", (math.sqrt(2), 1.0), 0.05)
    rep = ob.takens_rank_diagnostic(ob.Constant(1.0), flow, [(0.1, 0.2), (1, 2)], 4, 0.5)
    assert np.all(rep["sigma"][:, 0] == 0) and rep["n_deficient"] == 2


def test_takens_tau_must_be_multiple_of_dt():
    flow = FlowSpec("torus", (1, 1), 0.05)
    with pytest.raises(ob.ObservationError):
        ob.takens_rank_diagnostic(ob.Constant(1.0), flow, [(0, 0)], 4, 0.07)


def test_curve_separation_rejects_equal_points():
    flow = FlowSpec("klein", (1.0, 0.05), 0.05)
    G = ob.DistanceTo("klein", (math.pi, 0.0))
    with pytest.raises(ob.ObservationError):
        ob.curve_separation_diagnostic(G, flow, [((1.0, 1.0), (1.0, 1.0))], 10)


def test_curve_separation_klein_degeneracy():
    flow = FlowSpec("klein", (1.0, 0.05), 0.05)
    G = ob.DistanceTo("klein", (math.pi, 0.0))
    p = (0.7, 1.3)
    q = (0.7 + math.pi, 1.3)
    rep = ob.curve_separation_diagnostic(G, flow, [(p, q)], 500)
    assert rep["n_indistinguishable"] == 1
    rep = ob.curve_separation_diagnostic(ob.DistanceTo("klein", (4.5, 2.5), (1, 0.5)), flow, [(p, q)], 500)
    assert rep["n_indistinguishable"] == 0


def test_curve_separation_orbit_shift_distinguishable():
    flow = FlowSpec("torus", (math.sqrt(2), 1.0), 0.05)
    G = ob.Fourier(ob.cos_cos_support())
    p = (0.2, 0.4)
    q = tuple(geo.advance_lift(flow, np.array(p), 7)[0])
    assert ob.curve_separation_diagnostic(G, flow, [(p, q)], 300)["n_indistinguishable"] == 0
