import cmath
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from photonlink.fock import (
    PERFECT_PNR,
    PERFECT_THRESHOLD,
    CutoffError,
    DetectorKind,
    DetectorModel,
    FockState,
    ZeroProbabilityError,
    apply_beam_splitter,
    make_state,
    measure_threshold,
    outcome_probability,
    photon_number_distribution,
    project_number,
    superpose,
)

SQRT_HALF = math.sqrt(0.5)


def symbolic_splitter(na, nb, t):
    """Independent oracle: expand (t a + i r b)^na (i r a + t b)^nb / sqrt(na! nb!) with sympy."""
    a, b = sp.symbols("a b", commutative=True)
    ts = sp.nsimplify(t) if isinstance(t, float) else t
    r = sp.sqrt(1 - ts**2)
    poly = sp.expand((ts * a + sp.I * r * b) ** na * (sp.I * r * a + ts * b) ** nb)
    poly = sp.Poly(poly, a, b)
    out = {}
    for (ma, mb), coeff in poly.terms():
        amp = coeff * sp.sqrt(sp.factorial(ma) * sp.factorial(mb)) / sp.sqrt(sp.factorial(na) * sp.factorial(nb))
        out[(ma, mb)] = complex(sp.N(amp, 30))
    return out


class TestMakeState:
    def test_basis_state(self):
        s = make_state(3, [0, 1, 0])
        assert s.amplitudes == {(0, 1, 0): 1.0}
        assert s.norm_squared() == 1.0

    def test_two_photons_at_cutoff(self):
        assert make_state(1, [2], cutoff=2).amplitude([2]) == 1.0

    def test_over_cutoff(self):
        with pytest.raises(CutoffError):
            make_state(2, [3, 0], cutoff=2)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            make_state(2, [1])

    def test_prune_drops_tiny_amplitudes(self):
        s = FockState(1, 2, {(0,): 1.0, (1,): 1e-17})
        assert (1,) not in s.amplitudes


class TestBeamSplitter:
    def test_single_photon(self):
        t = 0.6
        out = apply_beam_splitter(make_state(2, [1, 0]), 0, 1, t)
        assert out.amplitude([1, 0]) == pytest.approx(t, abs=1e-15)
        assert out.amplitude([0, 1]) == pytest.approx(1j * 0.8, abs=1e-15)

    def test_hong_ou_mandel(self):
        out = apply_beam_splitter(make_state(2, [1, 1]), 0, 1, SQRT_HALF)
        assert abs(out.amplitude([1, 1])) < 1e-12
        assert out.amplitude([2, 0]) == pytest.approx(1j * SQRT_HALF, abs=1e-12)
        assert out.amplitude([0, 2]) == pytest.approx(1j * SQRT_HALF, abs=1e-12)

    def test_identity_at_full_transmission(self):
        s = superpose({(1, 0, 1): 0.3, (0, 1, 1): 0.4j, (0, 0, 0): 0.5})
        out = apply_beam_splitter(s, 0, 1, 1.0)
        for occ, amp in s.amplitudes.items():
            assert out.amplitude(occ) == pytest.approx(amp, abs=1e-15)

    @pytest.mark.parametrize("na,nb", [(0, 1), (1, 0), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (3, 0)])
    @pytest.mark.parametrize("t", [0.0, 0.3, SQRT_HALF, 0.9, 1.0])
    def test_matches_symbolic_expansion(self, na, nb, t):
        expected = symbolic_splitter(na, nb, t)
        out = apply_beam_splitter(make_state(2, [na, nb], cutoff=3), 0, 1, t)
        for occ, amp in expected.items():
            assert out.amplitude(occ) == pytest.approx(amp, abs=1e-12)
        for occ in out.amplitudes:
            assert occ in expected

    def test_angles_add(self):
        # the splitter is exp(i theta sigma_x) with t = cos(theta)
        s = superpose({(1, 1): 0.6, (2, 0): 0.8j, (0, 1): 0.1})
        th1, th2 = 0.3, 0.5
        twice = apply_beam_splitter(apply_beam_splitter(s, 0, 1, math.cos(th1)), 0, 1, math.cos(th2))
        once = apply_beam_splitter(s, 0, 1, math.cos(th1 + th2))
        for occ in set(twice.amplitudes) | set(once.amplitudes):
            assert twice.amplitude(occ) == pytest.approx(once.amplitude(occ), abs=1e-12)

    def test_cutoff_overflow(self):
        with pytest.raises(CutoffError):
            apply_beam_splitter(make_state(2, [2, 1], cutoff=2), 0, 1, 0.5)

    @pytest.mark.parametrize("t", [-0.1, 1.1])
    def test_invalid_t(self, t):
        with pytest.raises(ValueError):
            apply_beam_splitter(make_state(2, [1, 0]), 0, 1, t)

    def test_same_mode(self):
        with pytest.raises(ValueError):
            apply_beam_splitter(make_state(2, [1, 0]), 1, 1, 0.5)


def _occupations(num_modes, cutoff):
    # total photons <= cutoff keeps every mode pair within the cutoff
    return [occ for occ in np.ndindex(*(cutoff + 1,) * num_modes) if sum(occ) <= cutoff]


@st.composite
def random_states(draw):
    occs = _occupations(3, 3)
    reals = draw(st.lists(st.floats(-1, 1), min_size=len(occs), max_size=len(occs)))
    imags = draw(st.lists(st.floats(-1, 1), min_size=len(occs), max_size=len(occs)))
    amps = {occ: complex(x, y) for occ, x, y in zip(occs, reals, imags)}
    if sum(abs(a) ** 2 for a in amps.values()) < 1e-6:
        amps[occs[0]] = 1.0
    return FockState(3, 3, amps).normalize()


@settings(max_examples=150, deadline=None)
@given(state=random_states(), t=st.floats(0, 1), modes=st.sampled_from([(0, 1), (1, 2), (2, 0)]))
def test_splitter_preserves_norm(state, t, modes):
    out = apply_beam_splitter(state, *modes, t)
    assert out.norm_squared() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(state=random_states(), mode=st.integers(0, 2))
def test_number_distribution_complete(state, mode):
    dist = photon_number_distribution(state, mode)
    assert math.fsum(dist.values()) == pytest.approx(1.0, abs=1e-12)
    for n, p in dist.items():
        if p > 0:
            prob, collapsed = project_number(state, mode, n)
            assert prob == pytest.approx(p, abs=1e-15)
            assert collapsed.norm_squared() == pytest.approx(1.0, abs=1e-12)
            assert all(occ[mode] == n for occ in collapsed.amplitudes)


class TestProjectNumber:
    def test_after_even_split(self):
        s = apply_beam_splitter(make_state(2, [1, 0]), 0, 1, SQRT_HALF)
        prob, collapsed = project_number(s, 0, 1)
        assert prob == pytest.approx(0.5, abs=1e-15)
        assert abs(collapsed.amplitude([1, 0])) == pytest.approx(1.0)

    def test_certain_outcome_leaves_state(self):
        prob, collapsed = project_number(make_state(2, [0, 1]), 0, 0)
        assert prob == 1.0
        assert collapsed.amplitudes == {(0, 1): 1.0}

    def test_zero_branch_raises(self):
        with pytest.raises(ZeroProbabilityError):
            project_number(make_state(2, [0, 1]), 0, 1)


class TestMeasureThreshold:
    def test_perfect_click(self):
        out = measure_threshold(make_state(1, [1]), [0], PERFECT_THRESHOLD)
        assert outcome_probability(out, [True]) == 1.0
        assert outcome_probability(out, [False]) == 0.0

    def test_half_efficiency(self):
        out = measure_threshold(make_state(1, [1]), [0], DetectorModel(DetectorKind.THRESHOLD, 0.5))
        assert outcome_probability(out, [True]) == pytest.approx(0.5)
        assert outcome_probability(out, [False]) == pytest.approx(0.5)

    def test_hom_clicks(self):
        hom = apply_beam_splitter(make_state(2, [1, 1]), 0, 1, SQRT_HALF)
        out = measure_threshold(hom, [0, 1], PERFECT_THRESHOLD)
        assert outcome_probability(out, [True, False]) == pytest.approx(0.5, abs=1e-12)
        assert outcome_probability(out, [False, True]) == pytest.approx(0.5, abs=1e-12)
        assert outcome_probability(out, [True, True]) == 0.0

    def test_dark_clicks(self):
        d = 0.1
        out = measure_threshold(make_state(1, [0]), [0], DetectorModel(DetectorKind.THRESHOLD, 1.0, d))
        assert outcome_probability(out, [True]) == pytest.approx(d)

    def test_pnr_dark_adds_a_count(self):
        out = measure_threshold(make_state(1, [1]), [0], DetectorModel(DetectorKind.PNR, 1.0, 0.2))
        assert outcome_probability(out, [1]) == pytest.approx(0.8)
        assert outcome_probability(out, [2]) == pytest.approx(0.2)

    def test_ensemble_holds_remaining_modes(self):
        s = apply_beam_splitter(make_state(2, [1, 0]), 0, 1, 0.6)
        out = measure_threshold(s, [1], PERFECT_PNR)
        by_pattern = {o.pattern.values: o for o in out}
        weight, rest = by_pattern[(0,)].ensemble[0]
        assert weight == pytest.approx(1.0)
        assert rest.num_modes == 1
        assert abs(rest.amplitude([1])) == pytest.approx(1.0)
        assert by_pattern[(0,)].probability == pytest.approx(0.36)

    def test_sampling_returns_one_outcome(self):
        hom = apply_beam_splitter(make_state(2, [1, 1]), 0, 1, SQRT_HALF)
        rng = np.random.default_rng(3)
        picks = [measure_threshold(hom, [0, 1], PERFECT_THRESHOLD, rng)[0].pattern.values for _ in range(200)]
        assert set(picks) == {(True, False), (False, True)}


@settings(max_examples=100, deadline=None)
@given(
    state=random_states(),
    eff=st.floats(0, 1),
    dark=st.floats(0, 0.9),
    kind=st.sampled_from(list(DetectorKind)),
)
def test_measurement_complete(state, eff, dark, kind):
    out = measure_threshold(state, [0, 2], DetectorModel(kind, eff, dark))
    assert math.fsum(o.probability for o in out) == pytest.approx(1.0, abs=1e-12)
    for o in out:
        assert math.fsum(w for w, _ in o.ensemble) == pytest.approx(1.0, abs=1e-12)
        assert len(o.pattern) == 2


@st.composite
def single_occupancy_states(draw):
    occs = [occ for occ in np.ndindex(2, 2, 3) if sum(occ) <= 3]
    phases = draw(st.lists(st.floats(0, 2 * math.pi), min_size=len(occs), max_size=len(occs)))
    mags = draw(st.lists(st.floats(0.01, 1), min_size=len(occs), max_size=len(occs)))
    return FockState(3, 3, {o: m * cmath.exp(1j * p) for o, m, p in zip(occs, mags, phases)}).normalize()


@settings(max_examples=60, deadline=None)
@given(state=single_occupancy_states(), eff=st.floats(0, 1))
def test_threshold_equals_pnr_below_two_photons(state, eff):
    pnr = measure_threshold(state, [0, 1], DetectorModel(DetectorKind.PNR, eff))
    thr = measure_threshold(state, [0, 1], DetectorModel(DetectorKind.THRESHOLD, eff))
    pnr_dist = {tuple(bool(v) for v in o.pattern.values): o.probability for o in pnr}
    thr_dist = {o.pattern.values: o.probability for o in thr}
    assert pnr_dist.keys() == thr_dist.keys()
    for key in pnr_dist:
        assert pnr_dist[key] == pytest.approx(thr_dist[key], abs=1e-12)
