import itertools

import pytest

from artifact.csscode import PauliKind, catalog
from artifact.f2core import BitVector, row_space_masks
from artifact.prepsynth import DangerSet, dangerous_errors, synth_prep
from artifact.verifsynth import (
    SynthesisInfeasible,
    VerificationLayer,
    check_coverage,
    enumerate_minimal_verifications,
    measurement_pool,
    synth_verification,
)


def danger_for(name):
    code = catalog(name)
    return code, dangerous_errors(synth_prep(code), code, PauliKind.X)


class TestOptima:
    def test_steane_single_weight3(self):
        code, ds = danger_for("steane")
        layer = synth_verification(code, ds)
        assert (layer.u, layer.v) == (1, 3)
        assert layer.measurements[0].support.support() == (1, 4, 6)
        assert layer.measurements[0].kind is PauliKind.Z

    def test_steane_both_covers_enumerated(self):
        code, ds = danger_for("steane")
        layers = enumerate_minimal_verifications(code, ds)
        got = {tuple(m.support.support() for m in l.measurements) for l in layers}
        assert got == {((1, 4, 6),), ((2, 4, 5),)}

    def test_surface9_unique_cover(self):
        code, ds = danger_for("surface9")
        layers = enumerate_minimal_verifications(code, ds)
        assert len(layers) == 1
        assert (layers[0].u, layers[0].v) == (1, 3)
        assert layers[0].measurements[0].support.support() == (0, 4, 5)

    def test_shor_needs_two_measurements(self):
        code, ds = danger_for("shor")
        layers = enumerate_minimal_verifications(code, ds, limit=100)
        assert (layers[0].u, layers[0].v) == (2, 5)
        assert len(layers) == 48
        assert tuple(m.support.support() for m in layers[0].measurements) == (
            (0, 2), (0, 3, 6),
        )

    def test_tetrahedral_four_covers(self):
        code, ds = danger_for("tetrahedral15")
        layers = enumerate_minimal_verifications(code, ds)
        assert (layers[0].u, layers[0].v) == (1, 3)
        got = [tuple(m.support.support() for m in l.measurements) for l in layers]
        assert got == [((4, 9, 14),), ((4, 10, 13),), ((5, 10, 12),), ((6, 9, 12),)]

    def test_prefer_callback_reorders(self):
        code, ds = danger_for("steane")
        # rank covers by largest first support index: flips the default pick
        layer = synth_verification(
            code, ds, prefer=lambda sups: tuple(-s.support()[0] for s in sups)
        )
        assert layer.measurements[0].support.support() == (2, 4, 5)


class TestWitnesses:
    @pytest.mark.parametrize("name", ["steane", "shor", "surface9", "tetrahedral15"])
    def test_certificates_reverify(self, name):
        code, ds = danger_for(name)
        layer = synth_verification(code, ds)
        assert len(layer.witnesses) == 2
        for w in layer.witnesses:
            assert w.reverify(), w.label

    def test_witness_labels_state_bounds(self):
        code, ds = danger_for("steane")
        layer = synth_verification(code, ds)
        labels = [w.label for w in layer.witnesses]
        assert labels == ["u=0 infeasible", "u=1 v=2 infeasible"]


class TestBruteForceEquivalence:
    def test_steane_single_cover_search_matches(self):
        code, ds = danger_for("steane")
        pool = [m for m in row_space_masks(measurement_pool(code, PauliKind.X)) if m]
        errors = ds.canonical_masks()
        covers = [
            m for m in pool if all((m & e).bit_count() % 2 == 1 for e in errors)
        ]
        best_w = min(m.bit_count() for m in covers)
        expected = {
            tuple(q for q in range(7) if (m >> q) & 1)
            for m in covers
            if m.bit_count() == best_w
        }
        layers = enumerate_minimal_verifications(code, ds)
        assert layers[0].u == 1 and layers[0].v == best_w
        got = {l.measurements[0].support.support() for l in layers}
        assert got == expected

    def test_shor_no_single_cover_exists(self):
        code, ds = danger_for("shor")
        pool = [m for m in row_space_masks(measurement_pool(code, PauliKind.X)) if m]
        errors = ds.canonical_masks()
        assert not any(
            all((m & e).bit_count() % 2 == 1 for e in errors) for m in pool
        )
        # matching the solver's conclusion that u=1 is unsat


class TestEdgeCases:
    def test_empty_danger_empty_layer(self):
        code = catalog("steane")
        empty = DangerSet(PauliKind.X, 1, code.reduction_group(PauliKind.X), ())
        layer = synth_verification(code, empty)
        assert layer.u == 0 and layer.v == 0 and not layer.measurements
        assert check_coverage(layer, empty)

    def test_infeasible_raises(self):
        code, ds = danger_for("shor")
        with pytest.raises(SynthesisInfeasible):
            synth_verification(code, ds, max_u=1)

    def test_pool_modes(self):
        code = catalog("steane")
        state = measurement_pool(code, PauliKind.X, "state")
        strict = measurement_pool(code, PauliKind.X, "code")
        assert state.nrows == strict.nrows + 1
        x_side = measurement_pool(code, PauliKind.Z)
        assert x_side == code.hx
        with pytest.raises(ValueError):
            measurement_pool(code, PauliKind.X, "other")


class TestCoverage:
    @pytest.mark.parametrize("name", ["steane", "shor", "surface9", "tetrahedral15"])
    def test_synthesized_layers_cover(self, name):
        code, ds = danger_for(name)
        for layer in enumerate_minimal_verifications(code, ds, limit=100):
            assert check_coverage(layer, ds)

    def test_dropping_a_measurement_breaks_cover(self):
        code, ds = danger_for("shor")
        layer = synth_verification(code, ds)
        crippled = VerificationLayer(
            layer.detects, layer.measurements[:1], 1, layer.measurements[0].support.weight(),
            layer.witnesses,
        )
        assert not check_coverage(crippled, ds)
