import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from masim.core import StructuralError
from masim.vulnerability.constructions import (
    aligned_cascade,
    identical_star,
    one_sensitive_star,
    orthogonal_cascade,
    shared_trigger_star,
    stretch_stage,
    trigger_mixture,
)
from masim.vulnerability.propagation import (
    MetricError,
    NormalizationError,
    Perturbation,
    PipelineStage,
    StarSystem,
    accuracy_metric,
    alignment_score,
    classify_propagation,
    displacement_metric,
    eval_cascade,
    eval_star,
    majority_aggregator,
    vulnerability,
)
from oracles import cascade_oracle, star_oracle

POINTS = [((x,), int(x > 0)) for x in range(-5, 5)]


def threshold(x):
    return int(x[0] > 0)


def shift_by(s):
    return Perturbation("input_space", lambda samples: [((x[0] + s,), y) for x, y in samples], s)


class TestVulnerability:
    def test_identity_is_exactly_zero(self):
        rep = vulnerability(threshold, accuracy_metric, POINTS, Perturbation.identity())
        assert rep.V == 0.0 and rep.metric_clean == rep.metric_perturbed

    def test_constant_classifier(self):
        assert vulnerability(lambda x: 1, accuracy_metric, POINTS, shift_by(2)).V == 0.0

    def test_threshold_shift_exhaustive(self):
        clean = sum(int(x > 0) == y for (x,), y in POINTS) / 10
        pert = sum(int(x + 2 > 0) == y for (x,), y in POINTS) / 10
        rep = vulnerability(threshold, accuracy_metric, POINTS, shift_by(2))
        assert rep.V == clean - pert

    def test_model_space_perturbation(self):
        flip = Perturbation("model_space", lambda f: (lambda x: 1 - f(x)))
        assert vulnerability(threshold, accuracy_metric, POINTS, flip).V == 1.0

    def test_negative_v_allowed(self):
        rep = vulnerability(lambda x: int(x[0] > 2), accuracy_metric, POINTS, shift_by(2))
        assert rep.V < 0

    def test_metric_failure_has_context(self):
        def nan_metric(system, samples):
            return float("nan")

        with pytest.raises(MetricError, match="clean"):
            vulnerability(threshold, nan_metric, POINTS, shift_by(1))

    @given(s=st.integers(-10, 10))
    def test_report_invariant(self, s):
        rep = vulnerability(threshold, accuracy_metric, POINTS, shift_by(s))
        assert rep.V == rep.metric_clean - rep.metric_perturbed


class TestClassify:
    def test_examples(self):
        assert classify_propagation(0.30, 0.46, 0.01) == "amplifies"
        assert classify_propagation(0.50, 0.40, 0.01) == "attenuates"
        assert classify_propagation(0.4, 0.4, 0.0) == "neutral"

    # dyadic grid keeps a + tol and b - tol exact
    @given(a=st.integers(-80, 80), b=st.integers(-80, 80), tol=st.integers(0, 8))
    def test_antisymmetric(self, a, b, tol):
        a, b, tol = a / 8, b / 8, tol / 8
        swap = {"amplifies": "attenuates", "attenuates": "amplifies", "neutral": "neutral"}
        assert classify_propagation(b, a, tol) == swap[classify_propagation(a, b, tol)]


class TestAlignment:
    def test_examples(self):
        assert alignment_score((1.0, 0.0), (1.0, 0.0)) == 1.0
        assert alignment_score((1.0, 0.0), (0.0, 1.0)) == 0.0
        assert alignment_score((0.6, 0.8), (1.0, 0.0)) == pytest.approx(0.6)

    def test_non_unit_rejected(self):
        with pytest.raises(NormalizationError):
            alignment_score((1.0, 1.0), (1.0, 0.0))
        with pytest.raises(NormalizationError):
            PipelineStage("g", lambda x: x, (0.5, 0.5))


class TestStar:
    @pytest.mark.parametrize("build,expected", [
        (shared_trigger_star, "amplifies"),
        (one_sensitive_star, "attenuates"),
        (identical_star, "neutral"),
    ])
    def test_constructions(self, build, expected):
        star, samples, delta = build()
        rep = eval_star(star, accuracy_metric, samples, delta)
        _, pert = delta.apply(star, samples)
        assert rep.metric_perturbed == star_oracle(star.branches, pert)
        best = max(accuracy_metric(g, pert) for g in star.branches)
        assert rep.baselines["max_branch_perturbed"] == best
        assert rep.classification == expected

    def test_one_sensitive_exact_numbers(self):
        rep = eval_star(*one_sensitive_star()[:1], accuracy_metric, *one_sensitive_star()[1:])
        assert rep.metric_perturbed == 1.0 and rep.baselines["max_branch_perturbed"] == 0.9

    def test_identical_branches_match_single(self):
        star, samples, delta = identical_star()
        rep = eval_star(star, accuracy_metric, samples, delta)
        assert rep.metric_perturbed == rep.baselines["branch0_perturbed"]

    def test_arity_mismatch(self):
        with pytest.raises(StructuralError):
            StarSystem((threshold, threshold), majority_aggregator, arity=3)

    def test_majority_ties_go_to_zero(self):
        assert majority_aggregator([1, 0]) == 0 and majority_aggregator([1, 1, 0]) == 1


class TestCascade:
    def _eval(self, stages, seed=5, n=1000):
        return eval_cascade(stages, displacement_metric, trigger_mixture(), n_samples=n,
                            rng=np.random.default_rng(seed))

    def test_aligned_amplifies(self):
        stages = aligned_cascade(2)
        rep = self._eval(stages)
        assert rep.classification == "amplifies"
        assert rep.metric_perturbed == pytest.approx(cascade_oracle(stages, trigger_mixture(), 1000, 5),
                                                     abs=1e-12)
        assert rep.baselines["first_stage_perturbed"] == pytest.approx(rep.metric_perturbed / 2, abs=1e-12)
        assert rep.alignments[0]["score"] == 1.0

    def test_orthogonal_attenuates(self):
        rep = self._eval(orthogonal_cascade())
        assert rep.classification == "attenuates"
        assert rep.metric_perturbed == pytest.approx(0.0, abs=1e-12)
        assert rep.alignments[0]["score"] == 0.0

    def test_v_increases_with_aligned_depth(self):
        v2, v3 = self._eval(aligned_cascade(2)).V, self._eval(aligned_cascade(3)).V
        assert 0 < v2 < v3

    def test_single_stage_reduces_to_vulnerability(self):
        stage = stretch_stage("g1")
        mix = trigger_mixture()
        clean, mixed, _ = mix.draw(500, np.random.default_rng(3))
        expect = vulnerability(stage, displacement_metric, clean, Perturbation("input_space", lambda _: mixed))
        rep = eval_cascade([stage], displacement_metric, mix, n_samples=500, rng=np.random.default_rng(3))
        assert (rep.metric_clean, rep.metric_perturbed, rep.V) == (
            expect.metric_clean, expect.metric_perturbed, expect.V)
        assert rep.classification == "neutral"

    def test_clean_metric_is_zero(self):
        assert self._eval(aligned_cascade(2)).metric_clean == 0.0

    def test_dimension_mismatch(self):
        bad = PipelineStage("g2", lambda x: x[:, :1], None, 2, 1)
        with pytest.raises(StructuralError):
            self._eval([bad, stretch_stage("g3")])
