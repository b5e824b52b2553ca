"""The reference solver is itself checked against closed-form hand
calculations written directly in these tests (einsum chains over the fixture
tables), so later solver-vs-oracle agreement rests on verified ground."""

import numpy as np
import pytest

from idvoi.model import (
    Cpt,
    Evidence,
    InfluenceDiagram,
    ObservationScenario,
    UtilityNode,
    Variable,
)
from idvoi.oracle import (
    OracleBudgetError,
    OracleError,
    oracle_meu,
    oracle_policy_value,
    oracle_posterior,
    oracle_voi,
)

from _corpus import make_staged_chain, make_weather_vendor, random_diagram


def _staged_chain_value_by_hand():
    """max_d1 sum_C max_d2 sum_{A,E} max_d3 sum_B of the staged chain."""
    d = make_staged_chain()
    pB = d.cpt_map["B"].values.reshape(2)
    pC = d.cpt_map["C"].values.reshape(2, 2)  # [d1, c]
    pA = d.cpt_map["A"].values.reshape(2, 2, 2)  # [c, d2, a]
    pE = d.cpt_map["E"].values.reshape(2, 2, 2)  # [a, b, e]
    U = d.utilities[0].values.reshape(2, 2)  # [d3, b]
    # per (a, e): unnormalized max over d3 of sum_b P(e|a,b) P(b) U(d3,b)
    w = np.einsum("abe,b->aeb", pE, pB)
    m = np.max(np.einsum("aeb,db->aed", w, U), axis=2)  # [a, e]
    inner = np.einsum("cta,ae->cte", pA, m).sum(axis=2)  # [c, d2]
    best2 = inner.max(axis=1)  # [c]
    val = np.einsum("dc,c->d", pC, best2)
    return float(val.max()), best2


class TestOracleMeu:
    def test_weather_vendor_baseline(self):
        d = make_weather_vendor()
        got = oracle_meu(d)
        # S=dry: max(80, 44) = 80; S=wet: max(30, 54) = 54
        assert abs(got.meu - (0.6 * 80 + 0.4 * 54)) < 1e-12
        assert abs(got.evidence_probability - 1.0) < 1e-12

    def test_weather_vendor_with_evidence(self):
        d = make_weather_vendor()
        got = oracle_meu(d, Evidence({"S": "dry"}))
        assert abs(got.meu - 80.0) < 1e-12
        assert abs(got.evidence_probability - 0.6) < 1e-12

    def test_weather_vendor_observing_the_forecast(self):
        d = make_weather_vendor()
        sc = ObservationScenario({"A": 0})
        got = oracle_meu(d, Evidence({"S": "dry"}), sc)
        # unnormalized: A=ps picks outdoor (0.72*100), A=pr picks indoor
        # (40*0.08 + 60*0.15); divide by P(S=dry)=0.6
        assert abs(got.meu - (72.0 + 12.2) / 0.6 * 0.6) < 1e-9
        assert abs(got.meu - 84.2) < 1e-9

    def test_staged_chain_matches_hand_chain(self):
        d = make_staged_chain()
        want, _ = _staged_chain_value_by_hand()
        got = oracle_meu(d)
        assert abs(got.meu - want) < 1e-9
        assert abs(got.evidence_probability - 1.0) < 1e-12

    def test_staged_chain_with_decision_prefix_evidence(self):
        d = make_staged_chain()
        _, best2 = _staged_chain_value_by_hand()
        got = oracle_meu(d, Evidence({"D_1": "d1_0", "C": "c0"}))
        assert abs(got.meu - best2[0]) < 1e-9
        assert abs(got.evidence_probability - 0.8) < 1e-12

    def test_free_decision_before_evidence_is_rejected(self):
        d = make_staged_chain()
        with pytest.raises(OracleError, match="D_1 precedes evidence"):
            oracle_meu(d, Evidence({"C": "c0"}))

    def test_impossible_evidence(self):
        d = InfluenceDiagram(
            [
                Variable("X", "chance", ("x0", "x1")),
                Variable("d", "decision", ("a0", "a1")),
            ],
            [Cpt("X", (), [1.0, 0.0])],
            [UtilityNode("U", ("d",), [1.0, 2.0])],
            ["d"],
            [["X"], []],
        )
        with pytest.raises(OracleError, match="impossible evidence"):
            oracle_meu(d, Evidence({"X": "x1"}))

    def test_budget_guard(self):
        variables = [
            Variable(f"X{i}", "chance", ("a", "b")) for i in range(21)
        ] + [Variable("d", "decision", ("a", "b"))]
        cpts = [Cpt(f"X{i}", (), [0.5, 0.5]) for i in range(21)]
        d = InfluenceDiagram(
            variables,
            cpts,
            [UtilityNode("U", ("d",), [0.0, 1.0])],
            ["d"],
            [[f"X{i}" for i in range(21)], []],
        )
        with pytest.raises(OracleBudgetError, match="budget"):
            oracle_meu(d)


class TestOraclePolicyValue:
    def test_fixed_policies_bracket_the_meu(self):
        d = make_weather_vendor()
        ev = Evidence({"S": "dry"})
        outdoor = oracle_policy_value(d, lambda name, past: 0, ev)
        indoor = oracle_policy_value(d, lambda name, past: 1, ev)
        assert abs(outdoor.meu - 80.0) < 1e-12
        assert abs(indoor.meu - 44.0) < 1e-12

    def test_no_policy_beats_the_meu(self):
        rng = np.random.default_rng(88)
        for _ in range(15):
            d = random_diagram(rng, max_chance=4)
            meu = oracle_meu(d).meu
            for _ in range(3):
                picks = {
                    name: int(rng.integers(d.card(name)))
                    for name in d.decision_order
                }
                value = oracle_policy_value(
                    d, lambda name, past, picks=picks: picks[name]
                ).meu
                assert value <= meu + 1e-9

    def test_past_contains_observed_history(self):
        d = make_staged_chain()
        seen = {}

        def decide(name, past):
            seen[name] = set(past)
            return 0

        oracle_policy_value(d, decide)
        assert seen["D_1"] == set()
        assert seen["D_2"] == {"D_1", "C"}
        assert seen["D_3"] == {"D_1", "C", "D_2", "A", "E"}


class TestOraclePosterior:
    def test_bayes_inversion_by_hand(self):
        d = make_weather_vendor()
        got = oracle_posterior(d, ("H",), Evidence({"A": "predicts_sun"}))
        np.testing.assert_allclose(got, [0.54 / 0.64, 0.10 / 0.64], rtol=1e-12)

    def test_joint_target(self):
        d = make_weather_vendor()
        got = oracle_posterior(d, ("S", "H"))
        np.testing.assert_allclose(
            got, [[0.48, 0.12], [0.12, 0.28]], rtol=1e-12
        )

    def test_free_decisions_are_uniform(self):
        d = make_staged_chain()
        got = oracle_posterior(d, ("C",))
        np.testing.assert_allclose(got, [0.55, 0.45], rtol=1e-12)

    def test_decision_evidence_is_respected(self):
        d = make_staged_chain()
        got = oracle_posterior(d, ("C",), Evidence({"D_1": "d1_1"}))
        np.testing.assert_allclose(got, [0.3, 0.7], rtol=1e-12)

    def test_impossible_evidence(self):
        d = InfluenceDiagram(
            [
                Variable("X", "chance", ("x0", "x1")),
                Variable("d", "decision", ("a0", "a1")),
            ],
            [Cpt("X", (), [1.0, 0.0])],
            [UtilityNode("U", ("d",), [1.0, 2.0])],
            ["d"],
            [["X"], []],
        )
        with pytest.raises(OracleError, match="impossible evidence"):
            oracle_posterior(d, ("d",), Evidence({"X": "x1"}))


class TestOracleVoi:
    def test_forecast_value_by_hand(self):
        d = make_weather_vendor()
        voi = oracle_voi(d, "d", "A", Evidence({"S": "dry"}))
        assert abs(voi - 4.2) < 1e-9

    def test_perfect_information_by_hand(self):
        d = make_weather_vendor()
        voi = oracle_voi(d, "d", "H", Evidence({"S": "dry"}))
        assert abs(voi - 12.0) < 1e-9

    def test_observation_never_hurts(self):
        d = make_weather_vendor()
        for candidate in ("A", "H"):
            for ev in (Evidence(), Evidence({"S": "wet"})):
                assert oracle_voi(d, "d", candidate, ev) >= -1e-9

    def test_moved_variable_changes_the_order(self):
        d = make_staged_chain()
        voi = oracle_voi(d, "D_1", "B")
        base = oracle_meu(d).meu
        moved = oracle_meu(d, scenario=ObservationScenario({"B": 0})).meu
        assert abs(voi - (moved - base)) < 1e-12
        assert voi >= -1e-9
