"""Brute-force reference solver.

Everything here enumerates full-joint configurations with plain loops over
the temporal sequence I_0, D_1, I_1, ..., D_n, I_n.  It shares no code with
the potential algebra or the junction-tree engine, so agreement between the
two is meaningful evidence of correctness rather than a tautology.  Budgets
are deliberately tight: this solver exists for cross-checking, not for use
on large diagrams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from idvoi.model import (
    DEFAULT_SCENARIO,
    Evidence,
    InfluenceDiagram,
    ModelError,
    ObservationScenario,
    check_evidence,
)

ORACLE_BUDGET = 1 << 20


class OracleError(ModelError):
    pass


class OracleBudgetError(OracleError):
    pass


@dataclass(frozen=True)
class OracleResult:
    meu: float
    evidence_probability: float


def _temporal_slots(
    diagram: InfluenceDiagram, scenario: ObservationScenario
) -> list[str]:
    n = diagram.n_decisions
    groups: list[list[str]] = [[] for _ in range(2 * n + 1)]
    for x in diagram.chance_names():
        groups[2 * scenario.placement(diagram, x)].append(x)
    for k, d in enumerate(diagram.decision_order, start=1):
        groups[2 * k - 1].append(d)
    return [name for group in groups for name in group]


def _check_budget(diagram: InfluenceDiagram, budget: int) -> None:
    size = 1
    for v in diagram.variables:
        size *= v.card
        if size > budget:
            raise OracleBudgetError(
                f"joint space exceeds the oracle budget of {budget} configurations"
            )


def _flat_index(cards: list[int], idxs: list[int]) -> int:
    acc = 0
    for card, idx in zip(cards, idxs):
        acc = acc * card + idx
    return acc


def _evidence_indices(diagram: InfluenceDiagram, evidence: Evidence) -> dict[str, int]:
    check_evidence(diagram, evidence)
    return {
        var: diagram.states(var).index(state) for var, state in evidence.items()
    }


def _triggers(diagram: InfluenceDiagram, slots: list[str]):
    """For each slot, the CPTs and utilities whose scope completes there."""
    pos = {name: t for t, name in enumerate(slots)}
    cpt_at: list[list] = [[] for _ in slots]
    util_at: list[list] = [[] for _ in slots]
    for cpt in diagram.cpts:
        t = max(pos[v] for v in cpt.parents + (cpt.child,))
        cpt_at[t].append(cpt)
    for node in diagram.utilities:
        if node.parents:
            t = max(pos[v] for v in node.parents)
            util_at[t].append(node)
    base_utility = sum(
        float(node.values.ravel()[0]) for node in diagram.utilities if not node.parents
    )
    return cpt_at, util_at, base_utility


def _table_value(diagram: InfluenceDiagram, parents, child, values, asg) -> float:
    names = list(parents) + ([child] if child else [])
    cards = [diagram.card(v) for v in names]
    idxs = [asg[v] for v in names]
    return float(values.ravel()[_flat_index(cards, idxs)])


def _assert_prefix_free(
    diagram: InfluenceDiagram, slots: list[str], pinned: dict[str, int]
) -> None:
    # Only chance evidence constrains the maximizations; a pinned decision is
    # a constraint on the policy, not an observation.
    last_evidence = max(
        (
            t
            for t, name in enumerate(slots)
            if name in pinned and diagram.is_chance(name)
        ),
        default=-1,
    )
    for t, name in enumerate(slots):
        if t < last_evidence and diagram.is_decision(name) and name not in pinned:
            raise OracleError(
                f"decision {name} precedes evidence but is not instantiated"
            )


def _run(
    diagram: InfluenceDiagram,
    evidence: Evidence | None,
    scenario: ObservationScenario | None,
    budget: int,
    decide,
):
    """Alternating sum/max sweep; ``decide`` overrides free decisions."""
    scenario = scenario or DEFAULT_SCENARIO
    _check_budget(diagram, budget)
    pinned = _evidence_indices(diagram, evidence or Evidence())
    slots = _temporal_slots(diagram, scenario)
    _assert_prefix_free(diagram, slots, pinned)
    cpt_at, util_at, base_utility = _triggers(diagram, slots)
    asg: dict[str, int] = {}

    def enter(t: int, mass: float, acc: float) -> tuple[float, float]:
        for cpt in cpt_at[t]:
            mass *= _table_value(diagram, cpt.parents, cpt.child, cpt.values, asg)
            if mass == 0.0:
                return 0.0, 0.0
        for node in util_at[t]:
            acc += _table_value(diagram, node.parents, None, node.values, asg)
        return mass, acc

    def rec(t: int, mass: float, acc: float) -> tuple[float, float]:
        if t == len(slots):
            return mass, mass * acc
        name = slots[t]
        card = diagram.card(name)
        if name in pinned:
            asg[name] = pinned[name]
            m2, a2 = enter(t, mass, acc)
            out = rec(t + 1, m2, a2) if m2 != 0.0 else (0.0, 0.0)
            del asg[name]
            return out
        if diagram.is_decision(name):
            if decide is not None:
                choice = int(decide(name, dict(asg)))
                if not 0 <= choice < card:
                    raise OracleError(f"policy chose action {choice} for {name}")
                asg[name] = choice
                m2, a2 = enter(t, mass, acc)
                out = rec(t + 1, m2, a2) if m2 != 0.0 else (0.0, 0.0)
                del asg[name]
                return out
            best: tuple[float, float] | None = None
            for j in range(card):
                asg[name] = j
                m2, a2 = enter(t, mass, acc)
                got = rec(t + 1, m2, a2) if m2 != 0.0 else (0.0, 0.0)
                del asg[name]
                if best is None or got[1] > best[1]:
                    best = got
            return best
        total_mass = 0.0
        total_vu = 0.0
        for j in range(card):
            asg[name] = j
            m2, a2 = enter(t, mass, acc)
            if m2 != 0.0:
                got = rec(t + 1, m2, a2)
                total_mass += got[0]
                total_vu += got[1]
            del asg[name]
        return total_mass, total_vu

    mass, vu = rec(0, 1.0, base_utility)
    if mass <= 0.0:
        raise OracleError("impossible evidence: observed configuration has zero mass")
    return OracleResult(meu=vu / mass, evidence_probability=mass)


def oracle_meu(
    diagram: InfluenceDiagram,
    evidence: Evidence | None = None,
    scenario: ObservationScenario | None = None,
    budget: int = ORACLE_BUDGET,
) -> OracleResult:
    """MEU by explicit alternating sums and maximizations."""
    return _run(diagram, evidence, scenario, budget, decide=None)


def oracle_policy_value(
    diagram: InfluenceDiagram,
    decide,
    evidence: Evidence | None = None,
    scenario: ObservationScenario | None = None,
    budget: int = ORACLE_BUDGET,
) -> OracleResult:
    """Expected utility of following ``decide(name, past) -> action index``."""
    return _run(diagram, evidence, scenario, budget, decide=decide)


def oracle_posterior(
    diagram: InfluenceDiagram,
    targets: tuple[str, ...],
    evidence: Evidence | None = None,
    budget: int = ORACLE_BUDGET,
) -> np.ndarray:
    """Joint posterior over ``targets`` with free decisions treated uniformly."""
    _check_budget(diagram, budget)
    pinned = _evidence_indices(diagram, evidence or Evidence())
    for t in targets:
        diagram.variable(t)
    names = [v.name for v in diagram.variables]
    cards = {v.name: v.card for v in diagram.variables}
    out = np.zeros(tuple(cards[t] for t in targets))
    asg: dict[str, int] = {}

    # CPT factors are applied at the leaf to stay order-independent.
    def leaf_mass() -> float:
        mass = 1.0
        for cpt in diagram.cpts:
            mass *= _table_value(diagram, cpt.parents, cpt.child, cpt.values, asg)
            if mass == 0.0:
                return 0.0
        return mass

    def walk(i: int, dec_factor: float) -> None:
        if i == len(names):
            mass = leaf_mass() * dec_factor
            if mass != 0.0:
                out[tuple(asg[t] for t in targets)] += mass
            return
        name = names[i]
        if name in pinned:
            asg[name] = pinned[name]
            walk(i + 1, dec_factor)
            del asg[name]
            return
        uniform = 1.0 / cards[name] if diagram.is_decision(name) else 1.0
        for j in range(cards[name]):
            asg[name] = j
            walk(i + 1, dec_factor * uniform)
            del asg[name]

    walk(0, 1.0)
    total = float(out.sum())
    if total <= 0.0:
        raise OracleError("impossible evidence: observed configuration has zero mass")
    return out / total


def oracle_voi(
    diagram: InfluenceDiagram,
    decision: str,
    candidate: str,
    evidence: Evidence | None = None,
    scenario: ObservationScenario | None = None,
    budget: int = ORACLE_BUDGET,
) -> float:
    """Myopic value of observing ``candidate`` just before ``decision``."""
    scenario = scenario or DEFAULT_SCENARIO
    stage = diagram.decision_stage(decision)
    moved = ObservationScenario({**scenario.placements, candidate: stage - 1})
    base = oracle_meu(diagram, evidence, scenario, budget)
    observed = oracle_meu(diagram, evidence, moved, budget)
    return observed.meu - base.meu
