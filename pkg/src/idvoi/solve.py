"""Collect-based MEU solving and HUGIN-style calibrated probability queries.

A decision solve is a single collect sweep toward the strong root: each
clique combines its assigned factors with its children's messages, runs its
control schedule (sum for chance, max for free decisions, a slice for
decisions fixed by evidence), and passes the separator table upward.  The
root yields the pair (evidence mass, maximum expected utility) plus one
argmax table per free decision.

Probability queries instead calibrate the whole tree (collect and a divide-
based distribute) with decisions treated as uniform unless fixed, after
which any in-clique marginal is readable.  Every sweep over the tree —
collect-only or full calibration — counts as exactly one propagation on the
meter, which is the unit all value-of-information cost accounting uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from idvoi.jtree import StrongJunctionTree, build_tree
from idvoi.model import (
    DEFAULT_SCENARIO,
    Evidence,
    InfluenceDiagram,
    ModelError,
    ObservationScenario,
    check_evidence,
)
from idvoi import potentials as pt

IMPOSSIBLE_MASS = 1e-12


class SolveError(ModelError):
    pass


class ImpossibleEvidenceError(SolveError):
    pass


@dataclass
class PropagationMeter:
    count: int = 0

    def tick(self) -> None:
        self.count += 1


@dataclass
class Policy:
    """Optimal action of one decision per configuration of its live context.

    The context is sorted by name and the table transposed to match, so the
    serialized form does not depend on internal table layouts.
    """

    decision: str
    actions: tuple[str, ...]
    context: tuple[str, ...]
    context_states: tuple[tuple[str, ...], ...]
    table: np.ndarray

    @classmethod
    def from_argmax(cls, diagram: InfluenceDiagram, table: pt.ArgmaxTable) -> "Policy":
        order = sorted(range(len(table.domain)), key=lambda i: table.domain[i])
        context = tuple(table.domain[i] for i in order)
        arg = table.arg.transpose(order) if table.domain else table.arg
        return cls(
            decision=table.var,
            actions=table.states,
            context=context,
            context_states=tuple(diagram.states(v) for v in context),
            table=np.array(arg, dtype=np.int64),
        )

    def action_index(self, assignment: dict[str, int]) -> int:
        try:
            idx = tuple(assignment[v] for v in self.context)
        except KeyError as e:
            raise SolveError(
                f"policy for {self.decision} needs {e.args[0]!r} in the assignment"
            ) from None
        return int(self.table[idx])

    def to_jsonable(self) -> dict:
        return {
            "decision": self.decision,
            "context": list(self.context),
            "actions": [
                self.actions[int(a)] for a in self.table.ravel()
            ],
        }


@dataclass
class Solution:
    meu: float
    evidence_probability: float
    policies: dict[str, Policy]
    propagations: int

    def decide(self, name: str, past: dict[str, int]) -> int:
        policy = self.policies.get(name)
        if policy is None:
            return 0
        return policy.action_index(past)

    def to_jsonable(self) -> dict:
        return {
            "meu": float(self.meu),
            "evidence_probability": float(self.evidence_probability),
            "policies": {
                name: p.to_jsonable() for name, p in sorted(self.policies.items())
            },
            "propagations": self.propagations,
        }


def _evidence_indices(diagram, evidence: Evidence) -> dict[str, int]:
    check_evidence(diagram, evidence)
    return {
        var: diagram.states(var).index(state) for var, state in evidence.items()
    }


def _require_prefix(
    diagram: InfluenceDiagram, scenario: ObservationScenario, evidence: Evidence
) -> None:
    """Evidence reaching temporal stage m needs D_1..D_m instantiated, and
    never-observed variables cannot be conditioned on at all."""
    n = diagram.n_decisions
    m = 0
    for var in evidence.assignments:
        v = diagram.variable(var)
        if v.kind == "decision":
            m = max(m, diagram.decision_stage(var))
        else:
            p = scenario.placement(diagram, var)
            if n and p == n:
                raise SolveError(
                    f"cannot condition on {var!r}: it is never observed "
                    "before the last decision"
                )
            m = max(m, p)
    missing = [d for d in diagram.decision_order[:m] if d not in evidence.assignments]
    if missing:
        raise SolveError(
            f"evidence reaches stage {m} but decision {missing[0]} "
            "is not instantiated"
        )


def _assign_factors(tree: StrongJunctionTree, chance_evidence: dict[str, int]):
    """Per-clique factor lists in a deterministic order; evidence is zeroed
    directly into the observed variable's own CPT factor."""
    diagram = tree.diagram
    factors: list[list[pt.PairPotential]] = [[] for _ in tree.nodes]
    for cpt in sorted(diagram.cpts, key=lambda c: c.child):
        home = tree.clique_with(cpt.parents + (cpt.child,))
        if home is None:
            raise SolveError(f"no clique covers the family of {cpt.child!r}")
        factor = pt.from_cpt(diagram, cpt)
        if cpt.child in chance_evidence:
            factor = pt.apply_evidence(factor, {cpt.child: chance_evidence[cpt.child]})
        factors[home].append(factor)
    for node in sorted(diagram.utilities, key=lambda u: u.name):
        home = tree.root if not node.parents else tree.clique_with(node.parents)
        if home is None:
            raise SolveError(f"no clique covers utility {node.name!r}")
        factors[home].append(pt.from_utility(diagram, node))
    return factors


def solve_tree(
    tree: StrongJunctionTree,
    evidence: Evidence | None = None,
    meter: PropagationMeter | None = None,
) -> Solution:
    """One collect propagation toward the strong root."""
    diagram = tree.diagram
    evidence = evidence or Evidence()
    _require_prefix(diagram, tree.scenario, evidence)
    indices = _evidence_indices(diagram, evidence)
    chance_ev = {v: i for v, i in indices.items() if diagram.is_chance(v)}
    decision_ev = {v: i for v, i in indices.items() if diagram.is_decision(v)}

    factors = _assign_factors(tree, chance_ev)
    messages: dict[int, pt.PairPotential] = {}
    policies: dict[str, Policy] = {}

    for i in tree.post_order:
        pot = pt.unit()
        for factor in factors[i]:
            pot = pt.combine(pot, factor)
        for child in tree.nodes[i].children:
            pot = pt.combine(pot, messages[child])
        for entry in tree.schedules[i]:
            if entry.var not in pot.domain:
                if entry.op == "max" and entry.var not in decision_ev:
                    # nothing depends on this decision; any action is optimal
                    policies[entry.var] = Policy(
                        decision=entry.var,
                        actions=diagram.states(entry.var),
                        context=(),
                        context_states=(),
                        table=np.zeros((), dtype=np.int64),
                    )
                continue
            if entry.var in decision_ev:
                pot = pt.restrict(pot, entry.var, decision_ev[entry.var])
            elif entry.op == "max":
                pot, arg = pt.max_out(pot, entry.var, diagram.states(entry.var))
                policies[entry.var] = Policy.from_argmax(diagram, arg)
            else:
                pot = pt.sum_out(pot, entry.var)
        if i != tree.root:
            stray = set(pot.domain) - set(tree.nodes[i].separator)
            if stray:
                raise SolveError(f"message leaks {sorted(stray)} past clique {i}")
            messages[i] = pot

    mass, meu = pot.phi.item(), pot.psi.item()
    if meter is not None:
        meter.tick()
    if mass <= IMPOSSIBLE_MASS:
        raise ImpossibleEvidenceError(
            "impossible evidence: observed configuration has zero mass"
        )
    return Solution(
        meu=float(meu),
        evidence_probability=float(mass),
        policies=policies,
        propagations=1,
    )


def solve_meu(
    diagram: InfluenceDiagram,
    evidence: Evidence | None = None,
    scenario: ObservationScenario | None = None,
    meter: PropagationMeter | None = None,
) -> Solution:
    return solve_tree(build_tree(diagram, scenario), evidence, meter)


@dataclass
class Calibration:
    """Clique tables after one full collect+distribute propagation."""

    tree: StrongJunctionTree
    potentials: list[pt.PairPotential]
    evidence_probability: float

    def marginal(self, names: tuple[str, ...]) -> np.ndarray:
        """Normalized posterior over ``names`` (which must share a clique)."""
        i = self.tree.clique_with(names)
        if i is None:
            raise SolveError(
                f"no clique covers {tuple(names)}; calibrate with this group "
                "married if the joint is needed"
            )
        pot = self.potentials[i]
        for v in pot.domain:
            if v not in names:
                pot = pt.sum_out(pot, v)
        pot = pt.align(pot, tuple(names))
        mass = pot.phi.sum()
        if mass <= IMPOSSIBLE_MASS:
            raise ImpossibleEvidenceError(
                "impossible evidence: observed configuration has zero mass"
            )
        return pot.phi / mass


def bn_calibrate(
    diagram: InfluenceDiagram,
    evidence: Evidence | None = None,
    extra_groups=(),
    meter: PropagationMeter | None = None,
) -> Calibration:
    """Calibrate the tree as a plain Bayesian network.

    Free decisions act as uniform chance variables; decisions fixed by
    evidence become degenerate point distributions, so the reported evidence
    probability conditions on them.  Utility tables play no part.
    """
    evidence = evidence or Evidence()
    indices = _evidence_indices(diagram, evidence)
    tree = build_tree(diagram, extra_groups=tuple(extra_groups))

    factors: list[list[pt.PairPotential]] = [[] for _ in tree.nodes]
    for cpt in sorted(diagram.cpts, key=lambda c: c.child):
        home = tree.clique_with(cpt.parents + (cpt.child,))
        factor = pt.from_cpt(diagram, cpt)
        if cpt.child in indices:
            factor = pt.apply_evidence(factor, {cpt.child: indices[cpt.child]})
        factors[home].append(factor)
    for d in diagram.decision_order:
        home = tree.apex[d]
        factor = pt.uniform_decision(diagram, d)
        if d in indices:
            onehot = np.zeros(diagram.card(d))
            onehot[indices[d]] = 1.0
            factor = pt.PairPotential(
                (d,), (diagram.card(d),), onehot, np.zeros(diagram.card(d))
            )
        factors[home].append(factor)

    pots: list[pt.PairPotential | None] = [None] * len(tree.nodes)
    messages: dict[int, pt.PairPotential] = {}
    for i in tree.post_order:
        # full member tables, so every in-clique marginal is readable later
        pot = pt.ones(diagram, tree.nodes[i].members)
        for factor in factors[i]:
            pot = pt.combine(pot, factor)
        for child in tree.nodes[i].children:
            pot = pt.combine(pot, messages[child])
        pots[i] = pot
        if i != tree.root:
            msg = pot
            sep = set(tree.nodes[i].separator)
            for v in pot.domain:
                if v not in sep:
                    msg = pt.sum_out(msg, v)
            messages[i] = msg

    def down(i: int) -> None:
        for child in tree.nodes[i].children:
            sent = messages[child]
            marg = pots[i]
            for v in marg.domain:
                if v not in sent.domain:
                    marg = pt.sum_out(marg, v)
            pots[child] = pt.combine(pots[child], pt.divide(marg, sent))
            down(child)

    down(tree.root)
    if meter is not None:
        meter.tick()
    mass = float(pots[tree.root].phi.sum())
    if mass <= IMPOSSIBLE_MASS:
        raise ImpossibleEvidenceError(
            "impossible evidence: observed configuration has zero mass"
        )
    return Calibration(tree=tree, potentials=pots, evidence_probability=mass)


def bn_posterior(
    diagram: InfluenceDiagram,
    targets: tuple[str, ...],
    evidence: Evidence | None = None,
    meter: PropagationMeter | None = None,
) -> tuple[np.ndarray, float]:
    """Posterior over ``targets`` using one calibration propagation."""
    for t in targets:
        diagram.variable(t)
    groups = [tuple(targets)] if len(targets) > 1 else ()
    cal = bn_calibrate(diagram, evidence, extra_groups=groups, meter=meter)
    return cal.marginal(tuple(targets)), cal.evidence_probability
