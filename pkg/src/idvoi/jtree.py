"""Strong junction trees over influence diagrams.

Construction follows the usual pipeline: moralize (CPT families plus
utility-parent marriages, utility nodes dropped), eliminate in reverse
temporal order (I_n, D_n, I_{n-1}, ..., I_0; greedy min-fill inside each
information set), keep the maximal elimination cliques, order them by
closing time (when their last member is eliminated), and attach each
clique to the latest-closed later clique containing its separator.  The
clique closed last is the strong root, so collecting toward it performs
the alternating sum/max marginalization in a valid order.

Each clique carries a control schedule: its residual variables ordered by
descending temporal rank, tagged ``sum`` or ``max``.  Observation moves are
realized either by reordering a schedule (when the moved variable's apex
already covers the decision) or by expanding the variable along the tree
path toward the deciding clique.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from idvoi.model import (
    DEFAULT_SCENARIO,
    IllegalObservationError,
    InfluenceDiagram,
    ModelError,
    ObservationScenario,
    observation_legal,
)


class TreeError(ModelError):
    pass


@dataclass(frozen=True)
class ScheduleEntry:
    var: str
    op: str  # "sum" | "max"


@dataclass
class CliqueNode:
    step: int
    members: tuple[str, ...]
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    separator: tuple[str, ...] = ()
    expanded: frozenset = frozenset()


@dataclass
class StrongJunctionTree:
    diagram: InfluenceDiagram
    scenario: ObservationScenario
    nodes: list[CliqueNode]
    root: int
    elimination: list[str]
    apex: dict[str, int]
    schedules: list[list[ScheduleEntry]]
    post_order: list[int]

    def residual(self, i: int) -> tuple[str, ...]:
        sep = set(self.nodes[i].separator)
        return tuple(v for v in self.nodes[i].members if v not in sep)

    def depth(self, i: int) -> int:
        d = 0
        while self.nodes[i].parent is not None:
            i = self.nodes[i].parent
            d += 1
        return d

    def table_size(self) -> int:
        """Total cells across clique and separator tables."""
        total = 0
        for node in self.nodes:
            total += int(
                np.prod([self.diagram.card(v) for v in node.members], dtype=np.int64)
            )
            if node.parent is not None:
                total += int(
                    np.prod(
                        [self.diagram.card(v) for v in node.separator],
                        dtype=np.int64,
                    )
                )
        return total

    def clique_with(self, names) -> int | None:
        """Smallest clique containing all of ``names`` (None if no single
        clique covers them)."""
        want = set(names)
        best = None
        best_size = None
        for i, node in enumerate(self.nodes):
            if want <= set(node.members):
                size = int(
                    np.prod(
                        [self.diagram.card(v) for v in node.members], dtype=np.int64
                    )
                )
                if best is None or size < best_size:
                    best, best_size = i, size
        return best


def moralize(diagram: InfluenceDiagram, extra_groups=()) -> dict[str, set[str]]:
    """Undirected adjacency: CPT families and utility parents married."""
    adj: dict[str, set[str]] = {v.name: set() for v in diagram.variables}

    def marry(group):
        for a, b in combinations(group, 2):
            adj[a].add(b)
            adj[b].add(a)

    for cpt in diagram.cpts:
        marry(cpt.parents + (cpt.child,))
    for node in diagram.utilities:
        marry(node.parents)
    for group in extra_groups:
        marry(tuple(group))
    return adj


def _phases(diagram: InfluenceDiagram, scenario: ObservationScenario):
    n = diagram.n_decisions
    sets: list[list[str]] = [[] for _ in range(n + 1)]
    for x in diagram.chance_names():
        sets[scenario.placement(diagram, x)].append(x)
    phases: list[tuple[str, list[str]]] = []
    for s in range(n, 0, -1):
        phases.append(("chance", sorted(sets[s])))
        phases.append(("decision", [diagram.decision_order[s - 1]]))
    phases.append(("chance", sorted(sets[0])))
    return phases


def _eliminate_all(diagram, scenario, adj):
    """Run the strong elimination, returning the order and every
    elimination clique in creation order."""
    remaining = {v: set(nb) for v, nb in adj.items()}
    order: list[str] = []
    cliques: list[frozenset[str]] = []

    def eliminate(v: str) -> None:
        nb = remaining[v]
        for a, b in combinations(sorted(nb), 2):
            remaining[a].add(b)
            remaining[b].add(a)
        for u in nb:
            remaining[u].discard(v)
        cliques.append(frozenset(nb | {v}))
        order.append(v)
        del remaining[v]

    def fill_cost(v: str):
        nb = sorted(remaining[v])
        fills = sum(
            1 for a, b in combinations(nb, 2) if b not in remaining[a]
        )
        size = int(
            np.prod([diagram.card(u) for u in nb + [v]], dtype=np.int64)
        )
        return fills, size, v

    for kind, group in _phases(diagram, scenario):
        if kind == "decision":
            eliminate(group[0])
            continue
        pending = set(group)
        while pending:
            eliminate(min((fill_cost(v) for v in pending))[2])
            pending.discard(order[-1])
    return order, cliques


def _keep_maximal(cliques: list[frozenset[str]]):
    """An elimination clique is absorbed iff an earlier one contains it."""
    kept: list[tuple[int, frozenset[str]]] = []
    for step, c in enumerate(cliques):
        if any(c <= earlier for earlier in cliques[:step]):
            continue
        kept.append((step, c))
    return kept


def build_tree(
    diagram: InfluenceDiagram,
    scenario: ObservationScenario | None = None,
    extra_groups=(),
) -> StrongJunctionTree:
    scenario = scenario or DEFAULT_SCENARIO
    adj = moralize(diagram, extra_groups)
    order, elim_cliques = _eliminate_all(diagram, scenario, adj)

    # Cliques are ordered by when they close, i.e. by the elimination times
    # of their members from latest backward; the clique closed last is the
    # strong root.  Birth order is wrong here: a clique born early (while
    # eliminating a temporally late variable) may hold the temporally first
    # variables and then must sit at the root.
    when = {v: k for k, v in enumerate(order)}

    def closing(members):
        return tuple(sorted((when[v] for v in members), reverse=True))

    kept = sorted(
        (members for _, members in _keep_maximal(elim_cliques)), key=closing
    )
    nodes = [
        CliqueNode(step=step, members=tuple(sorted(members)))
        for step, members in enumerate(kept)
    ]
    # separator = overlap with every later-closed clique; parent = the
    # latest-closed of those containing the whole separator
    for i, members in enumerate(kept):
        union_later: set[str] = set()
        for m2 in kept[i + 1 :]:
            union_later |= m2
        sep = members & union_later
        nodes[i].separator = tuple(sorted(sep))
        candidates = [j for j in range(i + 1, len(kept)) if sep <= kept[j]]
        if candidates:
            nodes[i].parent = max(candidates)
        elif i + 1 < len(kept):
            raise TreeError("separator not covered by any later clique")
    root = len(nodes) - 1
    for i, node in enumerate(nodes):
        if node.parent is not None:
            nodes[node.parent].children.append(i)
    for node in nodes:
        node.children.sort(key=lambda j: nodes[j].step)

    tree = StrongJunctionTree(
        diagram=diagram,
        scenario=scenario,
        nodes=nodes,
        root=root,
        elimination=order,
        apex={},
        schedules=[],
        post_order=[],
    )
    _index_tree(tree)
    _check_structure(tree, extra_groups)
    return tree


def _index_tree(tree: StrongJunctionTree) -> None:
    """Recompute apex map, schedules and post order from the node data."""
    tree.apex = {}
    for i in range(len(tree.nodes)):
        for v in tree.residual(i):
            if v in tree.apex:
                raise TreeError(f"{v!r} is residual in two cliques")
            tree.apex[v] = i
    missing = {v.name for v in tree.diagram.variables} - set(tree.apex)
    if missing:
        raise TreeError(f"variables never eliminated: {sorted(missing)}")

    rank = {
        v.name: tree.diagram.temporal_rank(v.name, tree.scenario)
        for v in tree.diagram.variables
    }
    tree.schedules = []
    for i in range(len(tree.nodes)):
        residual = sorted(tree.residual(i), key=lambda v: (-rank[v], v))
        tree.schedules.append(
            [
                ScheduleEntry(v, "max" if tree.diagram.is_decision(v) else "sum")
                for v in residual
            ]
        )

    out: list[int] = []

    def visit(i: int) -> None:
        for child in tree.nodes[i].children:
            visit(child)
        out.append(i)

    visit(tree.root)
    if len(out) != len(tree.nodes):
        raise TreeError("clique graph is not a single tree")
    tree.post_order = out


def _check_structure(tree: StrongJunctionTree, extra_groups=()) -> None:
    diagram = tree.diagram
    member_sets = [set(node.members) for node in tree.nodes]
    for cpt in diagram.cpts:
        family = set(cpt.parents) | {cpt.child}
        if not any(family <= m for m in member_sets):
            raise TreeError(f"no clique covers the family of {cpt.child!r}")
    for node in diagram.utilities:
        if node.parents and not any(set(node.parents) <= m for m in member_sets):
            raise TreeError(f"no clique covers utility {node.name!r}")
    for group in extra_groups:
        if not any(set(group) <= m for m in member_sets):
            raise TreeError(f"no clique covers requested group {tuple(group)}")
    for v in diagram.var_map:
        touching = [i for i, m in enumerate(member_sets) if v in m]
        inside = set(touching)
        seen = {touching[0]}
        frontier = [touching[0]]
        while frontier:
            i = frontier.pop()
            near = list(tree.nodes[i].children)
            if tree.nodes[i].parent is not None:
                near.append(tree.nodes[i].parent)
            for j in near:
                if j in inside and j not in seen:
                    seen.add(j)
                    frontier.append(j)
        if seen != inside:
            raise TreeError(f"cliques containing {v!r} are not connected")
    for i, node in enumerate(tree.nodes):
        if node.parent is not None:
            want = set(node.members) & set(tree.nodes[node.parent].members)
            if want != set(node.separator):
                raise TreeError(f"separator mismatch at clique {i}")


def path_to_root(tree: StrongJunctionTree, i: int) -> list[int]:
    out = [i]
    while tree.nodes[out[-1]].parent is not None:
        out.append(tree.nodes[out[-1]].parent)
    return out


def lowest_common_ancestor(tree: StrongJunctionTree, a: int, b: int) -> int:
    up_a = path_to_root(tree, a)
    in_a = set(up_a)
    j = b
    while j not in in_a:
        j = tree.nodes[j].parent
    return j


def expand_for(
    tree: StrongJunctionTree, decision: str, candidate: str
) -> StrongJunctionTree:
    """Tree for the scenario where ``candidate`` is observed just before
    ``decision``, built by widening the base tree instead of re-eliminating.

    The candidate joins every clique and separator on the path from its apex
    up to the lowest common ancestor with the decision's apex; its new apex
    is that ancestor.  When the apex already covers the decision the result
    is a pure schedule change and no table grows.
    """
    diagram = tree.diagram
    stage = diagram.decision_stage(decision)
    target = stage - 1
    ok, reason = observation_legal(diagram, candidate, target)
    if not ok:
        raise IllegalObservationError(reason)
    if tree.scenario.placement(diagram, candidate) <= target:
        raise TreeError(
            f"{candidate!r} is already observed at or before I_{target}"
        )

    new_scenario = ObservationScenario(
        {**tree.scenario.placements, candidate: target}
    )
    c_dec = tree.apex[decision]
    c_cand = tree.apex[candidate]
    meet = lowest_common_ancestor(tree, c_cand, c_dec)

    nodes = [
        CliqueNode(
            step=n.step,
            members=n.members,
            parent=n.parent,
            children=list(n.children),
            separator=n.separator,
            expanded=n.expanded,
        )
        for n in tree.nodes
    ]
    walk = c_cand
    while walk != meet:
        nodes[walk].separator = tuple(sorted(set(nodes[walk].separator) | {candidate}))
        up = nodes[walk].parent
        if candidate not in nodes[up].members:
            nodes[up].members = tuple(sorted(set(nodes[up].members) | {candidate}))
            nodes[up].expanded = nodes[up].expanded | {candidate}
        walk = up

    new_tree = StrongJunctionTree(
        diagram=diagram,
        scenario=new_scenario,
        nodes=nodes,
        root=tree.root,
        elimination=list(tree.elimination),
        apex={},
        schedules=[],
        post_order=[],
    )
    _index_tree(new_tree)
    _check_structure(new_tree)
    return new_tree


def check_schedule(tree: StrongJunctionTree) -> list[str]:
    """Independent validity audit of a tree's control schedule.

    Recomputes moral adjacency from the diagram and replays the global
    elimination sequence on it, adding fill-in edges as variables go, so
    dependence created by earlier summations stays visible.  Checks that
    (a) everything is eliminated exactly once, (b) no variable unobserved
    at a decision is still connected to it and alive when it is maximized,
    and (c) every temporally earlier moral neighbor of a decision is still
    live in the maximizing clique, so the recovered policy conditions on
    its full relevant context.
    """
    problems: list[str] = []
    diagram = tree.diagram
    adj = moralize(diagram)
    rank = {
        v.name: diagram.temporal_rank(v.name, tree.scenario)
        for v in diagram.variables
    }

    sequence: list[tuple[str, int]] = []
    for i in tree.post_order:
        for entry in tree.schedules[i]:
            sequence.append((entry.var, i))
    seen: dict[str, int] = {}
    for pos, (v, i) in enumerate(sequence):
        if v in seen:
            problems.append(f"{v} eliminated twice")
        seen[v] = pos
    for v in diagram.var_map:
        if v not in seen:
            problems.append(f"{v} never eliminated")
    if problems:
        return problems

    induced = {v: set(nb) for v, nb in adj.items()}
    live = set(induced)
    for v, i in sequence:
        op = tree.schedules[i][_entry_index(tree.schedules[i], v)].op
        if diagram.is_decision(v):
            if op != "max":
                problems.append(f"{v} not scheduled as a maximization")
            clique_live = set(tree.nodes[i].members)
            for entry in tree.schedules[i]:
                if entry.var == v:
                    break
                clique_live.discard(entry.var)
            for w in sorted(induced[v] & live):
                if rank[w] > rank[v]:
                    problems.append(
                        f"{w} is unobserved at {v} but still live at its maximization"
                    )
            for w in sorted(adj[v]):
                if rank[w] < rank[v] and w not in clique_live:
                    problems.append(
                        f"{w} is observed before {v} but not live when {v} is maximized"
                    )
        elif op != "sum":
            problems.append(f"{v} not scheduled as a summation")
        nbrs = (induced[v] & live) - {v}
        for a in nbrs:
            induced[a] |= nbrs - {a}
        live.discard(v)
    return problems


def _entry_index(schedule: list[ScheduleEntry], var: str) -> int:
    for k, entry in enumerate(schedule):
        if entry.var == var:
            return k
    raise TreeError(f"{var!r} missing from schedule")
