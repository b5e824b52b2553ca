"""Influence-diagram data model.

A diagram is a Bayesian network over chance variables, augmented with a
totally ordered set of decision variables, one or more additive utility
tables, and a partition of the chance variables into information sets
``I_0 .. I_n`` (``I_{i-1}`` is observed immediately before decision ``D_i``;
``I_n`` is never observed before the last decision).  Each chance variable
additionally carries an observation interval ``[I_lb; I_modeled]`` describing
where it may legally be observed.

Tables are dense row-major vectors: indices run over the parents in listed
order and then the child, with the last listed variable varying fastest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

NORMALIZATION_TOL = 1e-9
# Row sums closer to 1 than this are left untouched on load, which makes
# renormalization idempotent and keeps parse/serialize round trips bit-exact.
RENORMALIZE_TOL = 1e-12


class ModelError(Exception):
    """Base class for diagram construction and query errors."""


class ModelFormatError(ModelError):
    """The document is not well-formed (syntax or missing structure)."""


class ModelValidationError(ModelError):
    """The document parsed but violates diagram invariants."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"invalid diagram: {lines}")


class UnknownVariableError(ModelError):
    pass


class EvidenceError(ModelError):
    """An evidence assignment names an unknown variable or state."""


class IllegalObservationError(ModelError):
    """A requested observation move violates the legality rules."""


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.message}"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "chance" | "decision"
    states: tuple[str, ...]

    @property
    def card(self) -> int:
        return len(self.states)


class Cpt:
    """Conditional probability table for one chance variable."""

    def __init__(self, child: str, parents: tuple[str, ...], values):
        self.child = child
        self.parents = tuple(parents)
        self.values = np.asarray(values, dtype=np.float64)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Cpt)
            and self.child == other.child
            and self.parents == other.parents
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"Cpt({self.child}|{','.join(self.parents)})"


class UtilityNode:
    """Additive utility term over an ordered parent list."""

    def __init__(self, name: str, parents: tuple[str, ...], values):
        self.name = name
        self.parents = tuple(parents)
        self.values = np.asarray(values, dtype=np.float64)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, UtilityNode)
            and self.name == other.name
            and self.parents == other.parents
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"UtilityNode({self.name}|{','.join(self.parents)})"


@dataclass(frozen=True)
class Evidence:
    """Observed states for chance variables and committed decisions."""

    assignments: dict[str, str] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.assignments)

    def items(self):
        return self.assignments.items()

    def union(self, extra: dict[str, str]) -> "Evidence":
        merged = dict(self.assignments)
        merged.update(extra)
        return Evidence(merged)


@dataclass(frozen=True)
class ObservationScenario:
    """Overrides of the modeled information-set placement of chance variables.

    An empty scenario means every variable sits in its modeled set.
    """

    placements: dict[str, int] = field(default_factory=dict)

    def placement(self, diagram: "InfluenceDiagram", x: str) -> int:
        if x in self.placements:
            return self.placements[x]
        return diagram.modeled_index(x)

    def key(self, diagram: "InfluenceDiagram") -> tuple:
        # Canonical cache key: only non-default entries, sorted.
        items = tuple(
            sorted(
                (x, p)
                for x, p in self.placements.items()
                if p != diagram.modeled_index(x)
            )
        )
        return items


DEFAULT_SCENARIO = ObservationScenario()


class InfluenceDiagram:
    """Immutable influence diagram with precomputed structural indexes."""

    def __init__(
        self,
        variables: list[Variable],
        cpts: list[Cpt],
        utilities: list[UtilityNode],
        decision_order: list[str],
        information_sets: list[list[str]],
        observation_lower_bounds: dict[str, int] | None = None,
    ):
        self.variables = tuple(variables)
        self.cpts = tuple(cpts)
        self.utilities = tuple(utilities)
        self.decision_order = tuple(decision_order)
        self.information_sets = tuple(tuple(s) for s in information_sets)
        self.observation_lower_bounds = dict(observation_lower_bounds or {})

        self.var_map: dict[str, Variable] = {}
        for v in self.variables:
            self.var_map.setdefault(v.name, v)
        self.cpt_map: dict[str, Cpt] = {}
        for c in self.cpts:
            self.cpt_map.setdefault(c.child, c)
        # Direct parent sets (CPT arcs only; utilities handled separately).
        self._parents: dict[str, tuple[str, ...]] = {
            name: () for name in self.var_map
        }
        self._children: dict[str, list[str]] = {name: [] for name in self.var_map}
        for c in self.cpts:
            if c.child in self.var_map:
                self._parents[c.child] = tuple(
                    p for p in c.parents if p in self.var_map
                )
        for child, parents in self._parents.items():
            for p in parents:
                self._children[p].append(child)
        self._set_index: dict[str, int] = {}
        for idx, s in enumerate(self.information_sets):
            for name in s:
                self._set_index.setdefault(name, idx)

    # -- basic lookups -------------------------------------------------

    @property
    def n_decisions(self) -> int:
        return len(self.decision_order)

    def variable(self, name: str) -> Variable:
        try:
            return self.var_map[name]
        except KeyError:
            raise UnknownVariableError(f"unknown variable {name!r}") from None

    def is_chance(self, name: str) -> bool:
        return self.variable(name).kind == "chance"

    def is_decision(self, name: str) -> bool:
        return self.variable(name).kind == "decision"

    def card(self, name: str) -> int:
        return self.variable(name).card

    def states(self, name: str) -> tuple[str, ...]:
        return self.variable(name).states

    def chance_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == "chance")

    def parents(self, name: str) -> tuple[str, ...]:
        self.variable(name)
        return self._parents.get(name, ())

    def children(self, name: str) -> tuple[str, ...]:
        self.variable(name)
        return tuple(self._children.get(name, ()))

    def modeled_index(self, x: str) -> int:
        if not self.is_chance(x):
            raise UnknownVariableError(f"{x!r} is not a chance variable")
        try:
            return self._set_index[x]
        except KeyError:
            raise ModelError(f"{x!r} missing from the information sets") from None

    def lower_bound(self, x: str) -> int:
        return self.observation_lower_bounds.get(x, self.modeled_index(x))

    def ancestors(self, x: str) -> set[str]:
        self.variable(x)
        seen: set[str] = set()
        stack = list(self._parents.get(x, ()))
        while stack:
            p = stack.pop()
            if p in seen:
                continue
            seen.add(p)
            stack.extend(self._parents.get(p, ()))
        return seen

    def decision_stage(self, d: str) -> int:
        """1-based index of a decision in the temporal order."""
        try:
            return self.decision_order.index(d) + 1
        except ValueError:
            raise UnknownVariableError(f"unknown decision {d!r}") from None

    def temporal_rank(self, name: str, scenario: ObservationScenario | None = None) -> int:
        """Position on the timeline I_0 < D_1 < I_1 < ... < D_n < I_n.

        Information set I_p maps to 2p and decision D_k to 2k-1, so variables
        in the same set share a rank (mutually unordered).
        """
        scenario = scenario or DEFAULT_SCENARIO
        v = self.variable(name)
        if v.kind == "decision":
            return 2 * self.decision_stage(name) - 1
        return 2 * scenario.placement(self, name)

    def total_utility(self, assignment: dict[str, str]) -> float:
        """Sum of all utility tables at a full assignment (used by fixtures)."""
        total = 0.0
        for u in self.utilities:
            idx = 0
            for p in u.parents:
                idx = idx * self.card(p) + self.states(p).index(assignment[p])
            total += float(u.values[idx])
        return total

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, InfluenceDiagram)
            and self.variables == other.variables
            and self.cpts == other.cpts
            and self.utilities == other.utilities
            and self.decision_order == other.decision_order
            and self.information_sets == other.information_sets
            and self.observation_lower_bounds == other.observation_lower_bounds
        )


# -- structural queries ------------------------------------------------


def past_of(
    diagram: InfluenceDiagram,
    i: int,
    scenario: ObservationScenario | None = None,
) -> set[str]:
    """All variables preceding decision D_i: I_0, D_1, I_1, ..., D_{i-1}, I_{i-1}."""
    if not 1 <= i <= diagram.n_decisions:
        raise ModelError(
            f"decision index {i} out of range 1..{diagram.n_decisions}"
        )
    scenario = scenario or DEFAULT_SCENARIO
    past: set[str] = set(diagram.decision_order[: i - 1])
    for x in diagram.chance_names():
        if scenario.placement(diagram, x) <= i - 1:
            past.add(x)
    return past


def markov_blanket(diagram: InfluenceDiagram, x: str) -> set[str]:
    """Parents, children, and children's other parents of a variable.

    Only CPT arcs count here; utility-induced marriages are a junction-tree
    concern and utility nodes themselves are not variables.
    """
    blanket: set[str] = set(diagram.parents(x))
    for c in diagram.children(x):
        blanket.add(c)
        blanket.update(diagram.parents(c))
    blanket.discard(x)
    return blanket


def observation_legal(
    diagram: InfluenceDiagram, x: str, target: int
) -> tuple[bool, str]:
    """Whether chance variable ``x`` may be observed entering ``I_target``."""
    if not diagram.is_chance(x):
        raise UnknownVariableError(f"{x!r} is not a chance variable")
    n = diagram.n_decisions
    if not 0 <= target <= n:
        raise ModelError(f"information-set index {target} out of range 0..{n}")
    # In a valid diagram the influence rule already holds at the lower bound,
    # hence at every later index; it can only fail below the bound, so it is
    # checked first to surface the more specific reason.
    ancestors = diagram.ancestors(x)
    for k, d in enumerate(diagram.decision_order, start=1):
        if k >= target + 1 and d in ancestors:
            return False, (
                f"decision {d} influences {x} and is not decided before I_{target}"
            )
    lb = diagram.lower_bound(x)
    modeled = diagram.modeled_index(x)
    if target < lb:
        return False, (
            f"target I_{target} is below lower bound I_{lb} for {x}"
        )
    if target > modeled:
        return False, (
            f"target I_{target} is after the modeled placement I_{modeled} of {x}"
        )
    return True, "ok"


def scenario_legal(
    diagram: InfluenceDiagram, scenario: ObservationScenario
) -> tuple[bool, str]:
    """Check every non-default placement of a scenario."""
    for x, p in scenario.placements.items():
        if not diagram.is_chance(x):
            return False, f"{x!r} is not a chance variable"
        modeled = diagram.modeled_index(x)
        if p < modeled:
            ok, reason = observation_legal(diagram, x, p)
            if not ok:
                return False, reason
        elif p > diagram.n_decisions:
            return False, f"placement I_{p} out of range for {x}"
    return True, "ok"


def check_evidence(diagram: InfluenceDiagram, evidence: Evidence) -> None:
    """Raise EvidenceError unless every assignment names a real state."""
    for var, state in evidence.items():
        try:
            v = diagram.variable(var)
        except UnknownVariableError:
            raise EvidenceError(f"unknown variable {var!r} in evidence") from None
        if state not in v.states:
            raise EvidenceError(
                f"variable {var!r} has no state {state!r}; "
                f"legal states: {', '.join(v.states)}"
            )


# -- validation --------------------------------------------------------


def validate_model(diagram: InfluenceDiagram) -> list[Violation]:
    """Return every invariant violation (empty list means valid)."""
    out: list[Violation] = []
    seen_names: set[str] = set()
    for v in diagram.variables:
        if v.name in seen_names:
            out.append(Violation("unique-names", f"duplicate variable {v.name!r}"))
        seen_names.add(v.name)
        if v.kind not in ("chance", "decision"):
            out.append(Violation("kind", f"{v.name!r} has unknown kind {v.kind!r}"))
        if len(v.states) < 2:
            out.append(
                Violation("states", f"{v.name!r} needs at least 2 states")
            )
        if len(set(v.states)) != len(v.states):
            out.append(
                Violation("states", f"{v.name!r} has duplicate state labels")
            )

    chance = [v.name for v in diagram.variables if v.kind == "chance"]
    decisions = [v.name for v in diagram.variables if v.kind == "decision"]

    if list(diagram.decision_order) != decisions and set(
        diagram.decision_order
    ) != set(decisions):
        out.append(
            Violation(
                "decision-order",
                "decision_order must list exactly the decision variables",
            )
        )
    elif len(set(diagram.decision_order)) != len(diagram.decision_order):
        out.append(Violation("decision-order", "duplicate decision in order"))

    n = len(diagram.decision_order)
    if len(diagram.information_sets) != n + 1:
        out.append(
            Violation(
                "information-sets",
                f"expected {n + 1} information sets, got "
                f"{len(diagram.information_sets)}",
            )
        )
    placed: dict[str, int] = {}
    for idx, s in enumerate(diagram.information_sets):
        for name in s:
            if name in placed:
                out.append(
                    Violation(
                        "partition",
                        f"{name!r} appears in information sets I_{placed[name]} "
                        f"and I_{idx}",
                    )
                )
            placed[name] = idx
            if name not in diagram.var_map:
                out.append(
                    Violation("partition", f"unknown variable {name!r} in I_{idx}")
                )
            elif diagram.var_map[name].kind != "chance":
                out.append(
                    Violation(
                        "partition",
                        f"{name!r} is not a chance variable but sits in I_{idx}",
                    )
                )
    for name in chance:
        if name not in placed:
            out.append(
                Violation("partition", f"{name!r} missing from the information sets")
            )

    cpt_children = [c.child for c in diagram.cpts]
    if len(set(cpt_children)) != len(cpt_children):
        out.append(Violation("cpts", "duplicate CPT for a chance variable"))
    for name in chance:
        if name not in diagram.cpt_map:
            out.append(Violation("cpts", f"chance variable {name!r} has no CPT"))
    for c in diagram.cpts:
        if c.child not in diagram.var_map:
            out.append(Violation("cpts", f"CPT child {c.child!r} unknown"))
            continue
        if diagram.var_map[c.child].kind != "chance":
            out.append(
                Violation("cpts", f"CPT child {c.child!r} is not a chance variable")
            )
            continue
        bad_parent = False
        for p in c.parents:
            if p not in diagram.var_map:
                out.append(
                    Violation(
                        "cpts", f"CPT for {c.child!r} references unknown {p!r}"
                    )
                )
                bad_parent = True
        if bad_parent:
            continue
        if len(set(c.parents)) != len(c.parents) or c.child in c.parents:
            out.append(
                Violation("cpts", f"CPT for {c.child!r} has a repeated variable")
            )
            continue
        expected = int(np.prod([diagram.card(p) for p in c.parents], dtype=np.int64))
        expected *= diagram.card(c.child)
        if c.values.size != expected:
            out.append(
                Violation(
                    "table-length",
                    f"CPT for {c.child!r} has {c.values.size} values, "
                    f"expected {expected}",
                )
            )
            continue
        if not np.all(np.isfinite(c.values)):
            out.append(Violation("finite", f"CPT for {c.child!r} has non-finite values"))
            continue
        if np.any(c.values < -1e-12):
            out.append(Violation("range", f"CPT for {c.child!r} has negative entries"))
        rows = c.values.reshape(-1, diagram.card(c.child))
        sums = rows.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > NORMALIZATION_TOL)[0]
        if bad.size:
            r = int(bad[0])
            out.append(
                Violation(
                    "normalization",
                    f"CPT for {c.child!r} row {r} sums to {sums[r]:.12g}",
                )
            )

    seen_u: set[str] = set()
    for u in diagram.utilities:
        if u.name in seen_u or u.name in diagram.var_map:
            out.append(Violation("unique-names", f"duplicate name {u.name!r}"))
        seen_u.add(u.name)
        bad_parent = False
        for p in u.parents:
            if p not in diagram.var_map:
                out.append(
                    Violation(
                        "utilities", f"utility {u.name!r} references unknown {p!r}"
                    )
                )
                bad_parent = True
        if bad_parent:
            continue
        expected = int(np.prod([diagram.card(p) for p in u.parents], dtype=np.int64))
        if u.values.size != expected:
            out.append(
                Violation(
                    "table-length",
                    f"utility {u.name!r} has {u.values.size} values, "
                    f"expected {expected}",
                )
            )
        elif not np.all(np.isfinite(u.values)):
            out.append(
                Violation("finite", f"utility {u.name!r} has non-finite values")
            )

    cycle = _find_cycle(diagram)
    if cycle:
        out.append(Violation("acyclic", "cycle detected: " + " -> ".join(cycle)))
        return out  # ancestor queries below would not terminate reliably

    for x, lb in diagram.observation_lower_bounds.items():
        if x not in diagram.var_map or diagram.var_map[x].kind != "chance":
            out.append(
                Violation("lower-bound", f"lower bound on non-chance {x!r}")
            )
            continue
        if x not in placed:
            continue
        if not 0 <= lb <= placed[x]:
            out.append(
                Violation(
                    "lower-bound",
                    f"lower bound I_{lb} for {x!r} outside [I_0; I_{placed[x]}]",
                )
            )
    for x in chance:
        if x not in placed or x not in diagram.cpt_map:
            continue
        lb = diagram.observation_lower_bounds.get(x, placed[x])
        ancestors = diagram.ancestors(x)
        for k, d in enumerate(diagram.decision_order, start=1):
            if k >= lb + 1 and d in ancestors:
                out.append(
                    Violation(
                        "observation-legality",
                        f"{x!r} cannot be observed entering I_{lb}: "
                        f"decision {d} influences it",
                    )
                )
    return out


def _find_cycle(diagram: InfluenceDiagram) -> list[str] | None:
    color: dict[str, int] = {}
    stack_path: list[str] = []

    def dfs(u: str) -> list[str] | None:
        color[u] = 1
        stack_path.append(u)
        for w in diagram.children(u):
            if color.get(w, 0) == 1:
                return stack_path[stack_path.index(w):] + [w]
            if color.get(w, 0) == 0:
                found = dfs(w)
                if found:
                    return found
        stack_path.pop()
        color[u] = 2
        return None

    for v in diagram.var_map:
        if color.get(v, 0) == 0:
            found = dfs(v)
            if found:
                return found
    return None


# -- serialization -----------------------------------------------------


def parse_model(text: str) -> InfluenceDiagram:
    """Parse and validate a serialized diagram document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(
            f"syntax error at line {e.lineno} column {e.colno}: {e.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("document must be a mapping")
    for key in ("variables", "cpts", "utilities", "decision_order", "information_sets"):
        if key not in doc:
            raise ModelFormatError(f"missing top-level key {key!r}")

    def need(entry, key, kind, where):
        if not isinstance(entry, dict) or key not in entry:
            raise ModelFormatError(f"{where}: missing field {key!r}")
        value = entry[key]
        if kind is not None and not isinstance(value, kind):
            raise ModelFormatError(f"{where}: field {key!r} has the wrong type")
        return value

    variables = []
    for entry in doc["variables"]:
        name = need(entry, "name", str, "variable")
        kind = need(entry, "kind", str, f"variable {name!r}")
        states = need(entry, "states", list, f"variable {name!r}")
        variables.append(Variable(name, kind, tuple(str(s) for s in states)))

    cpts = []
    for entry in doc["cpts"]:
        child = need(entry, "child", str, "cpt")
        parents = need(entry, "parents", list, f"cpt {child!r}")
        values = need(entry, "values", list, f"cpt {child!r}")
        cpts.append(Cpt(child, tuple(str(p) for p in parents), values))

    utilities = []
    for entry in doc["utilities"]:
        name = need(entry, "name", str, "utility")
        parents = need(entry, "parents", list, f"utility {name!r}")
        values = need(entry, "values", list, f"utility {name!r}")
        utilities.append(UtilityNode(name, tuple(str(p) for p in parents), values))

    decision_order = [str(d) for d in doc["decision_order"]]
    information_sets = [
        [str(x) for x in s] for s in doc["information_sets"]
    ]
    lower_bounds = {
        str(k): int(v)
        for k, v in (doc.get("observation_lower_bounds") or {}).items()
    }

    diagram = InfluenceDiagram(
        variables, cpts, utilities, decision_order, information_sets, lower_bounds
    )
    violations = validate_model(diagram)
    if violations:
        raise ModelValidationError(violations)
    _renormalize(diagram)
    return diagram


def _renormalize(diagram: InfluenceDiagram) -> None:
    for c in diagram.cpts:
        rows = c.values.reshape(-1, diagram.card(c.child))
        sums = rows.sum(axis=1)
        drift = np.abs(sums - 1.0) > RENORMALIZE_TOL
        if np.any(drift):
            rows[drift] = rows[drift] / sums[drift, None]


def serialize_model(diagram: InfluenceDiagram) -> str:
    doc = {
        "variables": [
            {"name": v.name, "kind": v.kind, "states": list(v.states)}
            for v in diagram.variables
        ],
        "cpts": [
            {
                "child": c.child,
                "parents": list(c.parents),
                "values": [float(x) for x in c.values.ravel()],
            }
            for c in diagram.cpts
        ],
        "utilities": [
            {
                "name": u.name,
                "parents": list(u.parents),
                "values": [float(x) for x in u.values.ravel()],
            }
            for u in diagram.utilities
        ],
        "decision_order": list(diagram.decision_order),
        "information_sets": [list(s) for s in diagram.information_sets],
    }
    if diagram.observation_lower_bounds:
        doc["observation_lower_bounds"] = {
            k: int(v) for k, v in sorted(diagram.observation_lower_bounds.items())
        }
    return json.dumps(doc, indent=2) + "\n"
