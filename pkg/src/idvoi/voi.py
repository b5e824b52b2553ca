"""Myopic value of information for observation candidates.

Four routes to the same number, kept separate so they can cross-check
one another:

- direct conditioning, for a single non-intervening decision: sweep either
  candidate states or joint utility-parent states, whichever needs fewer
  propagations, and score each observation outcome against the utility
  table;
- the Cooper transform: fold the total utility into a binary chance node NU
  so that posterior sweeps price observations, pays k+2 propagations when
  candidates and evidence are untouched by the decision and 2k+2 otherwise;
- table expansion: widen one strong junction tree so both placements of the
  candidate share tables, then run exactly two collect passes;
- the general model rewrite: insert an observe/skip decision plus a proxy
  variable with a no-observation state and solve the rewritten diagram once
  per branch.

``voi_report`` routes candidates to a method automatically and reports
illegal candidates with the legality reason instead of numbers.  On a
candidate row ``propagations`` is the marginal cost of that candidate;
sweeps shared by the whole query appear only in the report total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import potentials as pt
from .model import (
    DEFAULT_SCENARIO,
    Cpt,
    Evidence,
    IllegalObservationError,
    InfluenceDiagram,
    ModelError,
    ObservationScenario,
    UnknownVariableError,
    Variable,
    check_evidence,
    observation_legal,
    past_of,
    scenario_legal,
)
from .jtree import build_tree, expand_for
from .solve import (
    IMPOSSIBLE_MASS,
    ImpossibleEvidenceError,
    PropagationMeter,
    bn_calibrate,
    solve_meu,
    solve_tree,
)

METHODS = ("auto", "direct", "cooper", "expand", "general")

# Auto-selection prefers direct conditioning while the cheaper of its two
# sweeps stays at or below this many propagations.
DIRECT_SWEEP_CAP = 64


class VoiError(ModelError):
    """A value-of-information query violates a method precondition."""


@dataclass
class CandidateResult:
    name: str
    legal: bool
    reason: str | None
    method: str | None
    euo: float | None
    voi: float | None
    propagations: int

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "legal": self.legal,
            "reason": self.reason,
            "method": self.method,
            "euo": self.euo,
            "voi": self.voi,
            "propagations": self.propagations,
        }


@dataclass
class VoiReport:
    """Per-candidate values around a common baseline max_D EU(D | e).

    Legal candidates come first, sorted by descending voi then name;
    illegal ones follow sorted by name, carrying a reason instead of
    numbers.  euo is baseline + voi by construction.
    """

    decision: str
    baseline: float
    candidates: list[CandidateResult]
    propagations: int

    def candidate(self, name: str) -> CandidateResult:
        for c in self.candidates:
            if c.name == name:
                return c
        raise VoiError(f"no candidate {name!r} in the report")

    def to_jsonable(self) -> dict:
        return {
            "decision": self.decision,
            "baseline": self.baseline,
            "propagations": self.propagations,
            "candidates": [c.to_jsonable() for c in self.candidates],
        }


@dataclass
class CooperTransform:
    """Utility folded into a binary chance node; diagram is None when the
    utility range is degenerate (u_min == u_max) and no transform exists."""

    diagram: InfluenceDiagram | None
    nu: str | None
    u_min: float
    u_max: float

    @property
    def degenerate(self) -> bool:
        return self.diagram is None


# -- shared helpers ----------------------------------------------------


def _total_utility(diagram: InfluenceDiagram) -> pt.PairPotential:
    pot = pt.unit()
    for node in sorted(diagram.utilities, key=lambda u: u.name):
        pot = pt.combine(pot, pt.from_utility(diagram, node))
    return pot


def _utility_array(diagram: InfluenceDiagram, decision: str):
    """Total utility as an array over (decision,) + sorted chance parents."""
    pot = _total_utility(diagram)
    h_vars = tuple(sorted(v for v in pot.domain if v != decision))
    k = diagram.card(decision)
    h_cards = tuple(diagram.card(v) for v in h_vars)
    if decision in pot.domain:
        u = pt.align(pot, (decision,) + h_vars).psi
    else:
        base = pt.align(pot, h_vars).psi if h_vars else pot.psi
        u = np.broadcast_to(base, (k,) + h_cards)
    return h_vars, np.asarray(u, dtype=np.float64)


def _fresh_name(diagram: InfluenceDiagram, base: str) -> str:
    taken = {v.name for v in diagram.variables}
    taken.update(u.name for u in diagram.utilities)
    name = base
    while name in taken:
        name += "_"
    return name


def _require_single_decision(diagram, decision, method: str) -> None:
    diagram.decision_stage(decision)
    if diagram.n_decisions != 1:
        raise VoiError(
            f"the {method} method needs exactly one decision; "
            f"this diagram has {diagram.n_decisions}"
        )


def _check_candidate(diagram, x, target, evidence) -> None:
    if not diagram.is_chance(x):
        raise VoiError(f"candidate {x!r} is not a chance variable")
    if x in evidence.assignments:
        raise VoiError(f"candidate {x} is already observed in the evidence")
    ok, reason = observation_legal(diagram, x, target)
    if not ok:
        raise IllegalObservationError(reason)
    if diagram.modeled_index(x) <= target:
        raise VoiError(f"{x} is already observed at or before I_{target}")


def _check_free_evidence(diagram, decision, evidence) -> None:
    # Direct and Cooper condition posteriors, so any chance evidence is
    # fine; only fixing the decision under study is meaningless.
    check_evidence(diagram, evidence)
    for v, _ in evidence.items():
        if v == decision:
            raise VoiError(
                f"evidence fixes {decision}; the decision under study must stay free"
            )
        if diagram.is_decision(v):
            raise VoiError(f"evidence on decision {v!r} is not supported here")


def _check_past_evidence(diagram, evidence, stage, scenario) -> None:
    check_evidence(diagram, evidence)
    past = past_of(diagram, stage, scenario)
    for v, _ in evidence.items():
        if v not in past:
            raise VoiError(
                f"evidence variable {v!r} is not in the past of decision "
                f"{diagram.decision_order[stage - 1]}"
            )


def _dedupe(names) -> list[str]:
    seen: set[str] = set()
    out = []
    for n in names:
        if n not in seen:
            seen.add(n)
            out.append(n)
    return out


def _sweep_sizes(diagram, h_vars, candidates) -> tuple[int, int]:
    h_size = int(np.prod([diagram.card(v) for v in h_vars], dtype=np.int64))
    sum_states = sum(diagram.card(a) for a in candidates)
    return h_size, sum_states


def _assemble(decision, baseline, rows, flagged, used) -> VoiReport:
    rows.sort(key=lambda c: (-c.voi, c.name))
    flagged.sort(key=lambda c: c.name)
    for c in rows:
        c.euo = baseline + c.voi
    return VoiReport(
        decision=decision,
        baseline=baseline,
        candidates=rows + flagged,
        propagations=used,
    )


# -- direct conditioning ------------------------------------------------


def _direct_values(diagram, decision, candidates, evidence, meter):
    """Baseline and per-candidate (voi, marginal propagations).

    One calibration yields P(H | e) plus every candidate prior; then either
    sweep candidate states reading P(H | a, e) (strategy A) or sweep joint
    utility-parent states reading the candidate likelihoods and invert
    (strategy B), whichever costs fewer propagations.
    """
    h_vars, u = _utility_array(diagram, decision)
    k = diagram.card(decision)
    if not h_vars:
        bn_calibrate(diagram, evidence, meter=meter)
        return float(u.max()), {a: (0.0, 0) for a in candidates}

    groups = [h_vars] if len(h_vars) > 1 else []
    cal0 = bn_calibrate(diagram, evidence, extra_groups=groups, meter=meter)
    p_h = cal0.marginal(h_vars)
    p_a = {a: cal0.marginal((a,)) for a in candidates}
    eu = (u * p_h).reshape(k, -1).sum(axis=1)
    baseline = float(eu.max())

    h_size, sum_states = _sweep_sizes(diagram, h_vars, candidates)
    per: dict[str, tuple[float, int]] = {}
    if sum_states <= h_size:
        for a in candidates:
            euo = 0.0
            swept = 0
            for s_idx, s in enumerate(diagram.states(a)):
                weight = float(p_a[a][s_idx])
                if weight <= IMPOSSIBLE_MASS:
                    continue
                cal = bn_calibrate(
                    diagram, evidence.union({a: s}), extra_groups=groups, meter=meter
                )
                ph_a = cal.marginal(h_vars)
                euo += weight * float((u * ph_a).reshape(k, -1).sum(axis=1).max())
                swept += 1
            per[a] = (euo - baseline, swept)
    else:
        h_cards = tuple(diagram.card(v) for v in h_vars)
        cond = {a: np.zeros((h_size, diagram.card(a))) for a in candidates}
        p_h_flat = p_h.ravel()
        for idx in range(h_size):
            if p_h_flat[idx] <= IMPOSSIBLE_MASS:
                continue
            states = np.unravel_index(idx, h_cards)
            ev_h = {v: diagram.states(v)[int(j)] for v, j in zip(h_vars, states)}
            cal = bn_calibrate(diagram, evidence.union(ev_h), meter=meter)
            for a in candidates:
                cond[a][idx] = cal.marginal((a,))
        u_flat = u.reshape(k, h_size)
        for a in candidates:
            joint = cond[a] * p_h_flat[:, None]  # P(h, a | e)
            scores = u_flat @ joint  # per action, per candidate state
            per[a] = (float(scores.max(axis=0).sum()) - baseline, 0)
    return baseline, per


def voi_non_intervening(
    diagram: InfluenceDiagram,
    decision: str,
    candidates,
    evidence: Evidence | None = None,
    meter: PropagationMeter | None = None,
) -> VoiReport:
    """Direct conditioning for a single decision without children."""
    evidence = evidence or Evidence()
    meter = meter or PropagationMeter()
    start = meter.count
    _require_single_decision(diagram, decision, "direct")
    if diagram.children(decision):
        raise VoiError(
            f"decision {decision} is intervening; the direct method needs a "
            f"non-intervening decision"
        )
    _check_free_evidence(diagram, decision, evidence)
    roster = _dedupe(candidates)
    for x in roster:
        _check_candidate(diagram, x, diagram.decision_stage(decision) - 1, evidence)
    baseline, per = _direct_values(diagram, decision, roster, evidence, meter)
    rows = [
        CandidateResult(x, True, None, "direct", None, per[x][0], per[x][1])
        for x in roster
    ]
    return _assemble(decision, baseline, rows, [], meter.count - start)


# -- Cooper transform ---------------------------------------------------


def cooper_transform(diagram: InfluenceDiagram) -> CooperTransform:
    """Fold the total utility into a binary chance node NU in I_n.

    P(NU = y | parents) is the total utility rescaled to [0, 1] by its exact
    table extrema.  A flat utility leaves nothing to rescale; the transform
    is then degenerate and carries no diagram.
    """
    pot = _total_utility(diagram)
    u_min = float(pot.psi.min())
    u_max = float(pot.psi.max())
    if not u_max > u_min:
        return CooperTransform(None, None, u_min, u_max)
    nu = _fresh_name(diagram, "NU")
    p = (pot.psi - u_min) / (u_max - u_min)
    values = np.stack([p, 1.0 - p], axis=-1).ravel()
    variables = list(diagram.variables) + [Variable(nu, "chance", ("y", "n"))]
    cpts = list(diagram.cpts) + [Cpt(nu, pot.domain, values)]
    sets = [list(s) for s in diagram.information_sets]
    sets[-1].append(nu)
    transformed = InfluenceDiagram(
        variables,
        cpts,
        diagram.utilities,
        decision_order=list(diagram.decision_order),
        information_sets=sets,
        observation_lower_bounds=dict(diagram.observation_lower_bounds),
    )
    return CooperTransform(transformed, nu, u_min, u_max)


def _cooper_values(diagram, decision, candidates, evidence, meter):
    """Baseline and per-candidate (voi, marginal propagations) via NU sweeps.

    ENU(d' | e) comes from the joint (decision, NU) marginal of one
    calibration with the decision uniform; per-action sweeps with NU = y
    supply the posterior update ENU(d' | a, e) = ENU(d' | e) *
    P(a | NU=y, d', e) / P(a | d', e).  When neither candidates nor evidence
    descend from the decision, P(a | d', e) = P(a | e) and the per-action
    sweeps without NU are skipped.
    """
    transform = cooper_transform(diagram)
    if transform.degenerate:
        bn_calibrate(diagram, evidence, meter=meter)
        return transform.u_min, {a: (0.0, 0) for a in candidates}

    td, nu = transform.diagram, transform.nu
    u_range = transform.u_max - transform.u_min
    k = diagram.card(decision)
    actions = diagram.states(decision)

    cal0 = bn_calibrate(td, evidence, extra_groups=[(decision, nu)], meter=meter)
    joint = cal0.marginal((decision, nu))
    rows = joint.sum(axis=1)  # P(d' | e) under the uniform decision
    enu0 = np.divide(
        joint[:, 0], rows, out=np.zeros(k), where=rows > IMPOSSIBLE_MASS
    )
    p_a0 = {a: cal0.marginal((a,)) for a in candidates}

    touched = any(decision in diagram.ancestors(v) for v, _ in evidence.items())
    if touched:
        p_a_d = {a: np.zeros((k, diagram.card(a))) for a in candidates}
        for j, act in enumerate(actions):
            try:
                cal = bn_calibrate(td, evidence.union({decision: act}), meter=meter)
            except ImpossibleEvidenceError:
                continue
            for a in candidates:
                p_a_d[a][j] = cal.marginal((a,))
    else:
        p_a_d = {a: np.tile(p_a0[a], (k, 1)) for a in candidates}

    p_a_dy = {a: np.zeros((k, diagram.card(a))) for a in candidates}
    for j, act in enumerate(actions):
        if enu0[j] <= 0.0:
            continue  # the ENU factor zeroes every term of this action
        try:
            cal = bn_calibrate(
                td, evidence.union({decision: act, nu: "y"}), meter=meter
            )
        except ImpossibleEvidenceError:
            continue
        for a in candidates:
            p_a_dy[a][j] = cal.marginal((a,))

    base_n = float(enu0.max())
    baseline = transform.u_min + u_range * base_n
    per: dict[str, tuple[float, int]] = {}
    for a in candidates:
        ratio = np.zeros_like(p_a_dy[a])
        np.divide(p_a_dy[a], p_a_d[a], out=ratio, where=p_a_d[a] > 0.0)
        enu_a = enu0[:, None] * ratio
        euo_n = float((enu_a.max(axis=0) * p_a0[a]).sum())
        per[a] = (u_range * (euo_n - base_n), 0)
    return baseline, per


def voi_cooper(
    diagram: InfluenceDiagram,
    decision: str,
    candidates,
    evidence: Evidence | None = None,
    meter: PropagationMeter | None = None,
) -> VoiReport:
    """Utility-as-probability sweeps for a single decision, intervening or not."""
    evidence = evidence or Evidence()
    meter = meter or PropagationMeter()
    start = meter.count
    _require_single_decision(diagram, decision, "cooper")
    _check_free_evidence(diagram, decision, evidence)
    roster = _dedupe(candidates)
    for x in roster:
        # A descendant of the decision is caught here by the influence rule,
        # so every candidate that survives is safe for the posterior sweeps.
        _check_candidate(diagram, x, diagram.decision_stage(decision) - 1, evidence)
    baseline, per = _cooper_values(diagram, decision, roster, evidence, meter)
    rows = [
        CandidateResult(x, True, None, "cooper", None, per[x][0], per[x][1])
        for x in roster
    ]
    return _assemble(decision, baseline, rows, [], meter.count - start)


# -- table expansion ----------------------------------------------------


def voi_table_expansion(
    diagram: InfluenceDiagram,
    x: str,
    i: int,
    evidence: Evidence | None = None,
    j: int | float | None = None,
    meter: PropagationMeter | None = None,
) -> tuple[float, float, float]:
    """(meu_early, meu_late, voi) of moving x from I_{j-1} to I_{i-1}.

    j is a decision index with math.inf standing for "never observed"
    (source I_n); by default x starts at its modeled placement.  Both
    placements are priced on one expanded tree, so exactly two collect
    passes run; j = i is degenerate and prices nothing.
    """
    evidence = evidence or Evidence()
    meter = meter or PropagationMeter()
    n = diagram.n_decisions
    if not 1 <= i <= n:
        raise VoiError(f"decision index {i} out of range 1..{n}")
    decision = diagram.decision_order[i - 1]
    if x in evidence.assignments:
        raise VoiError(f"candidate {x} is already observed in the evidence")
    if j is None:
        src = diagram.modeled_index(x)
    elif j == math.inf:
        src = n
    else:
        j = int(j)
        if j < i:
            raise VoiError(f"source decision index {j} precedes the target {i}")
        src = j - 1
    scenario = DEFAULT_SCENARIO
    if src != diagram.modeled_index(x):
        scenario = ObservationScenario({x: src})
        ok, reason = scenario_legal(diagram, scenario)
        if not ok:
            raise IllegalObservationError(reason)
    _check_past_evidence(diagram, evidence, i, scenario)

    base_tree = build_tree(diagram, scenario)
    if src == i - 1:
        meu = solve_tree(base_tree, evidence, meter).meu
        return meu, meu, 0.0
    expanded = expand_for(base_tree, decision, x)
    # The late pass keeps the base control schedule: on the expanded
    # structure the extra members sit in separators above the candidate's
    # old apex and no factor or schedule entry touches them, so collecting
    # the base tree computes the identical tables.
    meu_late = solve_tree(base_tree, evidence, meter).meu
    meu_early = solve_tree(expanded, evidence, meter).meu
    return meu_early, meu_late, meu_early - meu_late


# -- general model rewrite ----------------------------------------------


def _general_transform(diagram: InfluenceDiagram, x: str, i: int):
    """Insert an observe/skip decision before I_{i-1} plus a proxy for x.

    The proxy copies x under "observe" and reads "no-observation" under
    "skip"; it joins I_{i-1} while x keeps its modeled placement.  Set
    indices at or past i-1 shift by one, so stored lower bounds move with
    them.
    """
    d0 = _fresh_name(diagram, "D_0")
    proxy = _fresh_name(diagram, f"{x}_prime")
    states = diagram.states(x)
    card = len(states)
    table = np.zeros((2, card, card + 1))
    for s in range(card):
        table[0, s, s] = 1.0
    table[1, :, card] = 1.0
    variables = list(diagram.variables) + [
        Variable(d0, "decision", ("observe", "skip")),
        Variable(proxy, "chance", states + ("no-observation",)),
    ]
    cpts = list(diagram.cpts) + [Cpt(proxy, (d0, x), table.ravel())]
    order = list(diagram.decision_order)
    order.insert(i - 1, d0)
    sets = [list(s) for s in diagram.information_sets]
    sets.insert(i - 1, [])
    sets[i].append(proxy)
    bounds = {
        v: (b if b < i - 1 else b + 1)
        for v, b in diagram.observation_lower_bounds.items()
    }
    transformed = InfluenceDiagram(
        variables,
        cpts,
        diagram.utilities,
        decision_order=order,
        information_sets=sets,
        observation_lower_bounds=bounds,
    )
    return transformed, d0


def voi_general_model(
    diagram: InfluenceDiagram,
    x: str,
    i: int,
    evidence: Evidence | None = None,
    meter: PropagationMeter | None = None,
) -> tuple[float, float, float]:
    """(meu_observe, meu_skip, voi) from the observe/skip rewrite."""
    evidence = evidence or Evidence()
    meter = meter or PropagationMeter()
    n = diagram.n_decisions
    if not 1 <= i <= n:
        raise VoiError(f"decision index {i} out of range 1..{n}")
    if x in evidence.assignments:
        raise VoiError(f"candidate {x} is already observed in the evidence")
    ok, reason = observation_legal(diagram, x, i - 1)
    if not ok:
        raise IllegalObservationError(reason)
    if diagram.modeled_index(x) <= i - 1:
        raise VoiError(f"{x} is already observed at or before I_{i - 1}")
    _check_past_evidence(diagram, evidence, i, DEFAULT_SCENARIO)
    transformed, d0 = _general_transform(diagram, x, i)
    meu_observe = solve_meu(transformed, evidence.union({d0: "observe"}), meter=meter).meu
    meu_skip = solve_meu(transformed, evidence.union({d0: "skip"}), meter=meter).meu
    return meu_observe, meu_skip, meu_observe - meu_skip


# -- routing report -----------------------------------------------------


def _candidate_reason(diagram, x, target, evidence, source) -> str | None:
    try:
        v = diagram.variable(x)
    except UnknownVariableError as exc:
        return str(exc)
    if v.kind != "chance":
        return f"{x} is not a chance variable"
    if x in evidence.assignments:
        return f"{x} is already observed in the evidence"
    ok, reason = observation_legal(diagram, x, target)
    if not ok:
        return reason
    if source is not None:
        ok, reason = scenario_legal(diagram, ObservationScenario({x: source}))
        if not ok:
            return reason
    src = source if source is not None else diagram.modeled_index(x)
    if src <= target:
        return f"{x} is already observed at or before I_{target}"
    return None


def voi_report(
    diagram: InfluenceDiagram,
    decision: str,
    candidates,
    evidence: Evidence | None = None,
    method: str = "auto",
    source: int | None = None,
    meter: PropagationMeter | None = None,
) -> VoiReport:
    """Price every legal candidate for observation just before a decision.

    Auto-selection: multi-decision queries and explicit source placements go
    to table expansion; a single non-intervening decision uses direct
    conditioning while its cheaper sweep is small, and the Cooper transform
    otherwise.  Candidates the decision influences never reach a sweep: the
    influence rule already flags them illegal.
    """
    evidence = evidence or Evidence()
    meter = meter or PropagationMeter()
    start = meter.count
    if method not in METHODS:
        raise VoiError(
            f"unknown method {method!r}; choose from {', '.join(METHODS)}"
        )
    stage = diagram.decision_stage(decision)
    target = stage - 1
    _check_past_evidence(diagram, evidence, stage, DEFAULT_SCENARIO)
    if source is not None and method in ("direct", "cooper", "general"):
        raise VoiError(
            f"the {method} method compares against the modeled placement; "
            f"an explicit source needs table expansion"
        )

    roster = _dedupe(candidates)
    legal: list[str] = []
    flagged: list[CandidateResult] = []
    for x in roster:
        reason = _candidate_reason(diagram, x, target, evidence, source)
        if reason is None:
            legal.append(x)
        else:
            flagged.append(CandidateResult(x, False, reason, None, None, None, 0))

    baseline: float | None = None
    rows: list[CandidateResult] = []

    def expand_rows(names):
        nonlocal baseline
        for x in names:
            before = meter.count
            early, late, voi = voi_table_expansion(
                diagram,
                x,
                stage,
                evidence,
                j=None if source is None else source + 1,
                meter=meter,
            )
            if baseline is None and source is None:
                baseline = late
            rows.append(
                CandidateResult(x, True, None, "expand", None, voi, meter.count - before)
            )

    if method == "general":
        for x in legal:
            before = meter.count
            _, meu_skip, voi = voi_general_model(diagram, x, stage, evidence, meter=meter)
            if baseline is None:
                baseline = meu_skip
            rows.append(
                CandidateResult(x, True, None, "general", None, voi, meter.count - before)
            )
    elif method == "expand" or (
        method == "auto" and (diagram.n_decisions > 1 or source is not None)
    ):
        expand_rows(legal)
    elif legal:
        _require_single_decision(diagram, decision, method if method != "auto" else "direct")
        non_intervening = not diagram.children(decision)
        h_vars, _ = _utility_array(diagram, decision)
        h_size, sum_states = _sweep_sizes(diagram, h_vars, legal)
        use_direct = (
            method == "direct"
            or (
                method == "auto"
                and non_intervening
                and min(h_size, sum_states) <= DIRECT_SWEEP_CAP
            )
        )
        if use_direct:
            if not non_intervening:
                raise VoiError(
                    f"decision {decision} is intervening; the direct method "
                    f"needs a non-intervening decision"
                )
            _check_free_evidence(diagram, decision, evidence)
            baseline, per = _direct_values(diagram, decision, legal, evidence, meter)
            rows = [
                CandidateResult(x, True, None, "direct", None, per[x][0], per[x][1])
                for x in legal
            ]
        else:
            _check_free_evidence(diagram, decision, evidence)
            baseline, per = _cooper_values(diagram, decision, legal, evidence, meter)
            rows = [
                CandidateResult(x, True, None, "cooper", None, per[x][0], per[x][1])
                for x in legal
            ]

    if baseline is None:
        baseline = solve_meu(diagram, evidence, meter=meter).meu
    return _assemble(decision, float(baseline), rows, flagged, meter.count - start)
