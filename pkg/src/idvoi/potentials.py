"""Pair potentials: a probability part and an expected-utility part.

A potential carries an ordered variable domain, a mass table ``phi`` and a
utility table ``psi`` of identical shape.  Combination multiplies mass and
adds utility; summing a variable out adds mass and averages utility by mass;
maximizing picks the best utility per context and requires the mass to be
constant across the maxed variable.  These rules keep the pair
``(P(configs), E[utility | configs])`` exact through every elimination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from idvoi import _kernels
from idvoi.model import Cpt, InfluenceDiagram, ModelError, UtilityNode

MAX_MASS_SPREAD = 1e-9


class PotentialError(ModelError):
    pass


@dataclass
class PairPotential:
    domain: tuple[str, ...]
    cards: tuple[int, ...]
    phi: np.ndarray
    psi: np.ndarray

    def copy(self) -> "PairPotential":
        return PairPotential(self.domain, self.cards, self.phi.copy(), self.psi.copy())

    @property
    def size(self) -> int:
        return int(np.prod(self.cards, dtype=np.int64)) if self.cards else 1


@dataclass
class ArgmaxTable:
    """Best action of one variable per configuration of its context."""

    var: str
    states: tuple[str, ...]
    domain: tuple[str, ...]
    cards: tuple[int, ...]
    arg: np.ndarray  # int64, shape == cards


def unit() -> PairPotential:
    return PairPotential((), (), np.float64(1.0).reshape(()), np.float64(0.0).reshape(()))


def ones(diagram: InfluenceDiagram, domain: tuple[str, ...]) -> PairPotential:
    cards = tuple(diagram.card(v) for v in domain)
    return PairPotential(domain, cards, np.ones(cards), np.zeros(cards))


def from_cpt(diagram: InfluenceDiagram, cpt: Cpt) -> PairPotential:
    domain = cpt.parents + (cpt.child,)
    cards = tuple(diagram.card(v) for v in domain)
    phi = np.asarray(cpt.values, dtype=np.float64).reshape(cards)
    return PairPotential(domain, cards, phi, np.zeros(cards))


def from_utility(diagram: InfluenceDiagram, node: UtilityNode) -> PairPotential:
    domain = tuple(node.parents)
    cards = tuple(diagram.card(v) for v in domain)
    psi = np.asarray(node.values, dtype=np.float64).reshape(cards)
    return PairPotential(domain, cards, np.ones(cards), psi)


def uniform_decision(diagram: InfluenceDiagram, name: str) -> PairPotential:
    card = diagram.card(name)
    return PairPotential(
        (name,), (card,), np.full(card, 1.0 / card), np.zeros(card)
    )


def _broadcast_view(arr: np.ndarray, domain, union) -> np.ndarray:
    """View of ``arr`` with axes permuted/inserted to follow ``union``."""
    missing = [v for v in union if v not in domain]
    full = arr.reshape(arr.shape + (1,) * len(missing))
    current = tuple(domain) + tuple(missing)
    perm = [current.index(v) for v in union]
    return full.transpose(perm)


def combine(a: PairPotential, b: PairPotential) -> PairPotential:
    union = a.domain + tuple(v for v in b.domain if v not in a.domain)
    card_of = dict(zip(a.domain, a.cards)) | dict(zip(b.domain, b.cards))
    cards = tuple(card_of[v] for v in union)
    phi = _broadcast_view(a.phi, a.domain, union) * _broadcast_view(
        b.phi, b.domain, union
    )
    psi = _broadcast_view(a.psi, a.domain, union) + _broadcast_view(
        b.psi, b.domain, union
    )
    return PairPotential(union, cards, phi, psi)


def _pull_last(p: PairPotential, var: str):
    try:
        axis = p.domain.index(var)
    except ValueError:
        raise PotentialError(f"{var!r} not in potential domain {p.domain}") from None
    rest = p.domain[:axis] + p.domain[axis + 1:]
    rest_cards = p.cards[:axis] + p.cards[axis + 1:]
    k = int(np.prod(rest_cards, dtype=np.int64)) if rest_cards else 1
    r = p.cards[axis]
    phi = np.ascontiguousarray(np.moveaxis(p.phi, axis, -1)).reshape(k, r)
    psi = np.ascontiguousarray(np.moveaxis(p.psi, axis, -1)).reshape(k, r)
    return rest, rest_cards, phi, psi


def sum_out(p: PairPotential, var: str) -> PairPotential:
    rest, rest_cards, phi, psi = _pull_last(p, var)
    phi_out, psi_out = _kernels.pair_sum_reduce(phi, psi)
    return PairPotential(rest, rest_cards, phi_out.reshape(rest_cards), psi_out.reshape(rest_cards))


def sum_out_many(p: PairPotential, names) -> PairPotential:
    for var in names:
        p = sum_out(p, var)
    return p


def max_out(
    p: PairPotential, var: str, states: tuple[str, ...]
) -> tuple[PairPotential, ArgmaxTable]:
    rest, rest_cards, phi, psi = _pull_last(p, var)
    phi_out, psi_out, arg, violation = _kernels.pair_max_reduce(phi, psi)
    if violation > MAX_MASS_SPREAD:
        raise PotentialError(
            f"mass varies across {var!r} (relative spread {violation:.3g}); "
            "only policy variables with constant mass can be maximized"
        )
    table = ArgmaxTable(var, states, rest, rest_cards, arg.reshape(rest_cards))
    return (
        PairPotential(
            rest, rest_cards, phi_out.reshape(rest_cards), psi_out.reshape(rest_cards)
        ),
        table,
    )


def divide(num: PairPotential, den: PairPotential) -> PairPotential:
    if set(den.domain) != set(num.domain):
        raise PotentialError(
            f"division requires matching domains, got {num.domain} / {den.domain}"
        )
    perm = [den.domain.index(v) for v in num.domain]
    den_phi = np.ascontiguousarray(den.phi.transpose(perm)).ravel()
    den_psi = np.ascontiguousarray(den.psi.transpose(perm)).ravel()
    num_phi = np.ascontiguousarray(num.phi).ravel()
    num_psi = np.ascontiguousarray(num.psi).ravel()
    phi, psi, bad = _kernels.pair_divide(num_phi, num_psi, den_phi, den_psi)
    if bad >= 0:
        config = np.unravel_index(bad, num.cards) if num.cards else ()
        raise PotentialError(
            f"nonzero mass divided by zero at {dict(zip(num.domain, map(int, config)))}"
        )
    return PairPotential(
        num.domain, num.cards, phi.reshape(num.cards), psi.reshape(num.cards)
    )


def apply_evidence(p: PairPotential, index_map: dict[str, int]) -> PairPotential:
    """Zero the mass of every configuration disagreeing with the evidence."""
    phi = p.phi.copy()
    for var, idx in index_map.items():
        if var not in p.domain:
            continue
        axis = p.domain.index(var)
        view = np.moveaxis(phi, axis, 0)
        keep = view[idx].copy()
        view[:] = 0.0
        view[idx] = keep
    return PairPotential(p.domain, p.cards, phi, p.psi.copy())


def restrict(p: PairPotential, var: str, idx: int) -> PairPotential:
    """Fix one variable to a state and drop it from the domain."""
    try:
        axis = p.domain.index(var)
    except ValueError:
        raise PotentialError(f"{var!r} not in potential domain {p.domain}") from None
    rest = p.domain[:axis] + p.domain[axis + 1:]
    rest_cards = p.cards[:axis] + p.cards[axis + 1:]
    return PairPotential(
        rest,
        rest_cards,
        np.take(p.phi, idx, axis=axis).copy(),
        np.take(p.psi, idx, axis=axis).copy(),
    )


def total(p: PairPotential) -> tuple[float, float]:
    """Collapse everything: total mass and mass-weighted mean utility."""
    mass = float(p.phi.sum())
    if mass == 0.0:
        return 0.0, 0.0
    return mass, float((p.phi * p.psi).sum() / mass)


def align(p: PairPotential, domain: tuple[str, ...]) -> PairPotential:
    perm = [p.domain.index(v) for v in domain]
    return PairPotential(
        domain,
        tuple(p.cards[j] for j in perm),
        p.phi.transpose(perm),
        p.psi.transpose(perm),
    )
