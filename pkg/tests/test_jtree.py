"""Strong junction tree construction, checked against structures derived by
hand from the fixture diagrams (moral graphs and eliminations worked out on
paper), plus schedule audits over random diagrams."""

import numpy as np
import pytest

from idvoi.model import IllegalObservationError, ObservationScenario
from idvoi.jtree import (
    ScheduleEntry,
    TreeError,
    build_tree,
    check_schedule,
    expand_for,
    lowest_common_ancestor,
    moralize,
)

from _corpus import (
    make_legality_probe,
    make_staged_chain,
    make_two_branch,
    make_utility_tail,
    make_weather_vendor,
    random_diagram,
    random_voi_setup,
)


def _members(tree):
    return {node.members for node in tree.nodes}


def _schedule_vars(tree, members):
    for i, node in enumerate(tree.nodes):
        if node.members == members:
            return [(e.var, e.op) for e in tree.schedules[i]]
    raise AssertionError(f"no clique {members}")


class TestMoralize:
    def test_staged_chain_edges(self):
        d = make_staged_chain()
        adj = moralize(d)
        assert adj["A"] == {"C", "D_2", "E", "B"}
        assert adj["D_3"] == {"B"}  # utility marriage only
        assert adj["D_1"] == {"C"}

    def test_extra_groups_marry(self):
        d = make_weather_vendor()
        adj = moralize(d, extra_groups=[("S", "A")])
        assert "A" in adj["S"] and "S" in adj["A"]


class TestStagedChainTree:
    def test_elimination_order(self):
        tree = build_tree(make_staged_chain())
        assert tree.elimination == ["B", "D_3", "E", "A", "D_2", "C", "D_1"]

    def test_cliques_and_chain_shape(self):
        tree = build_tree(make_staged_chain())
        assert _members(tree) == {
            ("A", "B", "D_3", "E"),
            ("A", "C", "D_2"),
            ("C", "D_1"),
        }
        root = tree.nodes[tree.root]
        assert root.members == ("C", "D_1")
        deep = next(n for n in tree.nodes if n.members == ("A", "B", "D_3", "E"))
        mid = next(n for n in tree.nodes if n.members == ("A", "C", "D_2"))
        assert deep.separator == ("A",)
        assert tree.nodes[deep.parent] is mid
        assert mid.separator == ("C",)
        assert tree.nodes[mid.parent] is root

    def test_schedules_follow_reverse_temporal_order(self):
        tree = build_tree(make_staged_chain())
        assert _schedule_vars(tree, ("A", "B", "D_3", "E")) == [
            ("B", "sum"),
            ("D_3", "max"),
            ("E", "sum"),
        ]
        assert _schedule_vars(tree, ("A", "C", "D_2")) == [
            ("A", "sum"),
            ("D_2", "max"),
        ]
        assert _schedule_vars(tree, ("C", "D_1")) == [("C", "sum"), ("D_1", "max")]

    def test_apex_and_sizes(self):
        tree = build_tree(make_staged_chain())
        deep = next(i for i, n in enumerate(tree.nodes) if "B" in n.members)
        assert tree.apex["B"] == deep
        assert tree.apex["D_1"] == tree.root
        assert tree.table_size() == 16 + 8 + 4 + 2 + 2

    def test_audit_is_clean(self):
        assert check_schedule(build_tree(make_staged_chain())) == []


class TestTwoBranchTree:
    def test_two_branches_meet_at_the_root(self):
        tree = build_tree(make_two_branch())
        assert _members(tree) == {
            ("D_3", "f", "h"),
            ("D_4", "g"),
            ("D_2", "e", "g"),
            ("D_1", "e"),
            ("D_1", "f"),
        }
        root = tree.nodes[tree.root]
        assert root.members == ("D_1", "f")
        kids = {tree.nodes[c].members for c in root.children}
        assert kids == {("D_3", "f", "h"), ("D_1", "e")}
        chain = next(n for n in tree.nodes if n.members == ("D_4", "g"))
        assert tree.nodes[chain.parent].members == ("D_2", "e", "g")

    def test_never_observed_h_is_summed_before_its_decision(self):
        tree = build_tree(make_two_branch())
        assert _schedule_vars(tree, ("D_3", "f", "h")) == [
            ("h", "sum"),
            ("D_3", "max"),
        ]
        assert check_schedule(tree) == []


class TestWeatherVendorTree:
    def test_structure(self):
        tree = build_tree(make_weather_vendor())
        assert _members(tree) == {("A", "H"), ("H", "S", "d")}
        assert tree.nodes[tree.root].members == ("H", "S", "d")
        assert _schedule_vars(tree, ("H", "S", "d")) == [
            ("H", "sum"),
            ("d", "max"),
            ("S", "sum"),
        ]
        assert check_schedule(tree) == []

    def test_clique_with_picks_smallest(self):
        tree = build_tree(make_weather_vendor())
        i = tree.clique_with(("H",))
        assert tree.nodes[i].members == ("A", "H")
        assert tree.clique_with(("A", "S")) is None

    def test_extra_group_forces_a_covering_clique(self):
        tree = build_tree(make_weather_vendor(), extra_groups=[("A", "S")])
        assert tree.clique_with(("A", "S")) is not None
        assert check_schedule(tree) == []


class TestUtilityTailTree:
    """The big clique is born first (while eliminating X1) but closes last,
    so it, not the early-closing (D_2, X4) clique, must be the root; rooting
    by birth order would max D_1 while X4 is still live."""

    def test_root_is_the_clique_closed_last(self):
        tree = build_tree(make_utility_tail())
        assert _members(tree) == {
            ("D_2", "X4"),
            ("D_1", "X0", "X1", "X2", "X3", "X4"),
        }
        assert tree.nodes[tree.root].members == (
            "D_1", "X0", "X1", "X2", "X3", "X4",
        )
        assert tree.nodes[0].members == ("D_2", "X4")
        assert tree.nodes[0].separator == ("X4",)
        assert tree.nodes[0].parent == tree.root

    def test_x4_is_summed_before_d1_is_maximized(self):
        tree = build_tree(make_utility_tail())
        assert _schedule_vars(tree, ("D_2", "X4")) == [("D_2", "max")]
        assert _schedule_vars(
            tree, ("D_1", "X0", "X1", "X2", "X3", "X4")
        ) == [
            ("X1", "sum"),
            ("X2", "sum"),
            ("X4", "sum"),
            ("D_1", "max"),
            ("X0", "sum"),
            ("X3", "sum"),
        ]
        assert check_schedule(tree) == []


class TestExpansion:
    def test_staged_chain_expands_to_the_root(self):
        base = build_tree(make_staged_chain())
        tree = expand_for(base, "D_1", "B")
        assert _members(tree) == {
            ("A", "B", "D_3", "E"),
            ("A", "B", "C", "D_2"),
            ("B", "C", "D_1"),
        }
        deep = next(n for n in tree.nodes if n.members == ("A", "B", "D_3", "E"))
        mid = next(n for n in tree.nodes if n.members == ("A", "B", "C", "D_2"))
        assert deep.separator == ("A", "B")
        assert mid.separator == ("B", "C")
        assert mid.expanded == frozenset({"B"})
        assert tree.apex["B"] == tree.root
        assert _schedule_vars(tree, ("B", "C", "D_1")) == [
            ("C", "sum"),
            ("D_1", "max"),
            ("B", "sum"),
        ]
        assert _schedule_vars(tree, ("A", "B", "D_3", "E")) == [
            ("D_3", "max"),
            ("E", "sum"),
        ]
        assert check_schedule(tree) == []

    def test_size_bound_alpha_factor(self):
        base = build_tree(make_staged_chain())
        tree = expand_for(base, "D_1", "B")
        alpha = 2  # |states(B)|
        assert base.table_size() <= tree.table_size() <= alpha * base.table_size()
        assert tree.table_size() == 48

    def test_schedule_only_move(self):
        base = build_tree(make_two_branch())
        tree = expand_for(base, "D_3", "h")
        assert _members(tree) == _members(base)
        assert tree.table_size() == base.table_size()
        assert all(not n.expanded for n in tree.nodes)
        assert _schedule_vars(tree, ("D_3", "f", "h")) == [
            ("D_3", "max"),
            ("h", "sum"),
        ]
        assert check_schedule(tree) == []

    def test_illegal_move_is_rejected_with_reason(self):
        base = build_tree(make_staged_chain())
        with pytest.raises(IllegalObservationError, match="D_1 influences C"):
            expand_for(base, "D_1", "C")
        probe = build_tree(make_legality_probe())
        with pytest.raises(IllegalObservationError, match="below lower bound"):
            expand_for(probe, "D_1", "P")

    def test_double_move_is_an_error(self):
        base = build_tree(make_staged_chain())
        tree = expand_for(base, "D_1", "B")
        with pytest.raises(TreeError, match="already observed"):
            expand_for(tree, "D_1", "B")

    def test_lca_helper(self):
        tree = build_tree(make_two_branch())
        deep = next(i for i, n in enumerate(tree.nodes) if n.members == ("D_4", "g"))
        other = next(
            i for i, n in enumerate(tree.nodes) if n.members == ("D_3", "f", "h")
        )
        assert lowest_common_ancestor(tree, deep, other) == tree.root
        assert lowest_common_ancestor(tree, deep, deep) == deep


class TestRandomDiagrams:
    def test_construction_and_audit(self):
        rng = np.random.default_rng(404)
        for _ in range(30):
            d = random_diagram(rng)
            tree = build_tree(d)
            assert check_schedule(tree) == []
            again = build_tree(d)
            assert [n.members for n in again.nodes] == [
                n.members for n in tree.nodes
            ]
            assert again.elimination == tree.elimination

    def test_scenario_trees_audit_clean(self):
        rng = np.random.default_rng(405)
        built = 0
        for _ in range(80):
            d = random_diagram(rng)
            movable = [
                x
                for x in d.chance_names()
                if d.lower_bound(x) < d.modeled_index(x)
            ]
            if not movable:
                continue
            x = movable[int(rng.integers(len(movable)))]
            target = int(rng.integers(d.lower_bound(x), d.modeled_index(x)))
            tree = build_tree(d, ObservationScenario({x: target}))
            assert check_schedule(tree) == []
            built += 1
        assert built >= 10

    def test_expansion_bounds_and_audit(self):
        rng = np.random.default_rng(406)
        for _ in range(25):
            d, _, candidates = random_voi_setup(rng)
            base = build_tree(d)
            for cand in candidates:
                tree = expand_for(base, "d", cand)
                assert check_schedule(tree) == []
                alpha = d.card(cand)
                assert (
                    base.table_size()
                    <= tree.table_size()
                    <= alpha * base.table_size()
                )
