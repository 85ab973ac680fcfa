import math
import random
from fractions import Fraction

import pytest

from dyuch.carleson import (
    SUBMARTINGALE_NONPOS,
    SUPERMARTINGALE_NONNEG,
    DiscreteMeasure,
    SlicedSuperMartingale,
    bellman_chain_slacks,
    embedding_slack,
    embedding_sum,
    measure_from_json,
    measure_from_supermartingale,
    measure_to_json,
    pair_supermartingale,
    random_balanced_measure,
    telescoped_weighted_slack,
    weighted_embedding_slack,
)
from dyuch.dyadic import DyadicInterval, unit_root, window_root
from dyuch.martingale import DyadicAnalytic, random_analytic

E = math.e


def closure_nodes(mu):
    seen = set()
    for I in mu.masses:
        while True:
            seen.add(I)
            if I == mu.root:
                break
            I = I.parent().parent()
    return seen


def brute_subtree_mass(mu, I):
    return sum(m for J, m in mu.masses.items() if I.contains(J))


def random_support_measure(rng, depth):
    """Arbitrary (usually unbalanced) measure for oracle comparisons."""
    masses = {}
    for r in range(0, depth + 1, 2):
        for j in range(1 << r):
            if rng.random() < 0.4:
                masses[unit_root().descendant(r, j)] = Fraction(rng.randrange(0, 12), 16)
    return DiscreteMeasure(masses, depth=depth)


class TestDiscreteMeasure:
    def test_validation(self):
        root = unit_root()
        with pytest.raises(ValueError):
            DiscreteMeasure({DyadicInterval(1, 0): 1})
        with pytest.raises(ValueError):
            DiscreteMeasure({root: -1})
        with pytest.raises(ValueError):
            DiscreteMeasure({root: 1}, depth=3)
        with pytest.raises(ValueError):
            DiscreteMeasure({DyadicInterval(4, 0): 1}, depth=2)
        with pytest.raises(ValueError):
            DiscreteMeasure({"L0N0": 1})
        with pytest.raises(ValueError):
            DiscreteMeasure({root: 1}, root=DyadicInterval(1, 0))
        with pytest.raises(ValueError):
            DiscreteMeasure({DyadicInterval(2, 0): 1}, root=DyadicInterval(2, 1))

    def test_zeros_dropped_and_modes(self):
        root = unit_root()
        mu = DiscreteMeasure({root: Fraction(1, 2), DyadicInterval(2, 0): 0})
        assert len(mu) == 1 and mu.exact
        assert mu.depth == 0
        fl = DiscreteMeasure({root: 0.5})
        assert not fl.exact and isinstance(fl.mass(root), float)

    def test_totals(self):
        mu = DiscreteMeasure(
            {unit_root(): Fraction(1, 2), DyadicInterval(2, 3): Fraction(1, 4)}
        )
        assert mu.total_mass() == Fraction(3, 4)
        assert mu.mass(DyadicInterval(2, 0)) == 0
        assert mu.depth == 2

    def test_subtree_mass_brute_force(self):
        rng = random.Random(30)
        for _ in range(10):
            mu = random_support_measure(rng, 4)
            for r in range(0, 5, 2):
                for j in range(1 << r):
                    I = unit_root().descendant(r, j)
                    assert mu.subtree_mass(I) == brute_subtree_mass(mu, I)

    def test_half_masses_brute_force(self):
        rng = random.Random(31)
        mu = random_support_measure(rng, 4)
        for I in closure_nodes(mu):
            if I.level - mu.root.level + 2 > mu.depth:
                continue
            lo, hi = I.halves()
            got = mu.half_subtree_masses(I)
            want = (
                sum(m for J, m in mu.masses.items() if lo.contains(J)),
                sum(m for J, m in mu.masses.items() if hi.contains(J)),
            )
            assert got == want

    def test_balance_residual_example(self):
        mu = DiscreteMeasure({DyadicInterval(2, 0): 1})
        assert mu.balance_residual() == Fraction(1, 2)
        assert not mu.is_balanced()

    def test_balance_residual_brute_force(self):
        rng = random.Random(32)
        for _ in range(10):
            mu = random_support_measure(rng, 4)
            want = Fraction(0)
            for I in closure_nodes(mu):
                lo, hi = I.halves()
                sl = sum(m for J, m in mu.masses.items() if lo.contains(J))
                sr = sum(m for J, m in mu.masses.items() if hi.contains(J))
                want = max(want, abs(sr - sl) / (2 * I.length))
            assert mu.balance_residual() == want

    def test_packing_examples(self):
        assert DiscreteMeasure({unit_root(): 1}).packing_intensity() == 1
        deep = DiscreteMeasure({DyadicInterval(2, 1): 1})
        assert deep.packing_intensity() == 4

    def test_packing_brute_force(self):
        rng = random.Random(33)
        for _ in range(10):
            mu = random_support_measure(rng, 4)
            want = max(
                (brute_subtree_mass(mu, I) / I.length for I in closure_nodes(mu)),
                default=Fraction(0),
            )
            assert mu.packing_intensity() == want

    def test_scale(self):
        mu = DiscreteMeasure({unit_root(): Fraction(1, 2)})
        assert mu.scale(Fraction(1, 2)).total_mass() == Fraction(1, 4)
        assert mu.scale(2).packing_intensity() == 1


class TestMeasureJson:
    def test_roundtrip(self):
        mu = DiscreteMeasure(
            {unit_root(): Fraction(1, 2), DyadicInterval(4, 7): Fraction(3, 16)},
            depth=4,
        )
        obj = measure_to_json(mu)
        assert obj["base"] == "unit" and obj["depth"] == 4
        assert obj["masses"] == {"L0N0": 0.5, "L4N7": 0.1875}
        back = measure_from_json(obj)
        assert back.depth == 4
        assert float(back.mass(DyadicInterval(4, 7))) == 0.1875

    def test_window_roundtrip(self):
        root = window_root(1)
        mu = DiscreteMeasure(
            {root: 1, DyadicInterval(0, 2, "real_line", 1): 2}, root=root
        )
        obj = measure_to_json(mu)
        assert obj["base"] == "real_line" and obj["ancestor_levels"] == 1
        back = measure_from_json(obj)
        assert back.root == root and back.subtree_mass(root) == 3

    def test_rejects(self):
        with pytest.raises(ValueError):
            measure_from_json({"masses": {"L1N0": 1}})
        with pytest.raises(ValueError):
            measure_from_json({"masses": {"L0N0": -2}})
        with pytest.raises(ValueError):
            measure_from_json([])


class TestSupermartingalePairing:
    def test_point_mass_pairing(self):
        mu = DiscreteMeasure({unit_root(): Fraction(1, 2)}, depth=2)
        M = pair_supermartingale(mu, SUPERMARTINGALE_NONNEG)
        assert M.value(unit_root()) == Fraction(1, 2)
        for j in range(4):
            assert M.value(DyadicInterval(2, j)) == 0
        assert M.value(DyadicInterval(4, 3)) == 0  # implicit below depth
        assert M.sup_norm() == Fraction(1, 2)
        assert M.defect(unit_root()) == Fraction(1, 2)

    def test_signs(self):
        mu = DiscreteMeasure({unit_root(): Fraction(1, 2)}, depth=2)
        up = pair_supermartingale(mu, SUPERMARTINGALE_NONNEG)
        dn = pair_supermartingale(mu, SUBMARTINGALE_NONPOS)
        assert dn.value(unit_root()) == -up.value(unit_root())

    def test_requires_balanced(self):
        lop = DiscreteMeasure({DyadicInterval(2, 0): 1})
        with pytest.raises(ValueError, match="balanced"):
            pair_supermartingale(lop, SUPERMARTINGALE_NONNEG)
        with pytest.raises(ValueError, match="sign"):
            pair_supermartingale(
                DiscreteMeasure({unit_root(): 1}), "upward"
            )

    def test_roundtrip_measure_first(self):
        rng = random.Random(34)
        for depth in (2, 4):
            for _ in range(5):
                mu = random_balanced_measure(rng, depth)
                for sign in (SUPERMARTINGALE_NONNEG, SUBMARTINGALE_NONPOS):
                    M = pair_supermartingale(mu, sign)
                    back = measure_from_supermartingale(M)
                    assert back.masses == mu.masses
                    assert back.depth == mu.depth

    def test_roundtrip_process_first(self):
        root = unit_root()
        vals = {root: Fraction(1)}
        for j in range(4):
            vals[DyadicInterval(2, j)] = Fraction(1, 4)
        M = SlicedSuperMartingale(vals, root, 2, SUPERMARTINGALE_NONNEG)
        mu = measure_from_supermartingale(M)
        assert mu.mass(root) == Fraction(3, 4)
        assert mu.mass(DyadicInterval(2, 2)) == Fraction(1, 16)
        again = pair_supermartingale(mu, SUPERMARTINGALE_NONNEG)
        assert again.values == M.values

    def test_validation_catches_bad_processes(self):
        root = unit_root()
        base = {root: Fraction(1)}
        for j in range(4):
            base[DyadicInterval(2, j)] = Fraction(1, 4)

        missing = dict(base)
        del missing[DyadicInterval(2, 3)]
        with pytest.raises(ValueError, match="missing"):
            SlicedSuperMartingale(missing, root, 2, SUPERMARTINGALE_NONNEG)

        signbad = dict(base)
        signbad[DyadicInterval(2, 0)] = Fraction(-1, 4)
        with pytest.raises(ValueError):
            SlicedSuperMartingale(signbad, root, 2, SUPERMARTINGALE_NONNEG)

        lopsided = dict(base)
        lopsided[DyadicInterval(2, 0)] = Fraction(3, 4)
        with pytest.raises(ValueError):
            SlicedSuperMartingale(lopsided, root, 2, SUPERMARTINGALE_NONNEG)

        drifting = {root: Fraction(0)}
        for j in range(4):
            drifting[DyadicInterval(2, j)] = Fraction(1)
        with pytest.raises(ValueError):
            SlicedSuperMartingale(drifting, root, 2, SUPERMARTINGALE_NONNEG)

    def test_negative_implied_mass(self):
        root = unit_root()
        drifting = {root: Fraction(0)}
        for j in range(4):
            drifting[DyadicInterval(2, j)] = Fraction(1)
        M = SlicedSuperMartingale(
            drifting, root, 2, SUPERMARTINGALE_NONNEG, validate=False
        )
        with pytest.raises(ValueError, match="negative implied mass"):
            measure_from_supermartingale(M)


class TestEmbedding:
    def test_sum_brute_force(self):
        rng = random.Random(35)
        f = random_analytic(rng, 4)
        mu = random_balanced_measure(rng, 4)
        want = Fraction(0)
        for I, m in mu.masses.items():
            want += m * (f.u.average(I) ** 2 + f.v.average(I) ** 2)
        assert embedding_sum(f, mu) == want

    def test_slack_constant_function(self):
        f = DyadicAnalytic.from_leaves([1] * 4, [0] * 4)
        mu = DiscreteMeasure({unit_root(): 1}, depth=2)
        assert embedding_sum(f, mu) == 1
        assert embedding_slack(f, mu) == pytest.approx(E - 1, abs=1e-12)
        assert embedding_slack(f, mu, constant=1.0) == pytest.approx(0.0, abs=1e-12)

    def test_slack_nonnegative_randomized(self):
        rng = random.Random(36)
        for depth in (2, 4):
            for _ in range(20):
                f = random_analytic(rng, depth)
                mu = random_balanced_measure(rng, depth)
                assert embedding_slack(f, mu) >= -1e-9

    def test_compat_errors(self):
        f = random_analytic(random.Random(37), 2)
        deep = random_balanced_measure(random.Random(38), 4)
        with pytest.raises(ValueError):
            embedding_sum(f, deep)
        other = DiscreteMeasure({window_root(1): 1}, root=window_root(1))
        with pytest.raises(ValueError):
            embedding_sum(f, other)


class TestWeightedSlack:
    def test_point_mass_closed_form(self):
        f = DyadicAnalytic.from_leaves([1] * 4, [0] * 4)
        for m in (0.25, 0.5, 1.0, 2.0):
            mu = DiscreteMeasure({unit_root(): Fraction(m)}, depth=2)
            want = 1 - m * math.exp(-m)
            assert weighted_embedding_slack(f, mu) == pytest.approx(want, abs=1e-12)

    def test_no_packing_cap_needed(self):
        # intensity far above 1 is fine for the weighted form
        f = DyadicAnalytic.from_leaves([1] * 4, [0] * 4)
        mu = DiscreteMeasure({unit_root(): 5}, depth=2)
        assert weighted_embedding_slack(f, mu) >= 0

    def test_nonnegative_randomized(self):
        rng = random.Random(39)
        for depth in (2, 4):
            for _ in range(20):
                f = random_analytic(rng, depth)
                mu = random_balanced_measure(rng, depth, max_intensity=3)
                assert weighted_embedding_slack(f, mu) >= -1e-12


class TestTelescoping:
    def test_point_mass_terms(self):
        m = 0.75
        f = DyadicAnalytic.from_leaves([1] * 4, [0] * 4)
        mu = DiscreteMeasure({unit_root(): Fraction(3, 4)}, depth=2)
        deco = telescoped_weighted_slack(f, mu)
        assert deco.slack == pytest.approx(1 - m * math.exp(-m), abs=1e-12)
        assert deco.node_terms[unit_root()] == pytest.approx(
            1 - math.exp(-m) * (1 + m), abs=1e-12
        )
        assert deco.root_term == pytest.approx(math.exp(-m), abs=1e-12)
        assert all(abs(t) <= 1e-12 for t in deco.leaf_terms.values())
        assert deco.total() == pytest.approx(deco.slack, abs=1e-12)

    def test_matches_and_nonnegative_randomized(self):
        rng = random.Random(40)
        for depth in (2, 4):
            for _ in range(15):
                f = random_analytic(rng, depth)
                mu = random_balanced_measure(rng, depth)
                deco = telescoped_weighted_slack(f, mu)
                assert abs(deco.total() - deco.slack) <= 1e-10
                assert deco.min_term() >= -1e-12

    def test_depth_mismatch(self):
        f = random_analytic(random.Random(41), 4)
        mu = DiscreteMeasure({unit_root(): Fraction(1, 2)}, depth=2)
        with pytest.raises(ValueError):
            telescoped_weighted_slack(f, mu)

    def test_requires_balanced(self):
        f = random_analytic(random.Random(42), 2)
        lop = DiscreteMeasure({DyadicInterval(2, 0): 1})
        with pytest.raises(ValueError):
            telescoped_weighted_slack(f, lop)


class TestBellmanChain:
    def test_gaps_nonnegative(self):
        rng = random.Random(43)
        for depth in (2, 4):
            for _ in range(10):
                f = random_analytic(rng, depth)
                mu = random_balanced_measure(rng, depth)
                gaps = bellman_chain_slacks(f, mu)
                assert gaps
                assert min(gaps.values()) >= -1e-9

    def test_overpacked_is_rescaled(self):
        f = random_analytic(random.Random(44), 2)
        mu = DiscreteMeasure({unit_root(): 4}, depth=2)
        gaps = bellman_chain_slacks(f, mu)
        assert min(gaps.values()) >= -1e-9


class TestRandomBalanced:
    def test_exactly_balanced(self):
        rng = random.Random(45)
        for depth in (2, 4, 6):
            mu = random_balanced_measure(rng, depth)
            assert mu.exact
            assert mu.balance_residual() == 0
            assert mu.depth == depth

    def test_intensity_cap(self):
        rng = random.Random(46)
        for _ in range(10):
            mu = random_balanced_measure(rng, 4, max_intensity=1)
            assert mu.packing_intensity() <= 1

    def test_deterministic(self):
        a = random_balanced_measure(random.Random(47), 4)
        b = random_balanced_measure(random.Random(47), 4)
        assert a.masses == b.masses

    def test_window_root(self):
        mu = random_balanced_measure(random.Random(48), 2, window_root(1))
        assert mu.root == window_root(1)
        assert mu.is_balanced()
