import numpy as np
import pytest

from carlab.allocation import (
    CompleteRandomization,
    EfronBiasedCoin,
    MultiContinuous,
    PocockSimonRank,
    TwoTreatmentContinuous,
    pocock_simon_multi,
)
from carlab.engine import (
    TrialState,
    allocation_probabilities,
    assign_next,
    imbalance_metrics,
    new_trial,
    potential_imbalances,
    simulate_assignments,
    total_imbalance,
)
from carlab.errors import DomainError


class SeqRng:
    """Replays a fixed uniform sequence through the .random() interface."""

    def __init__(self, uniforms):
        self.u = list(uniforms)
        self.i = 0

    def random(self, size=None):
        if size is None:
            v = self.u[self.i]
            self.i += 1
            return v
        out = np.array(self.u[self.i : self.i + size])
        self.i += size
        return out


def brute_force_potentials(phis, assignments, treatments, phi_next):
    """Recompute each hypothetical total imbalance from the full history."""
    out = []
    for arm in range(treatments):
        lam = np.zeros((treatments, len(phi_next)))
        for ph, t in zip(phis, assignments):
            lam -= np.asarray(ph) / treatments
            lam[t] += ph
        lam -= np.asarray(phi_next) / treatments
        lam[arm] += phi_next
        out.append(float((lam * lam).sum()))
    return np.array(out)


class TestNewTrial:
    def test_zero_state(self):
        st = new_trial(2, 4)
        assert st.n == 0
        assert st.lam.shape == (2, 4)
        assert not st.lam.any()
        assert not st.counts.any()

    def test_three_arms(self):
        st = new_trial(3, 9)
        assert st.lam.shape == (3, 9)

    def test_bad_dims(self):
        with pytest.raises(DomainError):
            new_trial(1, 1)
        with pytest.raises(DomainError):
            new_trial(2, 0)


class TestPotentialImbalances:
    def test_empty_state_equal_entries(self):
        st = new_trial(3, 2)
        phi = np.array([1.5, -2.0])
        pot = potential_imbalances(st, phi)
        expected = (1 - 1 / 3) * float(phi @ phi)
        np.testing.assert_allclose(pot, expected, rtol=1e-15)

    def test_hand_case_two_prior_units(self):
        # two units in arm 0 with phi = 1 give rows (1, -1)
        st = new_trial(2, 1)
        st.lam = np.array([[1.0], [-1.0]])
        st.counts = np.array([2, 0])
        st.n = 2
        pot = potential_imbalances(st, np.array([1.0]))
        np.testing.assert_allclose(pot, [4.5, 0.5], rtol=1e-15)

    def test_pairwise_difference_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            T = int(rng.integers(2, 5))
            q = int(rng.integers(1, 6))
            st = new_trial(T, q)
            for _ in range(int(rng.integers(1, 60))):
                assign_next(st, rng.normal(size=q), CompleteRandomization(), rng)
            phi = rng.normal(size=q)
            pot = potential_imbalances(st, phi)
            for t in range(T):
                for s in range(T):
                    direct = 2.0 * float((st.lam[t] - st.lam[s]) @ phi)
                    assert pot[t] - pot[s] == pytest.approx(direct, rel=1e-10, abs=1e-9)

    def test_dimension_mismatch(self):
        st = new_trial(2, 3)
        with pytest.raises(DomainError):
            potential_imbalances(st, np.array([1.0]))


class TestIncrementalVsBruteForce:
    def test_random_trajectories(self):
        rng = np.random.default_rng(321)
        for _ in range(100):
            T = int(rng.integers(2, 5))
            q = int(rng.integers(1, 11))
            n = int(rng.integers(5, 200))
            st = new_trial(T, q, track_history=True)
            phis, ts = [], []
            for _ in range(n):
                phi = rng.normal(size=q)
                t = assign_next(st, phi, CompleteRandomization(), rng)
                phis.append(phi)
                ts.append(t)
            phi_next = rng.normal(size=q)
            inc = potential_imbalances(st, phi_next)
            brute = brute_force_potentials(phis, ts, T, phi_next)
            np.testing.assert_allclose(inc, brute, rtol=1e-9, atol=1e-9)
            assert np.abs(st.lam.sum(axis=0)).max() < 1e-9  # zero column sums


class TestAssignNext:
    def test_efron_example_frequency(self):
        lam = np.array([[1.0], [-1.0]])
        rng = np.random.default_rng(99)
        picks = np.empty(100_000, dtype=int)
        policy = EfronBiasedCoin(rho=0.9)
        for k in range(picks.size):
            st = TrialState(treatments=2, q=1, n=2, lam=lam.copy(),
                            counts=np.array([2, 0]), history=None)
            picks[k] = assign_next(st, np.array([1.0]), policy, rng)
        freq_arm2 = (picks == 1).mean()
        assert freq_arm2 == pytest.approx(0.9, abs=0.01)

    def test_complete_randomization_uniform(self):
        rng = np.random.default_rng(7)
        n = 100_000
        assign = simulate_assignments(np.zeros((n, 1)), CompleteRandomization(), 4, rng)
        se = np.sqrt(0.25 * 0.75 / n)
        for t in range(4):
            assert abs((assign == t).mean() - 0.25) <= 3 * se

    def test_zero_column_sums_after_any_sequence(self):
        rng = np.random.default_rng(11)
        st = new_trial(3, 4)
        policy = PocockSimonRank(kappa=(0.8, 0.1, 0.1))
        for _ in range(200):
            assign_next(st, rng.normal(size=4), policy, rng)
        assert np.abs(st.lam.sum(axis=0)).max() < 1e-9
        assert st.counts.sum() == st.n == 200

    def test_history_records(self):
        rng = np.random.default_rng(3)
        st = new_trial(2, 2, track_history=True)
        for _ in range(5):
            assign_next(st, rng.normal(size=2), EfronBiasedCoin(0.9), rng)
        assert len(st.history) == 5
        rec = st.history[2]
        assert rec.unit == 2
        assert abs(rec.probabilities.sum() - 1) < 1e-12

    def test_two_arm_policy_on_multi_trial(self):
        st = new_trial(3, 2)
        with pytest.raises(DomainError):
            assign_next(st, np.ones(2), EfronBiasedCoin(0.9), np.random.default_rng(0))


class TestSimulateMatchesStepwise:
    """The whole-trial loop must replay the step-by-step path on shared uniforms."""

    @pytest.mark.parametrize(
        "policy,T,feature",
        [
            (EfronBiasedCoin(rho=0.9), 2, "dense"),
            (EfronBiasedCoin(rho=0.9), 2, "onehot"),
            (TwoTreatmentContinuous(cap=3.0), 2, "dense"),
            (PocockSimonRank(kappa=(0.8, 0.1, 0.1)), 3, "onehot"),
            (MultiContinuous(cap=3.0), 3, "dense"),
            (CompleteRandomization(), 3, "dense"),
        ],
    )
    def test_trajectory_equality(self, policy, T, feature):
        rng = np.random.default_rng(2024)
        n, q = 300, 5
        if feature == "dense":
            phi = rng.normal(size=(n, q))
        else:
            phi = np.zeros((n, q))
            phi[np.arange(n), rng.integers(0, q, size=n)] = 1.0
        u = rng.random(n)
        fast = simulate_assignments(phi, policy, T, uniforms=u)
        st = new_trial(T, q)
        seq = SeqRng(u)
        slow = np.array([assign_next(st, phi[i], policy, seq) for i in range(n)])
        np.testing.assert_array_equal(fast, slow)


class TestRelabeling:
    def test_permuted_replay_yields_permuted_assignments(self):
        # rank-probability rule with arm labels permuted: replaying the same
        # uniforms through the permuted cumulative order permutes the sequence
        rng = np.random.default_rng(17)
        n, q, T = 120, 3, 3
        phi = rng.normal(size=(n, q))
        u = rng.random(n)
        kappa = (0.8, 0.1, 0.1)
        perm = [2, 0, 1]

        def run(order):
            lam = np.zeros((T, q))
            out = []
            for i in range(n):
                probs = pocock_simon_multi(lam @ phi[i], kappa)
                acc, pick = 0.0, order[-1]
                for k in order:
                    acc += probs[k]
                    if u[i] < acc:
                        pick = k
                        break
                out.append(pick)
                lam -= phi[i] / T
                lam[pick] += phi[i]
            return out

        base = run([0, 1, 2])
        permuted = run(perm)
        assert permuted == [perm[t] for t in base]


class TestImbalanceMetrics:
    def test_perfect_balance(self):
        X = np.ones((4, 1))
        m = imbalance_metrics([0, 1, 0, 1], X, 2, (0,))
        assert m[0] == 0.0

    def test_both_same_arm(self):
        X = np.ones((2, 1))
        m = imbalance_metrics([0, 0], X, 2, (0,))
        assert m[0] == pytest.approx(4.0, rel=1e-15)

    def test_three_arms_balanced(self):
        X = np.ones((3, 1))
        m = imbalance_metrics([0, 1, 2], X, 3, (0, 1))
        assert m[0] == pytest.approx(0.0, abs=1e-12)
        assert m[1] == pytest.approx(0.0, abs=1e-12)

    def test_two_arm_equals_signed_sum_form(self):
        rng = np.random.default_rng(8)
        n = 50
        a = rng.integers(0, 2, size=n)
        X = rng.normal(size=(n, 2))
        m = imbalance_metrics(a, X, 2, (0, 1, 2))
        signs = np.where(a == 0, 1.0, -1.0)  # arm 0 carries +1
        assert m[0] == pytest.approx(float(signs.sum() ** 2), rel=1e-12)
        for j in (1, 2):
            col = X[:, j - 1]
            expect = float((signs @ col) ** 2) / float((col**2).mean())
            assert m[j] == pytest.approx(expect, rel=1e-12)

    def test_zero_mean_square_errors(self):
        X = np.zeros((4, 1))
        with pytest.raises(DomainError):
            imbalance_metrics([0, 1, 0, 1], X, 2, (1,))

    def test_total_imbalance_helper(self):
        st = new_trial(2, 2)
        st.lam = np.array([[1.0, 2.0], [-1.0, -2.0]])
        assert total_imbalance(st) == pytest.approx(10.0)


class TestAllocationProbabilitiesDispatch:
    def test_two_arm_scale_doubling(self):
        # potentials (4.5, 0.5) correspond to the two-arm-scale difference 8
        probs = allocation_probabilities(np.array([4.5, 0.5]), TwoTreatmentContinuous(cap=3.0))
        from carlab.allocation import continuous_two_treatment

        assert probs[0] == pytest.approx(continuous_two_treatment(8.0, 3.0), rel=1e-15)

    def test_multi_uses_deviations(self):
        pot = np.array([2.0, 2.0, 2.0])
        probs = allocation_probabilities(pot, MultiContinuous(cap=3.0))
        np.testing.assert_allclose(probs, [1 / 3] * 3)


class TestImbalanceAccumulator:
    def test_matches_batch_metrics(self):
        from carlab.engine import ImbalanceAccumulator

        rng = np.random.default_rng(23)
        n, T = 150, 3
        X = rng.normal(size=(n, 2))
        a = rng.integers(0, T, size=n)
        acc = ImbalanceAccumulator(T, 2)
        for i in range(n):
            acc.update(int(a[i]), X[i])
        streamed = acc.metrics((0, 1, 2))
        batch = imbalance_metrics(a, X, T, (0, 1, 2))
        for j in (0, 1, 2):
            assert streamed[j] == pytest.approx(batch[j], rel=1e-9)

    def test_empty_errors(self):
        from carlab.engine import ImbalanceAccumulator

        with pytest.raises(DomainError):
            ImbalanceAccumulator(2, 1).metrics()
