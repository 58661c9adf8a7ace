import math
import random
import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmsearch.pheromone import (
    ClockSkewError,
    ConfigurationError,
    DecayConfig,
    ExaminationTable,
    Flavor,
    FlavorKeyError,
    NoPreferenceError,
    PheromoneEntry,
    PheromoneStore,
    derive_elaborate_order,
    evaporated_weight,
    expand_query_keys,
    increment_naive,
    increment_ranking_bias,
    normalize_query,
)

DAY = 86400.0


def make_store(flavor=Flavor.NAIVE, delta=DAY, epsilon=1e-6):
    return PheromoneStore(flavor, DecayConfig(delta=delta, epsilon=epsilon))


class TestEvaporation:
    def test_zero_elapsed_time_keeps_weight(self):
        entry = PheromoneEntry(4.0, 1000.0)
        assert evaporated_weight(entry, 1000.0, DecayConfig(DAY)) == 4.0

    def test_two_half_lives_quarter_weight(self):
        entry = PheromoneEntry(4.0, 0.0)
        assert evaporated_weight(entry, 2 * DAY, DecayConfig(DAY)) == pytest.approx(1.0)

    def test_half_a_half_life(self):
        # independent route: 2^(-1/2) = 1/sqrt(2)
        entry = PheromoneEntry(1.0, 0.0)
        got = evaporated_weight(entry, DAY / 2, DecayConfig(DAY))
        assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)

    def test_clock_skew_rejected(self):
        entry = PheromoneEntry(1.0, 50.0)
        with pytest.raises(ClockSkewError):
            evaporated_weight(entry, 49.0, DecayConfig(DAY))

    def test_does_not_mutate(self):
        entry = PheromoneEntry(2.0, 0.0)
        evaporated_weight(entry, DAY, DecayConfig(DAY))
        assert entry.weight == 2.0 and entry.last_touch == 0.0

    @given(
        weight=st.floats(1e-6, 1e6),
        delta=st.floats(60.0, 4 * 604800.0),
        halves=st.floats(0.0, 40.0),
    )
    def test_matches_exponential_form(self, weight, delta, halves):
        # independent oracle: exp(-ln2 * dt/delta)
        entry = PheromoneEntry(weight, 0.0)
        got = evaporated_weight(entry, halves * delta, DecayConfig(delta))
        expected = weight * math.exp(-math.log(2.0) * halves)
        assert got == pytest.approx(expected, rel=1e-9)

    @given(
        weight=st.floats(1e-6, 1e6),
        delta=st.floats(60.0, 4 * 604800.0),
        dt1=st.floats(0.0, 20.0 * 86400),
        dt2=st.floats(0.0, 20.0 * 86400),
    )
    def test_decay_composes(self, weight, delta, dt1, dt2):
        cfg = DecayConfig(delta)
        step1 = evaporated_weight(PheromoneEntry(weight, 0.0), dt1, cfg)
        step2 = evaporated_weight(PheromoneEntry(step1, dt1), dt1 + dt2, cfg)
        joint = evaporated_weight(PheromoneEntry(weight, 0.0), dt1 + dt2, cfg)
        assert step2 == pytest.approx(joint, rel=1e-9)

    def test_half_life_exactness_across_magnitudes(self):
        cfg = DecayConfig(DAY)
        for exponent in range(-6, 7):
            weight = 10.0 ** exponent
            got = evaporated_weight(PheromoneEntry(weight, 0.0), DAY, cfg)
            assert got == pytest.approx(weight / 2.0, rel=1e-9)


class TestDecayConfig:
    def test_presets_expressible(self):
        assert DecayConfig(86400).delta == 86400
        assert DecayConfig(604800).delta == 604800

    @pytest.mark.parametrize("delta", [0, -1.0])
    def test_rejects_nonpositive_delta(self, delta):
        with pytest.raises(ValueError):
            DecayConfig(delta)

    def test_rejects_negative_epsilon(self):
        with pytest.raises(ValueError):
            DecayConfig(DAY, epsilon=-1e-9)


class TestDeposit:
    def test_absent_entry_base_case(self):
        store = make_store()
        entry = store.deposit("ants", "http://a", None, 1.0, now=100.0)
        assert entry.weight == 1.0
        assert entry.last_touch == 100.0

    def test_evaporates_before_adding(self):
        store = make_store()
        store.deposit("ants", "http://a", None, 1.0, now=0.0)
        entry = store.deposit("ants", "http://a", None, 1.0, now=DAY)
        assert entry.weight == pytest.approx(1.5)

    def test_no_decay_at_same_instant(self):
        store = make_store()
        store.deposit("q", "http://d", None, 2.0, now=10.0)
        entry = store.deposit("q", "http://d", None, 1.22, now=10.0)
        assert entry.weight == pytest.approx(3.22)

    def test_rejects_nonpositive_increment(self):
        store = make_store()
        with pytest.raises(ValueError):
            store.deposit("q", "http://d", None, 0.0, now=0.0)
        with pytest.raises(ValueError):
            store.deposit("q", "http://d", None, -0.5, now=0.0)

    def test_flavor_key_mismatch(self):
        pair_store = make_store(Flavor.NAIVE)
        with pytest.raises(FlavorKeyError):
            pair_store.deposit("q", "http://d", 3, 1.0, now=0.0)
        triplet_store = make_store(Flavor.ELABORATE)
        with pytest.raises(FlavorKeyError):
            triplet_store.deposit("q", "http://d", None, 1.0, now=0.0)

    def test_backwards_deposit_rejected(self):
        store = make_store()
        store.deposit("q", "http://d", None, 1.0, now=100.0)
        with pytest.raises(ClockSkewError):
            store.deposit("q", "http://d", None, 1.0, now=99.0)

    def test_key_normalized_on_write(self):
        store = make_store()
        store.deposit("  Ants  ", "http://d", None, 1.0, now=0.0)
        assert store.weight("ants", "http://d") == 1.0

    @given(
        initial=st.floats(0.1, 100.0),
        increment=st.floats(0.01, 10.0),
        t1=st.floats(0.0, 5 * DAY),
        dt=st.floats(0.0, 5 * DAY),
    )
    def test_order_sensitivity(self, initial, increment, t1, dt):
        # deposit at t1, read at t2: evaporation strictly precedes deposition
        store = make_store()
        store.deposit("q", "http://d", None, initial, now=0.0)
        store.deposit("q", "http://d", None, increment, now=t1)
        got = store.weight("q", "http://d", now=t1 + dt)
        expected = (initial * 0.5 ** (t1 / DAY) + increment) * 0.5 ** (dt / DAY)
        assert got == pytest.approx(expected, rel=1e-9)

    @given(
        increments=st.lists(st.floats(0.01, 10.0), min_size=1, max_size=20),
        gaps=st.lists(st.floats(0.0, 3 * DAY), min_size=20, max_size=20),
    )
    def test_weight_never_negative(self, increments, gaps):
        store = make_store()
        now = 0.0
        for increment, gap in zip(increments, gaps):
            now += gap
            entry = store.deposit("q", "http://d", None, increment, now=now)
            assert entry.weight >= 0.0
            store.prune(now)
            assert store.weight("q", "http://d", now=now) >= 0.0


class TestIncrements:
    def test_naive_is_constant_one(self):
        assert increment_naive(1) == 1.0
        assert increment_naive(30) == 1.0
        assert increment_naive() == 1.0

    def test_reciprocal_of_examination(self):
        table = ExaminationTable({(4, 0): 0.82})
        assert increment_ranking_bias(4, 0, table) == pytest.approx(1.2195, abs=1e-3)

    def test_certain_examination_gives_unity(self):
        table = ExaminationTable({(1, 0): 1.0})
        assert increment_ranking_bias(1, 0, table) == 1.0

    def test_half_probability_doubles(self):
        table = ExaminationTable({(3, 2): 0.5})
        assert increment_ranking_bias(3, 2, table) == pytest.approx(2.0)

    def test_missing_entry_is_a_configuration_error(self):
        table = ExaminationTable({(1, 0): 1.0})
        with pytest.raises(ConfigurationError):
            increment_ranking_bias(5, 0, table)

    def test_always_at_least_one(self):
        table = ExaminationTable.default()
        for position in range(1, 11):
            for last in range(0, position):
                assert increment_ranking_bias(position, last, table) >= 1.0


class TestExaminationTable:
    def test_rejects_out_of_range_probability(self):
        with pytest.raises(ValueError):
            ExaminationTable({(1, 0): 0.0})
        with pytest.raises(ValueError):
            ExaminationTable({(1, 0): 1.5})

    def test_rejects_bad_index(self):
        with pytest.raises(ValueError):
            ExaminationTable({(2, 2): 0.5})

    def test_default_table_anchors(self):
        table = ExaminationTable.default()
        assert table.probability(1, 0) == 1.0
        assert table.probability(4, 0) == pytest.approx(0.82)

    def test_default_covers_deep_positions(self):
        table = ExaminationTable.default()
        assert 0.0 < table.probability(50, 0) <= 1.0
        assert 0.0 < table.probability(19, 11) <= 1.0

    def test_round_trips_through_file(self, tmp_path):
        table = ExaminationTable({(1, 0): 1.0, (2, 0): 0.9, (2, 1): 0.95})
        path = tmp_path / "exam.tsv"
        table.save(path)
        reloaded = ExaminationTable.load(path)
        for index in table:
            assert reloaded.probability(*index) == table.probability(*index)


class TestElaborateOrder:
    def test_click_one_three_five(self):
        page = [f"d{i}" for i in range(1, 11)]
        got = derive_elaborate_order(page, {1, 3, 5})
        assert got == [("d1", 1), ("d3", 2), ("d5", 3), ("d2", 4), ("d4", 5)]

    def test_single_first_click(self):
        page = [f"d{i}" for i in range(1, 11)]
        assert derive_elaborate_order(page, {1}) == [("d1", 1)]

    def test_clicks_two_and_three(self):
        page = [f"d{i}" for i in range(1, 6)]
        got = derive_elaborate_order(page, {2, 3})
        assert got == [("d2", 1), ("d3", 2), ("d1", 3)]

    def test_empty_clicks_is_no_preference(self):
        with pytest.raises(NoPreferenceError):
            derive_elaborate_order(["d1"], set())

    def test_out_of_bounds_rank(self):
        with pytest.raises(ValueError):
            derive_elaborate_order(["d1", "d2"], {3})

    def test_postconditions_exhaustively_small_pages(self):
        # brute force over every page length <= 6 and click subset
        for length in range(1, 7):
            page = [f"d{i}" for i in range(1, length + 1)]
            for mask in range(1, 2 ** length):
                clicks = {i + 1 for i in range(length) if mask >> i & 1}
                got = derive_elaborate_order(page, clicks)
                last = max(clicks)
                docs = [doc for doc, _ in got]
                positions = [position for _, position in got]
                assert positions == list(range(1, len(got) + 1))
                # clicked docs first, in click-rank order
                assert docs[:len(clicks)] == [page[r - 1] for r in sorted(clicks)]
                # then the skipped docs above the last click, original order
                skipped = [page[r - 1] for r in range(1, last) if r not in clicks]
                assert docs[len(clicks):] == skipped
                # nothing at or below the last click that was not clicked
                assert set(docs) == {page[r - 1] for r in clicks} | set(skipped)


class TestQueryKeys:
    def test_ngram_expansion(self):
        got = expand_query_keys("michael jordan statistician", "ngram")
        assert got == {
            "michael", "jordan", "statistician",
            "michael jordan", "jordan statistician",
            "michael jordan statistician",
        }

    def test_single_token(self):
        assert expand_query_keys("ants", "ngram") == {"ants"}

    def test_exact_mode(self):
        assert expand_query_keys("ants", "exact") == {"ants"}

    def test_blank_query_rejected(self):
        with pytest.raises(ValueError):
            expand_query_keys("   ")

    @given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=60))
    def test_normalize_is_idempotent(self, text):
        once = normalize_query(text)
        assert normalize_query(once) == once

    @given(st.lists(st.text(alphabet="abcxyz", min_size=1, max_size=6),
                    min_size=1, max_size=6))
    def test_ngram_count(self, tokens):
        query = " ".join(tokens)
        n = len(normalize_query(query).split())
        distinct = {
            " ".join(normalize_query(query).split()[i:j])
            for i in range(n) for j in range(i + 1, n + 1)
        }
        assert expand_query_keys(query, "ngram") == distinct


class TestRecommend:
    def test_unknown_query_is_empty(self):
        store = make_store()
        assert store.recommend({"nothing"}, 3, now=0.0, rng=random.Random(1)) == []

    def test_single_candidate_exhausts(self):
        store = make_store()
        store.deposit("q", "http://only", None, 1.0, now=0.0)
        got = store.recommend({"q"}, 3, now=0.0, rng=random.Random(1))
        assert got == ["http://only"]

    def test_invalid_k(self):
        store = make_store()
        with pytest.raises(ValueError):
            store.recommend({"q"}, 0, now=0.0, rng=random.Random(1))

    def test_first_draw_frequency_matches_weights(self):
        store = make_store()
        store.deposit("q", "http://heavy", None, 3.0, now=0.0)
        store.deposit("q", "http://light", None, 1.0, now=0.0)
        rng = random.Random(12345)
        draws = 10_000
        heavy_first = sum(
            store.recommend({"q"}, 1, now=0.0, rng=rng)[0] == "http://heavy"
            for _ in range(draws)
        )
        assert heavy_first / draws == pytest.approx(0.75, abs=0.02)

    def test_first_draw_converges_for_several_candidates(self):
        weights = {"http://a": 5.0, "http://b": 2.0, "http://c": 1.0}
        store = make_store()
        for doc, weight in weights.items():
            store.deposit("q", doc, None, weight, now=0.0)
        rng = random.Random(4242)
        draws = 10_000
        counts = {doc: 0 for doc in weights}
        for _ in range(draws):
            counts[store.recommend({"q"}, 1, now=0.0, rng=rng)[0]] += 1
        bound = 3 * math.sqrt(0.25 / draws)
        total = sum(weights.values())
        for doc, weight in weights.items():
            assert abs(counts[doc] / draws - weight / total) <= bound

    @given(weights=st.lists(st.floats(0.1, 50.0), min_size=1, max_size=6),
           seed=st.integers(0, 2 ** 32 - 1))
    def test_deterministic_given_seed(self, weights, seed):
        store = make_store()
        for i, weight in enumerate(weights):
            store.deposit("q", f"http://d{i}", None, weight, now=0.0)
        first = store.recommend({"q"}, 3, now=0.0, rng=random.Random(seed))
        second = store.recommend({"q"}, 3, now=0.0, rng=random.Random(seed))
        assert first == second

    def test_sums_weights_across_keys(self):
        store = make_store()
        store.deposit("michael", "http://d", None, 1.0, now=0.0)
        store.deposit("jordan", "http://d", None, 2.0, now=0.0)
        store.deposit("jordan", "http://other", None, 0.5, now=0.0)
        got = store.recommend({"michael", "jordan"}, 2, now=0.0, rng=random.Random(7))
        assert set(got) == {"http://d", "http://other"}

    def test_elaborate_sums_positions_per_document(self):
        store = make_store(Flavor.ELABORATE)
        store.deposit("q", "http://d", 1, 1.0, now=0.0)
        store.deposit("q", "http://d", 4, 1.0, now=0.0)
        got = store.recommend({"q"}, 1, now=0.0, rng=random.Random(3))
        assert got == ["http://d"]

    def test_never_returns_more_than_k(self):
        store = make_store()
        for i in range(10):
            store.deposit("q", f"http://d{i}", None, 1.0, now=0.0)
        assert len(store.recommend({"q"}, 4, now=0.0, rng=random.Random(0))) == 4


class TestPrune:
    def test_empty_store(self):
        assert make_store().prune(now=0.0) == 0

    def test_decayed_entry_removed(self):
        store = make_store(epsilon=1e-6)
        store.deposit("q", "http://d", None, 1.0, now=0.0)
        assert store.prune(now=40 * DAY) == 1
        assert len(store) == 0

    def test_fresh_entry_survives(self):
        store = make_store(epsilon=1e-6)
        store.deposit("q", "http://d", None, 1.0, now=0.0)
        assert store.prune(now=0.0) == 0
        assert len(store) == 1

    def test_survivors_meet_the_floor(self):
        store = make_store(epsilon=1e-3)
        for i, age in enumerate([0.0, 5 * DAY, 15 * DAY]):
            store.deposit("q", f"http://d{i}", None, 1.0, now=0.0)
        now = 15 * DAY
        store.prune(now)
        for (_, doc, _), entry in store.entries().items():
            assert evaporated_weight(entry, now, store.decay) >= 1e-3


class TestRankingBiasDominatesNaive:
    @given(
        clicks=st.lists(
            st.tuples(st.integers(1, 10), st.integers(0, 9)).filter(lambda c: c[1] < c[0]),
            min_size=1, max_size=15,
        ),
        gaps=st.lists(st.floats(0.0, DAY), min_size=15, max_size=15),
    )
    def test_rb_weight_at_least_naive(self, clicks, gaps):
        table = ExaminationTable.default()
        naive = make_store(Flavor.NAIVE)
        biased = make_store(Flavor.RANKING_BIAS)
        now = 0.0
        for (position, last), gap in zip(clicks, gaps):
            now += gap
            naive.deposit("q", "http://d", None, increment_naive(), now=now)
            biased.deposit("q", "http://d", None,
                           increment_ranking_bias(position, last, table), now=now)
        assert biased.weight("q", "http://d") >= naive.weight("q", "http://d") - 1e-12


class TestSnapshotPersistence:
    def test_round_trip_byte_identical(self, tmp_path):
        store = make_store()
        store.deposit("ants", "http://a", None, 1.0, now=1143920723.0)
        store.deposit("bees wax", "http://b", None, 2.5, now=1143920000.0)
        first = tmp_path / "one.tsv"
        second = tmp_path / "two.tsv"
        store.save(first)
        PheromoneStore.load(first, Flavor.NAIVE).save(second)
        assert first.read_bytes() == second.read_bytes()

    def test_round_trip_with_positions(self, tmp_path):
        store = make_store(Flavor.ELABORATE)
        store.deposit("q", "http://a", 1, 1.0, now=10.0)
        store.deposit("q", "http://a", 2, 0.25, now=20.0)
        path = tmp_path / "store.tsv"
        store.save(path)
        reloaded = PheromoneStore.load(path, Flavor.ELABORATE)
        assert reloaded.entry("q", "http://a", 2) == store.entry("q", "http://a", 2)

    def test_load_rejects_flavor_mismatch(self, tmp_path):
        store = make_store(Flavor.ELABORATE)
        store.deposit("q", "http://a", 1, 1.0, now=0.0)
        path = tmp_path / "store.tsv"
        store.save(path)
        with pytest.raises(FlavorKeyError):
            PheromoneStore.load(path, Flavor.NAIVE)


class TestConcurrency:
    def test_reads_race_writes_without_tearing(self):
        store = make_store()
        store.deposit("q", "http://seed", None, 1.0, now=0.0)
        stop = threading.Event()
        errors = []

        def writer():
            now = 1.0
            while not stop.is_set():
                store.deposit("q", f"http://d{int(now) % 5}", None, 0.5, now=now)
                now += 1.0

        def reader():
            rng = random.Random(0)
            while not stop.is_set():
                try:
                    store.recommend({"q"}, 3, now=1e9, rng=rng)
                except Exception as exc:  # noqa: BLE001 - the test wants any failure
                    errors.append(exc)

        threads = [threading.Thread(target=writer)] + [
            threading.Thread(target=reader) for _ in range(3)
        ]
        for thread in threads:
            thread.start()
        threading.Event().wait(0.3)
        stop.set()
        for thread in threads:
            thread.join()
        assert errors == []
