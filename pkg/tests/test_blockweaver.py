import random

import pytest
from hypothesis import given, strategies as st

from conftest import brute_blocks
from vlmscore.blockweaver import (
    TextBlock,
    make_blocks,
    step1_assign,
    step2_super_predictions,
    step3_bucketize,
    step4_super_gt,
    weave,
)
from vlmscore.synthetic import segment_at_spaces, unique_bigram_text
from vlmscore.textmatch import MatchConfig


# -- a deliberately naive re-implementation used as an oracle ---------------

def _cov(a, b):
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    x, y = sorted([a, b], key=lambda s: (len(s), s))
    return sum(k for _, _, k in brute_blocks(x, y, 2)) / min(len(a), len(b))


def _pos(piece, host):
    blocks = brute_blocks(piece, host, 2)
    total = sum(k for _, _, k in blocks)
    if not total:
        return float("inf")
    return sum(k * (j + k / 2) for _, j, k in blocks) / total


def reference_weave(P, G, tau=0.30):
    assign = {}
    for pi, p in enumerate(P):
        scores = [_cov(p, g) for g in G]
        if scores and max(scores) > tau:
            assign[pi] = scores.index(max(scores))
    sp = {}
    for gi in sorted(set(assign.values())):
        members = sorted((pi for pi in assign if assign[pi] == gi), key=lambda pi: (_pos(P[pi], G[gi]), pi))
        sp[gi] = " ".join(P[pi] for pi in members)
    buckets = {gi: [gi] for gi in sp}
    left_g = []
    for gi in range(len(G)):
        if gi in sp:
            continue
        seeds = sorted(sp)
        scores = [_cov(G[gi], sp[s]) for s in seeds]
        if scores and max(scores) > tau:
            buckets[seeds[scores.index(max(scores))]].append(gi)
        else:
            left_g.append(gi)
    pairs = []
    for s in sorted(buckets):
        members = sorted(buckets[s], key=lambda gi: (_pos(G[gi], sp[s]), gi))
        pairs.append((sp[s], " ".join(G[gi] for gi in members)))
    left_p = [pi for pi in range(len(P)) if pi not in assign]
    return pairs, left_p, left_g


def summary(w):
    return (
        [(sp.text.text, sg.text.text) for sp, sg in w.pairs],
        [b.index for b in w.unmatched_pred],
        [b.index for b in w.unmatched_gt],
    )


# -- step examples -----------------------------------------------------------

class TestStep1:
    def test_split_prediction_maps_to_one_gt(self):
        P, G = make_blocks(["Hello World", "Today"]), make_blocks(["Hello World Today"])
        a = step1_assign(P, G)
        assert a.pred_to_gt == {0: 0, 1: 0} and a.unmatched_pred == ()

    def test_no_overlap_stays_unmatched(self):
        a = step1_assign(make_blocks(["zzz"]), make_blocks(["Hello"]))
        assert a.pred_to_gt == {} and a.unmatched_pred == (0,)

    def test_tie_goes_to_lowest_index(self):
        a = step1_assign(make_blocks(["ab"]), make_blocks(["ab", "ab"]))
        assert a.pred_to_gt == {0: 0}

    def test_threshold_is_strict(self):
        cfg = MatchConfig(tau=0.5)
        P, G = make_blocks(["abcd"]), make_blocks(["abzz"])  # coverage 2/4 = 0.5
        assert step1_assign(P, G, cfg).unmatched_pred == (0,)
        assert step1_assign(P, G, MatchConfig(tau=0.49)).pred_to_gt == {0: 0}

    def test_empty_gt(self):
        assert step1_assign(make_blocks(["abc"]), []).unmatched_pred == (0,)


class TestStep2:
    def test_orders_by_position_in_gt(self):
        P, G = make_blocks(["Hello World", "Today"]), make_blocks(["Hello World Today"])
        a = step1_assign(P, G)
        # "Hello World" centres at 5.5, "Today" at 14.5
        sp = step2_super_predictions(a, P, G)
        assert sp[0].text.text == "Hello World Today" and sp[0].members == (0, 1)
        P2 = make_blocks(["Today", "Hello World"])
        sp2 = step2_super_predictions(step1_assign(P2, G), P2, G)
        assert sp2[0].text.text == "Hello World Today" and sp2[0].members == (1, 0)

    def test_single_member(self):
        P, G = make_blocks(["Hello"]), make_blocks(["Hello there"])
        sp = step2_super_predictions(step1_assign(P, G), P, G)
        assert sp[0].text.text == "Hello"

    def test_equal_positions_keep_index_order(self):
        P, G = make_blocks(["ab", "ab"]), make_blocks(["ab"])
        sp = step2_super_predictions(step1_assign(P, G), P, G)
        assert sp[0].members == (0, 1)


class TestStep3:
    def _supers(self, sp_text, seed_text):
        P, G = make_blocks([sp_text]), make_blocks([seed_text])
        return step2_super_predictions(step1_assign(P, G), P, G)

    def test_contained_block_joins_bucket(self):
        supers = self._supers("Fresh Coffee Daily Special", "Fresh Coffee")
        buckets, left = step3_bucketize(supers, [TextBlock(1, make_blocks(["Daily Special"])[0].text)])
        assert buckets == {0: [0, 1]} and left == []

    def test_short_block_without_bigram_stays(self):
        supers = self._supers("Fresh Coffee", "Fresh Coffee")
        g = TextBlock(1, make_blocks(["Daily"])[0].text)
        buckets, left = step3_bucketize(supers, [g])
        assert buckets == {0: [0]} and left == [g]

    def test_nothing_unmatched(self):
        supers = self._supers("Fresh Coffee", "Fresh Coffee")
        assert step3_bucketize(supers, []) == ({0: [0]}, [])


class TestStep4:
    def test_bucket_ordered_by_position(self):
        G = make_blocks(["Daily Special", "Fresh Coffee"])
        P = make_blocks(["Fresh Coffee Daily Special"])
        a = step1_assign(P, G)
        supers = step2_super_predictions(a, P, G)
        seed = next(iter(supers))
        others = [g for g in G if g.index != seed]
        buckets, left = step3_bucketize(supers, others)
        w = step4_super_gt(buckets, supers, G)
        assert w.pairs[0][1].text.text == "Fresh Coffee Daily Special"

    def test_singleton_bucket(self):
        G = make_blocks(["Fresh Coffee"])
        P = make_blocks(["Fresh Coffee"])
        supers = step2_super_predictions(step1_assign(P, G), P, G)
        w = step4_super_gt({0: [0]}, supers, G)
        assert w.pairs[0][1].text.text == "Fresh Coffee"

    def test_no_buckets(self):
        G = make_blocks(["a b"])
        w = step4_super_gt({}, {}, G, unmatched_gt=G)
        assert w.pairs == () and [b.index for b in w.unmatched_gt] == [0]


class TestWeave:
    def test_split_prediction(self):
        w = weave(["Hello World", "Today"], ["Hello World Today"])
        assert summary(w) == ([("Hello World Today", "Hello World Today")], [], [])

    def test_many_to_one(self):
        w = weave(["Fresh Coffee Daily Special"], ["Fresh Coffee", "Daily Special"])
        assert summary(w) == ([("Fresh Coffee Daily Special", "Fresh Coffee Daily Special")], [], [])

    def test_empty_prediction(self):
        w = weave([], ["X Y"])
        assert w.pairs == () and [b.text.text for b in w.unmatched_gt] == ["X Y"]

    def test_both_empty(self):
        w = weave([], [])
        assert w.pairs == () and w.unmatched_pred == () and w.unmatched_gt == ()

    def test_duplicate_index_rejected(self):
        b = make_blocks(["abc"])[0]
        with pytest.raises(ValueError):
            weave([b, b], [])

    @given(
        st.lists(st.text(alphabet="abcd ", max_size=10), max_size=5),
        st.lists(st.text(alphabet="abcd ", max_size=10), max_size=5),
    )
    def test_matches_reference(self, P, G):
        cfg = MatchConfig()
        Pn = [b.text.text for b in make_blocks(P, cfg)]
        Gn = [b.text.text for b in make_blocks(G, cfg)]
        assert summary(weave(P, G)) == reference_weave(Pn, Gn)

    @given(
        st.lists(st.text(alphabet="abcxyz ", max_size=12), max_size=8),
        st.lists(st.text(alphabet="abcxyz ", max_size=12), max_size=8),
    )
    def test_partition(self, P, G):
        w = weave(P, G)
        pred_seen = [i for sp, _ in w.pairs for i in sp.members] + [b.index for b in w.unmatched_pred]
        gt_seen = [i for _, sg in w.pairs for i in sg.members] + [b.index for b in w.unmatched_gt]
        assert sorted(pred_seen) == list(range(len(P)))
        assert sorted(gt_seen) == list(range(len(G)))

    @given(st.integers(0, 10_000))
    def test_reconstruction(self, seed):
        rng = random.Random(seed)
        text = unique_bigram_text(rng, rng.randint(40, 120))
        P, G = segment_at_spaces(rng, text), segment_at_spaces(rng, text)
        rng.shuffle(P)
        w = weave(P, G)
        assert not w.unmatched_pred and not w.unmatched_gt
        assert " ".join(sp.text.text for sp, _ in w.pairs) == " ".join(sg.text.text for _, sg in w.pairs)

    def test_deterministic(self):
        P = ["OPEN Daily", "50% OFF", "Menu", "zz"]
        G = ["OPEN", "Daily 50%", "OFF Menu"]
        assert weave(P, G) == weave(P, G)
