import json
import random

import pytest

from masksched.denoise import OracleParams, OracleSession, UniformSession
from masksched.errors import DomainError, EmptyQueryError
from masksched.seqcore import finalize, new_state


def _field_json(field):
    return json.dumps(
        {str(k): [v[0], v[1]] for k, v in sorted(field.entries.items())}
    )


class TestUniform:
    def test_domain_equals_masked_positions(self):
        state = finalize(new_state(6), [(1, 3), (4, 9)])
        field = UniformSession(seed=0, vocab_size=64).score_all(state, 2)
        assert field.positions() == {0, 2, 3, 5}
        assert all(0.0 <= s < 1.0 for _, s in field.entries.values())

    def test_deterministic_and_step_dependent(self):
        state = new_state(8)
        sess = UniformSession(seed=11, vocab_size=32)
        assert _field_json(sess.score_all(state, 1)) == _field_json(sess.score_all(state, 1))
        assert _field_json(sess.score_all(state, 1)) != _field_json(sess.score_all(state, 2))

    def test_empty_query(self):
        state = finalize(new_state(2), [(0, 1), (1, 1)])
        with pytest.raises(EmptyQueryError):
            UniformSession(seed=0, vocab_size=8).score_all(state, 1)

    def test_vocab_validation(self):
        with pytest.raises(DomainError):
            UniformSession(seed=0, vocab_size=1)


def _oracle(params, n=16, seed=0, vocab=8, segment_ids=None, target=None):
    target = target if target is not None else list(range(n))
    return OracleSession(params, seed, vocab, target, segment_ids)


class TestOracle:
    def test_flat_params_give_base_everywhere(self):
        sess = _oracle(OracleParams(base=0.5, gain=0.0, noise_amp=0.0))
        field = sess.score_all(new_state(16), 1)
        assert all(s == 0.5 for _, s in field.entries.values())

    def test_two_neighbor_context(self):
        # j=2 with j-1 and j+1 finalized in-segment, j+-2 masked:
        # 0.2 + 0.6 * (2/4) = 0.5 exactly.
        state = finalize(new_state(5), [(1, 1), (3, 3)])
        sess = _oracle(
            OracleParams(base=0.2, gain=0.6, window=2, noise_amp=0.0, segment_discount=1.0),
            n=5,
        )
        assert sess.score_all(state, 1).score(2) == 0.5

    def test_segment_discount(self):
        # Neighbor in a different segment contributes discount instead of 1.
        segs = [0, 0, 1, 1]
        state = finalize(new_state(4), [(1, 1)])
        sess = _oracle(
            OracleParams(base=0.0, gain=1.0, window=2, noise_amp=0.0, segment_discount=0.25),
            n=4,
            segment_ids=segs,
        )
        field = sess.score_all(state, 1)
        assert field.score(0) == 1.0 / 4.0          # same segment as 1
        assert field.score(2) == pytest.approx(0.25 / 4.0)  # discounted
        assert field.score(3) == pytest.approx(0.25 / 4.0)

    def test_monotone_in_context(self):
        # With zero noise, finalizing one more in-segment neighbor within the
        # window never lowers a masked position's score.
        rng = random.Random(7)
        params = OracleParams(base=0.1, gain=0.8, window=2, noise_amp=0.0, segment_discount=1.0)
        for _ in range(100):
            n = 24
            state = new_state(n)
            fills = rng.sample(range(n), rng.randrange(1, n - 2))
            state = finalize(state, [(p, 1) for p in fills])
            sess = _oracle(params, n=n)
            masked = sorted(state.masked())
            j = rng.choice(masked)
            before = sess.score_all(state, 1).score(j)
            near = [q for q in masked if q != j and abs(q - j) <= 2]
            extra = rng.choice(near) if near else rng.choice([q for q in masked if q != j])
            state2 = finalize(state, [(extra, 1)])
            if j in state2.masked():
                after = sess.score_all(state2, 1).score(j)
                assert after >= before

    def test_scores_clamped(self):
        sess = _oracle(OracleParams(base=0.9, gain=5.0, window=1, noise_amp=1.0))
        state = finalize(new_state(16), [(p, 1) for p in range(0, 16, 2)])
        for step in range(1, 5):
            field = sess.score_all(state, step)
            assert all(0.0 <= s <= 1.0 for _, s in field.entries.values())

    def test_always_confident_predicts_target(self):
        target = [3, 1, 4, 1, 5, 9, 2, 6]
        sess = _oracle(OracleParams(base=1.0, gain=0.0, noise_amp=0.0), n=8, target=target)
        field = sess.score_all(new_state(8), 1)
        assert [field.token(j) for j in range(8)] == target

    def test_never_confident_predicts_off_by_one(self):
        target = [3, 1, 4, 1, 5, 9, 2, 6]
        sess = _oracle(
            OracleParams(base=0.0, gain=0.0, noise_amp=0.0), n=8, vocab=10, target=target
        )
        field = sess.score_all(new_state(8), 1)
        assert [field.token(j) for j in range(8)] == [(t + 1) % 10 for t in target]

    def test_param_validation(self):
        for bad in (
            OracleParams(base=-0.1),
            OracleParams(base=1.1),
            OracleParams(gain=-1.0),
            OracleParams(window=0),
            OracleParams(noise_amp=-0.5),
            OracleParams(segment_discount=2.0),
        ):
            with pytest.raises(DomainError):
                _oracle(bad)
        with pytest.raises(DomainError):
            OracleSession(OracleParams(), 0, 8, [1, 2, 3], segment_ids=[0, 0])
