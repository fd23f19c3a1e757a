import io
import json

import pytest

from maskbridge.adapter import serve
from maskbridge.hashing import echo_score, echo_token


def _drive(*lines, backend="echo", hook=None):
    stdin = io.StringIO("".join(json.dumps(obj) + "\n" for obj in lines))
    stdout = io.StringIO()
    status = serve(stdin, stdout, backend=backend, hook=hook)
    replies = [json.loads(line) for line in stdout.getvalue().splitlines()]
    return status, replies


HELLO = {"type": "hello", "version": 1, "seed": 7, "vocab_size": 64}
BYE = {"type": "bye"}


def test_handshake_and_shutdown():
    status, replies = _drive(HELLO, BYE)
    assert status == 0
    assert replies == [{"type": "hello_ack", "version": 1}]


def test_query_answers_null_slots_only():
    query = {"type": "score", "step": 5, "n": 4, "slots": [None, 9, None, 3]}
    status, replies = _drive(HELLO, query, BYE)
    assert status == 0
    scores = replies[1]
    assert scores["type"] == "scores" and scores["step"] == 5
    assert [e["pos"] for e in scores["entries"]] == [0, 2]
    # Position 3 vector is frozen in PROTOCOL.md.
    five = {"type": "score", "step": 5, "n": 4, "slots": [1, 1, 1, None]}
    _, replies = _drive(HELLO, five, BYE)
    entry = replies[1]["entries"][0]
    assert entry == {"pos": 3, "token": 58, "score": 0.22846089989699347}


def test_one_reply_per_query_in_order():
    queries = [
        {"type": "score", "step": t, "n": 2, "slots": [None, None]} for t in range(1, 6)
    ]
    status, replies = _drive(HELLO, *queries, BYE)
    assert status == 0
    assert [r["step"] for r in replies[1:]] == [1, 2, 3, 4, 5]


def test_scores_are_pure_functions_of_seed_pos_step():
    query = {"type": "score", "step": 2, "n": 3, "slots": [None, None, None]}
    _, first = _drive(HELLO, query, query, BYE)
    assert first[1] == first[2]
    for entry in first[1]["entries"]:
        assert entry["score"] == echo_score(7, entry["pos"], 2)
        assert entry["token"] == echo_token(7, entry["pos"], 2, 64)


def test_version_mismatch_exits_3():
    status, replies = _drive({"type": "hello", "version": 2, "seed": 0, "vocab_size": 8})
    assert status == 3
    assert replies[-1]["type"] == "error"


def test_malformed_line_exits_3():
    stdin = io.StringIO(json.dumps(HELLO) + "\nnot json at all\n")
    stdout = io.StringIO()
    assert serve(stdin, stdout) == 3
    assert json.loads(stdout.getvalue().splitlines()[-1])["type"] == "error"


def test_unknown_fields_rejected():
    bad = {"type": "score", "step": 1, "n": 1, "slots": [None], "temperature": 0.7}
    status, replies = _drive(HELLO, bad)
    assert status == 3
    assert replies[-1]["type"] == "error"


def test_slot_length_mismatch_rejected():
    bad = {"type": "score", "step": 1, "n": 3, "slots": [None]}
    status, replies = _drive(HELLO, bad)
    assert status == 3


def test_eof_without_bye_is_clean():
    status, replies = _drive(HELLO)
    assert status == 0


def test_custom_hook_backend():
    def hook(slots, step):
        return [(p, 1, 0.25) for p, s in enumerate(slots) if s is None]

    query = {"type": "score", "step": 1, "n": 3, "slots": [None, 5, None]}
    status, replies = _drive(HELLO, query, BYE, backend="custom-hook", hook=hook)
    assert status == 0
    assert replies[1]["entries"] == [
        {"pos": 0, "token": 1, "score": 0.25},
        {"pos": 2, "token": 1, "score": 0.25},
    ]


def test_backend_validation():
    with pytest.raises(ValueError):
        serve(io.StringIO(), io.StringIO(), backend="gpu")
    with pytest.raises(ValueError):
        serve(io.StringIO(), io.StringIO(), backend="custom-hook")
