import pytest
from hypothesis import given
from hypothesis import strategies as st

from siglasso.words import WordIndexing, enumerate_words, parse_word, word_count, word_label


@pytest.mark.parametrize(
    "d, K, expected",
    [(1, 0, 1), (1, 6, 7), (2, 4, 31), (2, 6, 127), (3, 2, 13), (3, 6, 1093)],
)
def test_word_count(d, K, expected):
    assert word_count(d, K) == expected
    assert len(enumerate_words(d, K)) == expected


def test_recursive_order_small():
    idx = enumerate_words(2, 2)
    assert idx.words == ((), (1,), (2,), (1, 1), (2, 1), (1, 2), (2, 2))


def test_first_letter_varies_fastest_at_order_three():
    words = enumerate_words(2, 3).words[7:]
    assert words[:4] == ((1, 1, 1), (2, 1, 1), (1, 2, 1), (2, 2, 1))


@given(st.integers(1, 4), st.integers(0, 4))
def test_flat_index_formula(d, K):
    idx = WordIndexing(d, K)
    for w in idx.words:
        k = len(w)
        offset = word_count(d, k - 1) if k else 0
        local = sum((i - 1) * d**l for l, i in enumerate(w))
        assert idx.index(w) == offset + local


@given(st.integers(1, 3), st.integers(0, 4))
def test_blocks_partition_by_order(d, K):
    idx = WordIndexing(d, K)
    for k in range(K + 1):
        assert all(len(w) == k for w in idx.words[idx.block(k)])
    assert list(idx.orders) == [len(w) for w in idx.words]


@given(st.lists(st.integers(1, 9), max_size=5).map(tuple))
def test_label_roundtrip(word):
    assert parse_word(word_label(word)) == word


def test_labels():
    assert word_label(()) == "()"
    assert word_label((1, 2)) == "(1,2)"
    assert parse_word("(3)") == (3,)


@pytest.mark.parametrize("d, K", [(0, 2), (2, -1)])
def test_invalid(d, K):
    with pytest.raises(ValueError):
        enumerate_words(d, K)


def test_unknown_word():
    with pytest.raises(KeyError, match="not in indexing"):
        enumerate_words(2, 2).index((3,))
