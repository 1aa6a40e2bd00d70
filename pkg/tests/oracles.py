"""Deliberately naive reference implementations used only by the tests."""

import itertools
import math
from collections import Counter


def ari_pairs(a, b):
    """Adjusted Rand index by looking at every pair of points."""
    n = len(a)
    both = same_a = same_b = 0
    for i, j in itertools.combinations(range(n), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        same_a += sa
        same_b += sb
        both += sa and sb
    total = n * (n - 1) // 2
    expected = same_a * same_b / total if total else 0.0
    top = (same_a + same_b) / 2
    if top == expected:
        return 1.0
    return (both - expected) / (top - expected)


def entropy(labels):
    n = len(labels)
    return -sum(c / n * math.log(c / n) for c in Counter(labels).values())


def mutual_info(a, b):
    n = len(a)
    ca, cb, cab = Counter(a), Counter(b), Counter(zip(a, b))
    return sum(nij / n * math.log(n * nij / (ca[x] * cb[y])) for (x, y), nij in cab.items())


def expected_mutual_info(a, b):
    """Hypergeometric series written with exact binomial coefficients."""
    n = len(a)
    total = 0.0
    for ai in Counter(a).values():
        for bj in Counter(b).values():
            denom = math.comb(n, bj)
            for nij in range(max(1, ai + bj - n), min(ai, bj) + 1):
                p = math.comb(ai, nij) * math.comb(n - ai, bj - nij) / denom
                total += p * nij / n * math.log(n * nij / (ai * bj))
    return total


def ami_series(a, b):
    mi, emi = mutual_info(a, b), expected_mutual_info(a, b)
    return (mi - emi) / ((entropy(a) + entropy(b)) / 2 - emi)


def conditional_entropy(a, b):
    """H(a | b)."""
    n = len(a)
    cb, cab = Counter(b), Counter(zip(a, b))
    return -sum(nij / n * math.log(nij / cb[y]) for (x, y), nij in cab.items())


def hcv(truth, pred):
    ht, hp = entropy(truth), entropy(pred)
    h = 1.0 if ht == 0 else 1.0 - conditional_entropy(truth, pred) / ht
    c = 1.0 if hp == 0 else 1.0 - conditional_entropy(pred, truth) / hp
    v = 0.0 if h + c == 0 else 2 * h * c / (h + c)
    return h, c, v
