"""Word error rate from a minimum-edit-distance alignment."""

from __future__ import annotations

import string
from dataclasses import dataclass, field

from ..errors import UndefinedMetricError

_PUNCT = str.maketrans("", "", string.punctuation)


def tokenize(text: str, casefold: bool = True, strip_punct: bool = False) -> list[str]:
    if casefold:
        text = text.casefold()
    if strip_punct:
        text = text.translate(_PUNCT)
    return text.split()


@dataclass
class WerBreakdown:
    n_sub: int
    n_ins: int
    n_del: int
    n_tok: int
    ops: list[str] = field(default_factory=list, repr=False)

    @property
    def errors(self) -> int:
        return self.n_sub + self.n_ins + self.n_del

    @property
    def wer(self) -> float:
        if self.n_tok == 0:
            raise UndefinedMetricError("WER undefined for an empty reference")
        return self.errors / self.n_tok

    def __add__(self, other: "WerBreakdown") -> "WerBreakdown":
        return WerBreakdown(
            self.n_sub + other.n_sub,
            self.n_ins + other.n_ins,
            self.n_del + other.n_del,
            self.n_tok + other.n_tok,
        )


def edit_table(ref, hyp) -> list[list[int]]:
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(
                d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
            )
    return d


def align(ref, hyp) -> list[str]:
    """One optimal alignment as a list of ops: ``=``, ``S``, ``D``, ``I``.

    Backtracking prefers the diagonal (match/substitution), then deletion,
    then insertion, so counts are deterministic.
    """
    d = edit_table(ref, hyp)
    i, j = len(ref), len(hyp)
    ops = []
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops.append("=" if ref[i - 1] == hyp[j - 1] else "S")
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            ops.append("D")
            i -= 1
        else:
            ops.append("I")
            j -= 1
    return ops[::-1]


def wer(ref_tokens, hyp_tokens) -> WerBreakdown:
    if len(ref_tokens) == 0:
        raise UndefinedMetricError("WER undefined for an empty reference")
    ops = align(list(ref_tokens), list(hyp_tokens))
    return WerBreakdown(ops.count("S"), ops.count("I"), ops.count("D"), len(ref_tokens), ops)
