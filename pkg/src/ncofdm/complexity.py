"""Real-operation counts of the two precoding schemes.

Counting rules: a complex addition is two real additions, a complex
multiplication is four real multiplications plus two real additions, and a
real-by-complex multiplication is two real multiplications. The common IDFT
is excluded from both schemes.
"""

from __future__ import annotations

from dataclasses import dataclass

# Printed values of the published numerical comparison, (scheme, V) -> (mults, adds).
PUBLISHED_TABLE = {
    ("NC-OFDM", 0): (524288, 523776),
    ("NC-OFDM", 2): (524288, 523776),
    ("NC-OFDM", 4): (524288, 523776),
    ("TD-NC-OFDM", 0): (8196, 8196),
    ("TD-NC-OFDM", 2): (28732, 28722),
    ("TD-NC-OFDM", 4): (49332, 49314),
}
PUBLISHED_PARAMS = {"K": 256, "N": 2048}

SCHEMES = ("NC-OFDM", "TD-NC-OFDM")


@dataclass(frozen=True)
class OpCount:
    scheme: str
    K: int
    N: int
    V: int
    real_mults: int
    real_adds: int


def closed_form_counts(scheme: str, K: int, N: int, V: int) -> OpCount:
    if K <= 0 or N <= 0 or V < 0:
        raise ValueError("K and N must be positive and V non-negative")
    if scheme == "NC-OFDM":
        mults, adds = 8 * K * K, 8 * K * K - 2 * K
    elif scheme == "TD-NC-OFDM":
        mults = 4 * (V + 1) * N + 8 * V * K + 4 * (V + 1) * (2 * V + 1)
        adds = 4 * (V + 1) * N + 8 * V * K + 2 * (2 * V + 1) ** 2
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return OpCount(scheme, K, N, V, mults, adds)


def complexity_ratio(K: int, N: int, V: int) -> tuple[float, float]:
    """TD count over NC count for (multiplications, additions)."""
    td = closed_form_counts("TD-NC-OFDM", K, N, V)
    nc = closed_form_counts("NC-OFDM", K, N, V)
    return td.real_mults / nc.real_mults, td.real_adds / nc.real_adds


def table_discrepancies(K: int = 256, N: int = 2048) -> list[dict]:
    """Cells where the formulas disagree with the published table."""
    out = []
    for (scheme, V), (pm, pa) in PUBLISHED_TABLE.items():
        c = closed_form_counts(scheme, K, N, V)
        for col, formula, printed in (("real_mults", c.real_mults, pm), ("real_adds", c.real_adds, pa)):
            if formula != printed:
                out.append({"scheme": scheme, "V": V, "column": col, "formula": formula, "printed": printed})
    return out


def complexity_rows(K: int = 256, N: int = 2048, V_set=(0, 2, 4)) -> list[dict]:
    rows = []
    for V in V_set:
        rm, ra = complexity_ratio(K, N, V)
        for scheme in SCHEMES:
            c = closed_form_counts(scheme, K, N, V)
            rows.append({
                "scheme": scheme, "K": K, "N": N, "V": V,
                "mults": c.real_mults, "adds": c.real_adds,
                "ratio": rm if scheme == "TD-NC-OFDM" else 1.0,
            })
    return rows
