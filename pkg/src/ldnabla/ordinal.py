"""Ordinals below omega^omega in Cantor normal form.

An ordinal is a coefficient tuple (a0, a1, ..., ad) meaning
a_d*w^d + ... + a1*w + a0, with trailing zeros trimmed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering


@total_ordering
@dataclass(frozen=True)
class Ordinal:
    coeffs: tuple = ()

    def __post_init__(self):
        c = list(self.coeffs)
        while c and c[-1] == 0:
            c.pop()
        if any(x < 0 for x in c):
            raise ValueError("negative coefficient")
        object.__setattr__(self, "coeffs", tuple(c))

    @staticmethod
    def nat(n: int) -> "Ordinal":
        return Ordinal((n,))

    @staticmethod
    def omega(k: int = 1) -> "Ordinal":
        return Ordinal((0,) * k + (1,))

    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_finite(self) -> bool:
        return len(self.coeffs) <= 1

    def finite_part(self) -> int:
        return self.coeffs[0] if self.coeffs else 0

    def infinite_part(self) -> "Ordinal":
        return Ordinal((0,) + self.coeffs[1:])

    def __lt__(self, other: "Ordinal") -> bool:
        a, b = self.coeffs, other.coeffs
        if len(a) != len(b):
            return len(a) < len(b)
        for x, y in zip(reversed(a), reversed(b)):
            if x != y:
                return x < y
        return False

    def nsum(self, other: "Ordinal") -> "Ordinal":
        """Natural (Hessenberg) sum: coefficient-wise addition."""
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return Ordinal(tuple(x + y for x, y in zip(a, b)))

    def succ(self) -> "Ordinal":
        return self.nsum(Ordinal.nat(1))

    def sup_omega(self) -> "Ordinal":
        """sup over n of self + n: drop the finite part, add one omega."""
        return self.infinite_part().nsum(Ordinal.omega())

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            if i == 0:
                parts.append(str(c))
            else:
                w = "ω" if i == 1 else f"ω^{i}"
                parts.append(w if c == 1 else f"{w}*{c}")
        return " + ".join(parts)


def omax(*xs: Ordinal) -> Ordinal:
    return max(xs, default=Ordinal())


ZERO = Ordinal()
OMEGA = Ordinal.omega()
