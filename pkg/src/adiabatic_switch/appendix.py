"""Exhaustive high-precision checks of the combinatorial inequalities behind the bounds.

Every instance is evaluated with mpmath at ``DPS`` digits, compared in
log-space, with the convention 0^0 = 1.  The margin of an instance is
log(RHS) - log(LHS); an instance passes when the margin is >= -MARGIN_TOL
(several inequalities hold with equality on a boundary, e.g. k2 = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath as mp

DPS = 50
MARGIN_TOL = mp.mpf("1e-40")


def _pw(a, e):
    a = mp.mpf(a)
    return mp.mpf(1) if a == 0 else a ** e


def kappa(alpha) -> mp.mpf:
    """4^{-(alpha-3/2)} / (1 - 4^{-(alpha-1)})."""
    a = mp.mpf(alpha)
    return mp.mpf(4) ** (-(a - mp.mpf("1.5"))) / (1 - mp.mpf(4) ** (-(a - 1)))


def _multinomial(parts):
    out = mp.factorial(sum(parts))
    for p in parts:
        out /= mp.factorial(p)
    return out


def _compositions(k, parts):
    if parts == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(k - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class AppendixRanges:
    """Instance ranges (inclusive) for each inequality family."""

    lemma1_k: tuple = (0, 12)
    lemma1_n: tuple = (1, 8)
    lemma1_alpha: tuple = (1.0, 1.5, 2.0, 3.0)
    cor2_k: tuple = (1, 10)
    cor2_n: tuple = (0, 10)
    cor2_alpha: tuple = (1.5, 2.0, 3.0)
    weights_n: tuple = (1, 100)
    lemma2_k: tuple = (1, 8)
    lemma2_n: tuple = (0, 6)
    lemma2_alpha: tuple = (1.5, 2.0, 3.0)


@dataclass
class InstanceResult:
    family: str
    params: dict
    log_lhs: float
    log_rhs: float
    margin: float
    passed: bool


@dataclass
class FamilyReport:
    family: str
    instances: int = 0
    failures: int = 0
    worst_margin: float = float("inf")
    worst_params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0


@dataclass
class VerificationReport:
    families: dict
    instances: list

    @property
    def all_passed(self) -> bool:
        return all(f.passed for f in self.families.values())

    def summary_lines(self):
        for name, f in self.families.items():
            status = "PASS" if f.passed else "FAIL"
            yield (f"{name}: {status} instances={f.instances} failures={f.failures} "
                   f"worst_margin={f.worst_margin:.6g} at {f.worst_params}")


class _Collector:
    def __init__(self, keep_instances):
        self.families = {}
        self.instances = [] if keep_instances else None

    def add(self, family, params, lhs, rhs):
        log_lhs = mp.log(lhs) if lhs > 0 else mp.ninf
        log_rhs = mp.log(rhs)
        margin = log_rhs - log_lhs
        passed = bool(margin >= -MARGIN_TOL)
        rep = self.families.setdefault(family, FamilyReport(family))
        rep.instances += 1
        rep.failures += not passed
        m = float(margin)
        if m < rep.worst_margin:
            rep.worst_margin, rep.worst_params = m, dict(params)
        if self.instances is not None:
            self.instances.append(InstanceResult(family, dict(params), float(log_lhs),
                                                 float(log_rhs), m, passed))


def _lemma1(col, r):
    for al in r.lemma1_alpha:
        a = mp.mpf(al)
        for k1 in range(r.lemma1_k[0], r.lemma1_k[1] + 1):
            for k2 in range(r.lemma1_k[0], r.lemma1_k[1] + 1):
                k = k1 + k2
                binom = mp.binomial(k, k1)
                for n in range(r.lemma1_n[0], r.lemma1_n[1] + 1):
                    lhs = binom * _pw(k1 + n, a * (k1 + n)) * _pw(k2, a * k2)
                    rhs = mp.mpf(4) ** (-(a - 1) * min(k1 + n, k2)) * _pw(k + n, a * (k + n))
                    col.add("lemma1", dict(alpha=al, k1=k1, k2=k2, n=n), lhs, rhs)
                    for i in range(1, n + 1):
                        lhs = (binom * _pw(k1 + n + 1 - i, a * (k1 + n + 1 - i))
                               * _pw(k2 + i, a * (k2 + i)))
                        rhs = (mp.mpf(4) ** (-(a - 1) * min(k1 + 1, k2 + 1))
                               * _pw(k + n + 1, a * (k + n + 1)))
                        col.add("corollary1", dict(alpha=al, k1=k1, k2=k2, n=n, i=i), lhs, rhs)


def _weight(n, i):
    return 1 / ((10 * n + mp.mpf("10.3") - 10 * i) ** 2 * (10 * i + mp.mpf("0.3")) ** 2)


def _corollary2(col, r):
    for al in r.cor2_alpha:
        a = mp.mpf(al)
        kap = kappa(al)
        for k in range(r.cor2_k[0], r.cor2_k[1] + 1):
            for n in range(r.cor2_n[0], r.cor2_n[1] + 1):
                lhs = mp.mpf(0)
                for i in range(1, n + 1):
                    w = _weight(n, i)
                    for k1 in range(k + 1):
                        k2 = k - k1
                        e1, e2 = k1 + 3 * (n + 1 - i), k2 + 3 * i
                        lhs += w * mp.binomial(k, k1) * _pw(e1, a * e1) * _pw(e2, a * e2)
                m = k + 3 * (n + 1)
                rhs = mp.mpf("0.05") * kap * _pw(m, a * m) / (10 * n + mp.mpf("10.3")) ** 2
                col.add("corollary2", dict(alpha=al, k=k, n=n), lhs, rhs)


def _weights(col, r):
    for n in range(r.weights_n[0], r.weights_n[1] + 1):
        lhs = mp.fsum(_weight(n, i) for i in range(1, n + 1))
        rhs = mp.mpf("0.05") / (10 * n + mp.mpf("10.3")) ** 2
        col.add("weight_sum", dict(n=n), lhs, rhs)


def _lemma2(col, r):
    for al in r.lemma2_alpha:
        a = mp.mpf(al)
        kap = kappa(al)
        for k in range(r.lemma2_k[0], r.lemma2_k[1] + 1):
            for n in range(r.lemma2_n[0], r.lemma2_n[1] + 1):
                rhs0 = _pw(k + n, a * (k + n))
                for parts, power in ((3, 2), (4, 3)):
                    lhs = mp.mpf(0)
                    for comp in _compositions(k, parts):
                        term = _multinomial(comp) * _pw(comp[0] + n, a * (comp[0] + n))
                        for c in comp[1:]:
                            term *= _pw(c, a * c)
                        lhs += term
                    col.add(f"lemma2_{parts}", dict(alpha=al, k=k, n=n), lhs, kap ** power * rhs0)


FAMILIES = {
    "lemma1": _lemma1,          # also produces corollary1
    "corollary2": _corollary2,
    "weight_sum": _weights,
    "lemma2": _lemma2,
}


def verify_appendix(ranges: AppendixRanges | None = None, *, families=None,
                    keep_instances: bool = True) -> VerificationReport:
    """Check every configured instance of the appendix inequalities.

    Parameters
    ----------
    ranges : AppendixRanges, optional
        Instance ranges; defaults cover the standard grid.
    families : iterable of str, optional
        Subset of ``FAMILIES`` to run (default: all).
    keep_instances : bool
        Retain the per-instance results (needed for CSV export).

    Returns
    -------
    VerificationReport
        Per-family counts, failures and worst margins.
    """
    r = ranges or AppendixRanges()
    col = _Collector(keep_instances)
    with mp.workdps(DPS):
        for name in families or FAMILIES:
            FAMILIES[name](col, r)
    return VerificationReport(families=col.families, instances=col.instances or [])
