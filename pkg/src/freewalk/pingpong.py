"""Contraction predicates, ping-pong certification and the exact freeness oracle.

Certification is one-sided throughout: a positive verdict witnesses that
the generators form a ping-pong tuple (hence generate a free group), a
negative verdict proves nothing.  The contraction test uses the
sufficient singular-value criterion ratio <= eps**2, not the mapping
definition of eps-contraction, which is strictly weaker to check and
never needed here.

Three evaluation modes:

* float (archimedean default): plain SVD arithmetic, adequate for
  Monte Carlo experiments;
* exact (nonarchimedean default): Fractions end to end, every comparison
  is exact;
* certified (archimedean with exact rational inputs): candidate
  attracting/repelling data from a float SVD is verified with exact
  Rayleigh-quotient and residual bounds plus outward-rounded interval
  arithmetic, so a positive verdict holds at interval endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .decompositions import kak, _kak_padic
from .errors import DomainError, UsageError
from .fields import FieldSpec, Interval, abs_value
from .linalg import (
    dist_point_hyperplane,
    exact_inv,
    exact_matrix,
    exterior_square,
    normalize_representative,
    require_unimodular,
    vector_to_strings,
)


@dataclass(frozen=True)
class ContractionData:
    """Attracting point, repelling hyperplane covector, and their margins."""

    v: np.ndarray
    h: np.ndarray
    ratio: object  # float or Fraction, |a_2 / a_1|
    separation: object  # float or Fraction, delta(v, Ker h)


def contraction_data(g: np.ndarray, field: FieldSpec) -> ContractionData:
    """Contraction data of a determinant-1 matrix, via its KAK decomposition."""
    dec = kak(g, field)
    ratio = abs_value(dec.a[1], field) / abs_value(dec.a[0], field)
    sep = dist_point_hyperplane(dec.v, dec.h, field)
    return ContractionData(v=dec.v, h=dec.h, ratio=ratio, separation=sep)


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")


def _check_r_eps(r: float, eps: float) -> None:
    if not r > 2 * eps > 0:
        raise DomainError(f"need r > 2*eps > 0, got r={r}, eps={eps}")


def is_eps_contracting(g: np.ndarray, eps: float, field: FieldSpec):
    """Sufficient contraction certificate: true iff |a_2/a_1| <= eps**2."""
    _check_eps(eps)
    data = contraction_data(g, field)
    if field.is_archimedean:
        ok = data.ratio <= eps * eps
    else:
        ok = data.ratio <= Fraction(eps) ** 2  # exact comparison
    return ok, data


def pole_pair(g: np.ndarray, field: FieldSpec, unimodular: bool = True):
    """Contraction data for g and g^{-1}, from one decomposition of g.

    If g = K A U then g^{-1} = (U^{-1} J)(J A^{-1} J)(J K^{-1}) with J the
    index reversal, so the attracting point of g^{-1} is the class of
    U^{-1} e_d and its repelling covector the last row of K^{-1}.  This
    avoids inverting long products (numerically singular in floats) and
    matches the reversed-reciprocal a-part identity.
    """
    if unimodular:
        require_unimodular(g, field)
    d = g.shape[0]
    if field.is_archimedean:
        k, s, u = np.linalg.svd(np.asarray(g, dtype=float))
        v_p = normalize_representative(k[:, 0], field)
        h_p = normalize_representative(u[0, :], field)
        v_m = normalize_representative(u[d - 1, :], field)
        h_m = normalize_representative(k[:, d - 1], field)
        ratio_p = float(s[1] / s[0])
        ratio_m = float(s[d - 1] / s[d - 2])
    else:
        dec = _kak_padic(g, field)
        u_inv = exact_inv(dec.u)
        k_inv = exact_inv(dec.k)
        v_p, h_p = dec.v, dec.h
        v_m = normalize_representative(u_inv[:, d - 1], field)
        h_m = normalize_representative(k_inv[d - 1, :], field)
        ratio_p = abs_value(dec.a[1], field) / abs_value(dec.a[0], field)
        ratio_m = abs_value(dec.a[d - 1], field) / abs_value(dec.a[d - 2], field)
    plus = ContractionData(
        v=v_p, h=h_p, ratio=ratio_p, separation=dist_point_hyperplane(v_p, h_p, field)
    )
    minus = ContractionData(
        v=v_m, h=h_m, ratio=ratio_m, separation=dist_point_hyperplane(v_m, h_m, field)
    )
    return plus, minus


def is_very_proximal(g: np.ndarray, r: float, eps: float, field: FieldSpec) -> bool:
    """(r, eps)-very proximal: g and g^{-1} both contract and are r-separated."""
    _check_r_eps(r, eps)
    eps_sq = eps * eps if field.is_archimedean else Fraction(eps) ** 2
    for data in pole_pair(g, field):
        if not (data.ratio <= eps_sq and data.separation > r):
            return False
    return True


# ---------------------------------------------------------------------------
# Tuple certification
# ---------------------------------------------------------------------------

FAIL_CONTRACTION = "own-contraction"
FAIL_SEPARATION = "own-separation"
FAIL_CROSS = "cross-margin"
FAIL_UNCERTIFIED = "uncertified-geometry"


def tuple_geometry(gs, field: FieldSpec, unimodular: bool = True):
    """Per-generator (g, g^{-1}) contraction data; poles ordered g_0, g_0^{-1}, g_1, ..."""
    out = []
    for g in gs:
        out.extend(pole_pair(g, field, unimodular=unimodular))
    return out


def cross_margin_matrix(poles, field: FieldSpec):
    """margins[p][q] = delta(v_p, Ker h_q) over all poles; diagonal blocks are own-separations."""
    m = len(poles)
    return [
        [dist_point_hyperplane(poles[p].v, poles[q].h, field) for q in range(m)]
        for p in range(m)
    ]


def tuple_failure_reasons(poles, margins, r: float, eps: float) -> set[str]:
    """Which ping-pong conditions fail at thresholds (r, eps).

    Unguarded: evaluates the raw inequalities whether or not r > 2*eps, so
    decay experiments can score scheduled thresholds at every walk length.
    Fraction-valued data is compared exactly.
    """
    eps_sq = Fraction(eps) ** 2 if poles and isinstance(poles[0].ratio, Fraction) else eps * eps
    failures: set[str] = set()
    if any(p.ratio > eps_sq for p in poles):
        failures.add(FAIL_CONTRACTION)
    if any(p.separation <= r for p in poles):
        failures.add(FAIL_SEPARATION)
    m = len(poles)
    for p in range(m):
        for q in range(m):
            if p // 2 != q // 2 and margins[p][q] < r:
                failures.add(FAIL_CROSS)
    return failures


@dataclass(frozen=True)
class ProximalityCertificate:
    """Witness data for a ping-pong tuple certification attempt."""

    generators: tuple
    r: float
    eps: float
    mode: str  # "float" | "exact" | "certified-interval"
    poles: tuple  # ContractionData, ordered g_0, g_0^{-1}, g_1, ...
    margins: tuple  # full delta(v_p, Ker h_q) matrix
    certified: bool
    failures: tuple

    def to_json_dict(self, field: FieldSpec) -> dict:
        d = self.generators[0].shape[0]
        from .fields import format_scalar

        gen_docs = [
            [format_scalar(g[i, j], field) for i in range(d) for j in range(d)]
            for g in self.generators
        ]
        pole_docs = []
        for i, p in enumerate(self.poles):
            pole_docs.append(
                {
                    "generator": i // 2,
                    "inverse": bool(i % 2),
                    "ratio": float(p.ratio),
                    "separation": float(p.separation),
                    "v": vector_to_strings(p.v, field),
                    "h": vector_to_strings(p.h, field),
                }
            )
        return {
            "schema": "freewalk/certificate/v1",
            "verdict": "certified-free" if self.certified else "not-certified",
            "one_sided": "a negative verdict is not a proof of non-freeness",
            "mode": self.mode,
            "r": self.r,
            "eps": self.eps,
            "generators": gen_docs,
            "poles": pole_docs,
            "cross_margins": [[float(x) for x in row] for row in self.margins],
            "failures": sorted(self.failures),
        }


def pingpong_certificate(
    gs, r: float, eps: float, field: FieldSpec, certified: bool = False
) -> ProximalityCertificate:
    """Full certification report for a tuple of determinant-1 matrices."""
    _check_r_eps(r, eps)
    if len(gs) < 2:
        raise DomainError("a ping-pong tuple needs at least 2 generators")
    poles = tuple_geometry(gs, field)
    margins = cross_margin_matrix(poles, field)
    failures = tuple_failure_reasons(poles, margins, r, eps)
    if not certified or not field.is_archimedean:
        mode = "exact" if not field.is_archimedean else "float"
        return ProximalityCertificate(
            generators=tuple(gs),
            r=r,
            eps=eps,
            mode=mode,
            poles=tuple(poles),
            margins=tuple(tuple(row) for row in margins),
            certified=not failures,
            failures=tuple(sorted(failures)),
        )
    cert_failures = _certified_failures_real(gs, r, eps)
    return ProximalityCertificate(
        generators=tuple(gs),
        r=r,
        eps=eps,
        mode="certified-interval",
        poles=tuple(poles),
        margins=tuple(tuple(row) for row in margins),
        certified=not cert_failures,
        failures=tuple(sorted(cert_failures)),
    )


def is_pingpong_tuple(gs, r: float, eps: float, field: FieldSpec):
    """True plus the certificate when the tuple certifies, else (False, None)."""
    cert = pingpong_certificate(gs, r, eps, field)
    return (True, cert) if cert.certified else (False, None)


# ---------------------------------------------------------------------------
# Certified interval mode (archimedean)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _CertifiedPole:
    v: list  # Fractions
    h: list
    ratio_sq_upper: Fraction
    sin_v: Interval
    sin_h: Interval


_SQRT2 = Interval.exact(2).sqrt()


def _frac_vec(xs) -> list:
    return [Fraction(float(x)) for x in xs]


def _dot(a, b) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _sym_inf_norm(m: np.ndarray) -> Fraction:
    return max(sum((abs(x) for x in row), Fraction(0)) for row in m)


def _certified_pole_real(g_exact: np.ndarray) -> Optional[_CertifiedPole]:
    """Verified geometry bounds for one matrix with exact rational entries.

    Candidates come from a float SVD; the verification is exact: Rayleigh
    quotients lower-bound sigma_1**2, the infinity norm of the exterior
    square upper-bounds (sigma_1 sigma_2)**2, and residual (Davis-Kahan)
    bounds control the angle to the true singular directions.  Returns
    None when the spectral gap cannot be certified.
    """
    gf = np.asarray([[float(x) for x in row] for row in g_exact], dtype=float)
    k, _, u = np.linalg.svd(gf)
    vhat = _frac_vec(k[:, 0])
    hhat = _frac_vec(u[0, :])

    gT = g_exact.T
    P = g_exact @ gT  # eigvec for sigma_1^2: attracting point
    S = gT @ g_exact  # eigvec for sigma_1^2: repelling covector
    W = min(_sym_inf_norm(exterior_square(P)), _sym_inf_norm(exterior_square(S)))

    def pole_bounds(A, x):
        xx = _dot(x, x)
        Ax = [_dot(row, x) for row in A]
        lam = _dot(x, Ax) / xx  # Rayleigh quotient: lam <= sigma_1^2
        res = [a - lam * xi for a, xi in zip(Ax, x)]
        rho_sq = _dot(res, res) / xx
        gap = lam - W / lam  # lam - upper bound for sigma_2^2
        if gap <= 0:
            return None
        sin_bound = Interval.exact(rho_sq).sqrt() / Interval.exact(gap)
        return lam, Interval(0.0, sin_bound.hi)

    bv = pole_bounds(P, vhat)
    bh = pole_bounds(S, hhat)
    if bv is None or bh is None:
        return None
    lam_best = max(bv[0], bh[0])
    ratio_sq_upper = W / (lam_best * lam_best)
    return _CertifiedPole(v=vhat, h=hhat, ratio_sq_upper=ratio_sq_upper, sin_v=bv[1], sin_h=bh[1])


def _certified_separation(p: _CertifiedPole, q: _CertifiedPole) -> Interval:
    """Lower-bounded delta(v_p, Ker h_q), corrected for candidate error.

    delta(., Ker .) is sqrt(2)-Lipschitz in the summed projective metric,
    so the true separation is at least the candidate one minus
    sqrt(2) * (angle errors).
    """
    num_sq = _dot(q.h, p.v) ** 2
    den_sq = _dot(p.v, p.v) * _dot(q.h, q.h)
    sep = Interval.exact(num_sq).sqrt() / Interval.exact(den_sq).sqrt()
    return sep - _SQRT2 * (p.sin_v + q.sin_h)


def _certified_failures_real(gs, r: float, eps: float) -> set[str]:
    eps4 = Fraction(eps) ** 4
    poles: list[Optional[_CertifiedPole]] = []
    for g in gs:
        ge = exact_matrix(np.asarray(g))
        poles.append(_certified_pole_real(ge))
        poles.append(_certified_pole_real(exact_inv(ge)))
    failures: set[str] = set()
    if any(p is None for p in poles):
        failures.add(FAIL_UNCERTIFIED)
        return failures
    for p in poles:
        if not p.ratio_sq_upper <= eps4:
            failures.add(FAIL_CONTRACTION)
    m = len(poles)
    for a in range(m):
        for b in range(m):
            sep = _certified_separation(poles[a], poles[b])
            if a // 2 == b // 2:
                if a == b and not sep.certainly_gt(r):
                    failures.add(FAIL_SEPARATION)
            elif not sep.certainly_ge(r):
                failures.add(FAIL_CROSS)
    return failures


# ---------------------------------------------------------------------------
# Exact freeness oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleVerdict:
    """Result of the reduced-word enumeration.

    relation is None when no word up to max_len equals the identity;
    otherwise it is the first such word in length-then-lexicographic
    order, encoded as symbol indices (2i = generator i, 2i+1 = its
    inverse).
    """

    relation: Optional[tuple]
    max_len: int
    words_checked: int

    @property
    def found(self) -> bool:
        return self.relation is not None

    def relation_word(self) -> Optional[str]:
        if self.relation is None:
            return None
        letters = []
        for s in self.relation:
            c = chr(ord("a") + s // 2)
            letters.append(c.upper() if s % 2 else c)
        return "".join(letters)


MAX_ORACLE_LEN = 16


def _exact_rows(g) -> tuple:
    arr = np.asarray(g)
    if arr.dtype != object and not np.issubdtype(arr.dtype, np.integer):
        raise UsageError("free_word_oracle needs exact integer or rational entries")
    rows = []
    for row in arr:
        out = []
        for x in row:
            if isinstance(x, float):
                raise UsageError("free_word_oracle needs exact integer or rational entries")
            q = Fraction(x)
            out.append(q.numerator if q.denominator == 1 else q)
        rows.append(tuple(out))
    return tuple(rows)


def _mul_rows(a, b, d):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(d)) for j in range(d)) for i in range(d)
    )


def _inv_rows(rows, d):
    inv = exact_inv(np.array([[Fraction(x) for x in row] for row in rows], dtype=object))
    out = []
    for i in range(d):
        r = []
        for j in range(d):
            q = Fraction(inv[i, j])
            r.append(q.numerator if q.denominator == 1 else q)
        out.append(tuple(r))
    return tuple(out)


def free_word_oracle(gs, max_len: int) -> OracleVerdict:
    """Search all nonempty reduced words up to max_len for an identity relation.

    Exact arithmetic only; the enumeration is entirely independent of the
    certification path, so it serves as a soundness oracle for it.
    """
    if not 1 <= max_len <= MAX_ORACLE_LEN:
        raise UsageError(f"max_len must be in [1, {MAX_ORACLE_LEN}]")
    base = [_exact_rows(g) for g in gs]
    d = len(base[0])
    ident = tuple(tuple(1 if i == j else 0 for j in range(d)) for i in range(d))
    symbols = []
    for rows in base:
        symbols.append(rows)
        symbols.append(_inv_rows(rows, d))
    nsym = len(symbols)
    checked = 0

    def eq_identity(m) -> bool:
        return all(m[i][j] == ident[i][j] for i in range(d) for j in range(d))

    path: list[int] = []

    def dfs(prod, depth: int, last: int, target: int) -> bool:
        nonlocal checked
        if depth == target:
            checked += 1
            return eq_identity(prod)
        for s in range(nsym):
            if s == last ^ 1:  # would unreduce the word
                continue
            path.append(s)
            if dfs(_mul_rows(prod, symbols[s], d), depth + 1, s, target):
                return True
            path.pop()
        return False

    # Iterative deepening keeps the (length, lex) order of first discovery.
    for target in range(1, max_len + 1):
        path.clear()
        if dfs(ident, 0, -2, target):
            return OracleVerdict(relation=tuple(path), max_len=max_len, words_checked=checked)
    return OracleVerdict(relation=None, max_len=max_len, words_checked=checked)
