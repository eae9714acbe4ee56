"""Vectors, covectors, determinant-1 matrices and projective metrics.

Archimedean objects are float numpy arrays; nonarchimedean ones are
object-dtype numpy arrays holding exact Fractions, so every identity in
the ultrametric world can be checked with ``==``.  Covectors act by
f(x) = sum_i f_i x_i and hyperplanes are always stored as the class of a
defining covector.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import DomainError, InvariantViolation, UsageError
from .fields import FieldSpec, abs_value, format_scalar, parse_scalar

UNIMODULAR_TOL = 1e-9


def as_matrix(rows, field: FieldSpec) -> np.ndarray:
    """Build a d x d matrix with field-appropriate entries."""
    if field.is_archimedean:
        return np.array([[float(x) for x in row] for row in rows], dtype=float)
    return np.array([[Fraction(x) for x in row] for row in rows], dtype=object)


def as_vector(entries, field: FieldSpec) -> np.ndarray:
    if field.is_archimedean:
        return np.array([float(x) for x in entries], dtype=float)
    return np.array([Fraction(x) for x in entries], dtype=object)


def identity(d: int, field: FieldSpec) -> np.ndarray:
    if field.is_archimedean:
        return np.eye(d)
    m = np.empty((d, d), dtype=object)
    for i in range(d):
        for j in range(d):
            m[i, j] = Fraction(1) if i == j else Fraction(0)
    return m


def exact_matrix(m: np.ndarray) -> np.ndarray:
    """Exact Fraction copy of a matrix (float entries convert exactly)."""
    d0, d1 = m.shape
    out = np.empty((d0, d1), dtype=object)
    for i in range(d0):
        for j in range(d1):
            out[i, j] = Fraction(m[i, j])
    return out


def exact_det(m: np.ndarray) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    a = [[Fraction(x) for x in row] for row in m]
    d = len(a)
    det = Fraction(1)
    for c in range(d):
        piv = next((r for r in range(c, d) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, d):
            if a[r][c] != 0:
                f = a[r][c] * inv
                for k in range(c, d):
                    a[r][k] -= f * a[c][k]
    return det


def exact_inv(m: np.ndarray) -> np.ndarray:
    """Inverse by fraction-exact Gauss-Jordan elimination."""
    d = m.shape[0]
    a = [[Fraction(x) for x in row] for row in m]
    b = [[Fraction(1) if i == j else Fraction(0) for j in range(d)] for i in range(d)]
    for c in range(d):
        piv = next((r for r in range(c, d) if a[r][c] != 0), None)
        if piv is None:
            raise DomainError("matrix is singular")
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            b[c], b[piv] = b[piv], b[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        b[c] = [x * inv for x in b[c]]
        for r in range(d):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
                b[r] = [x - f * y for x, y in zip(b[r], b[c])]
    return np.array(b, dtype=object)


def det(m: np.ndarray, field: FieldSpec):
    if field.is_archimedean and m.dtype != object:
        return float(np.linalg.det(m))
    return exact_det(m)


def inv(m: np.ndarray, field: FieldSpec) -> np.ndarray:
    if field.is_archimedean and m.dtype != object:
        return np.linalg.inv(m)
    return exact_inv(m)


def is_unimodular(m: np.ndarray, field: FieldSpec, tol: float = UNIMODULAR_TOL) -> bool:
    if field.is_archimedean:
        return abs(det(m, field) - 1.0) <= tol
    return exact_det(m) == 1


def require_unimodular(m: np.ndarray, field: FieldSpec) -> None:
    if not is_unimodular(m, field):
        raise InvariantViolation("matrix determinant is not 1")


def vector_norm(x: np.ndarray, field: FieldSpec):
    """Canonical norm: Euclidean (archimedean) or max of |entries| (p-adic)."""
    if field.is_archimedean:
        return float(math.sqrt(float(sum(float(v) ** 2 for v in x))))
    return max(abs_value(v, field) for v in x)


def operator_norm(g: np.ndarray, field: FieldSpec):
    """Operator norm of the canonical norm: top singular value, or max |entry|."""
    if field.is_archimedean:
        return float(np.linalg.norm(np.asarray(g, dtype=float), 2))
    return max(abs_value(v, field) for v in g.flat)


def wedge_pairs(d: int) -> list[tuple[int, int]]:
    """Lexicographic basis order e_i ^ e_j, i < j, of the exterior square."""
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


def exterior_square(g: np.ndarray) -> np.ndarray:
    """Matrix of the induced action on wedge basis e_i ^ e_j (i < j).

    Multiplicative: exterior_square(g @ h) == exterior_square(g) @ exterior_square(h).
    """
    d = g.shape[0]
    pairs = wedge_pairs(d)
    out = np.empty((len(pairs), len(pairs)), dtype=g.dtype)
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            out[a, b] = g[i, k] * g[j, l] - g[i, l] * g[j, k]
    return out


def wedge_vector(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coordinates of x ^ y in the lexicographic wedge basis."""
    d = x.shape[0]
    return np.array([x[i] * y[j] - x[j] * y[i] for i, j in wedge_pairs(d)], dtype=x.dtype)


def apply_matrix(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    return g @ x


def dual_action(g: np.ndarray, f: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Contragredient action (g.f)(x) = f(g^{-1} x); returns the covector f o g^{-1}."""
    return f @ inv(g, field)


def _require_nonzero(x: np.ndarray, what: str) -> None:
    if all(v == 0 for v in x):
        raise DomainError(f"{what} must be nonzero")


def fubini_study(x: np.ndarray, y: np.ndarray, field: FieldSpec):
    """Projective distance ||x ^ y|| / (||x|| ||y||); exact in the p-adic case."""
    _require_nonzero(x, "projective representative")
    _require_nonzero(y, "projective representative")
    w = wedge_vector(x, y)
    if all(v == 0 for v in w):
        return 0.0 if field.is_archimedean else Fraction(0)
    return vector_norm(w, field) / (vector_norm(x, field) * vector_norm(y, field))


def dist_point_hyperplane(x: np.ndarray, f: np.ndarray, field: FieldSpec):
    """Distance delta([x], Ker f) = |f(x)| / (||f|| ||x||)."""
    _require_nonzero(x, "point representative")
    _require_nonzero(f, "hyperplane covector")
    val = sum(fi * xi for fi, xi in zip(f, x))
    return abs_value(val, field) / (vector_norm(f, field) * vector_norm(x, field))


def normalize_representative(x: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Deterministic representative of a projective class.

    Archimedean: unit Euclidean norm, first nonzero coordinate positive.
    Nonarchimedean: minimal entry valuation 0, first nonzero coordinate a
    power of the prime (exactly p**m for some m >= 0).
    """
    _require_nonzero(x, "projective representative")
    if field.is_archimedean:
        v = np.asarray(x, dtype=float)
        n = math.sqrt(float(v @ v))
        v = v / n
        lead = next(c for c in v if c != 0.0)
        return -v if lead < 0 else v
    lead = next(Fraction(c) for c in x if c != 0)
    scaled = np.array([Fraction(c) / lead for c in x], dtype=object)
    m = min(_val(c, field.prime) for c in scaled if c != 0)
    factor = Fraction(field.prime) ** (-m)
    return np.array([c * factor for c in scaled], dtype=object)


def _val(q: Fraction, p: int) -> int:
    num, den = q.numerator, q.denominator
    v = 0
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def is_isometry(k: np.ndarray, field: FieldSpec, tol: float = UNIMODULAR_TOL) -> bool:
    """Whether k preserves the canonical norm.

    Archimedean: orthogonal.  Nonarchimedean: entries in the valuation ring
    and unit determinant (the full isometry group of the max norm).
    """
    d = k.shape[0]
    if field.is_archimedean:
        return bool(np.max(np.abs(k.T @ k - np.eye(d))) <= tol)
    p = field.prime
    for v in k.flat:
        if v != 0 and _val(Fraction(v), p) < 0:
            return False
    dk = exact_det(k)
    return dk != 0 and _val(dk, p) == 0


# ---------------------------------------------------------------------------
# Serialization: row-major scalar strings plus a header
# ---------------------------------------------------------------------------


def matrix_to_json_dict(m: np.ndarray, field: FieldSpec) -> dict:
    d = m.shape[0]
    return {
        "field": field.to_dict(),
        "d": d,
        "entries": [format_scalar(m[i, j], field) for i in range(d) for j in range(d)],
    }


def matrix_from_json_dict(doc: dict) -> tuple[np.ndarray, FieldSpec]:
    field = FieldSpec.from_dict(doc["field"])
    d = int(doc["d"])
    entries = doc["entries"]
    if len(entries) != d * d:
        raise UsageError(f"matrix header says d={d} but {len(entries)} entries given")
    rows = [[parse_scalar(entries[i * d + j], field) for j in range(d)] for i in range(d)]
    return as_matrix(rows, field), field


def vector_to_strings(x: np.ndarray, field: FieldSpec) -> list[str]:
    return [format_scalar(v, field) for v in x]
