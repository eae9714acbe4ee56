"""Finitely supported measures on SL_d over a local field, and seeded walks.

RNG contract
------------
All randomness comes from numpy's Philox bit generator (Philox4x64, a
named, versioned, counter-based generator).  Stream splitting is by key:
the stream with index ``i`` under master seed ``s`` is
``Generator(Philox(key=[s mod 2**64, i mod 2**64]))``.  Distinct stream
indices give statistically independent, individually reproducible
streams, so trajectory ``i`` of an experiment can be regenerated in
isolation from ``(seed, i)``.  Sampling one increment consumes exactly
one uniform draw.

Both walk orders are maintained from one increment sequence: the natural
product M_n = X_1 ... X_n and the reversed product S_n = X_n ... X_1,
each as a ScaledMatrix so products of any length never overflow.
"""

from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .decompositions import (
    ScaledMatrix,
    _kak_padic,
    scaled_identity,
    scaled_log_norm,
    scaled_multiply,
    scaled_premultiply,
)
from .errors import ConfigError, InvariantViolation
from .fields import FieldSpec, abs_value, format_scalar, parse_scalar, valuation
from .linalg import (
    as_matrix,
    exact_det,
    exact_matrix,
    normalize_representative,
    vector_to_strings,
)

GENERATOR_NAME = "philox4x64"

_MASK64 = 2**64


def make_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible stream `stream` of master seed `seed`."""
    key = np.array([seed % _MASK64, stream % _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


MEASURE_SCHEMA = "freewalk/measure/v1"


@dataclass(frozen=True)
class WalkMeasure:
    """A finitely supported probability measure on SL_d(k).

    atoms carry field-typed entries; exact_atoms are the same matrices
    with exact Fraction entries (float entries convert exactly), used by
    replay-based exact computations and the freeness oracle.
    """

    atoms: tuple
    probs: tuple  # Fractions, positive, exact sum 1
    field: FieldSpec
    d: int
    exact_atoms: tuple
    cumulative: tuple  # float partial sums for sampling

    def to_json_dict(self) -> dict:
        return {
            "schema": MEASURE_SCHEMA,
            "field": self.field.to_dict(),
            "d": self.d,
            "atoms": [
                [format_scalar(a[i, j], self.field) for i in range(self.d) for j in range(self.d)]
                for a in self.atoms
            ],
            "probs": [f"{p.numerator}/{p.denominator}" for p in self.probs],
        }

    def canonical_hash(self) -> str:
        doc = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(doc.encode()).hexdigest()


def make_measure(atom_rows, probs, field: FieldSpec) -> WalkMeasure:
    """Validated measure from raw nested rows and rational probabilities."""
    atoms = tuple(as_matrix(rows, field) for rows in atom_rows)
    if not atoms:
        raise InvariantViolation("measure needs at least one atom")
    d = atoms[0].shape[0]
    probs = tuple(Fraction(p) for p in probs)
    if len(probs) != len(atoms):
        raise InvariantViolation("probs and atoms differ in length")
    if any(p <= 0 for p in probs):
        raise InvariantViolation("probabilities must be positive")
    if sum(probs) != 1:
        raise InvariantViolation(f"probabilities sum to {sum(probs)}, not 1")
    exact = []
    for a in atoms:
        if a.shape != (d, d):
            raise InvariantViolation("atoms must share one dimension")
        e = exact_matrix(a)
        if field.is_archimedean:
            if abs(float(np.linalg.det(np.asarray(a, dtype=float))) - 1.0) > 1e-9:
                raise InvariantViolation("atom determinant is not 1")
        elif exact_det(e) != 1:
            raise InvariantViolation("atom determinant is not 1")
        exact.append(e)
    cum = []
    acc = 0.0
    for p in probs:
        acc += float(p)
        cum.append(acc)
    return WalkMeasure(
        atoms=atoms,
        probs=probs,
        field=field,
        d=d,
        exact_atoms=tuple(exact),
        cumulative=tuple(cum),
    )


def measure_from_json_dict(doc: dict) -> WalkMeasure:
    try:
        field = FieldSpec.from_dict(doc["field"])
        d = int(doc["d"])
        atom_rows = []
        for flat in doc["atoms"]:
            if len(flat) != d * d:
                raise ConfigError(f"atom needs {d * d} entries, got {len(flat)}")
            atom_rows.append(
                [[parse_scalar(flat[i * d + j], field) for j in range(d)] for i in range(d)]
            )
        probs = [Fraction(p) for p in doc["probs"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed measure document: {exc}") from exc
    return make_measure(atom_rows, probs, field)


def load_measure(path) -> WalkMeasure:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read measure file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"measure file {path} is not valid JSON: line {exc.lineno}") from exc
    return measure_from_json_dict(doc)


# ---------------------------------------------------------------------------
# Walk states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkState:
    """One trajectory checkpoint; immutable, safe to retain across steps."""

    step: int
    left_product: ScaledMatrix  # M_n = X_1 ... X_n
    right_product: ScaledMatrix  # S_n = X_n ... X_1
    increments: tuple  # sampled atom indices, oldest first
    rng_state: dict


def new_walk_state(measure: WalkMeasure, seed: int, stream: int = 0) -> WalkState:
    rng = make_stream(seed, stream)
    ident = scaled_identity(measure.d, measure.field)
    return WalkState(
        step=0,
        left_product=ident,
        right_product=ident,
        increments=(),
        rng_state=rng.bit_generator.state,
    )


def _sample_index(measure: WalkMeasure, u: float) -> int:
    return min(bisect_right(measure.cumulative, u), len(measure.cumulative) - 1)


def sample_increment(measure: WalkMeasure, rng: np.random.Generator) -> np.ndarray:
    """Draw one atom; consumes exactly one uniform draw from rng."""
    return measure.atoms[_sample_index(measure, rng.random())]


def _restore_stream(rng_state: dict) -> np.random.Generator:
    rng = np.random.Generator(np.random.Philox(key=np.zeros(2, dtype=np.uint64)))
    rng.bit_generator.state = rng_state
    return rng


def advance(state: WalkState, measure: WalkMeasure) -> WalkState:
    """One step: the same increment extends both walk orders."""
    rng = _restore_stream(state.rng_state)
    idx = _sample_index(measure, rng.random())
    x = measure.atoms[idx]
    field = measure.field
    return WalkState(
        step=state.step + 1,
        left_product=scaled_multiply(state.left_product, x, field),
        right_product=scaled_premultiply(x, state.right_product, field),
        increments=state.increments + (idx,),
        rng_state=rng.bit_generator.state,
    )


def run_walk(measure: WalkMeasure, n: int, seed: int, stream: int = 0, checkpoints=None):
    """Walk n steps on one stream.

    Returns the final WalkState, or {n: WalkState} snapshots when
    checkpoints is given.  Step for step identical to iterating
    :func:`advance` from :func:`new_walk_state`.
    """
    state = new_walk_state(measure, seed, stream)
    wanted = set(checkpoints) if checkpoints is not None else None
    snaps = {}
    if wanted is not None and 0 in wanted:
        snaps[0] = state
    for _ in range(n):
        state = advance(state, measure)
        if wanted is not None and state.step in wanted:
            snaps[state.step] = state
    return snaps if wanted is not None else state


def sample_increment_indices(measure: WalkMeasure, n: int, seed: int, stream: int = 0) -> list:
    """The first n atom indices of a stream, without building products."""
    rng = make_stream(seed, stream)
    return [_sample_index(measure, rng.random()) for _ in range(n)]


def run_independent_walks(measure, measure2, count: int, n: int, seed: int) -> list:
    """count trajectories on streams split deterministically from seed.

    Walk i draws from `measure` when measure2 is None or i is even, and
    from `measure2` when i is odd; trajectory i is reproducible in
    isolation from (seed, i).
    """
    out = []
    for i in range(count):
        m = measure if (measure2 is None or i % 2 == 0) else measure2
        out.append(run_walk(m, n, seed, stream=i))
    return out


def exact_product(measure: WalkMeasure, increments, order: str = "left") -> np.ndarray:
    """Exact replay of a product from logged atom indices.

    order "left" gives X_1 ... X_n (the M walk), "right" gives
    X_n ... X_1 (the S walk).
    """
    seq = list(increments) if order == "left" else list(reversed(increments))
    prod = None
    for idx in seq:
        a = measure.exact_atoms[idx]
        prod = a if prod is None else prod @ a
    if prod is None:
        d = measure.d
        prod = np.array(
            [[Fraction(1) if i == j else Fraction(0) for j in range(d)] for i in range(d)],
            dtype=object,
        )
    return prod


# ---------------------------------------------------------------------------
# Trajectory dumps
# ---------------------------------------------------------------------------


def trajectory_records(measure: WalkMeasure, n: int, seed: int, stream: int = 0) -> list:
    """Per-step summary records: norms plus KAK geometry of S_n."""
    field = measure.field
    state = new_walk_state(measure, seed, stream)
    records = []
    for _ in range(n):
        state = advance(state, measure)
        unit = state.right_product.unit
        if field.is_archimedean:
            k, s, u = np.linalg.svd(np.asarray(unit, dtype=float))
            ratio = float(s[1] / s[0])
            v, h = k[:, 0], u[0, :]
        else:
            dec = _kak_padic(unit, field)
            ratio = float(abs_value(dec.a[1], field) / abs_value(dec.a[0], field))
            v, h = dec.v, dec.h
        records.append(
            {
                "n": state.step,
                "log_norm_M": scaled_log_norm(state.left_product, field),
                "log_norm_S": scaled_log_norm(state.right_product, field),
                "a_ratio": ratio,
                "v": vector_to_strings(normalize_representative(v, field), field),
                "h": vector_to_strings(normalize_representative(h, field), field),
            }
        )
    return records


def characteristic_polynomial(m: np.ndarray) -> list:
    """Exact char poly coefficients [c_0, ..., c_d] (monic), Faddeev-LeVerrier."""
    d = m.shape[0]
    a = np.array([[Fraction(x) for x in row] for row in m], dtype=object)
    ident = np.array(
        [[Fraction(1) if i == j else Fraction(0) for j in range(d)] for i in range(d)],
        dtype=object,
    )
    coeffs = [Fraction(1)]  # c_d
    mk = a.copy()
    for k in range(1, d + 1):
        ck = -sum(mk[i, i] for i in range(d)) / k
        coeffs.append(ck)
        if k < d:
            mk = a @ (mk + ck * ident)
    return list(reversed(coeffs))  # [c_0, ..., c_d = 1]


def _unique_max_modulus_root(coeffs, field: FieldSpec) -> bool:
    """Whether the monic polynomial has a single root of maximal absolute value."""
    d = len(coeffs) - 1
    if field.is_archimedean:
        roots = np.roots([float(c) for c in reversed(coeffs)])
        mags = sorted((abs(r) for r in roots), reverse=True)
        return len(mags) >= 2 and mags[0] > mags[1] * (1 + 1e-9)
    # Newton polygon: the largest-modulus roots live on the final (steepest)
    # lower-hull segment; a unique one means that segment has length 1
    p = field.prime
    pts = [(k, valuation(c, p)) for k, c in enumerate(coeffs) if c != 0]
    hull = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    if len(hull) < 2:
        return False
    return hull[-1][0] - hull[-2][0] == 1


def find_proximal_element(measure: WalkMeasure, seed: int = 0, tries: int = 64, max_len: int = 12):
    """Heuristic probe: a proximal element among short sampled products.

    Strong irreducibility and contraction of the generated semigroup are
    not decidable from the atoms; a proximal element (unique eigenvalue of
    maximal modulus) among products of length <= max_len is the practical
    witness for contraction.  Returns {"length", "word"} or None.
    """
    rng = make_stream(seed, 0)
    for _ in range(tries):
        length = int(rng.integers(1, max_len + 1))
        word = [_sample_index(measure, rng.random()) for _ in range(length)]
        prod = exact_product(measure, word, order="right")
        if _unique_max_modulus_root(characteristic_polynomial(prod), measure.field):
            return {"length": length, "word": word}
    return None


def _fast_scaled_products(measure: WalkMeasure, indices, want_left=True, want_right=True):
    """Scaled products along an index sequence, no per-step state snapshots."""
    field = measure.field
    left = right = scaled_identity(measure.d, field)
    for idx in indices:
        x = measure.atoms[idx]
        if want_left:
            left = scaled_multiply(left, x, field)
        if want_right:
            right = scaled_premultiply(x, right, field)
    return left, right


def write_trajectory_jsonl(path, measure: WalkMeasure, n: int, seed: int, stream: int = 0) -> None:
    with open(path, "w") as fh:
        for rec in trajectory_records(measure, n, seed, stream):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
