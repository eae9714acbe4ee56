import math
import random
from fractions import Fraction

import numpy as np
import pytest

from freewalk import (
    DomainError,
    UsageError,
    as_matrix,
    as_vector,
    contraction_data,
    dist_point_hyperplane,
    free_word_oracle,
    fubini_study,
    is_eps_contracting,
    is_pingpong_tuple,
    is_very_proximal,
    pingpong_certificate,
)
from freewalk.pingpong import pole_pair

from conftest import random_unimodular_int

F = Fraction


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def test_contraction_data_examples(real_field):
    big = as_matrix([[100, 0], [0, 0.01]], real_field)
    cd = contraction_data(big, real_field)
    assert cd.ratio == pytest.approx(1e-4)
    assert cd.separation == pytest.approx(1.0)
    assert abs(cd.v[0]) == pytest.approx(1.0) and cd.v[1] == pytest.approx(0.0)

    rot = as_matrix(_rot(math.pi / 2), real_field)
    assert contraction_data(rot, real_field).ratio == pytest.approx(1.0)

    shear = as_matrix([[1, 2], [0, 1]], real_field)
    expected = (math.sqrt(2) - 1) / (math.sqrt(2) + 1)
    assert contraction_data(shear, real_field).ratio == pytest.approx(expected, abs=1e-9)


def test_is_eps_contracting(real_field):
    big = as_matrix([[100, 0], [0, 0.01]], real_field)
    ok, data = is_eps_contracting(big, 0.02, real_field)
    assert ok and data.ratio <= 0.02**2
    ident = as_matrix([[1, 0], [0, 1]], real_field)
    assert not is_eps_contracting(ident, 0.9, real_field)[0]
    assert not is_eps_contracting(big, 0.005, real_field)[0]
    with pytest.raises(DomainError):
        is_eps_contracting(big, 1.5, real_field)


def test_is_eps_contracting_monotone(real_field):
    rng = random.Random(41)
    for _ in range(30):
        g = as_matrix(random_unimodular_int(rng, 2, steps=16), real_field)
        hits = [eps for eps in (0.1, 0.2, 0.4, 0.6, 0.8) if is_eps_contracting(g, eps, real_field)[0]]
        # once true, true at every larger eps
        assert hits == [eps for eps in (0.1, 0.2, 0.4, 0.6, 0.8) if eps >= (hits[0] if hits else 2)]


def test_is_eps_contracting_exact_padic(q3):
    g = as_matrix([[9, 0], [0, F(1, 9)]], q3)  # ratio = |1/9| / |9| = 9^-... = 1/81... exactly
    ok, data = is_eps_contracting(g, 0.2, q3)
    assert ok
    assert data.ratio == F(1, 81 * 81) or data.ratio <= F(1, 25)  # exact Fraction comparison ran


def test_is_very_proximal(real_field):
    big = as_matrix([[100, 0], [0, 0.01]], real_field)
    assert is_very_proximal(big, 0.5, 0.02, real_field)
    ident = as_matrix([[1, 0], [0, 1]], real_field)
    assert not is_very_proximal(ident, 0.5, 0.02, real_field)
    conj = _rot(math.pi / 4) @ np.array([[100, 0], [0, 0.01]]) @ _rot(-math.pi / 4)
    assert is_very_proximal(as_matrix(conj, real_field), 0.5, 0.02, real_field)
    with pytest.raises(DomainError):
        is_very_proximal(big, 0.03, 0.02, real_field)


def test_pole_pair_matches_direct_inverse(real_field, q3):
    from freewalk.linalg import exact_inv

    rng = random.Random(42)
    for _ in range(25):
        rows = random_unimodular_int(rng, 2, steps=16)
        g = as_matrix(rows, real_field)
        plus, minus = pole_pair(g, real_field)
        direct = contraction_data(np.linalg.inv(g), real_field)
        assert minus.ratio == pytest.approx(direct.ratio, rel=1e-7, abs=1e-12)
        if minus.ratio < 0.5:  # classes only canonical when the gap is strict
            assert fubini_study(minus.v, direct.v, real_field) <= 1e-6
        # p-adic: conjugates of diag(9, 1/9) have a strict gap (SL_2(Z) itself
        # consists of p-adic isometries, where the classes are not canonical)
        k = as_matrix(random_unimodular_int(rng, 2), q3)
        gq = k @ as_matrix([[9, 0], [0, F(1, 9)]], q3) @ exact_inv(k)
        plus_q, minus_q = pole_pair(gq, q3)
        direct_q = contraction_data(exact_inv(gq), q3)
        assert minus_q.ratio == direct_q.ratio == F(1, 81)
        # attracting classes from two decompositions agree up to the
        # non-uniqueness bound delta <= ratio
        assert fubini_study(minus_q.v, direct_q.v, q3) <= F(1, 81)
        # |9|_3 = 1/9, so the p-adically attracting direction of g^{-1} is k e1
        eigen = k @ as_vector([1, 0], q3)
        assert fubini_study(minus_q.v, eigen, q3) <= F(1, 81)


def test_pingpong_pair_example(real_field):
    a = as_matrix([[100, 0], [0, 0.01]], real_field)
    b = as_matrix(_rot(math.pi / 4) @ np.array([[100, 0], [0, 0.01]]) @ _rot(-math.pi / 4), real_field)
    ok, cert = is_pingpong_tuple([a, b], 0.5, 0.02, real_field)
    assert ok and cert.certified
    cross = [cert.margins[p][q] for p in range(2) for q in range(2, 4)]
    for m in cross:
        assert m == pytest.approx(math.cos(math.pi / 4), abs=1e-9)


def test_pingpong_duplicated_generator_fails(real_field):
    a = as_matrix([[100, 0], [0, 0.01]], real_field)
    ok, cert = is_pingpong_tuple([a, a], 0.5, 0.02, real_field)
    assert not ok and cert is None
    report = pingpong_certificate([a, a], 0.5, 0.02, real_field)
    assert "cross-margin" in report.failures


def test_pingpong_identity_pair_fails(real_field):
    ident = as_matrix([[1, 0], [0, 1]], real_field)
    ok, _ = is_pingpong_tuple([ident, ident], 0.5, 0.02, real_field)
    assert not ok


def test_pingpong_preconditions(real_field):
    a = as_matrix([[100, 0], [0, 0.01]], real_field)
    with pytest.raises(DomainError):
        is_pingpong_tuple([a, a], 0.03, 0.02, real_field)
    with pytest.raises(DomainError):
        is_pingpong_tuple([a], 0.5, 0.02, real_field)


def test_pingpong_padic_exact(q3):
    a = as_matrix([[81, 0], [0, F(1, 81)]], q3)
    k = as_matrix([[1, 1], [1, 2]], q3)  # isometry of the max norm
    from freewalk.linalg import exact_inv

    b = k @ a @ exact_inv(k)
    cert = pingpong_certificate([a, b], 0.4, 0.1, q3)
    assert cert.mode == "exact"
    assert cert.certified
    ok, _ = is_pingpong_tuple([a, b], 0.4, 0.1, q3)
    assert ok


def test_certified_interval_mode(real_field):
    a = as_matrix([[100, 0], [0, F(1, 100)]], real_field)
    r345 = np.array([[3 / 5, -4 / 5], [4 / 5, 3 / 5]])
    b = as_matrix(r345 @ np.array([[100, 0], [0, 0.01]]) @ r345.T, real_field)
    cert = pingpong_certificate([a, b], 0.5, 0.02, real_field, certified=True)
    assert cert.mode == "certified-interval"
    assert cert.certified
    ident = as_matrix([[1, 0], [0, 1]], real_field)
    cert2 = pingpong_certificate([ident, ident], 0.5, 0.02, real_field, certified=True)
    assert not cert2.certified


def test_contraction_mapping_property(real_field, q2):
    # whenever ratio <= eps^2, points eps-away from H land eps-close to v
    rng = random.Random(60)
    eps = 0.1
    t = 1 / eps * 1.5
    for field, mats in (
        (real_field, [np.diag([t, 1 / t]) @ _rot(rng.uniform(0, math.pi)) for _ in range(20)]),
        (q2, None),
    ):
        if mats is None:
            mats = []
            for _ in range(20):
                k = as_matrix(random_unimodular_int(rng, 2), q2)
                from freewalk.linalg import exact_inv

                a = as_matrix([[F(1, 16), 0], [0, 16]], q2)
                mats.append(k @ a @ exact_inv(k))
        for m in mats:
            g = as_matrix(m, field) if field.is_archimedean else m
            ok, data = is_eps_contracting(g, eps, field)
            assert ok
            hits = 0
            tries = 0
            while hits < 100 and tries < 5000:
                tries += 1
                x = as_vector([rng.randint(-20, 20) for _ in range(2)], field)
                if all(v == 0 for v in x):
                    continue
                dxh = dist_point_hyperplane(x, data.h, field)
                if dxh <= eps:
                    continue
                hits += 1
                img = g @ x
                d_img = fubini_study(img, data.v, field)
                bound = data.ratio / dxh
                if field.is_archimedean:
                    assert d_img <= bound + 1e-9
                else:
                    assert d_img <= bound
                assert d_img < eps


def test_isometry_equivariance_of_ratio(real_field):
    rng = np.random.default_rng(3)
    base = np.diag([7.0, 1 / 7.0])
    r = contraction_data(as_matrix(base, real_field), real_field).ratio
    for _ in range(20):
        q1, _ = np.linalg.qr(rng.normal(size=(2, 2)))
        q2_, _ = np.linalg.qr(rng.normal(size=(2, 2)))
        q1 *= np.linalg.det(q1)
        q2_ *= np.linalg.det(q2_)
        g = as_matrix(q1 @ base @ q2_, real_field)
        assert contraction_data(g, real_field).ratio == pytest.approx(r, abs=1e-9)


# ---------------------------------------------------------------------------
# Exact freeness oracle
# ---------------------------------------------------------------------------


def _obj(rows):
    return np.array([[F(x) for x in row] for row in rows], dtype=object)


def test_oracle_sanov_pair_free():
    a = _obj([[1, 2], [0, 1]])
    b = _obj([[1, 0], [2, 1]])
    verdict = free_word_oracle([a, b], 8)
    assert not verdict.found


def test_oracle_braid_relation_found():
    a = _obj([[1, 1], [0, 1]])
    b = _obj([[1, 0], [1, 1]])
    verdict = free_word_oracle([a, b], 6)
    assert verdict.found
    assert len(verdict.relation) == 6
    assert verdict.relation_word() == "abAbaB"
    # no shorter relation exists
    assert not free_word_oracle([a, b], 5).found


def test_oracle_single_identity_generator():
    ident = _obj([[1, 0], [0, 1]])
    verdict = free_word_oracle([ident], 1)
    assert verdict.found and verdict.relation == (0,)
    assert verdict.relation_word() == "a"


def test_oracle_rejects_floats(real_field):
    g = as_matrix([[1.0, 0.5], [0.0, 1.0]], real_field)
    with pytest.raises(UsageError):
        free_word_oracle([g], 3)
    with pytest.raises(UsageError):
        free_word_oracle([_obj([[1, 0], [0, 1]])], 99)


def test_oracle_accepts_int_arrays():
    a = np.array([[1, 2], [0, 1]])
    b = np.array([[1, 0], [2, 1]])
    assert not free_word_oracle([a, b], 4).found
