"""Batch command-line front end.

Subcommands:
  kak <matrix.json>                      print the Cartan decomposition as JSON
  certify <gens.json> --r R --eps E      certify a ping-pong tuple (exit 0/1)
  lyapunov|decay|direction|independence|invariant|tuple <config.json>
                                         run a seeded experiment, emit CSV + JSON

Exit codes: 0 success / certified, 1 certification not achieved, 2 bad
config or input.  Identical (config, seed) produce byte-identical output
files at any --threads value.  Environment overrides: FREEWALK_SEED,
FREEWALK_OUT, FREEWALK_THREADS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema

from . import __version__
from .errors import ConfigError, FreewalkError
from .estimators import (
    direction_convergence,
    gap_test,
    holder_function,
    independence_test,
    invariant_measure_probe,
    kak_convergence,
    lyapunov_estimate,
    pingpong_decay,
    tuple_decay,
    wilson_interval,
)
from .decompositions import kak
from .fields import FieldSpec, format_scalar, parse_scalar
from .linalg import as_matrix, matrix_from_json_dict, vector_to_strings
from .pingpong import pingpong_certificate
from .report import decay_to_rows, dumps_json, fit_to_dict, write_csv, write_json
from .walks import GENERATOR_NAME, find_proximal_element, load_measure

EXPERIMENT_KINDS = ("lyapunov", "decay", "direction", "independence", "invariant", "tuple")

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "kind", "measure", "seed"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": "freewalk/config/v1"},
        "kind": {"enum": list(EXPERIMENT_KINDS)},
        "measure": {"type": "string"},
        "measure2": {"type": "string"},
        "field": {"type": "object"},
        "grid": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "reps": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "tuple_size": {"type": "integer", "minimum": 2},
        "rho_hat": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "x": {"type": "array", "minItems": 2, "items": {"type": ["string", "number"]}},
        "hyperplanes": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 2, "items": {"type": ["string", "number"]}},
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r_base": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps_base": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "t": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "phi1": {"$ref": "#/$defs/phi"},
        "phi2": {"$ref": "#/$defs/phi"},
    },
    "$defs": {
        "phi": {
            "type": "object",
            "required": ["kind", "reference"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["dist_to_point", "dist_to_hyperplane", "one_minus_dist_to_point"]},
                "reference": {"type": "array", "minItems": 2, "items": {"type": ["string", "number"]}},
                "exponent": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        }
    },
}


def _env_int(name: str):
    value = os.environ.get(name)
    if not value:
        return None
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from exc


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc


def _validate_config(doc: dict, path: str) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        loc = "/".join(str(p) for p in e.absolute_path) or "(root)"
        raise ConfigError(f"{path}: field {loc}: {e.message}")
    grid = doc.get("grid")
    if grid is not None and any(a >= b for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{path}: grid must be strictly increasing")


def _require(config: dict, kind: str, *keys: str) -> None:
    missing = [k for k in keys if _dig(config, k) is None]
    if missing:
        raise ConfigError(f"{kind} experiment needs config fields: {', '.join(missing)}")


def _dig(config: dict, dotted: str):
    cur = config
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _resolve_measures(config: dict, base: Path):
    measure = load_measure(base / config["measure"])
    measure2 = None
    if "measure2" in config:
        measure2 = load_measure(base / config["measure2"])
        if measure2.field != measure.field or measure2.d != measure.d:
            raise ConfigError("measure and measure2 must share field and dimension")
    if "field" in config and FieldSpec.from_dict(config["field"]) != measure.field:
        raise ConfigError("config field spec disagrees with the measure file")
    return measure, measure2


def _default_x(d: int) -> list[str]:
    return ["1"] * d


def _sidecar(kind: str, config: dict, measure, measure2, payload: dict, probe=None) -> dict:
    doc = {
        "schema": "freewalk/result/v1",
        "kind": kind,
        "version": __version__,
        "rng": GENERATOR_NAME,
        "config": config,
        "measure_hash": measure.canonical_hash(),
        "proximal_probe": probe,
    }
    if measure2 is not None:
        doc["measure2_hash"] = measure2.canonical_hash()
    doc.update(payload)
    return doc


def _run_experiment(kind: str, config: dict, base: Path, out: Path, threads: int) -> int:
    measure, measure2 = _resolve_measures(config, base)
    seed = config["seed"]
    reps = config.get("reps")
    th = config.get("thresholds", {})

    # contraction/irreducibility of the support are not decidable from the
    # atoms; warn when not even a proximal witness shows up in short products
    probe = find_proximal_element(measure, seed=seed)
    if probe is None:
        print(
            "warning: no proximal element found among sampled products of length <= 12; "
            "the walk may violate the strong irreducibility / contraction hypotheses",
            file=sys.stderr,
        )

    if kind == "lyapunov":
        _require(config, kind, "n", "reps")
        est = lyapunov_estimate(measure, config["n"], reps, seed, threads=threads)
        verdict = gap_test(est)
        header = ["n", "lambda1_hat", "lambda1_ci", "lambda12_hat", "lambda12_ci", "gap_hat", "gap_ci", "reps"]
        rows = [[est.n, est.lambda1_hat, est.ci_half_widths[0], est.lambda12_hat,
                 est.ci_half_widths[1], est.gap_hat, est.ci_half_widths[2], est.reps]]
        payload = {
            "lambda1_hat": est.lambda1_hat,
            "lambda12_hat": est.lambda12_hat,
            "lambda2_hat": est.lambda2_hat,
            "gap_hat": est.gap_hat,
            "ci_half_widths": list(est.ci_half_widths),
            "gap_positive": verdict.positive,
            "sl2_balanced": verdict.sl2_balanced,
        }

    elif kind == "decay":
        _require(config, kind, "grid", "reps", "thresholds.r_base", "thresholds.eps_base")
        est = pingpong_decay(
            measure, measure2 or measure, th["r_base"], th["eps_base"],
            config["grid"], reps, seed, threads=threads,
        )
        header = ["n", "p_hat", "ci_lo", "ci_hi", "reps",
                  "fail_contraction", "fail_separation", "fail_cross", "r", "eps", "thresholds_valid"]
        bd = est.extra["breakdown"]
        rows = []
        for i, row in enumerate(decay_to_rows(est)):
            rows.append(row + [bd["own-contraction"][i], bd["own-separation"][i], bd["cross-margin"][i],
                               est.extra["r"][i], est.extra["eps"][i], est.extra["thresholds_valid"][i]])
        payload = {"fit": fit_to_dict(est.fit), "breakdown": bd,
                   "thresholds_valid": est.extra["thresholds_valid"]}

    elif kind == "direction":
        _require(config, kind, "grid", "horizon", "reps")
        x = config.get("x", _default_x(measure.d))
        direction = direction_convergence(
            measure, [parse_scalar(v, measure.field) for v in x],
            config["grid"], config["horizon"], reps, seed, threads=threads,
        )
        frames = kak_convergence(measure, config["grid"], config["horizon"], reps, seed, threads=threads)
        header = ["n", "p_hat", "ci_lo", "ci_hi", "reps", "curve"]
        rows = []
        for name, est in (("direction", direction), ("kak_k", frames.k_curve), ("kak_u", frames.u_curve)):
            rows.extend(row + [name] for row in decay_to_rows(est))
        payload = {
            "fits": {
                "direction": fit_to_dict(direction.fit),
                "kak_k": fit_to_dict(frames.k_curve.fit),
                "kak_u": fit_to_dict(frames.u_curve.fit),
            },
            "x": x,
            "horizon": config["horizon"],
        }

    elif kind == "independence":
        _require(config, kind, "reps")
        if config.get("grid"):
            ns = config["grid"]
        elif config.get("n"):
            ns = [config["n"]]
        else:
            raise ConfigError("independence experiment needs grid or n")
        e1 = ["1"] + ["0"] * (measure.d - 1)
        phi1_doc = config.get("phi1", {"kind": "dist_to_point", "reference": e1, "exponent": 1.0})
        phi2_doc = config.get("phi2", {"kind": "dist_to_point", "reference": e1, "exponent": 1.0})
        phi1 = holder_function(phi1_doc["kind"], [str(v) for v in phi1_doc["reference"]],
                               measure.field, phi1_doc.get("exponent", 1.0))
        phi2 = holder_function(phi2_doc["kind"], [str(v) for v in phi2_doc["reference"]],
                               measure.field, phi2_doc.get("exponent", 1.0))
        header = ["n", "p_hat", "ci_lo", "ci_hi", "reps", "mean_joint", "mean_phi1", "mean_phi2"]
        rows = []
        results = {}
        for n in ns:
            res = independence_test(measure, phi1, phi2, n, reps, seed, threads=threads)
            rows.append([n, res.discrepancy, max(0.0, res.discrepancy - 1.959963984540054 * res.se),
                         res.discrepancy + 1.959963984540054 * res.se, reps,
                         res.mean_joint, res.mean_phi1, res.mean_phi2])
            results[str(n)] = {"discrepancy": res.discrepancy, "se": res.se}
        payload = {"discrepancies": results, "phi1": phi1_doc, "phi2": phi2_doc}

    elif kind == "invariant":
        _require(config, kind, "n", "reps", "hyperplanes", "thresholds.t")
        res = invariant_measure_probe(
            measure, config["n"], reps,
            [[parse_scalar(v, measure.field) for v in h] for h in config["hyperplanes"]],
            th["t"], seed,
        )
        header = ["n", "p_hat", "ci_lo", "ci_hi", "reps", "hyperplane"]
        rows = [
            [res.n, f, lo, hi, reps, i]
            for i, (f, lo, hi) in enumerate(zip(res.fractions, res.ci_lo, res.ci_hi))
        ]
        payload = {"sup_fraction": res.sup_fraction, "t": res.t, "n": res.n}

    elif kind == "tuple":
        _require(config, kind, "n", "reps", "tuple_size",
                 "thresholds.r_base", "thresholds.eps_base")
        n = config["n"]
        rho = config.get("rho_hat")
        pair_fit = None
        if rho is None and config.get("grid"):
            pair = pingpong_decay(measure, measure2 or measure, th["r_base"], th["eps_base"],
                                  config["grid"], reps, seed, threads=threads)
            pair_fit = fit_to_dict(pair.fit)
            rho = pair.fit.rho_hat if pair.fit else None
        res = tuple_decay(measure, config["tuple_size"], th["r_base"] ** n, th["eps_base"] ** n,
                          n, reps, seed, rho_hat=rho, threads=threads)
        header = ["n", "p_hat", "ci_lo", "ci_hi", "reps", "l", "prediction", "prediction_se", "within_prediction"]
        lo, hi = wilson_interval(res.failures, res.reps)
        rows = [[res.n, res.failure_fraction, lo, hi, res.reps, res.l,
                 res.prediction, res.prediction_se, res.within_prediction]]
        payload = {
            "failure_fraction": res.failure_fraction,
            "prediction": res.prediction,
            "prediction_se": res.prediction_se,
            "within_prediction": res.within_prediction,
            "rho_hat": rho,
            "pair_fit": pair_fit,
        }
    else:  # pragma: no cover
        raise ConfigError(f"unknown experiment kind {kind}")

    write_csv(out / f"{kind}.csv", header, rows)
    write_json(out / f"{kind}.json", _sidecar(kind, config, measure, measure2, payload, probe))
    return 0


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _cmd_kak(args) -> int:
    doc = _load_json(args.matrix)
    try:
        g, field = matrix_from_json_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.matrix}: malformed matrix document: {exc}") from exc
    dec = kak(g, field)
    d = g.shape[0]
    out = {
        "field": field.to_dict(),
        "d": d,
        "k": [format_scalar(dec.k[i, j], field) for i in range(d) for j in range(d)],
        "a": [format_scalar(x, field) for x in dec.a],
        "u": [format_scalar(dec.u[i, j], field) for i in range(d) for j in range(d)],
        "v": vector_to_strings(dec.v, field),
        "h": vector_to_strings(dec.h, field),
    }
    sys.stdout.write(dumps_json(out))
    return 0


def _cmd_certify(args) -> int:
    doc = _load_json(args.generators)
    try:
        field = FieldSpec.from_dict(doc["field"])
        d = int(doc["d"])
        gens = []
        for flat in doc["generators"]:
            if len(flat) != d * d:
                raise ConfigError(f"generator needs {d * d} entries, got {len(flat)}")
            gens.append(
                as_matrix([[parse_scalar(flat[i * d + j], field) for j in range(d)] for i in range(d)], field)
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.generators}: malformed generators document: {exc}") from exc
    cert = pingpong_certificate(gens, args.r, args.eps, field, certified=args.exact)
    out = cert.to_json_dict(field)
    sys.stdout.write(dumps_json(out))
    if args.out:
        write_json(Path(args.out) / "certificate.json", out)
    return 0 if cert.certified else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freewalk",
        description="Random matrix products over local fields: decompositions, "
        "ping-pong certification, decay experiments.",
    )
    parser.add_argument("--version", action="version", version=f"freewalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_kak = sub.add_parser("kak", help="print the Cartan decomposition of a matrix file")
    p_kak.add_argument("matrix")

    p_cert = sub.add_parser("certify", help="certify a ping-pong tuple from a generators file")
    p_cert.add_argument("generators")
    p_cert.add_argument("--r", type=float, required=True)
    p_cert.add_argument("--eps", type=float, required=True)
    p_cert.add_argument("--exact", action="store_true",
                        help="verified mode: interval/exact arithmetic at the comparisons")
    p_cert.add_argument("--out", default=os.environ.get("FREEWALK_OUT"))

    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment from a config file")
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed (env FREEWALK_SEED)")
        p.add_argument("--out", default=None, help="output directory (env FREEWALK_OUT)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; never changes results (env FREEWALK_THREADS)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "kak":
            return _cmd_kak(args)
        if args.command == "certify":
            return _cmd_certify(args)
        config_path = Path(args.config)
        config = _load_json(args.config)
        _validate_config(config, args.config)
        if config["kind"] != args.command:
            raise ConfigError(
                f"config kind {config['kind']!r} does not match subcommand {args.command!r}"
            )
        env_seed = _env_int("FREEWALK_SEED")
        if args.seed is not None:
            config["seed"] = args.seed
        elif env_seed is not None:
            config["seed"] = env_seed
        out = args.out or os.environ.get("FREEWALK_OUT") or config.get("out") or "."
        threads = args.threads or _env_int("FREEWALK_THREADS") or config.get("threads", 1)
        return _run_experiment(args.command, config, config_path.parent, Path(out), threads)
    except FreewalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
