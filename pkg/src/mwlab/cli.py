"""Command-line front end: ``mwlab <command> [--config PATH] [--seed N] [--out DIR] [--threads N]``.

Every run writes ``<command>.csv`` (plus ``<command>_<table>.csv`` for
secondary tables) and ``<command>.json`` into ``--out``. Exit codes: 0 on
success, 2 when a check fails, 3 for configuration errors, 1 for anything
unexpected. Engines are imported lazily so that ``--threads`` can reach the
BLAS thread pools before NumPy loads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CHECK = 2
EXIT_CONFIG = 3

INF_SPELLINGS = {"inf", "+inf", "infinity", "+infinity", "∞"}


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 3."""


# -- config ------------------------------------------------------------------------------


def parse_inf(obj: Any) -> Any:
    """Replace ``"inf"`` spellings by ``float('inf')`` throughout a JSON value."""
    if isinstance(obj, str):
        low = obj.strip().lower()
        if low in INF_SPELLINGS:
            return math.inf
        if low in {"-inf", "-infinity", "-∞"}:
            return -math.inf
        return obj
    if isinstance(obj, list):
        return [parse_inf(v) for v in obj]
    if isinstance(obj, dict):
        return {k: parse_inf(v) for k, v in obj.items()}
    return obj


def _encode_inf(obj: Any) -> Any:
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, (list, tuple)):
        return [_encode_inf(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _encode_inf(v) for k, v in obj.items()}
    return obj


@dataclass
class ExperimentConfig:
    """One command invocation: command name, parameters and run options.

    ``params`` carries the exponents, dimensions, depths, seeds and family
    descriptors of the command; ``out`` is the artifact directory.
    """

    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "."
    threads: int = 0

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "params": _encode_inf(self.params),
            "seed": self.seed,
            "out": self.out,
            "threads": self.threads,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - {"command", "params", "seed", "out", "threads"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in obj:
            raise ConfigError("config needs a 'command'")
        params = obj.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("'params' must be an object")
        return cls(
            str(obj["command"]),
            parse_inf(params),
            _as_int(obj.get("seed", 0), "seed"),
            str(obj.get("out", ".")),
            _as_int(obj.get("threads", 0), "threads"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None


# -- parameter coercion --------------------------------------------------------------------


def _as_float(v: Any, name: str) -> float:
    v = parse_inf(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    v = float(v)
    if math.isnan(v):
        raise ConfigError(f"{name} is NaN")
    return v


def _as_int(v: Any, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(v)


def _as_list(v: Any, name: str, item: Callable[[Any, str], Any]) -> list:
    if not isinstance(v, (list, tuple)):
        v = [v]
    if not v:
        raise ConfigError(f"{name} must not be empty")
    return [item(x, f"{name}[{i}]") for i, x in enumerate(v)]


def _as_bool(v: Any, name: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{name} must be true or false, got {v!r}")
    return v


def _as_str(v: Any, name: str) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{name} must be a string, got {v!r}")
    return v


def _opt(kind: Callable[[Any, str], Any]) -> Callable[[Any, str], Any]:
    return lambda v, name: None if v is None else kind(v, name)


FLOAT, INT, BOOL, STR = _as_float, _as_int, _as_bool, _as_str


def FLOATS(v: Any, name: str) -> list[float]:
    return _as_list(v, name, _as_float)


def INTS(v: Any, name: str) -> list[int]:
    return _as_list(v, name, _as_int)


def STRS(v: Any, name: str) -> list[str]:
    return _as_list(v, name, _as_str)


def DICT(v: Any, name: str) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"{name} must be an object, got {v!r}")
    return v


def _coerce(params: dict, schema: dict, command: str) -> dict:
    unknown = set(params) - set(schema)
    if unknown:
        raise ConfigError(f"unknown parameters for {command}: {sorted(unknown)}; known: {sorted(schema)}")
    out = {}
    for key, (kind, default) in schema.items():
        out[key] = kind(params[key], key) if key in params else default
    return out


# -- results -----------------------------------------------------------------------------------


# source marker for columns whose engine operation is named per row in an "operation" column
PER_ROW = "@operation"


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[dict]
    sources: dict  # column -> engine operation


@dataclass
class Outcome:
    tables: dict  # name -> Table; "" is the main table
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    lines: list[str] = field(default_factory=list)


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(row.get(c)) for c in table.columns])
    return buf.getvalue()


def _fmt(v: float) -> str:
    return f"{v:.12g}"


# -- commands ----------------------------------------------------------------------------------


def _family(desc: Any, default_depth: int):
    from .characteristics import IntervalFamily

    if desc is None:
        return IntervalFamily.dyadic(default_depth)
    desc = DICT(desc, "family")
    kind = desc.get("kind")
    if kind == "dyadic":
        return IntervalFamily.dyadic(_as_int(desc.get("depth", default_depth), "family.depth"))
    if kind == "windows":
        levels = INTS(desc.get("levels", list(range(default_depth + 1))), "family.levels")
        widths = INTS(desc.get("widths", [1, 2, 3, 4]), "family.widths")
        return IntervalFamily.windows(levels, widths)
    if kind == "explicit":
        items = desc.get("items")
        if not isinstance(items, list) or not all(isinstance(i, list) and len(i) == 2 for i in items):
            raise ConfigError("family.items must be a list of [a, b] pairs")
        return IntervalFamily.explicit([(_as_float(a, "a"), _as_float(b, "b")) for a, b in items])
    raise ConfigError(f"family.kind must be dyadic, windows or explicit, got {kind!r}")


def _parse_characteristic(spec: str) -> tuple[str, list[float]]:
    parts = spec.split(":")
    name = parts[0].lower()
    try:
        args = [_as_float(parse_inf(x) if parse_inf(x) != x else float(x), spec) for x in parts[1:]]
    except (ConfigError, ValueError):
        raise ConfigError(f"bad characteristic {spec!r}") from None
    need = {"apq": 2, "ainf": 1, "rh": 2, "a1": 0}
    if name not in need:
        raise ConfigError(f"unknown characteristic {spec!r}; use apq:p:q, ainf:t, rh:t:s or a1")
    if len(args) != need[name]:
        raise ConfigError(f"characteristic {spec!r} needs {need[name]} exponent(s)")
    return name, args


CHAR_SCHEMA = {
    "weight": (_opt(STR), None),
    "identity": (_opt(INT), None),
    "d": (INT, 2),
    "resolution": (INT, 4),
    "spread": (FLOAT, 1.0),
    "family": (_opt(DICT), None),
    "characteristics": (STRS, ["apq:2:2", "ainf:2", "rh:2:2", "a1"]),
    "directions": (INT, 0),
}


def _validate_char(p: dict) -> None:
    for spec in p["characteristics"]:
        _parse_characteristic(spec)
    if p["identity"] is not None and p["identity"] < 1:
        raise ConfigError("identity dimension must be >= 1")


def _run_char(p: dict, cfg: ExperimentConfig) -> Outcome:
    from .characteristics import apq_characteristic, at_infinity_characteristic, rh_characteristic
    from .convex_geometry import DirectionGrid
    from .extrapolation_calc import matrix_a1
    from .weight_store import PiecewiseWeight, random_weight

    chars = [_parse_characteristic(s) for s in p["characteristics"]]
    if p["weight"] is not None:
        W = PiecewiseWeight.load(p["weight"])
        origin = {"weight": p["weight"], "operation": "weight_store.PiecewiseWeight.load"}
    elif p["identity"] is not None:
        W = PiecewiseWeight.identity(p["identity"], p["resolution"])
        origin = {"identity": p["identity"], "operation": "weight_store.PiecewiseWeight.identity"}
    else:
        W = random_weight(p["d"], p["resolution"], p["spread"], cfg.seed)
        origin = {"d": p["d"], "seed": cfg.seed, "operation": "weight_store.random_weight"}
    family = _family(p["family"], W.resolution)
    grid = DirectionGrid(W.dim, p["directions"], cfg.seed) if W.dim > 1 else None
    rows, lines = [], []
    for (name, args), spec in zip(chars, p["characteristics"]):
        if name == "apq":
            rep = apq_characteristic(W, args[0], args[1], family)
            op = "characteristics.apq_characteristic"
            value, arg = rep.value, rep.argmax
        elif name == "ainf":
            rep = at_infinity_characteristic(W, args[0], family)
            op = "characteristics.at_infinity_characteristic"
            value, arg = rep.value, rep.argmax
        elif name == "rh":
            rep = rh_characteristic(W, args[0], args[1], grid, family)
            op = "characteristics.rh_characteristic"
            value, arg = rep.value, rep.argmax
        else:
            value = matrix_a1(W, family)
            op = "extrapolation_calc.matrix_a1"
            arg = (None, None)
        rows.append({"characteristic": spec, "value": value, "argmax_a": arg[0], "argmax_b": arg[1], "operation": op})
        lines.append(f"{spec} = {_fmt(value)}")
    table = Table(
        ("characteristic", "value", "argmax_a", "argmax_b", "operation"),
        rows,
        {"value": PER_ROW, "argmax_a": PER_ROW, "argmax_b": PER_ROW},
    )
    checks = {"finite": all(math.isfinite(r["value"]) for r in rows), "at_least_one": all(r["value"] >= 1 - 1e-9 for r in rows)}
    return Outcome({"": table}, checks, {"weight": origin, "family": family.describe(), "cells": W.n_cells}, lines)


COUNTER_SCHEMA = {
    "p1": (FLOAT, 2.0),
    "q1": (FLOAT, 2.0),
    "p2": (FLOAT, 3.0),
    "q2": (_opt(FLOAT), None),
    "depths": (INTS, [2, 4, 6, 8]),
    "widths": (INTS, [1, 2, 3, 4, 6, 8]),
    "min_growth": (_opt(FLOAT), None),
}


def _validate_counter(p: dict) -> None:
    from .characteristics import CharacteristicError, _check_constraint, solve_q2

    if p["q2"] is None:
        p["q2"] = solve_q2(p["p1"], p["q1"], p["p2"])
    try:
        _check_constraint(p["p1"], p["q1"], p["p2"], p["q2"])
    except CharacteristicError as exc:
        raise ConfigError(str(exc)) from None
    if not p["p1"] < p["p2"]:
        raise ConfigError("need p1 < p2")
    if not 1 < p["p1"] <= p["q1"]:
        raise ConfigError("need 1 < p1 <= q1")
    if any(d < 0 or d > 16 for d in p["depths"]):
        raise ConfigError("depths must lie in 0..16")


def _run_counter(p: dict, cfg: ExperimentConfig) -> Outcome:
    from .characteristics import blowup_sweep

    rows = blowup_sweep(p["p1"], p["q1"], p["p2"], p["q2"], sorted(set(p["depths"])), p["widths"])
    out = [vars(r).copy() for r in rows]
    table = Table(
        ("depth", "dyadic_char", "lower_bound", "proof_bound", "windows_char"),
        out,
        {c: "characteristics.blowup_sweep" for c in ("dyadic_char", "lower_bound", "proof_bound", "windows_char")},
    )
    checks = {"dyadic_above_block_bound": all(r.proof_bound <= r.dyadic_char * (1 + 1e-9) for r in rows)}
    if p["min_growth"] is not None and len(rows) > 1:
        checks["lower_bound_growth"] = rows[-1].lower_bound >= p["min_growth"] * rows[0].lower_bound
    lines = [
        f"depth {r.depth}: dyadic {_fmt(r.dyadic_char)} lower {_fmt(r.lower_bound)} windows {_fmt(r.windows_char)}"
        for r in rows
    ]
    summ = {k: p[k] for k in ("p1", "q1", "p2", "q2")}
    return Outcome({"": table}, checks, summ, lines)


CORDES_SCHEMA = {
    "pairs": (INT, 200),
    "dims": (INTS, [2, 3]),
    "exponents": (FLOATS, [0.0, 0.25, 0.5, 0.75, 1.0]),
    "spread": (FLOAT, 1.0),
    "gap_family": (STR, "one"),
    "gap_exponents": (FLOATS, [1.5, 2.0, 3.0]),
    "gap_n": (FLOATS, [10.0, 100.0, 1000.0, 10000.0, 100000.0]),
}


def _validate_cordes(p: dict) -> None:
    if any(not 0 <= a <= 1 for a in p["exponents"]):
        raise ConfigError("Cordes exponents must lie in [0, 1]")
    if p["gap_family"] not in ("one", "two"):
        raise ConfigError("gap_family must be 'one' or 'two'")
    if p["gap_family"] == "one" and any(not a > 1 for a in p["gap_exponents"]):
        raise ConfigError("family one gaps need exponents > 1")
    if p["gap_family"] == "two" and any(not 0 < a < 1 for a in p["gap_exponents"]):
        raise ConfigError("family two gaps need exponents in (0, 1)")
    if any(n < 1 for n in p["gap_n"]):
        raise ConfigError("gap_n values must be >= 1")
    if p["pairs"] < 0 or any(not 1 <= d <= 8 for d in p["dims"]):
        raise ConfigError("pairs must be >= 0 and dims in 1..8")


def random_pd_pair(rng, d: int, spread: float):
    """Two PD matrices ``exp(H)`` with ``H`` random Hermitian."""
    import numpy as np

    from .weight_store import random_hermitian

    h = random_hermitian(rng, d, 2, spread)
    lam, vec = np.linalg.eigh(h)
    m = (vec * np.exp(lam)[:, None, :]) @ np.conj(np.swapaxes(vec, 1, 2))
    return m[0], m[1]


def _run_cordes(p: dict, cfg: ExperimentConfig) -> Outcome:
    import numpy as np

    from .hermitian_core import cordes_check, cordes_gap

    rng = np.random.default_rng(cfg.seed)
    rows = []
    for d in p["dims"]:
        for i in range(p["pairs"]):
            A, B = random_pd_pair(rng, d, p["spread"])
            for a in p["exponents"]:
                rec = cordes_check(A, B, a)
                rows.append({"pair": i, "d": d, "a": a, "lhs": rec.lhs, "rhs": rec.rhs, "holds": rec.holds})
    gaps = []
    for a in p["gap_exponents"]:
        for n in p["gap_n"]:
            g = cordes_gap(n, a, p["gap_family"])
            scale = n ** (a - 1.0) if p["gap_family"] == "one" else 1.0
            gaps.append({"family": p["gap_family"], "a": a, "n": n, "trace": g, "normalized": g / scale})
    main = Table(("pair", "d", "a", "lhs", "rhs", "holds"), rows,
                 {"lhs": "hermitian_core.cordes_check", "rhs": "hermitian_core.cordes_check", "holds": "hermitian_core.cordes_check"})
    gap = Table(("family", "a", "n", "trace", "normalized"), gaps,
                {"trace": "hermitian_core.cordes_gap", "normalized": "hermitian_core.cordes_gap / n^(a-1) (family one)"})
    violations = sum(not r["holds"] for r in rows)
    lines = [f"cordes checks: {len(rows)}, violations: {violations}"]
    lines += [f"gap family {g['family']} a={_fmt(g['a'])} n={_fmt(g['n'])}: {_fmt(g['trace'])}" for g in gaps]
    return Outcome({"": main, "gap": gap}, {"no_violations": violations == 0}, {"checks": len(rows), "violations": violations}, lines)


JOHN_SCHEMA = {
    "bodies": (INT, 20),
    "d": (INT, 2),
    "directions": (INT, 256),
    "vertices": (INT, 6),
    "slack": (FLOAT, 0.05),
    "inward_tol": (FLOAT, 1e-6),
}


def _validate_john(p: dict) -> None:
    if not 1 <= p["d"] <= 8:
        raise ConfigError("d must lie in 1..8")
    if p["directions"] % 4 or p["directions"] < 4:
        raise ConfigError("directions must be a positive multiple of 4")
    if p["vertices"] < p["d"]:
        raise ConfigError("need at least d vertices for a body with interior")
    if p["bodies"] < 1 or p["slack"] < 0:
        raise ConfigError("bodies must be >= 1 and slack >= 0")


def _run_john(p: dict, cfg: ExperimentConfig) -> Outcome:
    import numpy as np

    from .convex_geometry import DirectionGrid, circled_hull, john_ellipsoid, verify_sandwich

    grid = DirectionGrid(p["d"], p["directions"], cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    factor = math.sqrt(p["d"]) * (1.0 + p["slack"])
    rows = []
    for i in range(p["bodies"]):
        X = rng.standard_normal((p["vertices"], p["d"])) + 1j * rng.standard_normal((p["vertices"], p["d"]))
        K = circled_hull(grid, X)
        E = john_ellipsoid(K)
        rep = verify_sandwich(K, E, factor, p["inward_tol"])
        rows.append({"body": i, "d": p["d"], "inward_excess": rep.inward_excess, "outward_ratio": rep.outward_ratio,
                     "factor": factor, "passed": rep.passed})
    table = Table(("body", "d", "inward_excess", "outward_ratio", "factor", "passed"), rows,
                  {"inward_excess": "convex_geometry.verify_sandwich(john_ellipsoid)",
                   "outward_ratio": "convex_geometry.verify_sandwich(john_ellipsoid)",
                   "passed": "convex_geometry.verify_sandwich"})
    worst = max(r["outward_ratio"] for r in rows)
    lines = [f"bodies: {len(rows)}, worst outward ratio {_fmt(worst)} (factor {_fmt(factor)})"]
    return Outcome({"": table}, {"all_sandwiched": all(r["passed"] for r in rows)}, {"worst_outward": worst}, lines)


SPARSE_SCHEMA = {
    "p0": (FLOAT, 1.0),
    "q0": (FLOAT, math.inf),
    "p": (FLOAT, 2.0),
    "seeds": (_opt(INTS), None),
    "dims": (INTS, [1, 2]),
    "depths": (INTS, [4, 6, 8]),
    "resolution": (INT, 5),
    "spread": (FLOAT, 0.5),
    "eps": (FLOAT, 0.25),
    "admit": (FLOAT, 0.5),
    "lam": (FLOAT, 5.0),
}


def _validate_profile(p0: float, q0: float, pp: float) -> None:
    from .sparse_engine import SparseError, exponent_profile

    try:
        exponent_profile(p0, q0, pp)
    except SparseError as exc:
        raise ConfigError(str(exc)) from None


def _validate_sparse(p: dict) -> None:
    _validate_profile(p["p0"], p["q0"], p["p"])
    if not 0 < p["eps"] < 1 or not 0 < p["admit"] <= 1:
        raise ConfigError("need 0 < eps < 1 and 0 < admit <= 1")
    if p["lam"] < 1:
        raise ConfigError("lam must be >= 1")
    if any(d not in (1, 2, 3) for d in p["dims"]) or any(k < 0 for k in p["depths"]):
        raise ConfigError("dims must lie in 1..3 and depths be >= 0")
    if not 0 <= p["resolution"] <= 10:
        raise ConfigError("resolution must lie in 0..10")


def _run_sparse(p: dict, cfg: ExperimentConfig) -> Outcome:
    from .sparse_engine import SWEEP_COLUMNS, exponent_profile, sparse_bound_sweep

    prof = exponent_profile(p["p0"], p["q0"], p["p"])
    seeds = p["seeds"] if p["seeds"] is not None else [cfg.seed]
    rows = sparse_bound_sweep(seeds, p["dims"], p["depths"], prof, p["resolution"], p["spread"], p["eps"], p["admit"], p["lam"])
    src = {
        "form": "sparse_engine.sparse_form",
        "char": "sparse_engine.weight_characteristic",
        "norm_f": "sparse_engine.weighted_norm",
        "norm_g": "sparse_engine.weighted_norm(dual_weight)",
        "ratio": "sparse_engine.sparse_bound_sweep",
        "distortion": "sparse_engine.sparse_form",
    }
    top = max(p["depths"])
    worst = max(r["ratio"] for r in rows)
    lines = [f"alpha = {_fmt(prof.alpha)}", f"rows: {len(rows)}, max ratio {_fmt(worst)}"]
    lines += [f"max ratio at depth {k}: {_fmt(max(r['ratio'] for r in rows if r['depth'] == k))}" for k in sorted(set(p["depths"]))]
    checks = {"ratios_finite": all(math.isfinite(r["ratio"]) for r in rows)}
    return Outcome({"": Table(SWEEP_COLUMNS, rows, src)}, checks, {"alpha": prof.alpha, "max_ratio": worst, "top_depth": top}, lines)


EXPONENT_SCHEMA = {
    "p0": (FLOAT, 1.0),
    "q0": (FLOAT, math.inf),
    "p": (FLOAT, 2.0),
    "q": (_opt(FLOAT), None),
}


def _validate_exponents(p: dict) -> None:
    _validate_profile(p["p0"], p["q0"], p["p"])
    if p["q"] is not None and not p["p0"] < p["q"] < p["q0"]:
        raise ConfigError(f"q={p['q']} outside ({p['p0']}, {p['q0']})")


def _run_exponents(p: dict, cfg: ExperimentConfig) -> Outcome:
    from .extrapolation_calc import ExtrapolationProfile, alpha_detail, identity_check
    from .sparse_engine import exponent_profile

    prof = exponent_profile(p["p0"], p["q0"], p["p"])
    rows = [{"quantity": k, "value": v, "operation": "sparse_engine.exponent_profile"} for k, v in prof.summary().items()]
    ids = [{"identity": k, "lhs": l, "rhs": r, "holds": ok, "operation": "sparse_engine.ExponentProfile.identities"}
           for (k, (l, r)), ok in zip(prof.identities().items(), prof.check().values())]
    lines = [f"alpha = {_fmt(prof.alpha)}"]
    summ: dict = {"alpha": prof.alpha}
    if p["q"] is not None:
        ext = ExtrapolationProfile(p["p0"], p["q0"])
        al = alpha_detail(ext, p["p"], p["q"])
        rows.append({"quantity": "alpha(p,q)", "value": al.value, "operation": "extrapolation_calc.alpha"})
        rec = identity_check(ext, p["p"], p["q"])
        ok = rec.holds()
        ids.append({"identity": "s(p)'s(q)'(p-q) = p s(p)' - q s(q)'", "lhs": rec.first_lhs, "rhs": rec.first_rhs,
                    "holds": ok, "operation": "extrapolation_calc.identity_check"})
        ids.append({"identity": "r(p)/r(q) = p s(p)'/(q s(q)')", "lhs": rec.second_lhs, "rhs": rec.second_rhs,
                    "holds": ok, "operation": "extrapolation_calc.identity_check"})
        lines.append(f"alpha(p,q) = {_fmt(al.value)} ({al.case})")
        summ.update(alpha_pq=al.value, alpha_case=al.case)
    main = Table(("quantity", "value", "operation"), rows, {"value": PER_ROW})
    idt = Table(("identity", "lhs", "rhs", "holds", "operation"), ids, {"lhs": PER_ROW, "rhs": PER_ROW})
    return Outcome({"": main, "identities": idt}, {"identities": all(r["holds"] for r in ids)}, summ, lines)


RDF_SCHEMA = {
    "d": (INT, 2),
    "level": (INT, 5),
    "spread": (FLOAT, 0.8),
    "p0": (FLOAT, 1.0),
    "q0": (FLOAT, 4.0),
    "q": (FLOAT, 2.0),
    "k_max": (INT, 40),
    "probes": (INT, 32),
    "starts": (INT, 8),
    "directions": (INT, 64),
}


def _validate_rdf(p: dict) -> None:
    from .extrapolation_calc import MAX_RDF_CELLS, ExtrapolationError, ExtrapolationProfile

    try:
        ExtrapolationProfile(p["p0"], p["q0"]).r(p["q"])
    except ExtrapolationError as exc:
        raise ConfigError(str(exc)) from None
    if p["d"] not in (1, 2):
        raise ConfigError("the iteration demo supports d in {1, 2}")
    if not 0 <= p["level"] or 2 ** p["level"] > MAX_RDF_CELLS:
        raise ConfigError(f"level must give at most {MAX_RDF_CELLS} cells")
    if p["k_max"] < 1 or p["probes"] < 0 or p["starts"] < 1:
        raise ConfigError("need k_max >= 1, probes >= 0 and starts >= 1")
    if p["directions"] % 4 or p["directions"] < 4:
        raise ConfigError("directions must be a positive multiple of 4")


def _run_rdf(p: dict, cfg: ExperimentConfig) -> Outcome:
    import numpy as np

    from .convex_geometry import DirectionGrid
    from .extrapolation_calc import BodyField, ExtrapolationProfile, rdf_iterate
    from .hermitian_core import power_stack
    from .weight_store import random_weight

    prof = ExtrapolationProfile(p["p0"], p["q0"])
    r = prof.r(p["q"])
    W = random_weight(p["d"], p["level"], p["spread"], cfg.seed)
    grid = DirectionGrid(p["d"], p["directions"], cfg.seed)
    c0 = np.exp(np.random.default_rng(cfg.seed + 1).standard_normal(W.n_cells))
    G = BodyField.ellipsoids(grid, c0[:, None, None] * power_stack(W.values, -1.0 / r))
    res = rdf_iterate(G, W, p["q"], prof, p["k_max"], p["probes"], cfg.seed, p["starts"])
    table = Table(("k", "norm_PkG", "cumulative_norm", "worst_containment_slack"), res.trace,
                  {c: "extrapolation_calc.rdf_iterate" for c in ("norm_PkG", "cumulative_norm", "worst_containment_slack")})
    checks = {k: res.checks[k] for k in ("contains_G", "norm_bound", "a1_type", "ellipsoid_valued")}
    summ = {k: v for k, v in res.checks.items() if k not in checks}
    lines = [f"B = {_fmt(res.B)}, r = {_fmt(r)}, |SG|/|G| = {_fmt(res.checks['norm_ratio'])}"]
    lines += [f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()]
    return Outcome({"": table}, checks, summ, lines)


VERIFY_SCHEMA = {
    "family": (_opt(STR), None),
    "eps": (_opt(FLOAT), None),
    "depth": (INT, 8),
    "generate_eps": (FLOAT, 0.25),
    "admit": (FLOAT, 0.5),
}


def _validate_verify(p: dict) -> None:
    if p["eps"] is not None and not 0 < p["eps"] <= 1:
        raise ConfigError("eps must lie in (0, 1]")
    if p["family"] is None and (not 0 < p["generate_eps"] < 1 or not 0 <= p["depth"] <= 20):
        raise ConfigError("generation needs 0 < generate_eps < 1 and depth in 0..20")


def _run_verify(p: dict, cfg: ExperimentConfig) -> Outcome:
    from .dyadic_grid import SparseCollection, generate_sparse, verify_sparse

    if p["family"] is not None:
        S = SparseCollection.load(p["family"])
        origin = {"family": p["family"], "operation": "dyadic_grid.SparseCollection.load"}
    else:
        S = generate_sparse(p["depth"], p["generate_eps"], cfg.seed, p["admit"])
        origin = {"depth": p["depth"], "eps": p["generate_eps"], "operation": "dyadic_grid.generate_sparse"}
    eps = p["eps"] if p["eps"] is not None else S.epsilon
    cert = verify_sparse(S.intervals, eps)
    pack = cert.packing()
    rows = []
    for Q in sorted(cert.sets, key=lambda q: (q.level, q.index)):
        claimed = pack[Q]
        rows.append({"level": Q.level, "index": Q.index, "claimed": str(claimed), "needed": str(cert.epsilon * Q.length),
                     "pieces": len(cert.sets[Q]), "ok": Q not in cert.failures})
    table = Table(("level", "index", "claimed", "needed", "pieces", "ok"), rows,
                  {"claimed": "dyadic_grid.verify_sparse", "pieces": "dyadic_grid.verify_sparse", "ok": "dyadic_grid.verify_sparse"})
    lines = [f"{len(rows)} intervals, eps = {cert.epsilon}: {'sparse' if cert.ok else 'NOT sparse'}"]
    return Outcome({"": table}, {"sparse": cert.ok}, {"family": origin, "intervals": len(rows), "failures": len(cert.failures)}, lines)


@dataclass(frozen=True)
class Command:
    schema: dict
    run: Callable[[dict, ExperimentConfig], Outcome]
    validate: Optional[Callable[[dict], None]] = None
    help: str = ""


COMMANDS: dict[str, Command] = {
    "char": Command(CHAR_SCHEMA, _run_char, _validate_char, "characteristics of a weight over an interval family"),
    "counterexample": Command(COUNTER_SCHEMA, _run_counter, _validate_counter, "blowup table for the counterexample weight"),
    "cordes": Command(CORDES_SCHEMA, _run_cordes, _validate_cordes, "Cordes inequality suite and converse gaps"),
    "john": Command(JOHN_SCHEMA, _run_john, _validate_john, "John ellipsoid sandwich diagnostics"),
    "sparse-form": Command(SPARSE_SCHEMA, _run_sparse, _validate_sparse, "convex-body sparse form versus the weighted bound"),
    "exponents": Command(EXPONENT_SCHEMA, _run_exponents, _validate_exponents, "derived exponents, identities and alpha"),
    "rdf-demo": Command(RDF_SCHEMA, _run_rdf, _validate_rdf, "truncated Rubio de Francia iteration trace"),
    "verify-sparse": Command(VERIFY_SCHEMA, _run_verify, _validate_verify, "exact sparseness certificate"),
}


def validate(cfg: ExperimentConfig) -> dict:
    """Coerce and check the parameters of ``cfg``; raises :class:`ConfigError`."""
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {sorted(COMMANDS)}")
    if cfg.threads < 0:
        raise ConfigError("threads must be >= 0")
    cmd = COMMANDS[cfg.command]
    p = _coerce(parse_inf(cfg.params), cmd.schema, cfg.command)
    if cmd.validate is not None:
        cmd.validate(p)
    return p


def _set_threads(n: int) -> None:
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Validate, dispatch and write artifacts; returns the exit code."""
    stdout = stdout or sys.stdout
    try:
        p = validate(cfg)
    except ConfigError as exc:
        _diagnose(cfg, "config", exc)
        return EXIT_CONFIG
    _set_threads(cfg.threads)
    try:
        outcome = COMMANDS[cfg.command].run(p, cfg)
    except ConfigError as exc:
        _diagnose(cfg, "config", exc)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:  # engine input validation, unreadable input files
        _diagnose(cfg, "input", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as structured diagnostics
        _diagnose(cfg, "internal", exc)
        return EXIT_INTERNAL
    code = EXIT_OK if all(outcome.checks.values()) else EXIT_CHECK
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts, columns = {}, {}
    for name, table in outcome.tables.items():
        fname = f"{cfg.command}.csv" if not name else f"{cfg.command}_{name}.csv"
        (out / fname).write_text(render_csv(table), encoding="utf-8")
        artifacts[name or "main"] = fname
        per_row = sorted({r["operation"] for r in table.rows if "operation" in r})
        columns[fname] = {c: (per_row if op == PER_ROW else op) for c, op in table.sources.items()}
    from . import __version__
    from .kernels import BACKEND

    summary = {
        "command": cfg.command,
        "config": cfg.to_json(),
        "resolved_params": _encode_inf(p),
        "artifacts": artifacts,
        "operations": columns,
        "checks": outcome.checks,
        "summary": _encode_inf(outcome.summary),
        "exit_code": code,
        "backend": BACKEND,
        "version": __version__,
    }
    (out / f"{cfg.command}.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    for line in outcome.lines:
        print(line, file=stdout)
    if code == EXIT_CHECK:
        failed = sorted(k for k, v in outcome.checks.items() if not v)
        print(json.dumps({"status": "check-failed", "command": cfg.command, "failed": failed}), file=sys.stderr)
    return code


def _diagnose(cfg: ExperimentConfig, stage: str, exc: Exception) -> None:
    print(json.dumps({"status": "error", "stage": stage, "command": cfg.command,
                      "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


def _parse_set(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        out[key] = parse_inf(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="seed (default 0 or the config's)")
    common.add_argument("--out", help="artifact directory (default: current directory)")
    common.add_argument("--threads", type=int, help="BLAS threads, 0 = auto")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter; VALUE is JSON or a bare string, 'inf' allowed")
    parser = argparse.ArgumentParser(prog="mwlab", description="Matrix-weighted dyadic analysis experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, cmd in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=cmd.help, description=cmd.help)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig(args.command)
    try:
        if args.config:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            cfg = ExperimentConfig.loads(text)
            if cfg.command != args.command:
                raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
        cfg.params.update(_parse_set(args.set))
    except ConfigError as exc:
        _diagnose(cfg, "config", exc)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
