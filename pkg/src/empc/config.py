"""Config-file parsing and canonical hashing.

The format is INI-style with fixed sections [system] [constraints] [cost]
[storage] [rho] [terminal] [horizon] [sim] [solver].  Unknown sections or
keys are errors (anti-typo).  Vectors are whitespace-separated numbers,
matrices use ';' between rows, and structured lists (polynomial terms,
affine rows, pins) use the small grammars documented per key below.
"""

from __future__ import annotations

import configparser
import hashlib
import io

import numpy as np

from empc import nlp
from empc.errors import ConfigError
from empc.model import ConstraintSet, StageCost, SystemModel
from empc.ocp import ExperimentConfig, TerminalIngredients, prepare_config
from empc.storage import RhoFunction, StorageFamily

_ALLOWED = {
    "system": {"kind", "a", "b"},
    "constraints": {"state_lo", "state_hi", "input_mode", "input_lo",
                    "input_hi", "c_lo", "c_hi", "d_lo", "d_hi"},
    "cost": {"kind", "terms"},
    "storage": {"basis", "bound", "theta_lo", "theta_hi", "pinned"},
    "rho": {"weight"},
    "terminal": {"mode", "rows", "box_lo", "box_hi", "penalty",
                 "policy_gain", "policy_offset"},
    "horizon": {"length"},
    "sim": {"steps", "x0", "theta0", "label", "out"},
    "solver": {"feas_tol", "stat_tol", "penalty0", "penalty_growth",
               "penalty_cap", "max_outer", "max_inner", "warm_multipliers"},
}


def _vector(s: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in s.split()], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"bad vector {s!r}: {exc}") from None


def _matrix(s: str) -> np.ndarray:
    rows = [_vector(r) for r in s.split(";") if r.strip()]
    if not rows:
        raise ConfigError(f"bad matrix {s!r}")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged matrix {s!r}")
    return np.array(rows)


def _int_matrix(s: str) -> np.ndarray:
    return _matrix(s).astype(np.int64)


def _pins(s: str):
    # "index:value, index:value" (separators: comma or whitespace)
    out = []
    for item in s.replace(",", " ").split():
        if ":" not in item:
            raise ConfigError(f"bad pin {item!r}: expected index:value")
        i, v = item.split(":", 1)
        out.append((int(i), float(v)))
    return out


def _poly_terms(s: str, want_inputs: bool):
    # "xexps | uexps : coef ; ..." or "xexps : coef ; ..." without inputs
    terms = []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        head, _, coef = chunk.rpartition(":")
        if not head:
            raise ConfigError(f"bad polynomial term {chunk!r}")
        if want_inputs:
            if "|" not in head:
                raise ConfigError(f"term {chunk!r} needs 'xexps | uexps : coef'")
            xs, us = head.split("|", 1)
            terms.append((tuple(int(v) for v in xs.split()),
                          tuple(int(v) for v in us.split()),
                          float(coef)))
        else:
            terms.append((tuple(int(v) for v in head.split()), float(coef)))
    return terms


def _affine_rows(s: str):
    # "coeffs : value ; ..." one terminal affine row per chunk
    rows, vals = [], []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        head, _, val = chunk.rpartition(":")
        if not head:
            raise ConfigError(f"bad affine row {chunk!r}")
        rows.append([float(v) for v in head.split()])
        vals.append(float(val))
    return np.array(rows), np.array(vals)


def parse_raw(text: str) -> dict:
    """Parse and key-validate the INI text into {section: {key: str}}."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    raw = {}
    for section in cp.sections():
        if section not in _ALLOWED:
            raise ConfigError(f"unknown section [{section}]")
        raw[section] = {}
        for key, val in cp.items(section):
            if key not in _ALLOWED[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            raw[section][key] = val.strip()
    missing = set(_ALLOWED) - set(raw)
    if missing:
        raise ConfigError(f"missing sections: {', '.join(sorted(missing))}")
    return raw


def _get(raw, section, key, default=None, required=False):
    val = raw.get(section, {}).get(key)
    if val is None or val == "":
        if required:
            raise ConfigError(f"missing key '{key}' in section [{section}]")
        return default
    return val


def build_config(raw: dict, label: str | None = None) -> ExperimentConfig:
    """Turn a parsed raw dict into a validated ExperimentConfig."""
    kind = _get(raw, "system", "kind", required=True)
    if kind == "rotator":
        system = SystemModel.rotator()
    elif kind == "linear":
        system = SystemModel.linear(_matrix(_get(raw, "system", "a", required=True)),
                                    _matrix(_get(raw, "system", "b", required=True)))
    else:
        raise ConfigError(f"unknown system kind {kind!r}")

    state_lo = _vector(_get(raw, "constraints", "state_lo", required=True))
    state_hi = _vector(_get(raw, "constraints", "state_hi", required=True))
    imode = _get(raw, "constraints", "input_mode", required=True)
    if imode == "box":
        constraints = ConstraintSet.box(
            state_lo, state_hi,
            _vector(_get(raw, "constraints", "input_lo", required=True)),
            _vector(_get(raw, "constraints", "input_hi", required=True)))
    elif imode == "coupled":
        constraints = ConstraintSet.coupled(
            state_lo, state_hi,
            _vector(_get(raw, "constraints", "c_lo", required=True)),
            _matrix(_get(raw, "constraints", "d_lo", required=True)),
            _vector(_get(raw, "constraints", "c_hi", required=True)),
            _matrix(_get(raw, "constraints", "d_hi", required=True)))
    else:
        raise ConfigError(f"unknown input_mode {imode!r}")

    ckind = _get(raw, "cost", "kind", required=True)
    if ckind == "quartic":
        cost = StageCost.quartic()
    elif ckind == "absxy":
        cost = StageCost.absxy()
    elif ckind == "polynomial":
        terms = _poly_terms(_get(raw, "cost", "terms", required=True), True)
        cost = StageCost.polynomial(terms, system.n, system.m)
    else:
        raise ConfigError(f"unknown cost kind {ckind!r}")

    basis = _int_matrix(_get(raw, "storage", "basis", required=True))
    pinned = _pins(_get(raw, "storage", "pinned", default=""))
    bound = _get(raw, "storage", "bound")
    if bound is not None:
        storage = StorageFamily.symmetric(basis, float(bound), pinned)
    else:
        storage = StorageFamily.create(
            basis, _vector(_get(raw, "storage", "theta_lo", required=True)),
            _vector(_get(raw, "storage", "theta_hi", required=True)), pinned)

    rho = RhoFunction(float(_get(raw, "rho", "weight", required=True)))

    tmode = _get(raw, "terminal", "mode", required=True)
    if tmode == "equality":
        terminal = TerminalIngredients.equality()
    elif tmode == "region":
        E, e = _affine_rows(_get(raw, "terminal", "rows", required=True))
        penalty = _poly_terms(_get(raw, "terminal", "penalty", default=""), False)
        terminal = TerminalIngredients.region(
            E, e,
            _vector(_get(raw, "terminal", "box_lo", required=True)),
            _vector(_get(raw, "terminal", "box_hi", required=True)),
            penalty,
            _matrix(_get(raw, "terminal", "policy_gain", required=True)),
            _vector(_get(raw, "terminal", "policy_offset", required=True)))
    else:
        raise ConfigError(f"unknown terminal mode {tmode!r}")

    horizon = int(_get(raw, "horizon", "length", required=True))
    steps = int(_get(raw, "sim", "steps", required=True))
    x0 = _vector(_get(raw, "sim", "x0", required=True))
    theta0_s = _get(raw, "sim", "theta0")
    theta0 = _vector(theta0_s) if theta0_s is not None else None

    sk = raw.get("solver", {})
    defaults = nlp.SolverOptions()
    solver = nlp.SolverOptions(
        feas_tol=float(sk.get("feas_tol", defaults.feas_tol)),
        stat_tol=float(sk.get("stat_tol", defaults.stat_tol)),
        penalty0=float(sk.get("penalty0", defaults.penalty0)),
        penalty_growth=float(sk.get("penalty_growth", defaults.penalty_growth)),
        penalty_cap=float(sk.get("penalty_cap", defaults.penalty_cap)),
        max_outer=int(sk.get("max_outer", defaults.max_outer)),
        max_inner=int(sk.get("max_inner", defaults.max_inner)))
    warm = sk.get("warm_multipliers", "true").lower() in ("1", "true", "yes", "on")

    if label is None:
        label = _get(raw, "sim", "label", default="run")
    out_dir = _get(raw, "sim", "out")
    return prepare_config(system, constraints, cost, storage, rho, terminal,
                          horizon, steps, x0, theta0, solver,
                          warm_multipliers=warm, label=label,
                          out_dir=out_dir)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return build_config(parse_raw(fh.read()))


def apply_sweep_value(raw: dict, parameter: str, value: float) -> dict:
    """Derived raw config with one swept parameter replaced."""
    out = {k: dict(v) for k, v in raw.items()}
    if parameter == "rho_weight":
        out["rho"]["weight"] = repr(float(value))
    elif parameter == "theta_bound":
        out["storage"]["bound"] = repr(float(value))
        out["storage"].pop("theta_lo", None)
        out["storage"].pop("theta_hi", None)
    else:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    return out


# ----------------------------------------------------------------------
# Canonical hashing
# ----------------------------------------------------------------------


def _emit(buf, name, value):
    if isinstance(value, np.ndarray):
        flat = " ".join(repr(float(v)) for v in np.asarray(value, dtype=float).ravel())
        buf.write(f"{name} [{','.join(str(d) for d in value.shape)}] {flat}\n")
    else:
        buf.write(f"{name} {value!r}\n")


def canonical_text(cfg: ExperimentConfig) -> str:
    """Deterministic serialization of the semantic config content."""
    buf = io.StringIO()
    _emit(buf, "system.kind", cfg.system.kind)
    _emit(buf, "system.A", cfg.system.A)
    _emit(buf, "system.B", cfg.system.B)
    z = cfg.constraints
    _emit(buf, "z.state_lo", z.state_lo)
    _emit(buf, "z.state_hi", z.state_hi)
    _emit(buf, "z.input_mode", z.input_mode)
    for name in ("input_lo", "input_hi", "c_lo", "c_hi", "d_lo", "d_hi"):
        v = getattr(z, name)
        if v is not None:
            _emit(buf, f"z.{name}", v)
    _emit(buf, "cost.kind", cfg.cost.kind)
    _emit(buf, "cost.ex", cfg.cost.ex.astype(float))
    _emit(buf, "cost.eu", cfg.cost.eu.astype(float))
    _emit(buf, "cost.coef", cfg.cost.coef)
    _emit(buf, "storage.exponents", cfg.storage.exponents.astype(float))
    _emit(buf, "storage.lo", cfg.storage.theta_lo)
    _emit(buf, "storage.hi", cfg.storage.theta_hi)
    _emit(buf, "storage.pinned", tuple(cfg.storage.pinned))
    _emit(buf, "rho.weight", cfg.rho.weight)
    _emit(buf, "terminal.mode", cfg.terminal.mode)
    if cfg.terminal.mode == "region":
        for name in ("E", "e", "lo", "hi", "penalty_exps", "penalty_coefs",
                     "gain", "offset"):
            v = getattr(cfg.terminal, name)
            _emit(buf, f"terminal.{name}",
                  v.astype(float) if isinstance(v, np.ndarray) else v)
    _emit(buf, "horizon", cfg.horizon)
    _emit(buf, "sim.steps", cfg.sim_steps)
    _emit(buf, "sim.x0", cfg.x0)
    _emit(buf, "sim.theta0", cfg.theta0)
    s = cfg.solver
    _emit(buf, "solver", (s.feas_tol, s.stat_tol, s.penalty0, s.penalty_growth,
                          s.penalty_cap, s.max_outer, s.max_inner))
    _emit(buf, "warm_multipliers", cfg.warm_multipliers)
    return buf.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()[:16]
