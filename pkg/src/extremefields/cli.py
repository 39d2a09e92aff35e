"""Experiment orchestration: config parsing, dispatch, deterministic output.

Every subcommand reads one JSON config file, validated against a strict
schema (unknown keys are rejected).  ``--set key.path=value`` overrides
scalar leaves, ``--seed`` overrides the seed (default comes from the
EXTREMEFIELDS_SEED environment variable), and outputs are written
atomically under ``--output`` as JSON and/or CSV.  The emitted JSON embeds
the fully resolved config and its hash; timestamps live in a separate
``runtime`` block excluded from determinism comparisons.

Exit codes: 0 success, 1 validation error, 2 runtime error (budget,
embedding or factorization failures).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import jsonschema

from ._serialize import atomic_write_text, canonical_json, config_hash
from .circulant import EmbeddingError
from .fields import CorrelationModel, FactorizationError
from .geometry import BudgetError, CDescriptor, JordanSet, ScalingPlan
from .limit_law import QuadratureSpec, lognormal_mixture_cdf
from .montecarlo import (
    RateDescriptor,
    SupExperimentConfig,
    convergence_study,
    corollary_experiments,
    estimate_sup_cdf,
    lemma_sum_study,
    piterbarg_tail_check,
)
from .pickands import closed_form_pickands, estimate_pickands

SEED_ENV = "EXTREMEFIELDS_SEED"

_QUAD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "method": {"enum": ["gauss_hermite", "monte_carlo"]},
        "node_count": {"type": "integer", "minimum": 8},
        "mc_draws": {"type": "integer", "minimum": 100000},
        "seed": {"type": "integer", "minimum": 0},
    },
}

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "alphas"],
    "properties": {
        "family": {"enum": ["separable_stable", "mixture_strong"]},
        "alphas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "R": {"type": "number", "minimum": 0},
        "horizon_T": {"type": "number"},
        "block_edge": {"type": "number"},
        "bounded_dims": {"type": "integer", "minimum": 0},
    },
}

_PLAN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["d", "k", "M", "gammas", "c_descriptors"],
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 0},
        "M": {"type": "array", "items": {"type": "number"}},
        "gammas": {"type": "array", "items": {"type": "number"}},
        "c_descriptors": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {"kind": {"type": "string"}, "param": {"type": "number"}},
            },
        },
    },
}

_PICKANDS_VALUES = {
    "oneOf": [
        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        {"const": "closed_form"},
    ]
}

_BOXES_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array", "minItems": 2, "maxItems": 2,
        "items": {"type": "array", "items": {"type": "number"}},
    },
}

_SUP_PROPS = {
    "model": _MODEL_SCHEMA,
    "plan": _PLAN_SCHEMA,
    "J": _BOXES_SCHEMA,
    "x": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
    "u_values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    "a": {"type": "number", "exclusiveMinimum": 0},
    "replicates": {"type": "integer", "minimum": 100},
    "pickands_values": _PICKANDS_VALUES,
    "workers": {"type": "integer", "minimum": 1},
    "budget": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "quad": _QUAD_SCHEMA,
    "tie_mixture_horizon": {"type": "boolean"},
}

SCHEMAS = {
    "pickands": {
        "type": "object",
        "additionalProperties": False,
        "required": ["alpha", "horizon", "step", "replicates"],
        "properties": {
            "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
            "horizon": {"type": "number", "minimum": 1},
            "step": {"type": "number", "exclusiveMinimum": 0},
            "replicates": {"type": "integer", "minimum": 1000},
            "workers": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
        },
    },
    "limit-cdf": {
        "type": "object",
        "additionalProperties": False,
        "required": ["R", "gamma"],
        "properties": {
            "c": {"type": "number", "minimum": 0},
            "x": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            "lambda_J": {"type": "number", "exclusiveMinimum": 0},
            "R": {"type": "number", "minimum": 0},
            "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
            "quadrature": _QUAD_SCHEMA,
            "seed": {"type": "integer", "minimum": 0},
        },
    },
    "simulate-sup": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model", "plan", "J", "x", "u_values", "a", "replicates", "pickands_values"],
        "properties": _SUP_PROPS,
    },
    "converge": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model", "plan", "J", "x", "u_values", "a", "replicates", "pickands_values"],
        "properties": _SUP_PROPS,
    },
    "tail-check": {
        "type": "object",
        "additionalProperties": False,
        "required": ["alphas", "pickands_values", "u_values", "replicates"],
        "properties": {
            "alphas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "pickands_values": _PICKANDS_VALUES,
            "u_values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "replicates": {"type": "integer", "minimum": 100},
            "a": {"type": "number", "exclusiveMinimum": 0},
            "box": _BOXES_SCHEMA,
            "workers": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
        },
    },
    "lemma-sums": {
        "type": "object",
        "additionalProperties": False,
        "required": ["lemma", "model", "u_values", "a", "eps", "R", "T"],
        "properties": {
            "lemma": {"enum": [2, 3]},
            "model": _MODEL_SCHEMA,
            "u_values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "a": {"type": "number", "exclusiveMinimum": 0},
            "eps": {"type": "number", "exclusiveMinimum": 0},
            "R": {"type": "number", "minimum": 0},
            "T": {
                "type": "object",
                "additionalProperties": False,
                "required": ["rule"],
                "properties": {
                    "rule": {"enum": ["exp_gamma_u2", "fixed", "plan_m"]},
                    "gamma": {"type": "number"},
                    "values": {"type": "array"},
                    "taus": {"type": "array", "items": {"type": "number"}},
                    "plan": _PLAN_SCHEMA,
                },
            },
            "pickands_values": _PICKANDS_VALUES,
            "shell": {"type": "number", "exclusiveMinimum": 0},
            "budget": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
        },
    },
    "corollary": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "model", "plan", "J", "x", "u_values", "a", "replicates",
                      "pickands_values"],
        "properties": {
            **_SUP_PROPS,
            "kind": {"enum": ["szybko", "wolno"]},
            "kappa": {"type": "number", "minimum": 0},
            "c_descriptor": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {"kind": {"type": "string"}, "param": {"type": "number"}},
            },
            "shrink": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["power"],
                    "properties": {"power": {"type": "number"}, "log_power": {"type": "number"}},
                },
            },
        },
    },
}


def _apply_overrides(config: dict, sets: list[str]) -> dict:
    """Apply --set key.path=value overrides to scalar leaves."""
    for item in sets:
        if "=" not in item:
            raise ValueError(f"--set needs key.path=value, got {item!r}")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if isinstance(value, (dict, list)):
            raise ValueError(f"--set overrides scalar leaves only: {item!r}")
        node = config
        keys = path.split(".")
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ValueError(f"--set path {path!r} does not lead to a config section")
            node = node[key]
        node[keys[-1]] = value
    return config


def _resolve_pickands(values, alphas):
    if values == "closed_form":
        out = []
        for a in alphas:
            h = closed_form_pickands(a)
            if h is None:
                raise ValueError(f"no closed form for alpha={a}; give pickands_values explicitly")
            out.append(h)
        return tuple(out)
    return tuple(float(v) for v in values)


def _build_model(data: dict) -> CorrelationModel:
    family = data["family"]
    alphas = data["alphas"]
    if family == "separable_stable":
        return CorrelationModel.separable_stable(alphas, data.get("bounded_dims", 0))
    return CorrelationModel.mixture_strong(
        alphas, data["R"], data.get("horizon_T", math.e**2),
        block_edge=data.get("block_edge", 1.0),
        bounded_dims=data.get("bounded_dims", 0),
    )


def _build_quad(data: dict | None) -> QuadratureSpec:
    if not data:
        return QuadratureSpec()
    return QuadratureSpec(
        method=data.get("method", "gauss_hermite"),
        node_count=data.get("node_count", 64),
        mc_draws=data.get("mc_draws", 1_000_000),
        seed=data.get("seed", 0),
    )


def _build_sup_config(cfg: dict, seed: int) -> SupExperimentConfig:
    model = _build_model(cfg["model"])
    plan = ScalingPlan.from_dict(cfg["plan"])
    j = JordanSet(tuple((tuple(map(float, lo)), tuple(map(float, hi))) for lo, hi in cfg["J"]))
    return SupExperimentConfig(
        model=model,
        plan=plan,
        J=j,
        x=tuple(float(v) for v in cfg["x"]),
        u_values=tuple(float(v) for v in cfg["u_values"]),
        a=float(cfg["a"]),
        replicates=int(cfg["replicates"]),
        seed=seed,
        pickands_values=_resolve_pickands(cfg["pickands_values"], cfg["model"]["alphas"]),
        workers=int(cfg.get("workers", 1)),
        budget=int(cfg.get("budget", 2**26)),
        quad=_build_quad(cfg.get("quad")),
        tie_mixture_horizon=bool(cfg.get("tie_mixture_horizon", True)),
    )


def _run_pickands(cfg: dict, seed: int) -> dict:
    est = estimate_pickands(
        alpha=float(cfg["alpha"]), horizon=float(cfg["horizon"]), step=float(cfg["step"]),
        replicates=int(cfg["replicates"]), seed=seed, workers=int(cfg.get("workers", 1)),
    )
    return {"kind": "pickands", "records": [est.to_dict()], "metadata": {"config": cfg, "seed": seed}}


def _run_limit_cdf(cfg: dict, seed: int) -> dict:
    if "c" in cfg:
        c = float(cfg["c"])
    elif "x" in cfg and "lambda_J" in cfg:
        c = float(cfg["lambda_J"])
        for xi in cfg["x"]:
            c *= float(xi)
    else:
        raise ValueError("limit-cdf needs either c or both x and lambda_J")
    quad = _build_quad(cfg.get("quadrature"))
    value = lognormal_mixture_cdf(c, float(cfg["R"]), float(cfg["gamma"]), quad)
    return {
        "kind": "limit_cdf",
        "records": [{"c": c, "R": cfg["R"], "gamma": cfg["gamma"], "value": value,
                     "method": quad.method}],
        "metadata": {"config": cfg, "seed": seed},
    }


def _lemma_T_rule(cfg: dict):
    t = cfg["T"]
    rule = t["rule"]
    if rule == "exp_gamma_u2":
        g = float(t["gamma"])
        return lambda u: math.exp(g * u * u)
    if rule == "fixed":
        values = t["values"]
        mapping = {float(u): v for u, v in zip(cfg["u_values"], values)}
        return lambda u: mapping[float(u)]
    # plan_m: T_i = tau_i * m_i(u) from a scaling plan
    from .geometry import evaluate_m_i

    plan = ScalingPlan.from_dict(t["plan"])
    taus = [float(v) for v in t["taus"]]
    alphas = cfg["model"]["alphas"]
    hs = _resolve_pickands(cfg.get("pickands_values", "closed_form"), alphas)
    return lambda u: [tau * m for tau, m in zip(taus, evaluate_m_i(plan, u, alphas, hs))]


def _run_lemma_sums(cfg: dict, seed: int) -> dict:
    model = _build_model(cfg["model"])
    lemma = int(cfg["lemma"])
    kwargs = {}
    if lemma == 3:
        if "shell" in cfg:
            kwargs["shell"] = float(cfg["shell"])
        if "budget" in cfg:
            kwargs["budget"] = int(cfg["budget"])
    hs = None
    if "pickands_values" in cfg:
        hs = _resolve_pickands(cfg["pickands_values"], cfg["model"]["alphas"])
    report = lemma_sum_study(
        lemma, model, [float(u) for u in cfg["u_values"]], float(cfg["a"]),
        float(cfg["eps"]), float(cfg["R"]), _lemma_T_rule(cfg),
        pickands_values=hs, **kwargs,
    )
    payload = report.payload()
    payload["metadata"] = {"config": cfg, "seed": seed}
    return payload


def _run_tail_check(cfg: dict, seed: int) -> dict:
    alphas = [float(a) for a in cfg["alphas"]]
    model = CorrelationModel.separable_stable(alphas)
    box = None
    if "box" in cfg:
        box = JordanSet(tuple((tuple(map(float, lo)), tuple(map(float, hi)))
                              for lo, hi in cfg["box"]))
    report = piterbarg_tail_check(
        model, alphas, _resolve_pickands(cfg["pickands_values"], alphas),
        [float(u) for u in cfg["u_values"]], int(cfg["replicates"]), seed,
        a=float(cfg.get("a", 0.25)), box=box, workers=int(cfg.get("workers", 1)),
    )
    return report.to_dict()


def _run_corollary(cfg: dict, seed: int) -> dict:
    config = _build_sup_config(cfg, seed)
    c_desc = CDescriptor.from_dict(cfg["c_descriptor"]) if "c_descriptor" in cfg else None
    shrink = tuple(
        RateDescriptor(power=float(s["power"]), log_power=float(s.get("log_power", 0.0)))
        for s in cfg.get("shrink", [])
    )
    report = corollary_experiments(
        cfg["kind"], config, kappa=float(cfg.get("kappa", 0.125)),
        c_descriptor=c_desc, shrink=shrink,
    )
    return report.to_dict()


def _dispatch(command: str, cfg: dict, seed: int) -> dict:
    if command == "pickands":
        return _run_pickands(cfg, seed)
    if command == "limit-cdf":
        return _run_limit_cdf(cfg, seed)
    if command == "simulate-sup":
        return estimate_sup_cdf(_build_sup_config(cfg, seed)).to_dict()
    if command == "converge":
        return convergence_study(_build_sup_config(cfg, seed)).to_dict()
    if command == "tail-check":
        return _run_tail_check(cfg, seed)
    if command == "lemma-sums":
        return _run_lemma_sums(cfg, seed)
    if command == "corollary":
        return _run_corollary(cfg, seed)
    raise ValueError(f"unknown subcommand {command!r}")


def _csv_from_payload(payload: dict) -> str:
    kind = payload.get("kind", "")
    if kind.startswith("lemma"):
        lines = ["u,sum,component"]
        for u, s, c in zip(payload["u_values"], payload["sum_values"], payload["components"]):
            lines.append(f"{u},{s},{'' if c is None else c}")
        return "\n".join(lines) + "\n"
    lines = ["u,empirical,ci_low,ci_high,theory,n"]
    for rec in payload.get("records", []):
        if "u" not in rec:
            continue
        lines.append(
            f"{rec['u']},{rec.get('empirical_cdf', '')},{rec.get('wilson_ci_low', '')},"
            f"{rec.get('wilson_ci_high', '')},{rec.get('theory_limit', '')},"
            f"{rec.get('replicates', '')}"
        )
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extremefields",
        description="Supremum experiments for stationary Gaussian random fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("pickands", "limit-cdf", "simulate-sup", "converge", "tail-check",
                 "lemma-sums", "corollary"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE",
                       help="override a scalar config leaf")
        p.add_argument("--seed", type=int, default=None,
                       help=f"master seed (default: ${SEED_ENV} or the config's seed or 0)")
        p.add_argument("--output", default=None, help="output path prefix")
        p.add_argument("--format", choices=("json", "csv", "both"), default="json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        cfg = _apply_overrides(cfg, args.set)
        jsonschema.validate(cfg, SCHEMAS[args.command])
        if args.seed is not None:
            seed = args.seed
        elif "seed" in cfg:
            seed = int(cfg["seed"])
        else:
            seed = int(os.environ.get(SEED_ENV, "0"))
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        t0 = time.time()
        payload = _dispatch(args.command, cfg, seed)
        payload.setdefault("metadata", {})
        # the emitted config is the resolved CLI config, so it re-parses
        # under the same schema and reproduces the hash
        payload["metadata"]["config"] = cfg
        payload["metadata"]["config_hash"] = config_hash(cfg)
        payload["metadata"].setdefault("seed", seed)
        payload.setdefault("runtime", {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "wall_time_s": time.time() - t0,
        })
    except (ValueError, jsonschema.ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (BudgetError, EmbeddingError, FactorizationError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2

    if args.output:
        if args.format in ("json", "both"):
            atomic_write_text(args.output + ".json", json.dumps(payload, indent=2) + "\n")
        if args.format in ("csv", "both"):
            atomic_write_text(args.output + ".csv", _csv_from_payload(payload))
    else:
        runtime = payload.pop("runtime", None)
        print(canonical_json(payload))
        if runtime is not None:
            payload["runtime"] = runtime
    return 0


if __name__ == "__main__":
    sys.exit(main())
