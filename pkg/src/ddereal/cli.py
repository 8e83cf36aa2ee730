"""Command-line front end: ``ddereal <subcommand> --config scenario.json``.

Every run writes ``report.json`` (plus CSV tables where relevant) into the
output directory.  Exit status: 0 success, 1 failed verification, 2 bad
configuration, 3 error raised by a computation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .ddesim import center_amplitude, integrate, measure_oscillation
from .linsys import DelayLinearOperator, SpectrumError, SpectrumSpec, adjoint_vector, design_linear, verify_spectrum
from .nfengine import DDEModel, ModelError, hopf_oracle, reduce_to_normal_form
from .polyring import Poly, VariableSpace, VectorPoly
from .realizer import (
    COND_LIMIT,
    DET_THRESHOLD,
    FORWARD_TOL,
    RealizationError,
    RealizationProblem,
    double_hopf_one_delay_analysis,
    realize,
    realize_unfolding,
    scan_tau,
    submersion_jacobian,
)
from .symmetry import dims, radial_space

log = logging.getLogger("ddereal")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3
SUBCOMMANDS = ("design", "dims", "scan", "realize", "reduce", "restrict", "simulate")

_TERM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["exponents", "value"],
    "properties": {
        "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "value": {"type": "number"},
    },
}
_RADIAL_TERM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["component", "exponents", "value"],
    "properties": {
        "component": {"type": "integer", "minimum": 0},
        "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "value": {"type": "number"},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p", "omegas", "r"],
            "properties": {
                "p": {"type": "integer", "minimum": 0},
                "includesZero": {"type": "boolean", "default": False},
                "omegas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "r": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "linear": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "positions": {"type": "array", "items": {"type": "number", "maximum": 0}},
                "terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["theta", "b"],
                        "properties": {"theta": {"type": "number", "maximum": 0}, "b": {"type": "number"}},
                    },
                },
            },
        },
        "order": {"type": "integer", "minimum": 2, "default": 3},
        "s": {"type": "integer", "minimum": 0, "default": 0},
        "taus": {"oneOf": [{"type": "array", "items": {"type": "number", "maximum": 0}}, {"const": "scan"}]},
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "nSamples": {"type": "integer", "minimum": 1, "default": 1000},
                "sampler": {"enum": ["random", "grid"], "default": "random"},
            },
        },
        "target": {"type": "array", "items": _RADIAL_TERM},
        "pinned": {
            "type": "object",
            "additionalProperties": False,
            "patternProperties": {"^[0-9]+$": {"type": "array", "items": _TERM}},
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["delays"],
            "properties": {
                "delays": {"type": "array", "items": {"type": "number", "maximum": 0}, "minItems": 1},
                "eta": {"type": "array", "items": _TERM, "default": []},
                "xi": {"type": "array", "items": _TERM, "default": []},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "forwardCheck": {"type": "boolean", "default": True},
                "oracle": {"type": "boolean", "default": False},
                "simulateMu": {"type": "array", "items": {"type": "number"}, "default": []},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "mu": {"type": "array", "items": {"type": "number"}, "default": []},
                "tEnd": {"type": "number", "exclusiveMinimum": 0, "default": 400.0},
                "dt": {"type": ["number", "null"], "default": None},
                "history": {"type": "number", "default": 0.01},
                "historyFrequency": {"type": ["number", "null"], "default": None},
                "discardFraction": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.5},
            },
        },
        "restrict": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "tau": {"type": "number", "maximum": 0},
                "grid": {"type": "integer", "minimum": 3, "default": 201},
                "extent": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
            },
        },
        "dims": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {"nDelays": {"type": ["integer", "null"], "minimum": 1, "default": None}},
        },
    },
}


class ConfigError(ValueError):
    pass


def _with_defaults(validator_class):
    validate_props = validator_class.VALIDATORS["properties"]

    def set_defaults(validator, properties, instance, schema):
        if isinstance(instance, dict):
            for name, sub in properties.items():
                if "default" in sub:
                    instance.setdefault(name, json.loads(json.dumps(sub["default"])))
        yield from validate_props(validator, properties, instance, schema)

    return jsonschema.validators.extend(validator_class, {"properties": set_defaults})


_Validator = _with_defaults(jsonschema.Draft202012Validator)


def resolve_config(raw: dict) -> dict:
    cfg = json.loads(json.dumps(raw))
    errors = sorted(_Validator(SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        where = "/".join(str(p) for p in errors[0].path) or "<root>"
        raise ConfigError(f"config error at {where}: {errors[0].message}")
    return cfg


# --------------------------------------------------------------------------
# config -> objects


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing '{key}'")
    return cfg[key]


def _spectrum(cfg: dict) -> SpectrumSpec:
    sp = _require(cfg, "spectrum")
    try:
        return SpectrumSpec(sp["p"], sp["includesZero"], tuple(sp["omegas"]), sp["r"])
    except (ValueError, SpectrumError) as exc:
        raise ConfigError(f"spectrum: {exc}") from exc


def _linear(cfg: dict, spec: SpectrumSpec | None, verify: bool = True) -> DelayLinearOperator:
    lin = _require(cfg, "linear")
    if "terms" in lin:
        L = DelayLinearOperator.from_terms([(t["theta"], t["b"]) for t in lin["terms"]])
    elif "positions" in lin:
        L = design_linear(spec, lin["positions"], verify=False)
    else:
        raise ConfigError("linear needs either 'positions' or 'terms'")
    if verify and spec is not None:
        verify_spectrum(L, spec)
    return L


def _poly(space: VariableSpace, rows, label: str) -> Poly:
    terms = {}
    for row in rows:
        m = tuple(row["exponents"])
        if len(m) != space.nvars:
            raise ConfigError(f"{label}: exponent vector {list(m)} needs {space.nvars} entries ({', '.join(space.names)})")
        terms[m] = terms.get(m, 0.0) + row["value"]
    return Poly(space, terms)


def _model(cfg: dict, L: DelayLinearOperator) -> DDEModel:
    mdl = _require(cfg, "model")
    space = VariableSpace.delayed(len(mdl["delays"]), cfg["s"])
    return DDEModel(L, tuple(mdl["delays"]), _poly(space, mdl["eta"], "model.eta"), _poly(space, mdl["xi"], "model.xi"), cfg["s"])


def _target(cfg: dict, spec: SpectrumSpec) -> VectorPoly:
    rows = _require(cfg, "target")
    space = radial_space(spec, cfg["s"])
    for row in rows:
        if len(row["exponents"]) != space.nvars or row["component"] >= space.n_components:
            raise ConfigError(f"target term {row} does not fit variables {', '.join(space.names)}")
    return VectorPoly.from_terms(space, [(r["component"], tuple(r["exponents"]), r["value"]) for r in rows])


def _radial_rows(v: VectorPoly) -> list:
    return [{"component": c, "exponents": list(m), "value": float(x.real)} for c, m, x in v.terms()]


def _poly_rows(p: Poly) -> list:
    return [{"exponents": list(m), "value": float(c.real)} for m, c in p.items()]


# --------------------------------------------------------------------------
# subcommands


def _cmd_design(cfg, args, tol):
    spec = _spectrum(cfg)
    L = _linear(cfg, spec, verify=False)
    ok = True
    try:
        report = verify_spectrum(L, spec, raise_on_failure=False)
        ok = report.passed
        rep = report.to_json()
    except SpectrumError as exc:
        ok, rep = False, {"error": str(exc)}
    adj = adjoint_vector(L, spec) if ok else None
    return {
        "linear": L.to_json(),
        "spectrum": rep,
        "adjoint": adj.to_json() if adj else None,
    }, ok


def _cmd_dims(cfg, args, tol):
    spec = _spectrum(cfg)
    return dims(spec, cfg["order"], cfg["s"], cfg["dims"]["nDelays"]), True


def _cmd_scan(cfg, args, tol):
    spec = _spectrum(cfg)
    L = _linear(cfg, spec)
    adj = adjoint_vector(L, spec)
    res = scan_tau(spec, adj, cfg["order"], cfg["scan"]["nSamples"], cfg["scan"]["sampler"], args.seed,
                   cfg["s"], args.threads, tol["det"])
    res.to_csv(Path(args.out) / "scan.csv")
    out = res.to_json()
    out["csv"] = {"path": "scan.csv", "columns": "tau1..taud, then the normalized determinant per order"}
    return out, True


def _taus(cfg, spec, adj, args, tol):
    taus = cfg.get("taus", "scan")
    if taus == "scan":
        res = scan_tau(spec, adj, cfg["order"], cfg["scan"]["nSamples"], cfg["scan"]["sampler"], args.seed,
                       cfg["s"], args.threads, tol["det"])
        return tuple(res.best_tau.tolist()), res.to_json()
    return tuple(taus), None


def _cmd_realize(cfg, args, tol):
    spec = _spectrum(cfg)
    L = _linear(cfg, spec)
    adj = adjoint_vector(L, spec)
    target = _target(cfg, spec)
    ver = cfg["verify"]
    # with the forward check off, mismatches are reported but do not fail the run
    forward_tol = tol["forward"] if ver["forwardCheck"] else float("inf")
    out = {}
    if "model" in cfg:
        base = _model(cfg, L).with_parameters(0)
        res = realize_unfolding(base, spec, target, cfg["order"], forward_tol=forward_tol, cond_limit=tol["cond"])
        out["mode"] = "unfolding"
    else:
        taus, scan = _taus(cfg, spec, adj, args, tol)
        if scan:
            out["scan"] = scan
        dspace = VariableSpace.delayed(spec.d, cfg["s"])
        pinned = {int(j): _poly(dspace, rows, f"pinned.{j}") for j, rows in cfg.get("pinned", {}).items()}
        res = realize(RealizationProblem(spec, L, taus, cfg["order"], target, cfg["s"], pinned),
                      forward_tol=forward_tol, cond_limit=tol["cond"])
        out["mode"] = "realize"
    out.update(res.to_json())
    out["delays"] = list(res.model.delays)
    out["conditionLimit"] = tol["cond"]
    out["forwardCheck"] = bool(res.forward_error < tol["forward"]) if ver["forwardCheck"] else "skipped"
    ok = res.forward_error < forward_tol
    if ver["oracle"]:
        if spec.p != 1 or spec.includes_zero:
            raise ConfigError("the oracle check applies to a single Hopf pair")
        c1 = hopf_oracle(res.model.with_parameters(0), spec)
        got = res.achieved.mu_free()[0].coefficient((3,) + (0,) * cfg["s"])
        diff = abs(c1.real - got.real)
        out["oracle"] = {"c1": [c1.real, c1.imag], "radialCubic": got.real, "difference": diff}
        ok = ok and diff < tol["forward"]
    if ver["simulateMu"]:
        out["simulation"] = _simulate_runs(res.model, spec, adj, ver["simulateMu"], cfg["simulation"], None)
    return out, ok


def _cmd_reduce(cfg, args, tol):
    spec = _spectrum(cfg)
    L = _linear(cfg, spec)
    adj = adjoint_vector(L, spec)
    model = _model(cfg, L)
    res = reduce_to_normal_form(model, spec, adj, cfg["order"])
    out = res.to_json()
    if cfg["verify"]["oracle"] and spec.p == 1 and not spec.includes_zero:
        c1 = hopf_oracle(model.with_parameters(0), spec)
        out["oracle"] = {"c1": [c1.real, c1.imag]}
    return out, True


def _cmd_restrict(cfg, args, tol):
    spec = _spectrum(cfg)
    L = _linear(cfg, spec)
    rcfg = cfg["restrict"]
    tau = rcfg.get("tau", -0.5 * spec.r)
    out = {"dims": dims(spec, cfg["order"], 0, 1)}
    ok = True
    if spec.p == 2 and not spec.includes_zero:
        ana = double_hopf_one_delay_analysis(spec, L, tau, rcfg["grid"], rcfg["extent"])
        jac = submersion_jacobian(spec, L, (tau,), cfg["order"])
        out["analysis"] = ana
        out["jacobian"] = jac.to_json()
        ok = ana["consistencyError"] < tol["forward"]
        out["verdict"] = ana["verdict"]
    else:
        out["verdict"] = "restricted" if out["dims"]["restricted"] else "not restricted by dimension count"
    return out, ok


def _history(amplitude, freq):
    if freq is None:
        return float(amplitude)
    return lambda t: amplitude * np.cos(freq * t)


def _simulate_runs(model, spec, adj, mus, scfg, csv_dir):
    runs = []
    for k, mu in enumerate(mus):
        muv = [mu] * model.s if model.s else []
        tr = integrate(model, muv, _history(scfg["history"], scfg["historyFrequency"]), scfg["tEnd"], scfg["dt"])
        osc = measure_oscillation(tr, scfg["discardFraction"])
        entry = {"mu": mu, "overflow": tr.overflow, "backend": tr.backend, **osc.to_json()}
        if spec is not None and adj is not None and spec.p >= 1 and not tr.overflow:
            entry["centerAmplitude"] = center_amplitude(tr, model, spec, adj, discard_fraction=scfg["discardFraction"])
        if csv_dir is not None:
            name = f"trajectory_{k}.csv"
            tr.to_csv(Path(csv_dir) / name)
            entry["csv"] = name
        runs.append(entry)
    return runs


def _cmd_simulate(cfg, args, tol):
    if "model" not in cfg:
        raise ConfigError("nothing to simulate: config has no model")
    spec = _spectrum(cfg) if "spectrum" in cfg else None
    if spec is None and "terms" not in cfg.get("linear", {}):
        raise ConfigError("simulate needs linear 'terms' or a spectrum to design from")
    L = _linear(cfg, spec)
    model = _model(cfg, L)
    if model.is_empty():
        raise ConfigError("nothing to simulate: the model has no nonlinear terms")
    adj = adjoint_vector(L, spec) if spec is not None else None
    mus = cfg["simulation"]["mu"] or [0.0]
    runs = _simulate_runs(model, spec, adj, mus, cfg["simulation"], args.out)
    return {"runs": runs, "csvColumns": ["t", "z"]}, not any(r["overflow"] for r in runs)


COMMANDS = {
    "design": _cmd_design,
    "dims": _cmd_dims,
    "scan": _cmd_scan,
    "realize": _cmd_realize,
    "reduce": _cmd_reduce,
    "restrict": _cmd_restrict,
    "simulate": _cmd_simulate,
}


# --------------------------------------------------------------------------
# entry point


def _parse_tolerances(items) -> dict:
    tol = {"forward": FORWARD_TOL, "cond": COND_LIMIT, "det": DET_THRESHOLD}
    for item in items or []:
        key, _, val = item.partition("=")
        if key not in tol or not val:
            raise ConfigError(f"--tolerance expects NAME=VALUE with NAME in {sorted(tol)}")
        tol[key] = float(val)
    return tol


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddereal", description="Realize radial normal forms with delay equations.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="scenario JSON file")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--seed", type=int, default=0, help="seed for random delay scans")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    ap.add_argument("--tolerance", action="append", metavar="NAME=VALUE",
                    help="override a tolerance: forward, cond, det (repeatable)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def write_report(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "tool": "ddereal",
        "version": __version__,
        "subcommand": args.subcommand,
        "seed": args.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    try:
        tol = _parse_tolerances(args.tolerance)
        report["tolerances"] = tol
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = resolve_config(raw)
        report["config"] = cfg
        result, ok = COMMANDS[args.subcommand](cfg, args, tol)
        report["result"] = result
        report["status"] = "ok" if ok else "verification failed"
        code = EXIT_OK if ok else EXIT_VERIFY
    except (ConfigError, ModelError) as exc:
        report["status"] = "config error"
        report["error"] = str(exc)
        code = EXIT_CONFIG
    except RealizationError as exc:
        report["status"] = "verification failed"
        report["error"] = f"realizer: {exc}"
        code = EXIT_VERIFY
    except SpectrumError as exc:
        report["status"] = "verification failed"
        report["error"] = f"linsys: {exc}"
        code = EXIT_VERIFY
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        report["status"] = "error"
        report["error"] = f"{module}: {exc}"
        code = EXIT_COMPUTE
    write_report(out_dir / "report.json", report)
    if code != EXIT_OK:
        print(f"ddereal {args.subcommand}: {report.get('error', report['status'])}", file=sys.stderr)
    else:
        print(f"ddereal {args.subcommand}: ok ({out_dir / 'report.json'})")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
