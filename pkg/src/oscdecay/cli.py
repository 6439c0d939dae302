"""Experiment runner.

    oscdecay decay-sweep --m 1 --n 2 --k 2 --l 1 --p 6 --out runs/sharp
    oscdecay integrate --lambda 0 --out runs/one
    oscdecay endpoint-l2 --config endpoint.toml

Every run writes results.csv and report.json (with the effective config) to
--out, plus plot.svg for the commands that produce a series.  Exit status: 0
on success, 2 on invalid input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .analytic import delta_alpha_fourier, kernel_K_alpha, l2_endpoint_check
from .decay import (DecaySweepConfig, SweepFailure, estimate_norm, fit_exponent, geometric_schedule,
                    run_sweep, sweep_report, vdc_check, write_json, write_sweep_csv)
from .norms import WITNESS_SPEC, ResolutionError, MonotonicityError
from .operator import kernel_K_batch
from .phase import PhaseParams
from .quad import QuadratureError, QuadratureSpec, integrate_oscillatory
from .svg import loglog_svg, write_svg

COMMANDS = ("integrate", "kernel", "norm", "decay-sweep", "vdc-check", "delta-alpha", "endpoint-l2")

# key -> (type, default); None defaults are resolved per command
KEYS = {
    "command": (str, None),
    "m": (int, 1), "n": (int, 2), "k": (int, 2), "l": (int, 1),
    "p": (float, None),
    "lambda": (float, None),
    "lambda_min": (float, None), "lambda_max": (float, None), "num_lambdas": (int, None),
    "lambdas": (list, None),
    "grid": (int, None),
    "estimator": (str, "witness"),
    "tol_slope": (float, None),
    "eps_abs": (float, None), "eps_rel": (float, None),
    "seed": (int, 0),
    "jobs": (int, 1),
    "out": (str, "out"),
    "alpha": (str, None),
    "samples": (int, None),
    "point": (list, None),
    "interval": (list, None),
    "phase_coeffs": (list, None),
    "amp_coeffs": (list, None),
    "t_min": (float, None), "t_max": (float, None), "num_t": (int, None),
    "ascent_iters": (int, None),
}

SCHEDULES = {
    "decay-sweep": (2.0 ** 6, 2.0 ** 14, 9),
    "vdc-check": (1e2, 1e4, 3),
    "endpoint-l2": (2.0 ** 4, 2.0 ** 9, 6),
}


class ConfigError(ValueError):
    pass


def _load_file(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8")
    if path.endswith(".json") or text.lstrip().startswith("{"):
        data = json.loads(text)
        # a report.json carries the effective config under "config"
        if isinstance(data, dict) and isinstance(data.get("config"), dict):
            data = data["config"]
    else:
        data = tomllib.loads(text)
    if not isinstance(data, dict):
        raise ConfigError("config must be a table of key = value pairs")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _coerce(key, val):
    typ = KEYS[key][0]
    if val is None:
        return None
    if typ is list:
        if isinstance(val, str):
            val = [v for v in val.replace(",", " ").split()]
        if not isinstance(val, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        try:
            return [float(v) for v in val]
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a list of numbers") from None
    if typ is int:
        if isinstance(val, bool) or (isinstance(val, float) and not val.is_integer()):
            raise ConfigError(f"{key} must be an integer")
        try:
            return int(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be an integer") from None
    if typ is float:
        if isinstance(val, bool):
            raise ConfigError(f"{key} must be a number")
        try:
            return float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number") from None
    return str(val)


def build_parser():
    ap = argparse.ArgumentParser(prog="oscdecay", description="Decay experiments for oscillatory integral operators.")
    ap.add_argument("--version", action="version", version=f"oscdecay {__version__}")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH", help="TOML or JSON file of key = value pairs")
    for key, (typ, _) in KEYS.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        kw = {"dest": key, "default": None}
        if typ is list:
            kw["help"] = "comma-separated numbers"
        if key == "estimator":
            kw["choices"] = ("witness", "ascent")
        ap.add_argument(flag, **kw)
    return ap


def resolve_config(argv):
    """Merge config file and flags, check keys and preconditions; returns a dict."""
    args = build_parser().parse_args(argv)
    cfg = {}
    if args.config:
        loaded = _load_file(args.config)
        unknown = sorted(set(loaded) - set(KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if args.command:
        cfg["command"] = args.command
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    for key, (_, default) in KEYS.items():
        cfg.setdefault(key, default)
    cmd = cfg["command"]
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
    _apply_defaults(cfg)
    _validate(cfg)
    return cfg


def _apply_defaults(cfg):
    cmd = cfg["command"]
    if cmd in SCHEDULES and cfg["lambdas"] is None:
        lo, hi, n = SCHEDULES[cmd]
        if cfg["lambda_min"] is None:
            cfg["lambda_min"] = lo
        if cfg["lambda_max"] is None:
            cfg["lambda_max"] = hi
        if cfg["num_lambdas"] is None:
            cfg["num_lambdas"] = n
    if cfg["p"] is None and cmd in ("norm", "decay-sweep"):
        cfg["p"] = float(2 * cfg["k"] + 2)
    if cfg["grid"] is None:
        cfg["grid"] = 48 if cmd == "endpoint-l2" else 4
    witness = cmd in ("norm", "decay-sweep")
    if cfg["eps_abs"] is None:
        cfg["eps_abs"] = WITNESS_SPEC.eps_abs if witness else 1e-10
    if cfg["eps_rel"] is None:
        cfg["eps_rel"] = WITNESS_SPEC.eps_rel if witness else 1e-8
    if cmd in ("delta-alpha", "endpoint-l2") and cfg["alpha"] is None:
        cfg["alpha"] = "1"
    if cmd == "vdc-check" and cfg["samples"] is None:
        cfg["samples"] = 200
    if cmd == "integrate":
        cfg["lambda"] = 0.0 if cfg["lambda"] is None else cfg["lambda"]
        cfg["interval"] = cfg["interval"] or [0.0, 1.0]
        cfg["phase_coeffs"] = cfg["phase_coeffs"] or [0.0, 0.0, 1.0]
        cfg["amp_coeffs"] = cfg["amp_coeffs"] or [1.0]
    if cmd in ("kernel", "norm") and cfg["lambda"] is None:
        cfg["lambda"] = 100.0
    if cmd == "kernel" and cfg["point"] is None:
        cfg["point"] = [0.1, 0.2, 0.3, -0.1]
    if cmd == "delta-alpha":
        cfg["t_min"] = 2.0 if cfg["t_min"] is None else cfg["t_min"]
        cfg["t_max"] = 2.0 ** 10 if cfg["t_max"] is None else cfg["t_max"]
        cfg["num_t"] = 10 if cfg["num_t"] is None else cfg["num_t"]
    if cfg["estimator"] == "ascent" and cfg["ascent_iters"] is None:
        cfg["ascent_iters"] = 50


def _parse_alpha(s):
    try:
        return complex(s.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"alpha must be a complex number such as 0.5+3j, got {s!r}") from None


def _validate(cfg):
    try:
        cfg["_params"] = PhaseParams(cfg["m"], cfg["n"], cfg["k"], cfg["l"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        cfg["_spec"] = QuadratureSpec(cfg["eps_abs"], cfg["eps_rel"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg["grid"] < 2:
        raise ConfigError("grid must be >= 2")
    if cfg["p"] is not None and cfg["p"] < 1:
        raise ConfigError("p must be >= 1")
    if cfg["lambdas"] is not None:
        if len(cfg["lambdas"]) < 2:
            raise ConfigError("lambdas needs at least 2 values")
        if min(cfg["lambdas"]) < 1:
            raise ConfigError("lambda values must be >= 1")
    elif cfg["command"] in SCHEDULES:
        if cfg["lambda_min"] < 1:
            raise ConfigError("lambda_min must be >= 1")
        if not cfg["lambda_max"] > cfg["lambda_min"]:
            raise ConfigError("lambda_max must exceed lambda_min")
        if cfg["num_lambdas"] < 2:
            raise ConfigError("num_lambdas must be >= 2")
    if cfg["alpha"] is not None:
        cfg["_alpha"] = _parse_alpha(cfg["alpha"])
        if cfg["_alpha"].real <= 0:
            raise ConfigError("Re alpha must be > 0")
    cmd = cfg["command"]
    if cmd == "decay-sweep":
        try:
            cfg["_sweep"] = DecaySweepConfig(cfg["_params"], cfg["p"], cfg["lambda_min"] or 1.0,
                                             cfg["lambda_max"] or 2.0, cfg["num_lambdas"] or 4, cfg["estimator"],
                                             cfg["_spec"], cfg["grid"], cfg["ascent_iters"] or 50, 1e-8, cfg["seed"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cfg["lambdas"] is not None:
            raise ConfigError("decay-sweep takes a geometric schedule (lambda_min, lambda_max, num_lambdas)")
    if cmd in ("norm", "decay-sweep") and cfg["estimator"] == "ascent":
        if cfg["p"] != int(cfg["p"]) or int(cfg["p"]) % 2:
            raise ConfigError("ascent needs an even integer p")
    if cmd == "endpoint-l2":
        if abs(cfg["_alpha"].real - 1.0) > 1e-12:
            raise ConfigError("endpoint-l2 needs Re alpha = 1")
        if cfg["grid"] ** 2 > 4096:
            raise ConfigError("endpoint-l2 grid must satisfy grid^2 <= 4096")
    if cmd == "vdc-check" and cfg["samples"] < 2:
        raise ConfigError("samples must be >= 2")
    if cmd == "delta-alpha":
        if not (0 <= cfg["t_min"] < cfg["t_max"]):
            raise ConfigError("need 0 <= t_min < t_max")
        if cfg["num_t"] < 2:
            raise ConfigError("num_t must be >= 2")
    if cmd == "kernel" and len(cfg["point"]) != 4:
        raise ConfigError("point is u,v,x,y")
    if cmd == "integrate":
        if len(cfg["interval"]) != 2:
            raise ConfigError("interval is a,b")
        if cfg["lambda"] < 0:
            raise ConfigError("lambda must be >= 0")


def effective_config(cfg):
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _lambdas(cfg):
    if cfg["lambdas"] is not None:
        return sorted(cfg["lambdas"])
    return geometric_schedule(cfg["lambda_min"], cfg["lambda_max"], cfg["num_lambdas"])


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class NumericalFailure(RuntimeError):
    pass


# --- commands -------------------------------------------------------------------

def cmd_integrate(cfg, out):
    pc = np.asarray(cfg["phase_coeffs"])
    ac = np.asarray(cfg["amp_coeffs"])
    res = integrate_oscillatory(lambda t: np.polynomial.polynomial.polyval(t, pc),
                                lambda t: np.polynomial.polynomial.polyval(t, ac),
                                tuple(cfg["interval"]), cfg["lambda"], cfg["_spec"])
    _write_rows(os.path.join(out, "results.csv"), ["lambda", "re", "im", "error", "n_evals", "converged"],
                [[cfg["lambda"], res.value.real, res.value.imag, res.error, res.n_evals, res.converged]])
    if not res.converged:
        raise NumericalFailure("quadrature did not reach the requested tolerance")
    return {"value": [res.value.real, res.value.imag], "error": res.error, "n_evals": res.n_evals}


def cmd_kernel(cfg, out):
    P, lam = cfg["_params"], cfg["lambda"]
    u, v, x, y = cfg["point"]
    res = kernel_K_batch(P, lam, u, v, x, y, cfg["_spec"])[0]
    a = cfg.get("_alpha")
    Ka = complex(kernel_K_alpha(P, lam, a, u, v, x, y, cfg["_spec"])) if a is not None else res.value
    a = 0j if a is None else a
    _write_rows(os.path.join(out, "results.csv"),
                ["lambda", "u", "v", "x", "y", "alpha_re", "alpha_im", "K_re", "K_im", "Kalpha_re", "Kalpha_im",
                 "converged"],
                [[lam, u, v, x, y, a.real, a.imag, res.value.real, res.value.imag, Ka.real, Ka.imag,
                  res.converged]])
    if not res.converged:
        raise NumericalFailure("kernel quadrature did not converge")
    return {"K": [res.value.real, res.value.imag], "K_alpha": [Ka.real, Ka.imag], "error": res.error}


def cmd_norm(cfg, out):
    sc = DecaySweepConfig(cfg["_params"], cfg["p"], 1.0, 2.0, 4, cfg["estimator"], cfg["_spec"], cfg["grid"],
                          cfg["ascent_iters"] or 50, 1e-8, cfg["seed"])
    est = estimate_norm(sc, cfg["lambda"])
    _write_rows(os.path.join(out, "results.csv"), ["lambda", "estimate", "kind", "converged"],
                [[cfg["lambda"], est.value, est.kind, est.converged]])
    if not est.converged:
        raise NumericalFailure("norm estimate did not converge")
    return {"estimate": est.value, "kind": est.kind, "iterations": est.iterations, "info": est.info}


def cmd_decay_sweep(cfg, out):
    sc = cfg["_sweep"]
    try:
        res = run_sweep(sc, jobs=cfg["jobs"])
    except SweepFailure as exc:
        if exc.result is not None:
            write_sweep_csv(exc.result, os.path.join(out, "results.csv"))
        raise NumericalFailure(str(exc)) from None
    write_sweep_csv(res, os.path.join(out, "results.csv"))
    rep = sweep_report(res, cfg["tol_slope"])
    rep["p"] = sc.exponent_p
    fit = fit_exponent(res.table())
    _plot_fit(out, res.table(), fit.slope, fit.intercept, -rep["delta_pred"],
              f"L^2 -> L^{sc.exponent_p:g} estimate, {sc.params.as_tuple()}", "norm estimate")
    return rep


def cmd_vdc(cfg, out):
    rep = vdc_check(cfg["_params"], _lambdas(cfg), cfg["samples"], cfg["_spec"], cfg["seed"])
    q = rep.quantiles
    _write_rows(os.path.join(out, "results.csv"), ["lambda", "max_R", "q50", "q90", "q99", "n_failed"],
                [[lam, rep.max_R[i], q["q50"][i], q["q90"][i], q["q99"][i], rep.n_failed[i]]
                 for i, lam in enumerate(rep.lambdas)])
    write_svg(os.path.join(out, "plot.svg"),
              loglog_svg(list(zip(rep.lambdas, rep.max_R)), title="max R over sampled tuples", ylabel="max R"))
    d = rep.to_dict()
    d["pass"] = d.pop("passed")
    return d


def cmd_delta_alpha(cfg, out):
    a = cfg["_alpha"]
    if cfg["t_min"] > 0:
        ts = np.array(geometric_schedule(cfg["t_min"], cfg["t_max"], cfg["num_t"]))
    else:
        ts = np.linspace(0.0, cfg["t_max"], cfg["num_t"])
    vals = np.asarray(delta_alpha_fourier(a, ts, spec=cfg["_spec"]))
    mod = np.abs(vals)
    _write_rows(os.path.join(out, "results.csv"), ["t", "re", "im", "modulus"],
                [[t, z.real, z.imag, m] for t, z, m in zip(ts.tolist(), vals.tolist(), mod.tolist())])
    rep = {"alpha": [a.real, a.imag], "target_slope": -a.real}
    pos = [(t, m) for t, m in zip(ts.tolist(), mod.tolist()) if t > 0 and m > 0]
    if len(pos) >= 3:
        fit = fit_exponent(pos)
        rep.update(slope=fit.slope, r2=fit.r_squared)
        rep["pass"] = {"decay_slope": bool(abs(fit.slope + a.real) <= 0.1)}
        _plot_fit(out, pos, fit.slope, fit.intercept, -a.real, f"|delta_hat| for alpha = {a}", "modulus",
                  xlabel="t")
    return rep


def cmd_endpoint(cfg, out):
    rep = l2_endpoint_check(cfg["_params"], _lambdas(cfg), cfg["grid"], cfg["_alpha"], spec=cfg["_spec"],
                            seed=cfg["seed"])
    _write_rows(os.path.join(out, "results.csv"), ["lambda", "norm", "iterations", "converged"],
                [[lam, rep.norms[i], rep.iterations[i], rep.converged[i]] for i, lam in enumerate(rep.lambdas)])
    if all(v > 0 for v in rep.norms):
        _plot_fit(out, list(zip(rep.lambdas, rep.norms)), rep.slope, rep.intercept, -rep.target,
                  f"L^2 endpoint, {rep.params}", "operator norm")
    d = rep.to_dict()
    d["pass"] = d.pop("passed")
    if not all(rep.converged):
        raise NumericalFailure("power iteration did not converge", d)
    return d


def _plot_fit(out, table, slope, intercept, theory_slope, title, ylabel, xlabel="lambda"):
    lx = np.log([t[0] for t in table])
    ly = np.log([t[1] for t in table])
    # theory line through the centroid of the data
    b_th = float(ly.mean() - theory_slope * lx.mean())
    lines = [(f"fit slope {slope:.4f}", slope, intercept), (f"theory slope {theory_slope:.4f}", theory_slope, b_th)]
    write_svg(os.path.join(out, "plot.svg"), loglog_svg(table, lines, title=title, xlabel=xlabel, ylabel=ylabel))


DISPATCH = {
    "integrate": cmd_integrate,
    "kernel": cmd_kernel,
    "norm": cmd_norm,
    "decay-sweep": cmd_decay_sweep,
    "vdc-check": cmd_vdc,
    "delta-alpha": cmd_delta_alpha,
    "endpoint-l2": cmd_endpoint,
}


def _report(out, cfg, status, result=None, errors=()):
    if out is None:
        return
    try:
        os.makedirs(out, exist_ok=True)
        write_json({"command": cfg.get("command") if cfg else None, "status": status,
                    "config": effective_config(cfg) if cfg else None,
                    "result": result, "errors": list(errors)}, os.path.join(out, "report.json"))
    except OSError:
        pass


def _out_hint(argv):
    # best effort --out for reporting validation errors
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a[6:]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = resolve_config(argv)
    except (ConfigError, OSError, json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        msg = f"invalid configuration: {exc}"
        print(f"oscdecay: {msg}", file=sys.stderr)
        _report(_out_hint(argv), None, "invalid", errors=[msg])
        return 2
    out = cfg["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        print(f"oscdecay: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    try:
        result = DISPATCH[cfg["command"]](cfg, out)
    except NumericalFailure as exc:
        detail = exc.args[1] if len(exc.args) > 1 else None
        print(f"oscdecay: numerical failure: {exc.args[0]}", file=sys.stderr)
        _report(out, cfg, "numerical_failure", detail, [str(exc.args[0])])
        return 3
    except (QuadratureError, ResolutionError, MonotonicityError, ArithmeticError, RuntimeError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        print(f"oscdecay: numerical failure: {msg}", file=sys.stderr)
        _report(out, cfg, "numerical_failure", None, [msg])
        return 3
    except ValueError as exc:
        msg = f"{type(exc).__name__}: {exc}"
        print(f"oscdecay: invalid input: {msg}", file=sys.stderr)
        _report(out, cfg, "invalid", None, [msg])
        return 2
    _report(out, cfg, "ok", result)
    summary = result.get("pass") if isinstance(result, dict) else None
    print(f"oscdecay {cfg['command']}: wrote {out}/results.csv" + (f", pass={summary}" if summary is not None else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
