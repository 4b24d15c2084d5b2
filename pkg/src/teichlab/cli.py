"""Command line front end producing reproducible reports over both models.

Subcommands: spectral (per-curve length growth under an integer mapping
class, with the clustered spectrum summary), walk (cocycle drift with the
growth sandwich and horofunction drift tail), dist and horo (two-point
metric and horofunction reports with truncation diagnostics), holo
(nonexpanding self-map orbit analysis from a small map grammar), selftest
(cross-module invariant battery).

Reports are deterministic: an equal configuration yields byte-identical
output whatever --threads is set to.  JSON payloads use camelCase keys in
fixed order with no timestamps; CSV uses '.' decimals, LF line endings and
a mandatory header row after '#' config comments.

Exit codes: 0 ok, 2 usage/config/grammar error, 3 honest non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import cocycle
from . import fricke
from . import holo
from . import mcg
from . import torus
from .curves import Foliation, Slope, farey_enumerate, foliation
from .errors import (
    BoundedOrbitError,
    ConvergenceError,
    ExpansiveMapError,
    InsufficientGapError,
    InvalidCurveError,
    InvalidMappingClassError,
    InvalidPointError,
    InvalidSpecError,
    MapGrammarError,
)
from .mcg import MappingClass
from .torus import TorusPoint


# ---------------------------------------------------------------------------
# map grammar: mobius(a,b,c,d) | shrink(s;re,im) | blaschke(factor, ...)
# composed left to right with |>, factor = aut(re,im,theta) | pow(k)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def _tokenize_map(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("|>", i):
            toks.append(("pipe", "|>", i))
            i += 2
            continue
        if ch in "(),;":
            toks.append(("punct", ch, i))
            i += 1
            continue
        m = _NAME_RE.match(text, i)
        if m is not None:
            toks.append(("name", m.group(), i))
            i = m.end()
            continue
        m = _NUMBER_RE.match(text, i)
        if m is not None:
            toks.append(("number", m.group(), i))
            i = m.end()
            continue
        raise MapGrammarError(f"unexpected character {ch!r}", offset=i)
    toks.append(("end", "", n))
    return toks


class _MapParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize_map(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect_punct(self, ch: str):
        kind, val, off = self.take()
        if kind != "punct" or val != ch:
            raise MapGrammarError(f"expected {ch!r}, found {val or 'end of input'!r}", offset=off)

    def number(self) -> float:
        kind, val, off = self.take()
        if kind != "number":
            raise MapGrammarError(f"expected a number, found {val or 'end of input'!r}", offset=off)
        return float(val)

    def integer(self) -> int:
        kind, val, off = self.take()
        if kind != "number" or not re.fullmatch(r"[+-]?\d+", val):
            raise MapGrammarError(f"expected an integer, found {val or 'end of input'!r}", offset=off)
        return int(val)

    def primitive(self):
        kind, name, off = self.take()
        if kind != "name":
            raise MapGrammarError(f"expected a map name, found {name or 'end of input'!r}", offset=off)
        if name == "mobius":
            self.expect_punct("(")
            a = self.number()
            self.expect_punct(",")
            b = self.number()
            self.expect_punct(",")
            c = self.number()
            self.expect_punct(",")
            d = self.number()
            self.expect_punct(")")
            return holo.Mobius(a, b, c, d)
        if name == "shrink":
            self.expect_punct("(")
            s = self.number()
            self.expect_punct(";")
            re_off = self.number()
            self.expect_punct(",")
            im_off = self.number()
            self.expect_punct(")")
            return holo.AffineShrink(s, complex(re_off, im_off))
        if name == "blaschke":
            self.expect_punct("(")
            factors = [self.blaschke_factor()]
            while True:
                kind, val, off2 = self.peek()
                if kind == "punct" and val == ",":
                    self.take()
                    factors.append(self.blaschke_factor())
                    continue
                break
            self.expect_punct(")")
            return holo.DiskBlaschke(tuple(factors))
        raise MapGrammarError(f"unknown map name {name!r}", offset=off)

    def blaschke_factor(self):
        kind, name, off = self.take()
        if kind != "name" or name not in ("aut", "pow"):
            raise MapGrammarError(
                f"expected blaschke factor aut(...) or pow(...), found {name or 'end of input'!r}",
                offset=off,
            )
        if name == "aut":
            self.expect_punct("(")
            re_a = self.number()
            self.expect_punct(",")
            im_a = self.number()
            self.expect_punct(",")
            theta = self.number()
            self.expect_punct(")")
            return ("aut", re_a, im_a, theta)
        self.expect_punct("(")
        k = self.integer()
        self.expect_punct(")")
        return ("pow", k)

    def pipeline(self):
        parts = [self.primitive()]
        while True:
            kind, val, off = self.take()
            if kind == "end":
                break
            if kind == "pipe":
                parts.append(self.primitive())
                continue
            raise MapGrammarError(f"expected '|>' or end of input, found {val!r}", offset=off)
        return tuple(parts)


def parse_map(text: str) -> holo.SelfMap:
    """Parse a composition string into a checked nonexpanding self-map."""
    if not text or not text.strip():
        raise MapGrammarError("empty map string", offset=0)
    parts = _MapParser(text).pipeline()
    return holo.SelfMap(parts, label=text.strip())


# ---------------------------------------------------------------------------
# shared plumbing: config merge, sanitizing, emitters

def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidSpecError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _conv_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InvalidSpecError(f"expected a boolean, got {text!r}")


def _merge_config(ns: argparse.Namespace, spec: list[tuple[str, object, object]]) -> dict:
    """Effective settings: command line, then config file, then defaults."""
    file_values = _read_config_file(ns.config) if getattr(ns, "config", None) else {}
    known = {dest for dest, _, _ in spec}
    for key in file_values:
        if key not in known:
            raise InvalidSpecError(f"unknown config key {key!r}")
    cfg = {}
    for dest, conv, default in spec:
        val = getattr(ns, dest, None)
        if val is None and dest in file_values:
            val = conv(file_values[dest])
        if val is None:
            val = default
        cfg[dest] = val
    if cfg.get("model") not in (None, "torus", "fricke"):
        raise InvalidSpecError(f"unknown model {cfg['model']!r}")
    if cfg.get("format") not in (None, "json", "csv"):
        raise InvalidSpecError(f"unknown format {cfg['format']!r}")
    if cfg.get("threads") is not None and cfg["threads"] < 1:
        raise InvalidSpecError("threads must be >= 1")
    return cfg


def _py(obj):
    """Recursively convert payload values into plain JSON-ready types."""
    if isinstance(obj, dict):
        return {k: _py(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_py(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, TorusPoint):
        return [float(obj.re), float(obj.im)]
    if isinstance(obj, Slope):
        return [int(obj.p), int(obj.q)]
    if isinstance(obj, Foliation):
        return {"a": float(obj.a), "b": float(obj.b)}
    return obj


_ECHO_SKIP = ("threads", "config")


def _config_echo(command: str, cfg: dict, order: list[str]) -> dict:
    echo = {"command": command}
    for dest in order:
        if dest in _ECHO_SKIP:
            continue
        echo[_camel(dest)] = _py(cfg[dest])
    return echo


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(part.capitalize() for part in rest)


def _write_text(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(command: str, echo: dict, status: str, payload, diagnostics, out) -> None:
    env = {
        "toolVersion": __version__,
        "command": command,
        "config": echo,
        "status": status,
        "payload": _py(payload),
        "diagnostics": _py(diagnostics),
    }
    _write_text(json.dumps(env, indent=2) + "\n", out)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit_csv(command: str, echo: dict, status: str, header, rows, out) -> None:
    lines = [f"# toolVersion={__version__}"]
    for key, val in echo.items():
        lines.append(f"# {key}={_csv_cell(val) if not isinstance(val, (list, dict)) else json.dumps(_py(val))}")
    lines.append(f"# status={status}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    _write_text("\n".join(lines) + "\n", out)


def _parse_numbers(text: str, count: int, what: str, cast=float) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise InvalidSpecError(f"{what} needs {count} comma-separated values, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError as exc:
        raise InvalidSpecError(f"bad {what} {text!r}: {exc}") from None


def _parse_point(text: str, model: str):
    if model == "torus":
        re_v, im_v = _parse_numbers(text, 2, "torus point")
        return TorusPoint(re_v, im_v)
    tx, ty, tz = _parse_numbers(text, 3, "trace triple")
    return fricke.FrickePoint.from_traces(tx, ty, tz)


def _parse_matrix(text: str) -> MappingClass:
    a, b, c, d = _parse_numbers(text, 4, "matrix", cast=int)
    return MappingClass(a, b, c, d)


def _parse_generators(text: str) -> tuple[MappingClass, ...]:
    blocks = [b for b in (s.strip() for s in text.split(";")) if b]
    if not blocks:
        raise InvalidSpecError("empty generator list")
    return tuple(_parse_matrix(b) for b in blocks)


# ---------------------------------------------------------------------------
# spectral

_SPECTRAL_SPEC = [
    ("model", str, "torus"),
    ("seed", int, 0),
    ("format", str, "json"),
    ("out", str, None),
    ("threads", int, 1),
    ("matrix", str, "2,1,1,1"),
    ("alpha", str, "0,1"),
    ("n", int, 40),
    ("height", int, 5),
    ("spread_tol", float, 1e-2),
]


def cmd_spectral(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ns, _SPECTRAL_SPEC)
    m = _parse_matrix(cfg["matrix"])
    p, q = _parse_numbers(cfg["alpha"], 2, "curve slope", cast=int)
    alpha = Slope(p, q)
    x = cocycle.default_basepoint(cfg["model"])
    n_max = cfg["n"]
    report = mcg.spectral_report(cfg["model"], m, x, n_max, max_height=cfg["height"])
    entry = mcg.spectral_limit(cfg["model"], m, alpha, x, n_max)
    classification = report.classification
    dil = mcg.dilatation(m) if classification == "Anosov" else None
    converged = entry.ratio_spread <= cfg["spread_tol"]
    status = "ok" if converged else "unconverged"

    echo = _config_echo("spectral", cfg, [d for d, _, _ in _SPECTRAL_SPEC])
    payload = {
        "spectrum": list(report.spectrum),
        "spectrumSize": report.k,
        "classification": classification,
        "dilatation": dil,
        "curve": {
            "alpha": [alpha.p, alpha.q],
            "limit": entry.limit,
            "finalRoot": entry.roots[-1],
            "ratioSpread": entry.ratio_spread,
            "dilatationGap": entry.dilatation_gap,
        },
    }
    diagnostics = {
        "nMax": n_max,
        "panelHeight": cfg["height"],
        "spreadTol": cfg["spread_tol"],
        "ratioSpread": entry.ratio_spread,
    }
    if cfg["format"] == "json":
        _emit_json("spectral", echo, status, payload, diagnostics, cfg["out"])
    else:
        logs = mcg._log_length_sequence(cfg["model"], m, alpha, x, n_max)
        rows = []
        for k in range(1, n_max + 1):
            rows.append(
                (
                    k,
                    alpha.p,
                    alpha.q,
                    math.exp(logs[k]),
                    math.exp(logs[k] / k),
                    math.exp(logs[k] - logs[k - 1]),
                )
            )
        _emit_csv(
            "spectral",
            echo,
            status,
            ("n", "alpha_p", "alpha_q", "length", "nth_root", "ratio"),
            rows,
            cfg["out"],
        )
    return 0 if converged else 3


# ---------------------------------------------------------------------------
# walk

_WALK_SPEC = [
    ("model", str, "torus"),
    ("seed", int, 0),
    ("format", str, "json"),
    ("out", str, None),
    ("threads", int, 1),
    ("source", str, "iid"),
    ("generators", str, "1,1,0,1;1,0,1,1"),
    ("weights", str, None),
    ("transition", str, None),
    ("breakpoints", str, "0.5"),
    ("angle", float, cocycle.GOLDEN_ROTATION),
    ("n", int, 400),
    ("trials", int, 100),
    ("eps", float, 0.05),
    ("cap", int, None),
    ("height", int, 2),
]


def _build_source(cfg: dict):
    gens = _parse_generators(cfg["generators"])
    kind = cfg["source"]
    if kind == "iid":
        weights = None
        if cfg["weights"]:
            weights = _parse_numbers(cfg["weights"], len(gens), "weights")
        return cocycle.IID(gens, weights)
    if kind == "markov":
        if not cfg["transition"]:
            raise InvalidSpecError("markov source needs --transition")
        rows = tuple(
            _parse_numbers(row, len(gens), "transition row")
            for row in cfg["transition"].split(";")
        )
        return cocycle.MarkovChain(gens, rows)
    if kind == "rotation":
        bps = ()
        if cfg["breakpoints"]:
            text = cfg["breakpoints"]
            bps = tuple(float(p) for p in text.split(",") if p.strip())
        return cocycle.RotationCoding(gens, bps, angle=cfg["angle"])
    raise InvalidSpecError(f"unknown source {kind!r} (use iid, markov or rotation)")


def _sample_all(spec: cocycle.CocycleSpec, n: int, x0, model: str, trials: int, threads: int):
    """Trajectories for indices 0..trials-1, merged in index order so the
    worker count never changes the result."""
    out: list = [None] * trials
    if threads <= 1:
        for i in range(trials):
            out[i] = cocycle.sample_trajectory(spec, n, x0=x0, model=model, index=i)
        return out
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(cocycle.sample_trajectory, spec, n, x0, model, i) for i in range(trials)
        ]
        for i, fut in enumerate(futures):
            out[i] = fut.result()
    return out


def cmd_walk(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ns, _WALK_SPEC)
    source = _build_source(cfg)
    spec = cocycle.CocycleSpec(source, seed=cfg["seed"])
    model = cfg["model"]
    x0 = cocycle.default_basepoint(model)
    n, trials = cfg["n"], cfg["trials"]
    if n < 1 or trials < 1:
        raise InvalidSpecError("n and trials must be >= 1")

    trajectories = _sample_all(spec, n, x0, model, trials, cfg["threads"])
    forward = np.stack([t.forward for t in trajectories])
    ratios_n = forward[:, n] / n
    value = float(np.mean(ratios_n))
    stderr = float(np.std(ratios_n, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    lam = math.exp(value)
    eps = cfg["eps"]

    echo = _config_echo("walk", cfg, [d for d, _, _ in _WALK_SPEC])
    status = "ok"
    exit_code = 0
    mu_payload = None
    horo_payload = None
    if lam - eps <= 1.0:
        sandwich_payload = {
            "n": None,
            "cap": None,
            "violationCount": 0,
            "violations": [],
            "cValue": None,
            "lam": lam,
            "eps": eps,
            "status": "degenerate-sandwich",
            "cConvention": cocycle._C_CONVENTION,
        }
    else:
        traj0 = trajectories[0]
        try:
            mu = cocycle.estimate_stable_foliation(traj0)
        except InsufficientGapError as exc:
            status = "insufficient-gap"
            diagnostics = {
                "driftStderr": stderr,
                "message": str(exc),
            }
            payload = {
                "drift": {"value": value, "stderr": stderr, "n": n, "trials": trials, "seed": cfg["seed"]},
                "lambda": lam,
                "mu": None,
                "sandwich": None,
                "horoDrift": None,
            }
            if cfg["format"] == "json":
                _emit_json("walk", echo, status, payload, diagnostics, cfg["out"])
            else:
                _emit_csv("walk", echo, status, ("n", "mean_distance", "mean_ratio", "stderr_ratio"),
                          _walk_rows(forward, n, trials), cfg["out"])
            return 3
        mu_payload = {"a": mu.a, "b": mu.b}
        sandwich = None
        if model == "torus":
            alphas = farey_enumerate(cfg["height"])
            sandwich = cocycle.sandwich_verify(
                traj0, mu, lam, eps, alphas, x=x0, model=model, cap=cfg["cap"]
            )
            shown = [[int(k), [int(s.p), int(s.q)]] for k, s in sandwich.violations[:20]]
            sandwich_payload = {
                "n": sandwich.n_threshold,
                "cap": sandwich.cap,
                "violationCount": len(sandwich.violations),
                "violations": shown,
                "cValue": sandwich.c_value,
                "lam": sandwich.lam,
                "eps": sandwich.eps,
                "status": sandwich.status,
                "cConvention": sandwich.c_convention,
            }
        else:
            sandwich_payload = {
                "n": None,
                "cap": None,
                "violationCount": 0,
                "violations": [],
                "cValue": None,
                "lam": lam,
                "eps": eps,
                "status": "torus-only",
                "cConvention": cocycle._C_CONVENTION,
            }
        # The estimated direction carries a relative error around 1e-16, and
        # the horofunction at the n-th translate needs it resolved to
        # exp(-2 d_n).  Past drift * n ~ 15 nats the value saturates at the
        # representation floor, so the drift tail is read off the orbit
        # prefix that stays resolved.
        n_horo = min(n, max(4, int(15.4 / max(value, 1e-9))))
        traj_h = traj0 if n_horo == n else cocycle.sample_trajectory(
            spec, n_horo, x0=x0, model=model, index=0
        )
        horo = cocycle.horo_drift_verify(traj_h, mu, x0=x0, model=model)
        tail_block = horo.values[-(max(1, n_horo // 4)):]
        horo_payload = {
            "tail": horo.tail,
            "n": n_horo,
            "lastValue": horo.values[-1],
            "tailSpread": float(max(tail_block) - min(tail_block)),
        }
        if sandwich is not None and sandwich.status == "cap-exceeded":
            status = "cap-exceeded"
            exit_code = 3

    payload = {
        "drift": {"value": value, "stderr": stderr, "n": n, "trials": trials, "seed": cfg["seed"]},
        "lambda": lam,
        "mu": mu_payload,
        "sandwich": sandwich_payload,
        "horoDrift": horo_payload,
    }
    diagnostics = {
        "driftStderr": stderr,
        "generatorCount": len(spec.generators),
        "sandwichPanelHeight": cfg["height"],
    }
    if cfg["format"] == "json":
        _emit_json("walk", echo, status, payload, diagnostics, cfg["out"])
    else:
        _emit_csv("walk", echo, status, ("n", "mean_distance", "mean_ratio", "stderr_ratio"),
                  _walk_rows(forward, n, trials), cfg["out"])
    return exit_code


def _walk_rows(forward: np.ndarray, n: int, trials: int):
    rows = []
    for k in range(1, n + 1):
        ratios = forward[:, k] / k
        se = float(np.std(ratios, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        rows.append((k, float(np.mean(forward[:, k])), float(np.mean(ratios)), se))
    return rows


# ---------------------------------------------------------------------------
# dist / horo

_DIST_SPEC = [
    ("model", str, "torus"),
    ("seed", int, 0),
    ("format", str, "json"),
    ("out", str, None),
    ("threads", int, 1),
    ("x", str, None),
    ("y", str, None),
    ("height", int, 100),
    ("gap_tol", float, 1e-3),
]


def cmd_dist(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ns, _DIST_SPEC)
    if not cfg["x"] or not cfg["y"]:
        raise InvalidSpecError("dist needs --x and --y")
    model = cfg["model"]
    x = _parse_point(cfg["x"], model)
    y = _parse_point(cfg["y"], model)
    h = cfg["height"]

    if model == "torus":
        fwd_v, fwd_arg, fwd_gap = torus.thurston_metric_enumerated_detail(x, y, h)
        bwd_v, bwd_arg, bwd_gap = torus.thurston_metric_enumerated_detail(y, x, h)
        exact_fwd = torus.thurston_metric_exact(x, y)
        exact_bwd = torus.thurston_metric_exact(y, x)
        diagnostics = {
            "closedFormForward": exact_fwd,
            "closedFormBackward": exact_bwd,
            "maxEnumError": max(abs(fwd_v - exact_fwd), abs(bwd_v - exact_bwd)),
            "height": h,
        }
        converged = max(fwd_gap, bwd_gap) <= cfg["gap_tol"]
    else:
        est_f = fricke.thurston_metric_enumerated(x, y, h)
        est_b = fricke.thurston_metric_enumerated(y, x, h)
        fwd_v, fwd_arg, fwd_gap = est_f.value, est_f.argmax, est_f.gap
        bwd_v, bwd_arg, bwd_gap = est_b.value, est_b.argmax, est_b.gap
        diagnostics = {"height": h, "forwardStatus": est_f.status, "backwardStatus": est_b.status}
        converged = est_f.status == "ok" and est_b.status == "ok"

    symmetric = abs(fwd_v - bwd_v) <= 1e-9
    payload = {
        "forward": {"value": fwd_v, "argmax": [fwd_arg.p, fwd_arg.q], "doublingGap": fwd_gap},
        "backward": {"value": bwd_v, "argmax": [bwd_arg.p, bwd_arg.q], "doublingGap": bwd_gap},
        "symmetric": symmetric,
        "asymmetryWitness": fwd_v - bwd_v,
    }
    status = "ok" if converged else "unconverged"
    echo = _config_echo("dist", cfg, [d for d, _, _ in _DIST_SPEC])
    if cfg["format"] == "json":
        _emit_json("dist", echo, status, payload, diagnostics, cfg["out"])
    else:
        rows = [
            ("forward", fwd_v, fwd_arg.p, fwd_arg.q, fwd_gap),
            ("backward", bwd_v, bwd_arg.p, bwd_arg.q, bwd_gap),
        ]
        _emit_csv("dist", echo, status,
                  ("direction", "value", "argmax_p", "argmax_q", "doubling_gap"), rows, cfg["out"])
    return 0 if converged else 3


_HORO_SPEC = [
    ("model", str, "torus"),
    ("seed", int, 0),
    ("format", str, "json"),
    ("out", str, None),
    ("threads", int, 1),
    ("mu", str, None),
    ("x", str, None),
    ("x0", str, None),
    ("height", int, 100),
    ("gap_tol", float, 1e-3),
]


def cmd_horo(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ns, _HORO_SPEC)
    if not cfg["mu"] or not cfg["x"]:
        raise InvalidSpecError("horo needs --mu and --x")
    model = cfg["model"]
    a, b = _parse_numbers(cfg["mu"], 2, "foliation")
    mu = foliation(a, b)
    x = _parse_point(cfg["x"], model)
    x0 = _parse_point(cfg["x0"], model) if cfg["x0"] else cocycle.default_basepoint(model)
    h = cfg["height"]

    if model == "torus":
        value = torus.horofunction(mu, x, x0)
        enum = torus.horofunction_enumerated(mu, x, x0, h)
        gap = abs(value - enum)
        diagnostics = {"enumerated": enum, "gap": gap, "height": h}
        converged = gap <= cfg["gap_tol"]
    else:
        est = fricke.horofunction_estimate(mu, x, x0, h)
        value, gap = est.value, est.gap
        diagnostics = {"gap": gap, "height": h, "estimateStatus": est.status}
        converged = est.status == "ok"

    payload = {"value": value, "mu": {"a": mu.a, "b": mu.b}, "gap": gap}
    status = "ok" if converged else "unconverged"
    echo = _config_echo("horo", cfg, [d for d, _, _ in _HORO_SPEC])
    if cfg["format"] == "json":
        _emit_json("horo", echo, status, payload, diagnostics, cfg["out"])
    else:
        _emit_csv("horo", echo, status, ("value", "gap", "height"),
                  [(value, gap, h)], cfg["out"])
    return 0 if converged else 3


# ---------------------------------------------------------------------------
# holo

_HOLO_SPEC = [
    ("model", str, "torus"),
    ("seed", int, 0),
    ("format", str, "json"),
    ("out", str, None),
    ("threads", int, 1),
    ("map", str, None),
    ("x0", str, "0,1"),
    ("budget", int, 2000),
    ("window", int, 100),
    ("escape_radius", float, 20.0),
    ("growth_n", int, 40),
    ("growth_height", int, 3),
]

_STEP_TEST_POINTS = (
    TorusPoint(0.0, 1.0),
    TorusPoint(1.0, 2.0),
    TorusPoint(-0.5, 0.7),
    TorusPoint(0.0, 3.0),
    TorusPoint(0.3, 0.4),
)


def cmd_holo(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ns, _HOLO_SPEC)
    if cfg["model"] != "torus":
        raise InvalidSpecError("holo reports run on the torus model")
    if not cfg["map"]:
        raise InvalidSpecError("holo needs --map")
    f = parse_map(cfg["map"])
    re_v, im_v = _parse_numbers(cfg["x0"], 2, "torus point")
    x0 = TorusPoint(re_v, im_v)

    analysis = holo.classify_orbit(
        f, x0, window=cfg["window"], budget=cfg["budget"], escape_radius=cfg["escape_radius"]
    )
    drift_block = {"value": analysis.drift, "nMax": None, "tailValue": None, "tailDelta": None}
    try:
        rep = holo.drift_report(f, x0, n_max=min(cfg["budget"], 400))
        drift_block = {
            "value": rep.value,
            "nMax": rep.n_max,
            "tailValue": rep.tail_value,
            "tailDelta": rep.tail_delta,
        }
    except (ConvergenceError, BoundedOrbitError, InvalidSpecError):
        pass

    subsequence = None
    e_panel = None
    growth_payload = None
    step_payload = None
    notes = []
    if analysis.classification == "Escaping":
        subsequence = [{"eps": r.eps, "n": r.n} for r in analysis.subsequence]
        point = analysis.boundary
        e_panel = [
            {"p": s.p, "q": s.q, "e": point.extremal(s)}
            for s in farey_enumerate(cfg["growth_height"])
        ]
        extraction = holo.BoundaryExtraction(point, analysis.subsequence, analysis.drift)
        try:
            gb = holo.verify_growth_bound(
                f, x0, farey_enumerate(cfg["growth_height"]),
                n_max=cfg["growth_n"], extraction=extraction,
            )
            growth_payload = {
                "lam": gb.lam,
                "supRatio": gb.sup_ratio,
                "boundOk": gb.bound_ok,
                "kerckhoffOk": gb.kerckhoff_ok,
                "rows": [
                    {
                        "beta": [r.beta.p, r.beta.q],
                        "eValue": r.e_value,
                        "minMargin": r.min_margin,
                        "finalRoot": r.final_root,
                    }
                    for r in gb.rows
                ],
                "zeroRows": [
                    {"beta": [beta.p, beta.q], "finalRoot": root} for beta, root in gb.zero_rows
                ],
            }
        except (ConvergenceError, BoundedOrbitError) as exc:
            notes.append(f"growth bound skipped: {exc}")
        step = holo.verify_step_inequality(
            f, x0, point, _STEP_TEST_POINTS, l=analysis.drift
        )
        step_payload = {
            "l": step.l,
            "ok": step.ok,
            "maxDevEl": step.max_dev_el,
            "maxDevE2l": step.max_dev_e2l,
            "supported": step.supported,
            "rows": [
                {
                    "y": [r.y.re, r.y.im],
                    "hBefore": r.h_before,
                    "hAfter": r.h_after,
                    "gain": r.gain,
                }
                for r in step.rows
            ],
        }

    diag = analysis.diagnostics
    diagnostics = {
        "nStop": diag.get("n_stop"),
        "radius": diag.get("radius"),
        "lastDistance": diag.get("last_distance"),
        "lastPoint": diag.get("last_point"),
        "windowChange": diag.get("window_change"),
        "notes": notes,
    }
    payload = {
        "classification": analysis.classification,
        "drift": drift_block,
        "lambdaExt": analysis.lambda_ext,
        "supRatio": analysis.sup_ratio,
        "subsequence": subsequence,
        "ePanel": e_panel,
        "growthBound": growth_payload,
        "stepInequality": step_payload,
    }
    status = "ok" if analysis.classification != "Inconclusive" else "inconclusive"
    echo = _config_echo("holo", cfg, [d for d, _, _ in _HOLO_SPEC])
    if cfg["format"] == "json":
        _emit_json("holo", echo, status, payload, diagnostics, cfg["out"])
    else:
        taus, d = holo._orbit_track(f, x0, min(cfg["budget"], 400))
        rows = [(k, float(d[k]), float(d[k] / k)) for k in range(1, len(d))]
        _emit_csv("holo", echo, status, ("n", "distance", "ratio"), rows, cfg["out"])
    return 0 if analysis.classification != "Inconclusive" else 3


# ---------------------------------------------------------------------------
# selftest

def _check_torus_metric():
    rng = np.random.default_rng(0)
    pts = [TorusPoint(float(rng.normal()), float(math.exp(rng.normal()))) for _ in range(8)]
    for x in pts:
        assert torus.teich_distance(x, x) == 0.0
        for y in pts:
            fwd = torus.thurston_metric_exact(x, y)
            bwd = torus.thurston_metric_exact(y, x)
            assert abs(fwd - bwd) <= 1e-9, f"asymmetry {abs(fwd - bwd):.3e}"
            assert fwd >= 0.0
    for x in pts[:4]:
        for y in pts[:4]:
            for z in pts[:4]:
                slack = (
                    torus.thurston_metric_exact(x, z)
                    - torus.thurston_metric_exact(x, y)
                    - torus.thurston_metric_exact(y, z)
                )
                assert slack <= 1e-9, f"triangle violated by {slack:.3e}"


def _check_torus_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(4):
        x = TorusPoint(float(rng.normal()), float(math.exp(rng.normal())))
        y = TorusPoint(float(rng.normal()), float(math.exp(rng.normal())))
        enum, _, _ = torus.thurston_metric_enumerated_detail(x, y, 100)
        exact = torus.thurston_metric_exact(x, y)
        assert abs(enum - exact) <= 1e-4, f"enumeration off by {abs(enum - exact):.3e}"


def _check_torus_horofunction():
    x0 = TorusPoint(0.0, 1.0)
    for mu in (foliation(1.0, 0.0), foliation(1.0, 1.0), foliation(1.618033988749895, 1.0)):
        assert torus.horofunction(mu, x0, x0) == 0.0
    mu = foliation(1.618033988749895, 1.0)
    x = TorusPoint(0.5, 2.0)
    closed = torus.horofunction(mu, x, x0)
    enum = torus.horofunction_enumerated(mu, x, x0, 400)
    assert abs(closed - enum) <= 2e-2, f"horofunction gap {abs(closed - enum):.3e}"


def _check_fricke():
    pt = fricke.from_two_traces(2.02, 18.0, "plus")
    assert fricke.markov_residual(pt) <= 1e-9
    wit = fricke.find_asymmetry_witness(60)
    assert wit.witness > 0.0, "no asymmetry witness found"


def _check_mcg_classification():
    assert mcg.classify(MappingClass(2, 1, 1, 1)) == "Anosov"
    assert mcg.classify(MappingClass(1, 1, 0, 1)) == "Reducible"
    assert mcg.classify(MappingClass(0, -1, 1, 0)) == "Periodic"


def _check_mcg_limit():
    x = TorusPoint(0.0, 1.0)
    entry = mcg.spectral_limit("torus", MappingClass(2, 1, 1, 1), Slope(0, 1), x, 30)
    lam = (3.0 + math.sqrt(5.0)) / 2.0
    assert abs(entry.limit - lam) <= 1e-6, f"limit gap {abs(entry.limit - lam):.3e}"


def _check_cocycle_replay():
    spec = cocycle.CocycleSpec(
        cocycle.IID((MappingClass(1, 1, 0, 1), MappingClass(1, 0, 1, 1))), seed=3
    )
    t1 = cocycle.sample_trajectory(spec, 50, index=2)
    t2 = cocycle.sample_trajectory(spec, 50, index=2)
    assert np.array_equal(t1.forward, t2.forward)
    t3 = cocycle.sample_trajectory(spec, 50, index=3)
    assert not np.array_equal(t1.forward, t3.forward)


def _check_cocycle_identity():
    spec = cocycle.CocycleSpec(cocycle.IID((MappingClass(1, 0, 0, 1),)), seed=0)
    est = cocycle.drift_estimate(spec, n=50, trials=4)
    assert est.value == 0.0
    x0 = TorusPoint(0.0, 1.0)
    h = torus.BoundaryHoro(foliation(1.0, 1.0))
    assert cocycle.F_cocycle(MappingClass(1, 0, 0, 1), h, x0) == 0.0


def _check_holo_drift():
    f = holo.SelfMap((holo.Mobius(2.0, 0.0, 0.0, 1.0),), label="doubling")
    assert abs(holo.drift(f, TorusPoint(0.0, 1.0)) - 0.5 * math.log(2.0)) <= 1e-12


def _check_holo_expansive_rejected():
    class _Stretch:
        def apply(self, tau: complex) -> complex:
            return complex(3.0 * tau.real, tau.imag)

    try:
        holo.SelfMap((_Stretch(),), label="stretch")
    except ExpansiveMapError:
        return
    raise AssertionError("expansive map was accepted")


def _check_map_grammar():
    f = parse_map("mobius(2,0,0,1) |> shrink(0.9;0,1)")
    assert len(f.parts) == 2
    try:
        parse_map("mobius(2,0,0")
    except MapGrammarError as exc:
        assert isinstance(exc.offset, int)
        return
    raise AssertionError("truncated map string was accepted")


_SELFTEST_CHECKS = (
    ("torus-metric-symmetric-triangle", _check_torus_metric),
    ("torus-enumeration-matches-closed-form", _check_torus_enumeration),
    ("torus-horofunction-basics", _check_torus_horofunction),
    ("fricke-markov-and-asymmetry", _check_fricke),
    ("mcg-trace-classification", _check_mcg_classification),
    ("mcg-anosov-growth-limit", _check_mcg_limit),
    ("cocycle-deterministic-replay", _check_cocycle_replay),
    ("cocycle-identity-degenerate", _check_cocycle_identity),
    ("holo-doubling-drift", _check_holo_drift),
    ("holo-expansive-rejected", _check_holo_expansive_rejected),
    ("map-grammar-parse-and-error", _check_map_grammar),
)


def cmd_selftest(ns: argparse.Namespace) -> int:
    lines = []
    failures = 0
    for name, fn in _SELFTEST_CHECKS:
        try:
            fn()
            lines.append(f"ok {name}")
        except Exception as exc:  # report every failure, keep going
            failures += 1
            lines.append(f"FAIL {name}: {exc}")
    lines.append(f"{len(_SELFTEST_CHECKS) - failures}/{len(_SELFTEST_CHECKS)} checks passed")
    _write_text("\n".join(lines) + "\n", getattr(ns, "out", None))
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# argument wiring

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", choices=("torus", "fricke"), default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--format", choices=("json", "csv"), default=None)
    sub.add_argument("--out", default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--config", default=None, help="flat key=value file; flags override")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teichlab",
        description="deterministic reports over two exactly computable surface models",
    )
    subs = parser.add_subparsers(dest="cmd", required=True)

    p = subs.add_parser("spectral", help="length growth under an integer mapping class")
    _add_common(p)
    p.add_argument("--matrix", default=None, help="a,b,c,d integer entries, det +-1")
    p.add_argument("--alpha", default=None, help="p,q curve slope for the per-n trace")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--height", type=int, default=None, help="curve panel height for the spectrum")
    p.add_argument("--spread-tol", dest="spread_tol", type=float, default=None)
    p.set_defaults(func=cmd_spectral)

    p = subs.add_parser("walk", help="cocycle drift with the growth sandwich")
    _add_common(p)
    p.add_argument("--source", choices=("iid", "markov", "rotation"), default=None)
    p.add_argument("--generators", default=None, help="semicolon-separated a,b,c,d matrices")
    p.add_argument("--weights", default=None)
    p.add_argument("--transition", default=None, help="semicolon-separated stochastic rows")
    p.add_argument("--breakpoints", default=None)
    p.add_argument("--angle", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--height", type=int, default=None, help="sandwich curve panel height")
    p.set_defaults(func=cmd_walk)

    p = subs.add_parser("dist", help="two-point metric report")
    _add_common(p)
    p.add_argument("--x", default=None, help="re,im (torus) or tx,ty,tz (fricke)")
    p.add_argument("--y", default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--gap-tol", dest="gap_tol", type=float, default=None)
    p.set_defaults(func=cmd_dist)

    p = subs.add_parser("horo", help="horofunction report")
    _add_common(p)
    p.add_argument("--mu", default=None, help="a,b foliation coordinates")
    p.add_argument("--x", default=None)
    p.add_argument("--x0", default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--gap-tol", dest="gap_tol", type=float, default=None)
    p.set_defaults(func=cmd_horo)

    p = subs.add_parser("holo", help="nonexpanding self-map orbit analysis")
    _add_common(p)
    p.add_argument("--map", default=None, help="mobius(a,b,c,d)|shrink(s;re,im)|blaschke(...), composed with |>")
    p.add_argument("--x0", default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--escape-radius", dest="escape_radius", type=float, default=None)
    p.add_argument("--growth-n", dest="growth_n", type=int, default=None)
    p.add_argument("--growth-height", dest="growth_height", type=int, default=None)
    p.set_defaults(func=cmd_holo)

    p = subs.add_parser("selftest", help="cross-module invariant battery")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return ns.func(ns)
    except MapGrammarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        InvalidSpecError,
        InvalidPointError,
        InvalidCurveError,
        InvalidMappingClassError,
        ExpansiveMapError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, InsufficientGapError, BoundedOrbitError) as exc:
        print(f"unconverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
