"""Command-line front end: load a TOML run config, run the routes, emit JSON lines.

    jacdet report   run.toml     det, trace, spectrum, pv-det, pv-trace,
                                 capacity, roots (+ identities for lti)
    jacdet spectrum run.toml     Galerkin records only
    jacdet identity run.toml     closed-form identity records
    jacdet roots    run.toml     characteristic-function scan
    jacdet selftest              acceptance suite

Config layout (matrices are flat row-major arrays with explicit sizes)::

    [problem]
    kind = "lti"          # oscillator | magnetic | lti | sampled
    m = 2
    A = [1.0, 0.0, 0.0, 2.0]
    R = [2.0, 1.0, 1.0, 3.0]

    [method]
    steps = 4096
    N = 1024
    n_terms = 100000
    s_range = [1.0, 50.0]

    [output]
    report = "run.jsonl"
    spectrum_csv = "spectrum.csv"

Settings precedence: command-line flag, then JACDET_STEPS / JACDET_N /
JACDET_N_TERMS, then the config file, then the defaults below.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import subprocess
import sys
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
import tomli

from . import identities, jacobi, spectral
from .errors import (CommutativityError, DimensionError, LegendreConditionError,
                     RangeError, SymmetryError)
from .matfun import check_symmetric
from .model import (EPS_H, Problem, build_lti, build_magnetic, build_oscillator,
                    sampled_problem)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3
ENV_PREFIX = "JACDET_"
KINDS = ("oscillator", "magnetic", "lti", "sampled")
SYMPLECTIC_BREACH = 1e-6
PREVIEW = 16


class ConfigError(ValueError):
    pass


class InvariantBreach(RuntimeError):
    pass


@dataclass(frozen=True)
class MethodSettings:
    steps: int = jacobi.DEFAULT_STEPS
    N: int = 1024
    n_terms: int = 100_000
    nq: int = 4096
    s_range: tuple = (1.0, 50.0)
    grid: int = 512
    pv_tol: float = spectral.PV_TOL
    cross_tol: float = 1e-3
    capacity_tol: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    kind: str
    params: dict
    problem: Problem = field(repr=False)
    method: MethodSettings = MethodSettings()
    report: Optional[str] = None
    spectrum_csv: Optional[str] = None
    euler: tuple = ()
    source: str = "<config>"


# --------------------------------------------------------------------------
# loading

def _locator(text: str, source: str):
    lines = text.splitlines()

    def where(section: str, key: Optional[str] = None) -> str:
        current = ""
        for no, line in enumerate(lines, 1):
            head = re.match(r"\s*\[([^\]]+)\]", line)
            if head:
                current = head.group(1).strip()
                if key is None and current == section:
                    return f"{source}:{no}"
                continue
            if key is not None and current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
                return f"{source}:{no}"
        return source

    return where


def _matrix(vals, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(vals, dtype=float)
    if arr.ndim != 1 or arr.size != rows * cols:
        raise DimensionError(f"{name} must be a flat array of {rows}*{cols} numbers, got {arr.size}")
    return arr.reshape(rows, cols)


def _symmetric(M: np.ndarray, name: str) -> np.ndarray:
    try:
        return check_symmetric(M)
    except SymmetryError as exc:
        raise SymmetryError(f"{name} must be symmetric ({exc})") from exc


def _positive_int(sec: dict, key: str, default=None) -> int:
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer")
    if v < 1:
        raise ConfigError(f"{key} must be positive, got {v}")
    return v


def _build(kind: str, prob: dict, eps_H: float) -> tuple:
    if kind == "oscillator":
        r = float(prob.get("r", 1.0))
        return {"r": r}, build_oscillator(r)
    if kind == "magnetic":
        r = float(prob.get("r", 1.0))
        return {"r": r}, build_magnetic(r)
    if kind == "lti":
        m = _positive_int(prob, "m", 1)
        A = _symmetric(_matrix(prob.get("A", []), m, m, "A"), "A")
        R = _symmetric(_matrix(prob.get("R", []), m, m, "R"), "R")
        return {"m": m, "A": A.ravel().tolist(), "R": R.ravel().tolist()}, build_lti(A, R)
    nt = prob.get("nt")
    if isinstance(nt, bool) or not isinstance(nt, int) or nt < 1:
        raise ConfigError(f"nt must be a positive integer, got {nt!r}")
    d = _positive_int(prob, "d", 1)
    m = _positive_int(prob, "m", 1)
    H = _matrix(prob.get("H", []), nt, m * m, "H").reshape(nt, m, m)
    Y = _matrix(prob.get("Y", []), nt, d * m, "Y").reshape(nt, d, m)
    X = _matrix(prob.get("X", []), nt, d * m, "X").reshape(nt, d, m)
    p = sampled_problem(H, Y, X, label=f"sampled(nt={nt})", eps_H=eps_H)
    return {"nt": nt, "d": d, "m": m}, p


def _method(sec: dict) -> MethodSettings:
    base = MethodSettings()
    out = {}
    for key in ("steps", "N", "n_terms", "nq", "grid"):
        if key in sec:
            out[key] = _positive_int(sec, key)
    for key in ("pv_tol", "cross_tol", "capacity_tol"):
        if key in sec:
            v = float(sec[key])
            if not v > 0:
                raise ConfigError(f"{key} must be positive")
            out[key] = v
    if "s_range" in sec:
        rng = sec["s_range"]
        if not isinstance(rng, list) or len(rng) != 2:
            raise ConfigError("s_range must be a pair [s_lo, s_hi]")
        lo, hi = float(rng[0]), float(rng[1])
        if not lo < hi:
            raise ConfigError("s_range needs s_lo < s_hi")
        out["s_range"] = (lo, hi)
    m = replace(base, **out)
    if m.steps < 16:
        raise ConfigError("steps must be at least 16")
    if m.grid < 3:
        raise ConfigError("grid must be at least 3")
    return m


def load_config(path) -> RunConfig:
    """Parse and validate a run config; every error names file and line."""
    path = Path(path)
    source = str(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{source}: cannot read config ({exc.strerror})") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from exc
    where = _locator(text, source)

    unknown = set(data) - {"problem", "method", "output", "identity"}
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
    prob = data.get("problem")
    if not isinstance(prob, dict):
        raise ConfigError(f"{source}: missing [problem] section")
    kind = prob.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{where('problem', 'kind')}: problem.kind must be one of {KINDS}, got {kind!r}")
    eps_H = float(prob.get("eps_H", EPS_H))
    if not eps_H > 0:
        raise ConfigError(f"{where('problem', 'eps_H')}: eps_H must be positive")

    try:
        params, problem = _build(kind, prob, eps_H)
    except (ConfigError, DimensionError, SymmetryError, LegendreConditionError,
            ValueError) as exc:
        key = _blame(exc)
        loc = where("problem", key) if key else where("problem")
        raise ConfigError(f"{loc}: problem: {exc}") from exc

    msec = data.get("method", {})
    try:
        method = _method(msec)
    except (ConfigError, ValueError, TypeError) as exc:
        key = next((k for k in msec if k in str(exc)), None)
        raise ConfigError(f"{where('method', key) if key else where('method')}: method: {exc}") from exc
    if method.N < 4 * problem.d:
        raise ConfigError(f"{where('method', 'N')}: method.N must be at least 4d = {4 * problem.d}")

    out = data.get("output", {})
    euler = []
    for pair in data.get("identity", {}).get("euler", []):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{where('identity', 'euler')}: identity.euler entries must be [a, b] pairs")
        euler.append((float(pair[0]), float(pair[1])))
    return RunConfig(kind, params, problem, method, out.get("report"),
                     out.get("spectrum_csv"), tuple(euler), source)


def _blame(exc: Exception) -> Optional[str]:
    m = re.match(r"(nt|H|Y|X|A|R|m|d|r)\b", str(exc))
    return m.group(1) if m else None


def apply_overrides(cfg: RunConfig, flags: dict, env=None) -> RunConfig:
    """Flags beat JACDET_* environment variables, which beat the file."""
    env = os.environ if env is None else env
    upd = {}
    for key in ("steps", "N", "n_terms"):
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            try:
                upd[key] = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{ENV_PREFIX + key.upper()}={raw!r} is not an integer") from exc
        if flags.get(key) is not None:
            upd[key] = int(flags[key])
    for key, v in upd.items():
        if v < 1:
            raise ConfigError(f"{key} must be positive, got {v}")
    if upd.get("steps", 16) < 16:
        raise ConfigError("steps must be at least 16")
    method = replace(cfg.method, **upd)
    if method.N < 4 * cfg.problem.d:
        raise ConfigError(f"N must be at least 4d = {4 * cfg.problem.d}")
    return replace(cfg, method=method)


# --------------------------------------------------------------------------
# records

def _num(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise InvariantBreach(f"non-finite value {x} in report")
    return x


def _vec(a) -> list:
    return [_num(v) for v in np.asarray(a).ravel()]


def _cross(value: float, ref: float, route: str, tol: float, relative: bool = False) -> dict:
    gap = abs(value - ref)
    if relative:
        gap /= max(abs(ref), 1e-300)
    return {"route": route, "value": _num(ref), "gap": _num(gap), "tol": tol,
            "flagged": bool(gap > tol)}


class Run:
    """State shared by the records of one problem."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.p = cfg.problem
        self.m = cfg.method
        self.det = None
        self.trace = None
        self.rep = None

    def record(self, kind: str, route: str, settings: dict, payload: dict) -> dict:
        return {"kind": kind, "route": route, "problem": self.p.label,
                "settings": settings, "payload": payload}

    # jacobi route -------------------------------------------------------
    def det_record(self) -> dict:
        m = self.m
        fs = jacobi.flow(self.p, 1.0, m.steps)
        defect = fs.symplectic_defect()
        if defect > SYMPLECTIC_BREACH:
            raise InvariantBreach(f"flow lost symplecticity: ||Phi^T J Phi - J|| = {defect:.3e}")
        Gamma = jacobi.gram(self.p, m.steps)
        self.det = jacobi.det_identity(self.p, m.steps)
        payload = {"value": _num(self.det), "det_Gamma1": _num(np.linalg.det(Gamma)),
                   "det_Q1": _num(np.linalg.det(jacobi.extract_Q(fs))),
                   "symplectic_defect": _num(defect)}
        return self.record("det", "jacobi", {"steps": m.steps}, payload)

    def trace_record(self) -> dict:
        self.trace = jacobi.trace_identity(self.p, self.m.steps)
        return self.record("trace", "jacobi", {"steps": self.m.steps},
                           {"value": _num(self.trace)})

    # galerkin route -----------------------------------------------------
    def _spectrum(self):
        if self.rep is None:
            self.rep = spectral.spectrum(self.p, self.m.N)
        return self.rep

    def spectrum_record(self) -> dict:
        rep = self._spectrum()
        csv_path = self.cfg.spectrum_csv
        if csv_path:
            with open(csv_path, "w", newline="") as fh:
                rep.write_csv(fh)
        payload = {"n_pos": int(rep.pos.size), "n_neg": int(rep.neg.size),
                   "pos_head": _vec(rep.pos[:PREVIEW]), "neg_head": _vec(rep.neg[:PREVIEW]),
                   "csv": csv_path}
        return self.record("spectrum", "galerkin", {"N": self.m.N}, payload)

    def _pv_record(self, which: str) -> dict:
        rep = self._spectrum()
        fn = spectral.pv_det if which == "det" else spectral.pv_trace
        pv = fn(rep, tol=self.m.pv_tol)
        payload = {"value": _num(pv.estimate), "status": pv.status,
                   "eps": _vec(pv.eps), "partial": _vec(pv.partial)}
        ref = self.det if which == "det" else self.trace
        if ref is not None:
            payload["cross"] = _cross(pv.estimate, ref, "jacobi", self.m.cross_tol)
        return self.record(which, "galerkin-pv", {"N": self.m.N, "pv_tol": self.m.pv_tol}, payload)

    def pv_det_record(self) -> dict:
        return self._pv_record("det")

    def pv_trace_record(self) -> dict:
        return self._pv_record("trace")

    def capacity_record(self) -> dict:
        rep = self._spectrum()
        N = self.m.N
        zeta = spectral.zeta_bar(self.p, N)
        est = spectral.capacity_fit(rep, integral_zeta=zeta.integral,
                                    size=self.p.m * N - self.p.d,
                                    hypothesis_checked=self.p.path.kind != "sampled")
        scale = max(abs(est.integral_zeta), 0.1)
        gaps = [abs(est.fitted_slope_pos - est.integral_zeta) / scale,
                abs(est.fitted_slope_neg - est.integral_zeta) / scale]
        payload = {"integral_zeta": _num(est.integral_zeta), "capacity": _num(est.capacity),
                   "slope_pos": _num(est.fitted_slope_pos), "slope_neg": _num(est.fitted_slope_neg),
                   "window": list(est.window), "hypothesis_checked": est.hypothesis_checked,
                   "rel_gap": _vec(gaps), "tol": self.m.capacity_tol,
                   "flagged": bool(max(gaps) > self.m.capacity_tol)}
        return self.record("capacity", "galerkin", {"N": N}, payload)

    # roots route --------------------------------------------------------
    def roots_record(self, compare: bool = True) -> dict:
        m = self.m
        lo, hi = m.s_range
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            scan = jacobi.spectrum_via_roots(self.p, lo, hi, m.steps, m.grid)
        roots = [{"s": _num(r.s), "alpha": _num(r.alpha), "multiplicity": r.multiplicity}
                 for r in scan.roots]
        payload = {"roots": roots, "advisories": list(scan.advisories)}
        if compare and self.rep is not None and roots:
            vals = self.rep.values()
            checks = []
            for r in roots:
                if vals.size == 0:
                    checks.append({"route": "galerkin", "value": None, "flagged": True})
                    continue
                near = float(vals[np.argmin(np.abs(vals - r["alpha"]))])
                checks.append(_cross(r["alpha"], near, "galerkin", 1e-2, relative=True))
            payload["cross"] = checks
        return self.record("roots", "char-fn",
                           {"steps": m.steps, "s_range": [lo, hi], "grid": m.grid}, payload)

    # closed-form route --------------------------------------------------
    def identity_records(self) -> list:
        m = self.m
        out = []
        for a, b in self.cfg.euler:
            chk = identities.euler_interp(a, b, m.n_terms)
            out.append(self.record("identity", "series-vs-closed-form",
                                   {"n_terms": m.n_terms, "a": a, "b": b}, _check(chk)))
        if self.cfg.kind != "lti":
            return out
        A = _matrix(self.cfg.params["A"], self.cfg.params["m"], self.cfg.params["m"], "A")
        R = _matrix(self.cfg.params["R"], self.cfg.params["m"], self.cfg.params["m"], "R")
        chk = identities.prop2_det(A, R, m.n_terms)
        pay = _check(chk)
        if self.det is None:
            self.det = jacobi.det_identity(self.p, m.steps)
        pay["cross"] = _cross(chk.rhs, self.det, "jacobi", 1e-6)
        out.append(self.record("identity", "series-vs-closed-form",
                               {"n_terms": m.n_terms}, pay))
        chk = identities.prop2_trace(A, R, m.n_terms, m.nq)
        pay = _check(chk)
        if self.trace is None:
            self.trace = jacobi.trace_identity(self.p, m.steps)
        pay["cross"] = _cross(-chk.lhs, self.trace, "jacobi", 1e-5)
        if np.linalg.norm(A @ R - R @ A) <= 1e-10 * max(np.linalg.norm(A) * np.linalg.norm(R), 1e-300):
            pay["commutative"] = _num(identities.prop2_trace_commutative(A, R))
        out.append(self.record("identity", "series-vs-simplex-quadrature",
                               {"n_terms": m.n_terms, "nq": m.nq}, pay))
        closed = spectral.closed_spectrum_lti(A, R, 64)
        top = _top(closed.values(), 10)
        pay = {"name": "closed_spectrum", "closed_head": _vec(top)}
        if self.rep is not None:
            gal = _top(self.rep.values(), top.size)
            k = min(top.size, gal.size)
            rel = float(np.max(np.abs(gal[:k] - top[:k]) / np.abs(top[:k]))) if k else 0.0
            pay["cross"] = {"route": "galerkin", "value": _vec(gal[:k]), "gap": _num(rel),
                            "tol": 2e-2, "flagged": bool(rel > 2e-2 or k < top.size)}
        out.append(self.record("identity", "closed-spectrum", {"n_max": 64}, pay))
        return out


def _top(vals: np.ndarray, k: int) -> np.ndarray:
    return vals[np.argsort(-np.abs(vals), kind="stable")][:k]


def _check(chk) -> dict:
    return {"name": chk.name, "lhs": _num(chk.lhs), "rhs": _num(chk.rhs),
            "abs_gap": _num(chk.abs_gap)}


def _stages(run: Run, verb: str) -> list:
    if verb == "report":
        stages = [("jacobi", run.det_record), ("jacobi", run.trace_record),
                  ("galerkin", run.spectrum_record), ("galerkin-pv", run.pv_det_record),
                  ("galerkin-pv", run.pv_trace_record), ("galerkin", run.capacity_record),
                  ("char-fn", run.roots_record)]
        if run.cfg.kind == "lti" or run.cfg.euler:
            stages.append(("closed-form", run.identity_records))
        return stages
    if verb == "spectrum":
        return [("galerkin", run.spectrum_record), ("galerkin-pv", run.pv_det_record),
                ("galerkin-pv", run.pv_trace_record), ("galerkin", run.capacity_record)]
    if verb == "identity":
        if run.cfg.kind != "lti" and not run.cfg.euler:
            raise ConfigError("identity checks need an lti problem or [identity] euler pairs")
        return [("closed-form", run.identity_records)]
    if verb == "roots":
        return [("char-fn", lambda: run.roots_record(compare=False))]
    raise ConfigError(f"unknown verb {verb!r}")


def run_report(cfg: RunConfig, verb: str = "report", clock=None) -> Iterator[dict]:
    """Yield report records in order; a module error ends the stream with a diagnostic."""
    clock = clock or (lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    run = Run(cfg)
    for route, stage in _stages(run, verb):
        try:
            recs = stage()
        except (ArithmeticError, RangeError, np.linalg.LinAlgError) as exc:
            yield _diagnostic(run, route, exc, "numerical", clock)
            return
        except (InvariantBreach, CommutativityError) as exc:
            yield _diagnostic(run, route, exc, "invariant", clock)
            return
        for rec in recs if isinstance(recs, list) else [recs]:
            rec["timestamp"] = clock()
            yield rec


def _diagnostic(run: Run, route: str, exc: Exception, severity: str, clock) -> dict:
    rec = run.record("diagnostic", route, {"steps": run.m.steps, "N": run.m.N},
                     {"severity": severity, "error": type(exc).__name__, "message": str(exc)})
    rec["timestamp"] = clock()
    return rec


def exit_status(records) -> int:
    status = EXIT_OK
    for rec in records:
        if rec["kind"] == "diagnostic":
            return EXIT_NUMERICAL if rec["payload"]["severity"] == "numerical" else EXIT_INVARIANT
        if rec["payload"].get("status") == "inconclusive":
            status = EXIT_NUMERICAL
    return status


def format_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def _table_line(rec: dict) -> str:
    pay = rec["payload"]
    for key in ("value", "rhs", "slope_pos", "message"):
        if key in pay:
            val = pay[key]
            break
    else:
        val = f"{len(pay.get('roots', []))} roots" if "roots" in pay else ""
    flag = ""
    cross = pay.get("cross")
    if isinstance(cross, dict) and cross.get("flagged") or pay.get("flagged"):
        flag = "  [FLAGGED]"
    return f"{rec['kind']:<10} {rec['route']:<30} {val}{flag}"


# --------------------------------------------------------------------------
# entry point

def _selftest() -> int:
    here = Path(__file__).resolve()
    suite = next((p / "tests" / "test_acceptance.py" for p in here.parents
                  if (p / "tests" / "test_acceptance.py").is_file()), None)
    if suite is None:
        print("acceptance suite not found next to the package", file=sys.stderr)
        return EXIT_INVARIANT
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-s", str(suite)])
    return EXIT_OK if res.returncode == 0 else EXIT_INVARIANT


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="jacdet", description=__doc__.split("\n")[0])
    ap.add_argument("verb", choices=("report", "spectrum", "identity", "roots", "selftest"))
    ap.add_argument("config", nargs="?")
    ap.add_argument("--steps", type=int)
    ap.add_argument("--N", type=int, dest="N")
    ap.add_argument("--n-terms", type=int, dest="n_terms")
    ap.add_argument("--out", help="report file (default: output.report or stdout)")
    ap.add_argument("--csv", help="spectrum CSV path (default: output.spectrum_csv)")
    ap.add_argument("--table", action="store_true", help="human-readable summary on stderr")
    args = ap.parse_args(argv)

    if args.verb == "selftest":
        return _selftest()
    if not args.config:
        ap.error(f"{args.verb} needs a config file")
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, {"steps": args.steps, "N": args.N, "n_terms": args.n_terms})
        if args.csv:
            cfg = replace(cfg, spectrum_csv=args.csv)
        records = run_report(cfg, args.verb)
        target = args.out or cfg.report
        fh = open(target, "w") if target else sys.stdout
        seen = []
        try:
            for rec in records:
                fh.write(format_record(rec) + "\n")
                fh.flush()
                seen.append(rec)
                if args.table:
                    print(_table_line(rec), file=sys.stderr)
        finally:
            if fh is not sys.stdout:
                fh.close()
        return exit_status(seen)
    except BrokenPipeError:
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantBreach as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
