"""Command-line front end: one subcommand per calculation, optional sweeps.

Output is CSV (default) or JSON lines. Every data row is an
:class:`OutputRecord`; CSV columns are the subcommand inputs in the order
listed by ``--help``, then the outputs, then ``method``, ``abs_error_est``,
``wall_time`` (only with ``--timings``) and ``error``.

Exit status: 0 success, 1 failed self-test, 2 domain error, 3 convergence
failure, 64 usage error. A sweep writes every point and exits with the status
of its first failing point.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__, npiece, qft, specfun, thermo, twopiece
from .errors import CasimirError, ConvergenceError, DomainError, SpectrumError
from .settings import QuadratureSettings

EXIT_OK, EXIT_SELFTEST, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_USAGE = 0, 1, 2, 3, 64


@dataclass
class OutputRecord:
    """One evaluated point. Key order is the JSON-lines schema."""

    command: str
    inputs: dict[str, Any]
    outputs: dict[str, Any] = field(default_factory=dict)
    method: str | None = None
    abs_error_est: float | None = None
    wall_time: float | None = None
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), allow_nan=True)

    @classmethod
    def from_json(cls, line: str) -> "OutputRecord":
        return cls(**json.loads(line))


@dataclass(frozen=True)
class SweepSpec:
    name: str
    values: tuple[float, ...]

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """``name=v1,v2,...`` or ``name=start:stop:count[:log]``."""
        name, sep, rest = text.partition("=")
        if not sep or not name or not rest:
            raise ValueError(f"sweep must look like name=values, got {text!r}")
        if ":" in rest:
            parts = rest.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("lin", "log")):
                raise ValueError(f"range sweep must be start:stop:count[:lin|log], got {rest!r}")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError("sweep count must be >= 1")
            if count > 1 and not start < stop:
                raise ValueError("sweep range needs start < stop")
            if len(parts) == 4 and parts[3] == "log":
                if start <= 0:
                    raise ValueError("log sweep needs a positive start")
                vals = np.geomspace(start, stop, count)
            else:
                vals = np.linspace(start, stop, count)
            return cls(name, tuple(float(v) for v in vals))
        vals = tuple(float(v) for v in rest.split(","))
        return cls(name, vals)


# -- subcommand implementations -----------------------------------------------------
# each takes the parameter dict and shared settings, returns (outputs, method, error)

Result = tuple[dict, str | None, float | None]


def _quad(ns) -> QuadratureSettings:
    return QuadratureSettings(rel_tol=ns.rel_tol, abs_tol=ns.abs_tol)


def _twopiece(p, ns) -> Result:
    cfg = twopiece.TwoPieceString(p["x"], p["s"], p["L"])
    m = p["scheme"]
    if m == "contour":
        est = twopiece.energy_contour(cfg, _quad(ns))
    elif m in ("zeta", "cutoff"):
        spec = twopiece.find_spectrum(cfg, 4.0 * math.pi / cfg.L_I)
        est = (twopiece.energy_zeta if m == "zeta" else twopiece.energy_cutoff)(cfg, spec)
    elif m == "cutoff-fit":
        est = twopiece.energy_cutoff_extrapolated(cfg)
    elif m == "closed-x0":
        if cfg.x != 0.0:
            raise DomainError("closed-x0 applies to x = 0 only")
        return {"value": twopiece.energy_x0_closed(cfg.s, cfg.L)}, "closed_form", 0.0
    else:  # cutoff-raw
        alpha = p["alpha"]
        spec = twopiece.find_spectrum(cfg, 40.0 / alpha)
        value = twopiece.energy_cutoff_raw(cfg, spec, twopiece.CutoffSettings(alpha, 10**7))
        return {"value": value}, "cutoff", None
    return {"value": est.value}, est.method, est.abs_error_est


def _twopiece_thermal(p, ns) -> Result:
    cfg = twopiece.TwoPieceString(p["x"], p["s"], p["L"])
    if p["scheme"] == "high-T":
        return {"value": twopiece.energy_contour_T_high(cfg, p["T"])}, "closed_form", None
    est = twopiece.energy_contour_T(cfg, p["T"])
    return {"value": est.value}, est.method, est.abs_error_est


def _npiece(p, ns) -> Result:
    cfg = npiece.NPieceString(int(p["N"]), p["x"], p["L"])
    if p["scheme"] == "closed-x0":
        if cfg.x != 0.0:
            raise DomainError("closed-x0 applies to x = 0 only")
        value, method, err = npiece.energy_closed_x0(cfg.N, cfg.L), "closed_form", 0.0
    else:
        est = npiece.energy_zero_T(cfg, _quad(ns))
        value, method, err = est.value, est.method, est.abs_error_est
    f = value / npiece.energy_closed_x0(cfg.N, cfg.L) if cfg.N >= 2 else None
    return {"value": value, "f_N": f}, method, err


def _npiece_thermal(p, ns) -> Result:
    cfg = npiece.NPieceString(int(p["N"]), p["x"], p["L"])
    est = npiece.energy_finite_T(cfg, p["T"])
    return {"value": est.value}, est.method, est.abs_error_est


def _scaling(p, ns) -> Result:
    N, x = int(p["N"]), p["x"]
    f = npiece.scaling_f(N, x, _quad(ns))
    return {"f_N": f, "fit_residual": f - (1.0 - math.sqrt(x)) ** 2.5}, "integral", None


def _beta(p) -> float:
    if p["beta"] is not None:
        return p["beta"]
    if p["beta_ratio"] is None:
        raise DomainError("give --beta or --beta-ratio")
    return p["beta_ratio"] * thermo.hagedorn_beta(int(p["s"]), p["T_II"])


def _thermo(p, ns) -> Result:
    s, T = int(p["s"]), p["T_II"]
    beta = _beta(p)
    if p["pointmass"]:
        return {"beta_used": beta, "F": thermo.free_energy_pointmass(s, T, beta, _quad(ns))}, "integral", None
    params = thermo.QuantizedStringParams(s, T, beta)
    r = thermo.free_energy(params, _quad(ns))
    out = {"beta_used": beta, "beta_c": thermo.hagedorn_beta(s, T), "F": r.value,
           "casimir_term": r.casimir_term, "integral_term": r.integral_term}
    if p["derived"]:
        out["U"], out["S"] = thermo.thermodynamics(params)
    err = r.quad_diagnostics.get("rel_error")
    return out, "integral", None if err is None else abs(err * r.integral_term)


def _hagedorn(p, ns) -> Result:
    s, T = int(p["s"]), p["T_II"]
    b = thermo.hagedorn_beta(s, T)
    return {"beta_c": b, "T_c": 1.0 / b, "divergence_beta": thermo.divergence_beta(s, T)}, "closed_form", 0.0


def _qft_u(p, ns) -> Result:
    if p["mc"]:
        mean, se = qft.energy_density_mc(p["z"], p["samples"], ns.seed)
        return {"u": mean}, "monte_carlo", se
    est = qft.energy_density_estimate(p["z"], _quad(ns))
    return {"u": est.value}, est.method, est.abs_error_est


def _qft_q(p, ns) -> Result:
    k = p["kappa"]
    d = qft.q_minus_two_kappa(k)
    return {"Q": 2 * k + d, "Q_minus_2kappa": d}, "closed_form", None


@dataclass(frozen=True)
class Command:
    run: Callable[[dict, argparse.Namespace], Result]
    params: tuple[str, ...]
    outputs: tuple[str, ...]
    help: str
    required: tuple[str, ...] = ()


COMMANDS: dict[str, Command] = {
    "twopiece": Command(_twopiece, ("x", "s", "L", "scheme", "alpha"), ("value",),
                        "zero-temperature energy of the two-piece string", ("x", "s")),
    "twopiece-thermal": Command(_twopiece_thermal, ("x", "s", "L", "T", "scheme"), ("value",),
                                "finite-temperature two-piece energy", ("x", "s", "T")),
    "npiece": Command(_npiece, ("N", "x", "L", "scheme"), ("value", "f_N"),
                      "zero-temperature energy of the 2N-piece string", ("N", "x")),
    "npiece-thermal": Command(_npiece_thermal, ("N", "x", "L", "T"), ("value",),
                              "finite-temperature 2N-piece energy", ("N", "x", "T")),
    "scaling": Command(_scaling, ("N", "x"), ("f_N", "fit_residual"),
                       "scaling function f_N(x) and its deviation from (1-sqrt x)^(5/2)", ("N", "x")),
    "thermo": Command(_thermo, ("s", "T_II", "beta", "beta_ratio", "pointmass", "derived"),
                      ("beta_used", "beta_c", "F", "casimir_term", "integral_term", "U", "S"),
                      "free energy of the quantized two-piece string", ("s",)),
    "hagedorn": Command(_hagedorn, ("s", "T_II"), ("beta_c", "T_c", "divergence_beta"),
                        "Hagedorn inverse temperature", ("s",)),
    "qft-u": Command(_qft_u, ("z", "mc", "samples"), ("u",), "plateau energy density u(z)", ("z",)),
    "qft-q": Command(_qft_q, ("kappa",), ("Q", "Q_minus_2kappa"), "matching denominator Q(kappa)", ("kappa",)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    d = QuadratureSettings()
    p.add_argument("--out", help="write to PATH instead of stdout")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--rel-tol", type=float, default=d.rel_tol)
    p.add_argument("--abs-tol", type=float, default=d.abs_tol)
    p.add_argument("--seed", type=int, default=0, help="Monte-Carlo oracle seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads, 0 = auto (env CASIMIR_THREADS)")
    p.add_argument("--config", help="key=value file overriding defaults; flags win")
    p.add_argument("--timings", action="store_true", help="add wall_time to each record")
    p.add_argument("--sweep", action="append", default=[], metavar="NAME=SPEC",
                   help="name=v1,v2,... or name=start:stop:count[:log]; repeat for a product grid")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="casimir", description="Casimir energies of piecewise uniform strings.")
    parser.add_argument("--version", action="version", version=f"casimir {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name):
        sp = sub.add_parser(name, help=COMMANDS[name].help)
        _common(sp)
        return sp

    sp = add("twopiece")
    sp.add_argument("--x", type=float, help="tension ratio in [0, 1]")
    sp.add_argument("--s", type=float, help="length ratio L_II/L_I")
    sp.add_argument("--L", type=float, default=math.pi)
    sp.add_argument("--method", dest="scheme", default="contour",
                    choices=("contour", "zeta", "cutoff", "cutoff-fit", "cutoff-raw", "closed-x0"))
    sp.add_argument("--alpha", type=float, default=0.01, help="cutoff for --method cutoff-raw")

    sp = add("twopiece-thermal")
    sp.add_argument("--x", type=float)
    sp.add_argument("--s", type=float)
    sp.add_argument("--L", type=float, default=math.pi)
    sp.add_argument("--T", type=float)
    sp.add_argument("--method", dest="scheme", choices=("matsubara", "high-T"), default="matsubara")

    for name in ("npiece", "npiece-thermal"):
        sp = add(name)
        sp.add_argument("--N", type=int)
        sp.add_argument("--x", type=float)
        sp.add_argument("--L", type=float, default=math.pi)
        if name == "npiece":
            sp.add_argument("--method", dest="scheme", choices=("integral", "closed-x0"), default="integral")
        else:
            sp.add_argument("--T", type=float)

    sp = add("scaling")
    sp.add_argument("--N", type=int)
    sp.add_argument("--x", type=float)

    sp = add("thermo")
    sp.add_argument("--s", type=int)
    sp.add_argument("--T-II", dest="T_II", type=float, default=1.0)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--beta-ratio", type=float, help="beta in units of the Hagedorn value")
    sp.add_argument("--pointmass", action="store_true", help="point-mass limit of the free energy")
    sp.add_argument("--derived", action="store_true", help="also report U and S")

    sp = add("hagedorn")
    sp.add_argument("--s", type=int)
    sp.add_argument("--T-II", dest="T_II", type=float, default=1.0)

    sp = add("qft-u")
    sp.add_argument("--z", type=float)
    sp.add_argument("--mc", action="store_true", help="Monte-Carlo estimate over the full momentum volume")
    sp.add_argument("--samples", type=int, default=200_000)

    sp = add("qft-q")
    sp.add_argument("--kappa", type=float)

    sp = sub.add_parser("specfun", help="special-function kernel")
    _common(sp)
    sp.add_argument("action", choices=("selftest",))
    return parser


def _read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{n}: expected key=value")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        try:
            cfg = _read_config(ns.config)
        except (OSError, ValueError) as exc:
            parser.error(f"config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"config: unknown keys {sorted(unknown)}")
        # string defaults go through each option's type conversion on re-parse
        sub.set_defaults(**cfg)
        ns = parser.parse_args(argv)
    return ns


def _threads(ns) -> int:
    n = ns.threads
    if n is None:
        env = os.environ.get("CASIMIR_THREADS")
        n = int(env) if env else 0
    return n if n > 0 else (os.cpu_count() or 1)


def _error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConvergenceError, SpectrumError, ArithmeticError)):
        return EXIT_CONVERGENCE
    return EXIT_DOMAIN


def _evaluate(name: str, params: dict, ns) -> tuple[OutputRecord, BaseException | None]:
    cmd = COMMANDS[name]
    t0 = time.perf_counter()
    rec = OutputRecord(command=name, inputs=dict(params))
    exc = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            outputs, method, err = cmd.run(params, ns)
        rec.outputs, rec.method, rec.abs_error_est = outputs, method, err
    except (CasimirError, ValueError, ArithmeticError) as e:
        exc = e
        rec.error = _error_text(e)
    if ns.timings:
        rec.wall_time = time.perf_counter() - t0
    return rec, exc


def _grid(name: str, ns, sweeps: list[SweepSpec]) -> list[dict]:
    cmd = COMMANDS[name]
    base = {k: getattr(ns, k) for k in cmd.params}
    swept = set()
    for sw in sweeps:
        if sw.name not in base:
            raise ValueError(f"{name} has no parameter {sw.name!r} (choose from {', '.join(cmd.params)})")
        if isinstance(base[sw.name], (bool, str)) or sw.name in swept:
            raise ValueError(f"parameter {sw.name!r} cannot be swept here")
        swept.add(sw.name)
    missing = [k for k in cmd.required if base[k] is None and k not in swept]
    if missing:
        raise ValueError(f"{name}: missing --{', --'.join(m.replace('_', '-') for m in missing)}")
    integral = {k for k, v in base.items() if isinstance(v, int) and not isinstance(v, bool)}
    integral |= {"N"} if "N" in base else set()
    integral |= {"s"} if name in ("thermo", "hagedorn") else set()
    points = []
    for combo in itertools.product(*(sw.values for sw in sweeps)):
        p = dict(base)
        for sw, v in zip(sweeps, combo):
            if sw.name in integral:
                if not float(v).is_integer():
                    raise ValueError(f"parameter {sw.name!r} takes integers, got {v!r}")
                v = int(v)
            p[sw.name] = v
        points.append(p)
    return points


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(fh, name: str, records: list[OutputRecord], ns):
    cmd = COMMANDS[name]
    fh.write(f"# casimir {__version__} {name}\n")
    fh.write(f"# rel_tol={ns.rel_tol!r} abs_tol={ns.abs_tol!r} seed={ns.seed}\n")
    cols = list(cmd.params) + list(cmd.outputs) + ["method", "abs_error_est"]
    if ns.timings:
        cols.append("wall_time")
    cols.append("error")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = {**r.inputs, **r.outputs, "method": r.method, "abs_error_est": r.abs_error_est,
               "wall_time": r.wall_time, "error": r.error}
        w.writerow([_cell(row.get(c)) for c in cols])


def _selftest(ns) -> int:
    results = specfun.selftest()
    buf = io.StringIO()
    if ns.format == "jsonl":
        for name, ok, detail in results:
            rec = OutputRecord("specfun", {"check": name}, {"passed": ok, "detail": detail})
            buf.write(rec.to_json() + "\n")
    else:
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# casimir {__version__} specfun selftest\n")
        w.writerow(["check", "passed", "detail"])
        for row in results:
            w.writerow(row)
    _emit(buf.getvalue(), ns)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_SELFTEST


def _emit(text: str, ns):
    if ns.out:
        with open(ns.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def run(argv: list[str] | None = None) -> int:
    """Execute one command line; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = _parse(argv)
    except SystemExit as e:  # argparse help/version/usage
        return int(e.code or 0)
    if ns.command == "specfun":
        return _selftest(ns)
    try:
        _quad(ns)
        sweeps = [SweepSpec.parse(s) for s in ns.sweep]
        points = _grid(ns.command, ns, sweeps)
    except ValueError as exc:
        print(f"casimir: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    workers = min(_threads(ns), len(points))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda p: _evaluate(ns.command, p, ns), points))
    else:
        results = [_evaluate(ns.command, p, ns) for p in points]

    buf = io.StringIO()
    records = [r for r, _ in results]
    if ns.format == "jsonl":
        for r in records:
            buf.write(r.to_json() + "\n")
    else:
        _write_csv(buf, ns.command, records, ns)
    _emit(buf.getvalue(), ns)

    for rec, exc in results:
        if exc is not None:
            print(f"casimir: {rec.error}", file=sys.stderr)
            return _exit_code(exc)
    return EXIT_OK


def main() -> int:
    return run()
