"""Command-line parameter sweeps writing CSV tables.

Every subcommand evaluates one observable on a one- or two-axis grid and
writes ``axis1,axis2,value[,stderr][,extra...],engine_tag`` rows after a
``# key = value`` header.  The header carries the exact argv, so a table
can be regenerated with :func:`rerun_from_header`.

Exit codes: 0 success, 2 invalid specification, 3 numerical failure
(failed cells are kept as sentinel rows) or a failed ``--check``.
"""

from __future__ import annotations

import argparse
import ast
import csv
import datetime as _dt
import io
import json
import logging
import math
import operator
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import closedform as cf
from ._constants import TOL
from .detection import (DetectionSetup, Protocol, basis_state, delta_p_det, first_detection,
                        phase_superposition)
from .exceptions import ChiralWalkError, InvalidSpec
from .model import ModelParams, classify_phase_factors, matching_curves
from .montecarlo import DEFAULT_SHOTS, sample
from .spectra import (first_detection_spectral, locate_unit_eigenvalues, max_abs_eigenvalue,
                      null_measurement)

log = logging.getLogger(__name__)

AXIS_NAMES = ("gtau", "alpha", "phi", "N")
OBSERVABLES = ("meanN", "pDet", "deltaPDet", "maxAbsEigenvalue", "survivalSN", "distinctCount")
ENGINES = ("exact", "closedform", "montecarlo", "spectral")

COMPATIBLE = {
    "meanN": {"exact", "closedform", "montecarlo"},
    "pDet": {"exact", "montecarlo"},
    "deltaPDet": {"exact", "montecarlo"},
    "maxAbsEigenvalue": {"spectral"},
    "survivalSN": {"exact", "spectral", "montecarlo"},
    "distinctCount": {"exact"},
}

UNDEFINED = "undefined"
FAILED = "failed"

DEFAULT_MAP_STEPS = 201
DEFAULT_LINE_STEPS = 400

CHECK_FRACTION = 0.05
CHECK_TOL = {"closedform": 1e-9, "spectral": 1e-8, "exact": 1e-9}
CHECK_SIGMAS = 5.0


# -- number and grid parsing --------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos}


def parse_number(text: str) -> float:
    """Evaluate a numeric literal or a small arithmetic expression such as ``2*pi/sqrt(3)``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression: {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise InvalidSpec(f"cannot parse number {text!r}: {exc}") from None


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise InvalidSpec(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.steps < 2:
            raise InvalidSpec(f"axis {self.name} needs at least 2 steps")
        if self.name == "N" and (self.min < 1 or self.min != int(self.min) or self.max != int(self.max)):
            raise InvalidSpec("N axis bounds must be positive integers")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        parts = text.split(":")
        if len(parts) != 4:
            raise InvalidSpec(f"grid must look like NAME:MIN:MAX:STEPS, got {text!r}")
        name, lo, hi, steps = parts
        try:
            n = int(steps)
        except ValueError:
            raise InvalidSpec(f"steps must be an integer in {text!r}") from None
        return cls(name, parse_number(lo), parse_number(hi), n)

    def values(self) -> List[float]:
        """Inclusive, uniformly spaced; integer-rounded (and deduplicated) for N."""
        v = np.linspace(self.min, self.max, self.steps)
        if self.name == "N":
            return [int(x) for x in np.unique(np.rint(v).astype(int))]
        return [float(x) for x in v]

    def __str__(self):
        return f"{self.name}:{self.min!r}:{self.max!r}:{self.steps}"


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Optional[Axis]
    fixed: Dict[str, float]
    protocol: Protocol
    observable: str
    engine: str

    def __post_init__(self):
        if self.observable not in OBSERVABLES:
            raise InvalidSpec(f"unknown observable {self.observable!r}")
        if self.engine not in ENGINES:
            raise InvalidSpec(f"unknown engine {self.engine!r}")
        if self.engine not in COMPATIBLE[self.observable]:
            raise InvalidSpec(f"engine {self.engine!r} cannot compute {self.observable!r}; "
                              f"choose from {sorted(COMPATIBLE[self.observable])}")
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise InvalidSpec("the two grid axes must name distinct parameters")
        if self.engine == "closedform":
            if "alpha" in self.axis_names or self.fixed.get("alpha", 0.0) != 0.0:
                raise InvalidSpec("the closed-form engine is valid at alpha = 0 only")
            if "phi" in self.axis_names:
                raise InvalidSpec("the closed-form engine covers the return problem only")

    @property
    def axes(self) -> List[Axis]:
        return [self.axis1] if self.axis2 is None else [self.axis1, self.axis2]

    @property
    def axis_names(self) -> List[str]:
        return [a.name for a in self.axes]

    def cells(self) -> List[Tuple[float, Optional[float]]]:
        v1 = self.axis1.values()
        if self.axis2 is None:
            return [(a, None) for a in v1]
        v2 = self.axis2.values()
        return [(a, b) for a in v1 for b in v2]

    def point(self, a1, a2) -> Dict[str, float]:
        p = dict(self.fixed)
        p[self.axis1.name] = a1
        if self.axis2 is not None:
            p[self.axis2.name] = a2
        return p

    def echo(self) -> dict:
        return {
            "axis1": str(self.axis1),
            "axis2": None if self.axis2 is None else str(self.axis2),
            "fixed": self.fixed,
            "protocol": self.protocol.value,
            "observable": self.observable,
            "engine": self.engine,
        }


# -- results ------------------------------------------------------------------


@dataclass
class Cell:
    value: object
    tag: str
    stderr: Optional[float] = None
    extra: Tuple = ()


@dataclass
class ResultTable:
    header: Dict[str, object]
    columns: List[str]
    rows: List[list] = field(default_factory=list)
    failed: int = 0
    check_failures: int = 0

    def data_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()

    def header_text(self) -> str:
        lines = []
        for k, v in self.header.items():
            text = v if isinstance(v, str) else json.dumps(v, sort_keys=True)
            lines.append(f"# {k} = {text}\n")
        return "".join(lines)

    def to_csv(self) -> str:
        return self.header_text() + self.data_text()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def read_table(text: str) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return header, rows


# -- per-cell evaluation ------------------------------------------------------


def _params(pt: Dict[str, float]) -> ModelParams:
    return ModelParams.from_gtau(pt["gtau"], pt.get("alpha", 0.0))


def _initial(pt: Dict[str, float], use_phi: bool) -> np.ndarray:
    return phase_superposition(pt["phi"]) if use_phi else basis_state(0)


@lru_cache(maxsize=4096)
def _exact_distribution(gtau, alpha, protocol, phi, N):
    params = ModelParams.from_gtau(gtau, alpha)
    init = basis_state(0) if phi is None else phase_superposition(phi)
    return first_detection(DetectionSetup(params, protocol, init, 0, N))


def _prefix(dist, N):
    F = dist.F[:N]
    total = float(F.sum())
    mean = None if total <= TOL.undefined_mass else float(np.dot(np.arange(1, N + 1), F) / total)
    return mean, min(total, 1.0), float(dist.survival[N - 1])


class Evaluator:
    """Maps a grid point to a :class:`Cell` for one sweep specification."""

    def __init__(self, spec: SweepSpec, shots: int, seed: int, n_max: int, use_phi: bool):
        self.spec = spec
        self.shots = shots
        self.seed = seed
        self.n_max = n_max
        self.use_phi = use_phi

    def __call__(self, index: int, a1, a2) -> Cell:
        pt = self.spec.point(a1, a2)
        try:
            return self.evaluate(pt, self.spec.engine, index)
        except (ChiralWalkError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("cell %s failed: %s", pt, exc)
            return Cell(FAILED, f"error:{type(exc).__name__}")

    def _N(self, pt) -> int:
        return int(pt.get("N", 20))

    def evaluate(self, pt, engine: str, index: int = 0) -> Cell:
        obs = self.spec.observable
        protocol = self.spec.protocol
        N = self._N(pt)
        phi = pt["phi"] if self.use_phi else None
        if obs == "distinctCount":
            cls = classify_phase_factors(_params(pt), pt.get("tol", TOL.phase_match))
            return Cell(cls.distinct_count, "exact")
        if obs == "maxAbsEigenvalue":
            return Cell(max_abs_eigenvalue(_params(pt), protocol), "spectral")
        if obs == "deltaPDet":
            if engine == "montecarlo":
                vals, errs = [], []
                for site in (1, 2):
                    setup = DetectionSetup(_params(pt), protocol, basis_state(site), 0, N)
                    ens = sample(setup, self.shots, self._seed(index, site))
                    p = ens.sample_p_det
                    vals.append(p)
                    errs.append(p * (1 - p) / self.shots)
                return Cell(vals[0] - vals[1], "montecarlo", math.sqrt(sum(errs)))
            return Cell(delta_p_det(_params(pt), protocol, N), "exact")
        if engine == "montecarlo":
            setup = DetectionSetup(_params(pt), protocol, _initial(pt, self.use_phi), 0, N)
            ens = sample(setup, self.shots, self._seed(index, 0))
            if obs == "meanN":
                m = ens.sample_mean_n
                return Cell(UNDEFINED if m is None else m, "montecarlo", ens.sample_mean_stderr)
            p = ens.sample_p_det
            err = math.sqrt(p * (1 - p) / self.shots)
            return Cell(p if obs == "pDet" else 1.0 - p, "montecarlo", err)
        if engine == "closedform":
            if obs == "meanN":
                return Cell(cf.mean_finite(protocol, pt["gtau"], N), "closedform")
            raise InvalidSpec(f"closed-form engine cannot compute {obs}")
        if obs == "survivalSN" and engine == "spectral":
            value, path = null_measurement(_params(pt), _initial(pt, self.use_phi), protocol, 0, N, "spectral")
            return Cell(value, path)
        if engine == "spectral-power":
            setup = DetectionSetup(_params(pt), protocol, _initial(pt, self.use_phi), 0, N)
            dist = first_detection_spectral(setup)
            return self._from_moments(obs, dist.mean_n, dist.p_det, float(dist.survival[-1]), "spectral")
        dist = _exact_distribution(pt["gtau"], pt.get("alpha", 0.0), protocol, phi, max(self.n_max, N))
        mean, pdet, surv = _prefix(dist, N)
        return self._from_moments(obs, mean, pdet, surv, "exact")

    @staticmethod
    def _from_moments(obs, mean, pdet, surv, tag) -> Cell:
        if obs == "meanN":
            return Cell(UNDEFINED if mean is None else mean, tag)
        if obs == "pDet":
            return Cell(pdet, tag)
        return Cell(surv, tag)

    def _seed(self, index: int, salt: int) -> int:
        # distinct, reproducible stream family per cell
        return int(np.random.SeedSequence([self.seed, index, salt]).generate_state(1, np.uint64)[0])


def _independent_engine(spec: SweepSpec, cell: Cell) -> Optional[str]:
    if cell.tag == "closedform":
        return "exact"
    if cell.tag == "spectral" and spec.observable == "survivalSN":
        return "exact"
    if cell.tag == "exact" and spec.observable in ("meanN", "pDet", "survivalSN"):
        return "spectral-power"
    if cell.tag == "montecarlo" and spec.observable in ("meanN", "pDet", "survivalSN"):
        return "exact"
    return None


def _agree(spec, cell: Cell, other: Cell) -> bool:
    a, b = cell.value, other.value
    if a == UNDEFINED or b == UNDEFINED:
        return a == b
    if cell.tag == "montecarlo":
        err = cell.stderr if cell.stderr and math.isfinite(cell.stderr) else 0.0
        return abs(a - b) <= CHECK_SIGMAS * err + 1e-12
    tol = CHECK_TOL.get(cell.tag, 1e-9)
    return abs(a - b) <= tol * max(1.0, abs(b))


def run_sweep(spec: SweepSpec, header: Dict[str, object], shots: int = DEFAULT_SHOTS, seed: int = 0,
              jobs: int = 1, check: bool = False) -> ResultTable:
    cells = spec.cells()
    n_max = max(spec.axis1.values()) if spec.axis1.name == "N" else int(spec.fixed.get("N", 20))
    if spec.axis2 is not None and spec.axis2.name == "N":
        n_max = max(spec.axis2.values())
    use_phi = "phi" in spec.axis_names or "phi" in spec.fixed
    ev = Evaluator(spec, shots, seed, int(n_max), use_phi)
    results: List[Optional[Cell]] = [None] * len(cells)

    def work(i):
        results[i] = ev(i, *cells[i])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, range(len(cells))))
    else:
        for i in range(len(cells)):
            work(i)

    with_stderr = spec.engine == "montecarlo"
    columns = ["axis1", "axis2", "value"] + (["stderr"] if with_stderr else []) + ["engine_tag"]
    table = ResultTable(header=dict(header), columns=columns)
    for (a1, a2), c in zip(cells, results):
        row = [a1, a2, c.value] + ([c.stderr] if with_stderr else []) + [c.tag]
        table.rows.append(row)
        if c.value == FAILED:
            table.failed += 1

    if check:
        rng = np.random.default_rng(seed)
        k = max(1, math.ceil(CHECK_FRACTION * len(cells)))
        picks = sorted(rng.choice(len(cells), size=min(k, len(cells)), replace=False).tolist())
        checked = 0
        for i in picks:
            c = results[i]
            other_engine = _independent_engine(spec, c)
            if other_engine is None or c.value == FAILED:
                continue
            try:
                other = ev.evaluate(spec.point(*cells[i]), other_engine, i)
            except ChiralWalkError as exc:
                log.info("check skipped at %s: %s", cells[i], exc)
                continue
            checked += 1
            if not _agree(spec, c, other):
                table.check_failures += 1
                log.error("check failed at %s: %s (%s) vs %s (%s)", cells[i], c.value, c.tag,
                          other.value, other_engine)
        table.header["check"] = {"sampled": len(picks), "compared": checked, "failures": table.check_failures}
    return table


# -- argument handling ----------------------------------------------------------


def _common(p: argparse.ArgumentParser, engines=ENGINES, default_engine="exact"):
    p.add_argument("--alpha", type=parse_number, default=None, help="flux phase (rad)")
    p.add_argument("--gtau", type=parse_number, default=None, help="gamma*tau")
    p.add_argument("--phi", type=parse_number, default=None, help="initial-state phase (rad)")
    p.add_argument("--N", type=int, default=None, help="number of measurements")
    p.add_argument("--protocol", choices=["onsite", "tracking"], default="onsite")
    p.add_argument("--engine", choices=list(engines), default=default_engine)
    p.add_argument("--grid", action="append", default=[], metavar="A:MIN:MAX:STEPS",
                   help="sweep axis (repeatable, at most twice)")
    p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=TOL.phase_match)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--json", dest="sidecar", action="store_true", help="also write PATH.json metadata")
    p.add_argument("--check", action="store_true", help="cross-validate a 5%% subsample")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


PATHS = {
    # return-time scans through the phase diagram
    "I": ("gtau:0:2*pi:{n}", {"alpha": 0.0}),
    "II": ("gtau:0:2*pi:{n}", {"alpha": 0.5}),
    "III": ("alpha:0:pi/2:{n}", {"gtau": 3 * math.pi / math.sqrt(3)}),
    "IV": ("alpha:0:pi/2:{n}", {"gtau": 2 * math.pi / math.sqrt(3)}),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralwalk", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase-diagram", help="distinct phase-factor count on an (alpha, gtau) grid")
    _common(p, engines=["exact"])
    p.add_argument("--overlay", type=int, default=0, metavar="BRANCHES",
                   help="append rows sampling the analytic matching curves, n = 1..BRANCHES")

    p = sub.add_parser("return-time", help="mean return time <n(N)>")
    _common(p, engines=["exact", "closedform", "montecarlo"])
    p.add_argument("--path", choices=sorted(PATHS), default=None, help="preset scan I-IV")

    p = sub.add_parser("detection-map", help="total detection probability P_det(N)")
    _common(p, engines=["exact", "montecarlo"])

    p = sub.add_parser("broadening", help="exact vs finite-N closed form vs broadening approximation")
    _common(p, engines=["exact"])
    p.add_argument("--Ns", default="20,100", help="comma-separated N values")

    p = sub.add_parser("spectra", help="largest survival-operator eigenvalue modulus")
    _common(p, engines=["spectral"], default_engine="spectral")
    p.add_argument("--locate", action="store_true",
                   help="append rows for gtau where max|lambda| reaches 1 - 1e-6 (gtau axis only)")

    p = sub.add_parser("null-decay", help="null-measurement probability S_N")
    _common(p, engines=["exact", "spectral", "montecarlo"], default_engine="spectral")

    p = sub.add_parser("crossover", help="<n(N)> versus N (and optionally gtau)")
    _common(p, engines=["exact", "montecarlo"])

    p = sub.add_parser("chiral", help="P_det(from |1>) - P_det(from |2>)")
    _common(p, engines=["exact", "montecarlo"])

    p = sub.add_parser("montecarlo", help="shot-sampled observables")
    _common(p, engines=["montecarlo"], default_engine="montecarlo")
    p.add_argument("--observable", choices=["meanN", "pDet", "survivalSN"], default="meanN")
    return parser


COMMAND_OBSERVABLE = {
    "phase-diagram": "distinctCount",
    "return-time": "meanN",
    "detection-map": "pDet",
    "broadening": "meanN",
    "spectra": "maxAbsEigenvalue",
    "null-decay": "survivalSN",
    "crossover": "meanN",
    "chiral": "deltaPDet",
}

DEFAULT_GRIDS = {
    "phase-diagram": ["alpha:-pi:pi:{m}", "gtau:0:2*pi:{m}"],
    "return-time": ["gtau:0:2*pi:{n}"],
    "detection-map": ["gtau:0:2*pi:{m}", "phi:0:2*pi:{m}"],
    "broadening": ["gtau:2*pi/3-0.3:2*pi/3+0.3:{n}"],
    "spectra": ["gtau:0:2*pi:{n}"],
    "null-decay": ["N:1:200:200"],
    "crossover": ["N:1:5000:{n}"],
    "chiral": ["gtau:0:2*pi:{m}", "alpha:-pi:pi:{m}"],
    "montecarlo": ["gtau:0:2*pi:41"],
}

DEFAULT_N = {"detection-map": 10, "chiral": 10}


def spec_from_args(args) -> SweepSpec:
    grids = list(args.grid)
    fixed: Dict[str, float] = {}
    if getattr(args, "path", None):
        template, preset = PATHS[args.path]
        if not grids:
            grids = [template.format(n=DEFAULT_LINE_STEPS)]
        fixed.update(preset)
    if not grids:
        grids = [g.format(n=DEFAULT_LINE_STEPS, m=DEFAULT_MAP_STEPS) for g in DEFAULT_GRIDS[args.command]]
    if len(grids) > 2:
        raise InvalidSpec("at most two --grid axes are allowed")
    axes = [Axis.parse(g) for g in grids]
    names = [a.name for a in axes]

    for name in ("alpha", "gtau", "phi"):
        val = getattr(args, name)
        if val is not None and name not in names:
            fixed[name] = float(val)
    if args.N is not None and "N" not in names:
        fixed["N"] = int(args.N)
    if "alpha" not in names:
        fixed.setdefault("alpha", 0.0)
    if "gtau" not in names and "gtau" not in fixed:
        raise InvalidSpec("--gtau is required when gtau is not a grid axis")
    if "N" not in names:
        fixed.setdefault("N", DEFAULT_N.get(args.command, 20))
    if args.command == "detection-map" and "phi" not in names and "alpha" not in names:
        raise InvalidSpec("detection-map needs a phi or alpha axis")
    if args.command == "detection-map" and "alpha" in names:
        fixed.pop("phi", None)
    if args.command in ("crossover",) and "N" not in names:
        raise InvalidSpec("crossover needs an N axis")
    if args.command == "phase-diagram":
        fixed["tol"] = float(args.tol)

    observable = args.observable if args.command == "montecarlo" else COMMAND_OBSERVABLE[args.command]
    if args.command == "phase-diagram" and set(names) - {"alpha", "gtau"}:
        raise InvalidSpec("phase-diagram axes must be alpha and gtau")
    return SweepSpec(axes[0], axes[1] if len(axes) > 1 else None, fixed,
                     Protocol.parse(args.protocol), observable, args.engine)


def _header(args, argv, spec: SweepSpec) -> Dict[str, object]:
    return {
        "command": args.command,
        "argv": list(argv),
        "spec": spec.echo(),
        "seed": args.seed,
        "shots": args.shots,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "columns": "axis1,axis2,value[,stderr][,extra],engine_tag",
    }


def _broadening(args, spec: SweepSpec, header) -> ResultTable:
    if spec.fixed.get("alpha", 0.0) != 0.0 or "alpha" in spec.axis_names:
        raise InvalidSpec("broadening is defined at alpha = 0")
    if spec.axis_names != ["gtau"]:
        raise InvalidSpec("broadening takes a single gtau axis; N values come from --Ns")
    try:
        Ns = [int(x) for x in str(args.Ns).split(",") if x.strip()]
    except ValueError:
        raise InvalidSpec(f"bad --Ns {args.Ns!r}") from None
    if not Ns or min(Ns) < 1:
        raise InvalidSpec("--Ns must list positive integers")
    protocol = spec.protocol
    table = ResultTable(header=header, columns=["axis1", "axis2", "value", "closedform", "broadened", "engine_tag"])
    for g in spec.axis1.values():
        for N in Ns:
            dist = _exact_distribution(g, 0.0, protocol, None, N)
            table.rows.append([g, N, dist.mean_n if dist.mean_n is not None else UNDEFINED,
                               cf.mean_finite(protocol, g, N), cf.mean_broadened(protocol, g, N), "exact"])
    widths = {}
    plateau = cf.PLATEAU[protocol]
    for N in Ns:
        try:
            widths[N] = cf.transition_halfwidth(
                lambda x, n: _exact_distribution(x, 0.0, protocol, None, n).mean_n, N, k=1, plateau=plateau)
        except ValueError:
            widths[N] = None
    table.header["halfwidth"] = {str(k): v for k, v in widths.items()}
    if args.check:
        bad = 0
        for row in table.rows:
            if row[2] != UNDEFINED and abs(row[2] - row[3]) > 1e-9:
                bad += 1
        table.check_failures = bad
        table.header["check"] = {"sampled": len(table.rows), "compared": len(table.rows), "failures": bad}
    return table


def _phase_overlay(table: ResultTable, branches: int, tol: float, axis_order: List[str]):
    count = 0
    for pair in ((1, 2), (0, 1), (0, 2)):
        for curve in matching_curves(pair, range(1, branches + 1)):
            for a in np.linspace(-math.pi, math.pi, 41):
                try:
                    g = curve(float(a))
                except ChiralWalkError:
                    continue
                if not 0 <= g <= 4 * math.pi:
                    continue
                cls = classify_phase_factors(ModelParams.from_gtau(g, float(a)), max(tol, 1e-8))
                ok = cls.is_matched(*pair)
                pt = {"alpha": float(a), "gtau": g}
                table.rows.append([pt[axis_order[0]], pt[axis_order[1]], cls.distinct_count,
                                   f"overlay:{pair[0]}{pair[1]}:{curve.family}:{curve.branch}:{'ok' if ok else 'MISMATCH'}"])
                if not ok:
                    table.failed += 1
                count += 1
    table.header["overlay_rows"] = count


def _locate(table: ResultTable, spec: SweepSpec):
    if spec.axis_names != ["gtau"]:
        raise InvalidSpec("--locate needs a single gtau axis")
    alpha = spec.fixed.get("alpha", 0.0)
    for c in locate_unit_eigenvalues(alpha, spec.axis1.min, spec.axis1.max, spec.protocol):
        table.rows.append([c.peak, alpha, c.peak_value, f"crossing:{c.left!r}:{c.right!r}"])
    table.header["located"] = sum(1 for r in table.rows if str(r[-1]).startswith("crossing"))


def execute(argv: Sequence[str], write: bool = True) -> Tuple[int, Optional[ResultTable]]:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        # argparse has already printed usage; --help exits with 0
        return (exc.code if isinstance(exc.code, int) else 2), None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.shots < 1:
            raise InvalidSpec("--shots must be positive")
        if not 0 <= args.seed < 2 ** 64:
            raise InvalidSpec("--seed must be an unsigned 64-bit integer")
        if args.command == "broadening":
            args.engine = "exact"
        spec = spec_from_args(args)
        header = _header(args, argv, spec)
        if args.command == "broadening":
            table = _broadening(args, spec, header)
        else:
            table = run_sweep(spec, header, args.shots, args.seed, max(1, args.jobs), args.check)
            if args.command == "phase-diagram" and args.overlay:
                table.header["grid_rows"] = len(table.rows)
                _phase_overlay(table, args.overlay, args.tol, spec.axis_names if spec.axis2 else ["alpha", "gtau"])
            if args.command == "spectra" and args.locate:
                table.header["grid_rows"] = len(table.rows)
                _locate(table, spec)
    except InvalidSpec as exc:
        print(f"chiralwalk: invalid specification: {exc}", file=sys.stderr)
        return 2, None
    except ValueError as exc:
        print(f"chiralwalk: invalid specification: {exc}", file=sys.stderr)
        return 2, None

    if write:
        text = table.to_csv()
        if args.out == "-":
            sys.stdout.write(text)
        else:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
            if args.sidecar:
                with open(args.out + ".json", "w") as fh:
                    json.dump(table.header, fh, indent=2, sort_keys=True, default=str)
    if table.failed or table.check_failures:
        print(f"chiralwalk: {table.failed} failed cells, {table.check_failures} check failures",
              file=sys.stderr)
        return 3, table
    return 0, table


def rerun_from_header(text: str) -> Tuple[int, Optional[ResultTable]]:
    """Re-execute the command recorded in a table's ``# argv`` header line."""
    header, _ = read_table(text)
    return execute(json.loads(header["argv"]), write=False)


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, _ = execute(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
