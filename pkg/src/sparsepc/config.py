"""Flat ``section.key = value`` experiment configuration.

One assignment per line; ``#`` starts a comment. Values are Python literals
(numbers, quoted strings, lists, ``True``/``False``); a bare word is read as a
string. Unknown or repeated keys are rejected, and every error names the
line and key.
"""

from __future__ import annotations

import ast
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, SparsePCError
from .indices import AdmissibleWeights, SurrogateWeights, WeightModel, surrogate_constants
from .torus import PeriodicField, PeriodicGrid, SolverConfig, TrigBasis

_LINE = re.compile(r"^\s*([A-Za-z_][\w]*(?:\.[A-Za-z_]\w*)*)\s*=\s*(.*?)\s*$")
_WORD = re.compile(r"^[A-Za-z_][\w\-]*$")

_INT = "int"
_FLOAT = "float"
_STR = "str"
_BOOL = "bool"
_FLOATS = "list[float]"
_INTS = "list[int]"

# key -> (type, default); ``None`` marks optional keys
SCHEMA: dict[str, tuple[str, object]] = {
    "experiment.name": (_STR, "experiment"),
    "experiment.seed": (_INT, 0),
    "output.dir": (_STR, "out"),
    "grid.d": (_INT, 1),
    "grid.n": (_INT, 64),
    "rhs.kind": (_STR, "sin"),
    "rhs.path": (_STR, None),
    "basis.t": (_FLOAT, 1.0),
    "weights.kind": (_STR, "power_law"),
    "weights.c0": (_FLOAT, 0.5),
    "weights.theta": (_FLOAT, 2.0),
    "weights.b": (_FLOATS, None),
    "weights.p": (_FLOAT, 0.6),
    "weights.xi": (_FLOAT, 1.0),
    "weights.M": (_INT, 4),
    "weights.rho": (_FLOATS, None),
    "weights.K": (_FLOAT, None),
    "weights.scan_limit": (_INT, None),
    "pc.J": (_INT, 6),
    "pc.ref_size": (_INT, 800),
    "pc.Ns": (_INTS, [25, 50, 100, 200, 400]),
    "pc.s_out": (_FLOAT, 1.0),
    "pc.max_slope": (_FLOAT, -0.9),
    "pc.sparsity_Ns": (_INTS, [100, 200, 400, 800]),
    "estimator.kind": (_STR, "tensor"),
    "estimator.pad": (_INT, 2),
    "estimator.samples": (_INT, 10000),
    "solver.rel_tol": (_FLOAT, 1e-10),
    "solver.max_iter": (_INT, 10000),
    "solver.omega": (_FLOAT, None),
    "solver.dealias": (_BOOL, False),
    "solve.y": (_FLOATS, None),
    "indexset.N": (_INT, 20),
    "indexset.dim_cap": (_INT, 10),
    "verify.moment_b": (_FLOATS, [0.5, 0.25]),
    "verify.moment_alpha": (_FLOAT, 1.0),
    "verify.mc_samples": (_INT, 1_000_000),
    "verify.perturbation_cases": (_INT, 100),
    "verify.strip_probes": (_INT, 200),
    "verify.strip_J": (_INT, 2),
    "verify.C": (_FLOAT, 10.0),
    "verify.alpha": (_FLOAT, 1.0),
    "verify.tau": (_FLOAT, 1.0),
    "verify.theta": (_FLOAT, 10.0),
    "identity.cases": (_INT, 50),
    "identity.max_dim": (_INT, 3),
    "identity.max_degree": (_INT, 6),
}

RHS_KINDS = ("sin", "cos", "sin_cos", "file")


def _coerce(kind: str, value, key: str, line: int):
    def bad():
        return ConfigError(f"expected {kind}, got {value!r}", key=key, line=line)

    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad()
        return value
    if kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad()
        return float(value)
    if kind == _STR:
        if not isinstance(value, str):
            raise bad()
        return value
    if kind == _BOOL:
        if not isinstance(value, bool):
            raise bad()
        return value
    if kind in (_FLOATS, _INTS):
        if not isinstance(value, (list, tuple)):
            raise bad()
        inner = _INT if kind == _INTS else _FLOAT
        return [_coerce(inner, v, key, line) for v in value]
    raise AssertionError(kind)


def parse_config_text(text: str) -> tuple[dict, dict]:
    """Raw values and the line number of every key present in ``text``."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw)
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            raise ConfigError(f"cannot parse {raw.strip()!r}; expected 'section.key = value'", line=lineno)
        key, text_value = m.group(1), m.group(2)
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError(f"repeated key (first set on line {lines[key]})", key=key, line=lineno)
        try:
            value = ast.literal_eval(text_value)
        except (ValueError, SyntaxError):
            if _WORD.match(text_value):
                value = text_value
            else:
                raise ConfigError(f"cannot read value {text_value!r}", key=key, line=lineno) from None
        values[key] = _coerce(SCHEMA[key][0], value, key, lineno)
        lines[key] = lineno
    return values, lines


def _strip_comment(raw: str) -> str:
    quote = None
    for i, ch in enumerate(raw):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return raw[:i].strip()
    return raw.strip()


@dataclass
class ExperimentConfig:
    """Validated configuration; ``values`` holds every key with defaults filled in."""

    values: dict
    lines: dict = field(default_factory=dict)
    source: str = ""
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source.encode()).hexdigest()

    @property
    def seed(self) -> int:
        return self.values["experiment.seed"]

    def fail(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, key=key, line=self.lines.get(key))

    # -- builders ----------------------------------------------------------

    def grid(self) -> PeriodicGrid:
        return self._wrap(("grid.d", "grid.n"), lambda: PeriodicGrid(self["grid.d"], self["grid.n"]))

    def solver(self) -> SolverConfig:
        return self._wrap(
            ("solver.rel_tol", "solver.max_iter", "solver.omega"),
            lambda: SolverConfig(self["solver.rel_tol"], self["solver.max_iter"], self["solver.omega"], self["solver.dealias"]),
        )

    def basis(self) -> TrigBasis:
        return TrigBasis(self["basis.t"], self["grid.d"])

    def model(self) -> WeightModel:
        keys = ("weights.kind", "weights.p", "weights.xi", "weights.M", "weights.c0", "weights.theta", "weights.b")
        kind = self["weights.kind"]
        if kind == "power_law":
            return self._wrap(
                keys,
                lambda: WeightModel.power_law(
                    self["weights.c0"], self["weights.theta"], self["weights.p"], self["weights.xi"], self["weights.M"]
                ),
            )
        if kind == "explicit":
            if self["weights.b"] is None:
                raise self.fail("weights.b", "explicit weights need a list 'weights.b'")
            return self._wrap(
                keys,
                lambda: WeightModel.explicit(self["weights.b"], self["weights.p"], self["weights.xi"], self["weights.M"]),
            )
        raise self.fail("weights.kind", f"must be 'power_law' or 'explicit', got {kind!r}")

    def rho(self) -> AdmissibleWeights:
        if self["weights.rho"] is not None:
            return self._wrap(("weights.rho",), lambda: AdmissibleWeights.explicit(self["weights.rho"]))
        return AdmissibleWeights.from_model(self.model())

    def surrogate(self, dim_cap: int) -> SurrogateWeights:
        rho = self.rho()
        M = self["weights.M"]
        scan = self["weights.scan_limit"] or 10 * max(dim_cap, 1)
        base = self._wrap(("weights.M", "weights.scan_limit"), lambda: surrogate_constants(M, rho, scan))
        K = self["weights.K"]
        if K is None:
            return base
        if not K > 0:
            raise self.fail("weights.K", "must be positive")
        n = base.scan_limit
        kr = K * rho.rho_array(n)
        small = kr[kr < 1.0]
        log_C = float(2.0 * np.sum(np.log(small))) if small.size else 0.0
        return SurrogateWeights(K, math.exp(log_C), M, rho, log_C, n, base.warning)

    def rhs(self, grid: PeriodicGrid) -> PeriodicField:
        kind = self["rhs.kind"]
        if kind not in RHS_KINDS:
            raise self.fail("rhs.kind", f"must be one of {', '.join(RHS_KINDS)}")
        if kind == "file":
            path = self["rhs.path"]
            if not path:
                raise self.fail("rhs.path", "rhs.kind = file needs rhs.path")
            full = (self.base_dir / path) if not Path(path).is_absolute() else Path(path)
            try:
                field_ = PeriodicField.from_bytes(full.read_bytes())
            except OSError as exc:
                raise self.fail("rhs.path", f"cannot read {full}: {exc}") from None
            except SparsePCError as exc:
                raise self.fail("rhs.path", str(exc)) from None
            if field_.grid != grid:
                raise self.fail("rhs.path", f"field grid {field_.grid} differs from configured {grid}")
            return field_
        phase = 2 * np.pi * sum(grid.coords)
        if kind == "sin":
            return PeriodicField(grid, np.sin(phase))
        if kind == "cos":
            return PeriodicField(grid, np.cos(phase))
        return PeriodicField(grid, np.sin(phase) + 0.5 * np.cos(2 * phase))

    def _wrap(self, keys, build):
        try:
            return build()
        except SparsePCError as exc:
            present = [k for k in keys if k in self.lines]
            key = present[0] if present else keys[0]
            raise self.fail(key, str(exc)) from None

    def validate(self) -> None:
        """Build every object the configuration describes, surfacing errors early."""
        grid = self.grid()
        self.solver()
        basis = self._wrap(("basis.t",), self.basis)
        if not basis.t > grid.d / 2:
            raise self.fail("basis.t", f"must exceed d/2 = {grid.d / 2:g} for a bounded coefficient field")
        self.rho()
        self.rhs(grid)
        if self["pc.J"] < 1:
            raise self.fail("pc.J", "must be >= 1")
        if self["pc.ref_size"] < 1:
            raise self.fail("pc.ref_size", "must be >= 1")
        if self["estimator.kind"] not in ("tensor", "mc"):
            raise self.fail("estimator.kind", "must be 'tensor' or 'mc'")
        if self["estimator.pad"] < 0:
            raise self.fail("estimator.pad", "must be >= 0")
        if self["estimator.samples"] < 2:
            raise self.fail("estimator.samples", "must be >= 2")
        Ns = self["pc.Ns"]
        if any(b <= a for a, b in zip(Ns, Ns[1:])) or any(n < 1 or n > self["pc.ref_size"] for n in Ns):
            raise self.fail("pc.Ns", "must be strictly ascending within [1, pc.ref_size]")
        if not 0 <= self.seed < 2**64:
            raise self.fail("experiment.seed", "must be an unsigned 64-bit integer")
        if self["indexset.N"] < 1:
            raise self.fail("indexset.N", "must be >= 1")
        if self["solve.y"] is not None and len(self["solve.y"]) > self["pc.J"]:
            raise self.fail("solve.y", "has more entries than pc.J")


def load_config(path, seed: int | None = None, validate: bool = True) -> ExperimentConfig:
    """Read, type-check and (optionally) validate a configuration file.

    ``seed`` overrides ``experiment.seed``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw, lines = parse_config_text(text)
    values = {k: raw.get(k, default) for k, (_, default) in SCHEMA.items()}
    if seed is not None:
        values["experiment.seed"] = seed
    cfg = ExperimentConfig(values, lines, text, path.parent)
    if validate:
        cfg.validate()
    return cfg
