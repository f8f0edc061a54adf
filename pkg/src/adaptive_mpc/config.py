"""YAML experiment files: parsing with line numbers, full validation, digests."""
from dataclasses import dataclass, replace
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import AdaptiveMPCError, ParseError, ValidationError
from .geometry import BoxSet, Polytope
from .noise import NoiseModel
from .system import ChanceConstraints, Mode, RobustConstraints, SystemConfig

# sections that determine the synthesis result; the rest only steer simulation
SYNTH_SECTIONS = ("mode", "system", "noise", "offset", "cost", "lqr", "horizon", "constraints")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    system: SystemConfig
    noise: NoiseModel
    theta_0: np.ndarray
    delta: np.ndarray
    x0: np.ndarray
    T: int
    n_traj: int
    base_seed: int
    out: str
    lms_mu: float
    digest: str

    @property
    def mode(self):
        return self.system.mode

    @property
    def alpha(self):
        return 0.0 if self.mode is Mode.ROBUST else self.system.chance.alpha

    def with_overrides(self, n_traj=None, T=None, base_seed=None, out=None):
        problems = []
        if n_traj is not None and n_traj < 1:
            problems.append(("simulation.n_traj", "must be >= 1"))
        if T is not None and T < 1:
            problems.append(("simulation.T", "must be >= 1"))
        if problems:
            raise ValidationError(problems)
        return replace(
            self,
            n_traj=self.n_traj if n_traj is None else int(n_traj),
            T=self.T if T is None else int(T),
            base_seed=self.base_seed if base_seed is None else int(base_seed),
            out=self.out if out is None else str(out),
        )


class _Doc:
    """Parsed YAML plus the source line of every node, addressed by key path."""

    def __init__(self, text):
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark or exc.context_mark
            raise ParseError(str(exc.problem or exc), mark.line + 1 if mark else None) from exc
        if not isinstance(self.data, dict):
            raise ParseError("top level must be a mapping", 1)
        self.lines = {}
        self._walk(node, ())

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self._walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def line(self, path):
        path = tuple(path)
        while path not in self.lines and path:
            path = path[:-1]
        return self.lines.get(path)

    def get(self, path, default=None, required=True):
        cur = self.data
        for key in path:
            if not isinstance(cur, dict) or key not in cur:
                if required:
                    raise ParseError(f"missing field '{'.'.join(map(str, path))}'", self.line(path))
                return default
            cur = cur[key]
        return cur

    def matrix(self, path, rows=None, cols=None):
        raw = self.get(path)
        name = ".".join(map(str, path))
        if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
            raise ParseError(f"'{name}' must be a list of rows", self.line(path))
        width = len(raw[0])
        for i, r in enumerate(raw):
            if len(r) != width:
                raise ParseError(f"'{name}' row {i} has {len(r)} entries, expected {width}",
                                 self.line(path + (i,)))
            for j, v in enumerate(r):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ParseError(f"'{name}'[{i}][{j}] is not a number", self.line(path + (i, j)))
        if rows is not None and len(raw) != rows:
            raise ParseError(f"'{name}' has {len(raw)} rows, expected {rows}", self.line(path))
        if cols is not None and width != cols:
            raise ParseError(f"'{name}' has {width} columns, expected {cols}", self.line(path))
        return np.array(raw, dtype=float)

    def vector(self, path, size=None, required=True):
        raw = self.get(path, required=required)
        if raw is None:
            return None
        name = ".".join(map(str, path))
        if not isinstance(raw, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise ParseError(f"'{name}' must be a list of numbers", self.line(path))
        if size is not None and len(raw) != size:
            raise ParseError(f"'{name}' has {len(raw)} entries, expected {size}", self.line(path))
        return np.array(raw, dtype=float)

    def number(self, path, kind=float, default=None, required=True):
        raw = self.get(path, default, required)
        if raw is None:
            return None
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ParseError(f"'{'.'.join(map(str, path))}' must be a number", self.line(path))
        if kind is int and float(raw) != int(raw):
            raise ParseError(f"'{'.'.join(map(str, path))}' must be an integer", self.line(path))
        return kind(raw)

    def polytope(self, path, dim):
        spec = self.get(path)
        if isinstance(spec, dict) and "lower" in spec:
            lo = self.vector(path + ("lower",), dim)
            up = self.vector(path + ("upper",), dim)
            if np.any(lo > up):
                raise ParseError(f"'{'.'.join(path)}' has lower > upper", self.line(path))
            return Polytope.from_box(lo, up)
        if isinstance(spec, dict) and "H" in spec:
            H = self.matrix(path + ("H",), cols=dim)
            h = self.vector(path + ("h",), H.shape[0])
            return Polytope(H, h)
        raise ParseError(f"'{'.'.join(path)}' needs either lower/upper or H/h", self.line(path))


def config_digest(data) -> str:
    """SHA-256 of the synthesis-relevant sections in canonical JSON form."""
    core = {k: data[k] for k in SYNTH_SECTIONS if k in data}
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _build(doc: _Doc) -> ExperimentConfig:
    mode = doc.get(("mode",))
    if mode not in ("robust", "stochastic"):
        raise ParseError("'mode' must be 'robust' or 'stochastic'", doc.line(("mode",)))
    A = doc.matrix(("system", "A"))
    n = A.shape[0]
    if A.shape[1] != n:
        raise ParseError(f"'system.A' has {n} rows, expected {A.shape[1]}", doc.line(("system", "A")))
    B = doc.matrix(("system", "B"), rows=n)
    m = B.shape[1]
    E = doc.matrix(("system", "E"), rows=n)
    p = E.shape[1]

    kind = doc.get(("noise", "kind"), "uniform_box", required=False)
    w_bar = doc.vector(("noise", "w_bar"), n)
    problems = []
    if np.any(w_bar < 0):
        problems.append(("noise.w_bar", "bounds must be nonnegative"))
        w_bar = np.abs(w_bar)
    W = BoxSet.symmetric(w_bar)

    Omega = doc.polytope(("offset", "Omega"), p)
    P_rate = doc.polytope(("offset", "rate"), p)
    theta_0 = doc.vector(("offset", "theta_0"), p)
    delta = doc.vector(("offset", "delta"), p)

    P = doc.matrix(("cost", "P"), n, n)
    R = doc.matrix(("cost", "R"), m, m)
    Q_lqr = doc.matrix(("lqr", "Q"), n, n) if doc.get(("lqr", "Q"), required=False) is not None else None
    R_lqr = doc.matrix(("lqr", "R"), m, m) if doc.get(("lqr", "R"), required=False) is not None else None
    N = doc.number(("horizon",), int)

    robust = chance = None
    if doc.get(("constraints", "robust"), required=False) is not None:
        base = ("constraints", "robust")
        b = doc.vector(base + ("b",))
        robust = RobustConstraints(doc.matrix(base + ("C",), b.size, n),
                                   doc.matrix(base + ("D",), b.size, m), b)
    if doc.get(("constraints", "stochastic"), required=False) is not None:
        base = ("constraints", "stochastic")
        h = doc.vector(base + ("h",))
        h_u = doc.vector(base + ("h_u",))
        chance = ChanceConstraints(
            doc.matrix(base + ("G",), h.size, n), h, doc.number(base + ("alpha",)),
            doc.vector(base + ("alpha_rows",)), doc.matrix(base + ("H_u",), h_u.size, m), h_u)

    x0 = doc.vector(("simulation", "x0"), n)
    T = doc.number(("simulation", "T"), int, 20, required=False)
    n_traj = doc.number(("simulation", "n_traj"), int, 100, required=False)
    base_seed = doc.number(("simulation", "base_seed"), int, 0, required=False)
    out = doc.get(("simulation", "out"), "results", required=False)
    lms_mu = doc.number(("simulation", "lms_mu"), float, None, required=False)
    if T < 1:
        problems.append(("simulation.T", "must be >= 1"))
    if n_traj < 1:
        problems.append(("simulation.n_traj", "must be >= 1"))
    if lms_mu is not None and not (0 < lms_mu * np.linalg.norm(E, 2) ** 2 < 1):
        problems.append(("simulation.lms_mu", "needs 0 < mu * ||E||^2 < 1"))

    try:
        system = SystemConfig(A, B, E, W, Omega, P_rate, P, R, N, Mode(mode), robust, chance,
                              Q_lqr, R_lqr)
    except ValidationError as exc:
        problems = list(exc.problems) + problems
        system = None
    if problems:
        raise ValidationError(problems)
    try:
        noise = NoiseModel(kind, W, base_seed)
    except AdaptiveMPCError as exc:
        raise ValidationError([("noise.kind", str(exc))]) from exc
    return ExperimentConfig(str(doc.get(("name",), "experiment", required=False)), system, noise,
                            theta_0, delta, x0, T, n_traj, base_seed, str(out), lms_mu,
                            config_digest(doc.data))


def load_config_text(text) -> ExperimentConfig:
    return _build(_Doc(text))


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises
    ------
    ParseError
        Malformed YAML or a structurally wrong field (carries the line number).
    ValidationError
        Every violated model invariant, each with its field path.
    """
    return load_config_text(Path(path).read_text())


def bundled_config_path(name):
    """Path of a shipped example (``"robust"`` or ``"stochastic"``)."""
    return Path(str(resources.files("adaptive_mpc") / "data" / f"{name}.yaml"))
