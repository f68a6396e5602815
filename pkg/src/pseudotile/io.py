"""Plain-text formats for specs, windows and digit systems; PGM rasters and JSON reports.

All text formats share one line grammar: a keyword followed by
whitespace-separated fields, ``#`` starting a comment. Numbers may be
arithmetic expressions in ``tau``, ``pi`` and ``sqrt``.

    dimension 1
    expansion tau
    prototile a 0 tau            # boxes: lo_1..lo_d hi_1..hi_d, joined by '|'
    prototile b 0 1
    place a 0                    # window placements
    ball 0.5 100                 # valid ball: center..., radius
    digit a b 0                  # digit sets
    seed a 0                     # generator: seed patch, rules, iteration count
    rule a -> a 0 | b tau
    iterations 12
    builtin fibonacci 13         # named generator
    h 0.001                      # config
    k auto
"""
from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Raster, Region
from .gifs import PrototileSolution
from .report import _plain
from .substitution import DigitSystem
from .tiling import Patch, TilingWindow, window_from_patch

_CONST = {"tau": (1 + 5 ** 0.5) / 2, "pi": math.pi, "e": math.e}
_FUNC = {"sqrt": math.sqrt}
_BIN = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}
_UN = {ast.USub: operator.neg, ast.UAdd: operator.pos}

BUILTINS = ("fibonacci", "fibonacci_two_sided", "shifted_fibonacci", "base3", "chair", "random")
CONFIG_KEYS = {"h": float, "tol": float, "k": "auto_int", "L": "auto_float", "radius": float}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _CONST:
        return _CONST[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
        return _BIN[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UN:
        return _UN[type(node.op)](_eval(node.operand))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNC \
            and len(node.args) == 1:
        return _FUNC[node.func.id](_eval(node.args[0]))
    raise ValueError("unsupported expression")


def number(text: str) -> float:
    """Evaluate a numeric literal or a small arithmetic expression."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return float(_eval(ast.parse(text, mode="eval").body))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# spec files


@dataclass
class SystemSpec:
    dimension: int
    expansion: np.ndarray | None = None
    prototiles: list = field(default_factory=list)  # [(name, Region)]
    placements: list = field(default_factory=list)  # [(name, vector)]
    ball: tuple | None = None  # (center, radius)
    digits: list = field(default_factory=list)  # [(name_i, name_j, vector)]
    seed: list = field(default_factory=list)  # [(name, vector)]
    rules: dict = field(default_factory=dict)  # name_j -> [(name_i, vector)]
    iterations: int | None = None
    builtin: tuple | None = None  # (name, args)
    config: dict = field(default_factory=dict)
    power: int = 1

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.prototiles]

    @property
    def m(self) -> int:
        return len(self.prototiles)

    @property
    def source(self) -> str:
        kinds = []
        if self.digits:
            kinds.append("digits")
        if self.placements:
            kinds.append("window")
        if self.seed or self.rules or self.iterations is not None:
            kinds.append("generator")
        if self.builtin:
            kinds.append("builtin")
        return kinds[0] if len(kinds) == 1 else ",".join(kinds)


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()

    def records(self):
        for n, raw in enumerate(self.lines, start=1):
            line = raw.split("#", 1)[0]
            if not line.strip():
                continue
            col = len(line) - len(line.lstrip()) + 1
            yield n, col, line.split()


def _vec(tokens, d, line, col, what):
    if len(tokens) != d:
        raise ParseError(f"{what} needs {d} coordinates, got {len(tokens)}", line, col)
    try:
        return np.array([number(t) for t in tokens])
    except ValueError as exc:
        raise ParseError(str(exc), line, col) from None


def _boxes(tokens, d, line, col):
    boxes, cur = [], []
    for t in tokens + ["|"]:
        if t == "|":
            v = _vec(cur, 2 * d, line, col, "box")
            boxes.append([v[:d], v[d:]])
            cur = []
        else:
            cur.append(t)
    b = np.array(boxes)
    if np.any(b[:, 1] <= b[:, 0]):
        raise ParseError("box with hi <= lo", line, col)
    return Region(b)


def parse_spec(text: str) -> SystemSpec:
    """Parse and validate spec-file text; errors carry line and column."""
    spec = None
    for line, col, tok in _Reader(text).records():
        key, rest = tok[0], tok[1:]
        if key == "dimension":
            if spec is not None:
                raise ParseError("dimension given twice", line, col)
            if len(rest) != 1 or not rest[0].isdigit() or int(rest[0]) < 1:
                raise ParseError("dimension must be a positive integer", line, col)
            spec = SystemSpec(int(rest[0]))
            continue
        if spec is None:
            raise ParseError("the first record must be 'dimension'", line, col)
        d = spec.dimension
        if key == "expansion":
            if len(rest) not in (1, d * d):
                raise ParseError(f"expansion needs 1 or {d * d} entries", line, col)
            v = _vec(rest, len(rest), line, col, "expansion")
            spec.expansion = v[0] * np.eye(d) if len(rest) == 1 else v.reshape(d, d)
        elif key == "power":
            if len(rest) != 1 or not rest[0].isdigit():
                raise ParseError("power must be a positive integer", line, col)
            spec.power = int(rest[0])
        elif key == "prototile":
            if len(rest) < 2:
                raise ParseError("prototile needs a name and boxes", line, col)
            if rest[0] in spec.names:
                raise ParseError(f"prototile {rest[0]!r} defined twice", line, col)
            spec.prototiles.append((rest[0], _boxes(rest[1:], d, line, col)))
        elif key in ("place", "seed"):
            if not rest:
                raise ParseError(f"{key} needs a label", line, col)
            target = spec.placements if key == "place" else spec.seed
            target.append((rest[0], _vec(rest[1:], d, line, col, key)))
        elif key == "ball":
            v = _vec(rest, d + 1, line, col, "ball")
            spec.ball = (v[:d], float(v[d]))
        elif key == "digit":
            if len(rest) < 2:
                raise ParseError("digit needs two labels and a vector", line, col)
            spec.digits.append((rest[0], rest[1], _vec(rest[2:], d, line, col, "digit")))
        elif key == "rule":
            if len(rest) < 2 or rest[1] != "->":
                raise ParseError("rule syntax: rule <label> -> <label> <offset> | ...", line, col)
            children, cur = [], []
            for t in rest[2:] + ["|"]:
                if t == "|":
                    if not cur:
                        raise ParseError("empty rule child", line, col)
                    children.append((cur[0], _vec(cur[1:], d, line, col, "rule offset")))
                    cur = []
                else:
                    cur.append(t)
            spec.rules[rest[0]] = children
        elif key == "iterations":
            if len(rest) != 1 or not rest[0].isdigit():
                raise ParseError("iterations must be a non-negative integer", line, col)
            spec.iterations = int(rest[0])
        elif key == "builtin":
            if not rest or rest[0] not in BUILTINS:
                raise ParseError(f"builtin must be one of {', '.join(BUILTINS)}", line, col)
            try:
                args = [number(a) for a in rest[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), line, col) from None
            spec.builtin = (rest[0], args)
        elif key in CONFIG_KEYS:
            if len(rest) != 1:
                raise ParseError(f"{key} takes one value", line, col)
            spec.config[key] = _config_value(key, rest[0], line, col)
        else:
            raise ParseError(f"unknown keyword {key!r}", line, col)
    if spec is None:
        raise ParseError("empty spec", 1, 1)
    validate(spec)
    return spec


def _config_value(key, text, line, col):
    kind = CONFIG_KEYS[key]
    if kind in ("auto_int", "auto_float") and text == "auto":
        return "auto"
    try:
        v = number(text)
    except ValueError as exc:
        raise ParseError(str(exc), line, col) from None
    if kind == "auto_int":
        if v != int(v) or v < 1:
            raise ParseError(f"{key} must be 'auto' or a positive integer", line, col)
        return int(v)
    if v < 0 or (key in ("h", "tol") and v == 0):
        raise ParseError(f"{key} out of range", line, col)
    return v


def validate(spec: SystemSpec) -> None:
    src = spec.source
    if src not in ("digits", "window", "generator", "builtin"):
        raise ValidationError(f"exactly one tiling source is required, found: {src or 'none'}")
    if src != "builtin" and not spec.prototiles:
        raise ValidationError("no prototiles")
    for name, r in spec.prototiles:
        if r.dimension != spec.dimension:
            raise ValidationError(f"prototile {name} has dimension {r.dimension}")
    names = set(spec.names)
    used = [n for n, _ in spec.placements + spec.seed]
    used += [a for a, _, _ in spec.digits] + [b for _, b, _ in spec.digits]
    used += list(spec.rules) + [c for ch in spec.rules.values() for c, _ in ch]
    unknown = sorted(set(used) - names)
    if unknown:
        raise ValidationError(f"unknown labels: {unknown}")
    if src in ("digits", "generator") and spec.expansion is None:
        raise ValidationError("an expansion matrix is required")
    if src == "generator" and (not spec.seed or spec.iterations is None):
        raise ValidationError("a generator needs seed placements and an iteration count")
    if src in ("window", "generator") and spec.dimension > 1 and spec.ball is None:
        raise ValidationError("a valid ball is required in dimension > 1")


def serialize_spec(spec: SystemSpec) -> str:
    d = spec.dimension
    out = [f"dimension {d}"]
    if spec.expansion is not None:
        out.append("expansion " + " ".join(fmt(x) for x in np.ravel(spec.expansion)))
    if spec.power != 1:
        out.append(f"power {spec.power}")
    for name, r in spec.prototiles:
        out.append(f"prototile {name} " + " | ".join(
            " ".join(fmt(x) for x in np.ravel(b)) for b in r.boxes))
    for key, items in (("place", spec.placements), ("seed", spec.seed)):
        out += [f"{key} {n} " + " ".join(fmt(x) for x in v) for n, v in items]
    if spec.ball is not None:
        out.append("ball " + " ".join(fmt(x) for x in spec.ball[0]) + f" {fmt(spec.ball[1])}")
    out += [f"digit {a} {b} " + " ".join(fmt(x) for x in v) for a, b, v in spec.digits]
    for j, children in spec.rules.items():
        out.append(f"rule {j} -> " + " | ".join(f"{c} " + " ".join(fmt(x) for x in v) for c, v in children))
    if spec.iterations is not None:
        out.append(f"iterations {spec.iterations}")
    if spec.builtin:
        out.append("builtin " + " ".join([spec.builtin[0]] + [fmt(a) for a in spec.builtin[1]]))
    for k, v in spec.config.items():
        out.append(f"{k} {v if isinstance(v, str) else fmt(v) if isinstance(v, float) else v}")
    return "\n".join(out) + "\n"


def spec_equal(a: SystemSpec, b: SystemSpec) -> bool:
    return serialize_spec(a) == serialize_spec(b)


# ---------------------------------------------------------------------------
# spec -> objects


def builtin_window(name: str, args: list[float]) -> tuple[TilingWindow, np.ndarray]:
    """A named test window and its expansion."""
    from . import generators as g
    a = [int(x) if float(x).is_integer() else x for x in args]
    if name == "fibonacci":
        return g.fibonacci_window(*a), np.array([[g.TAU]])
    if name == "fibonacci_two_sided":
        return g.fibonacci_two_sided(*a), np.array([[g.TAU]])
    if name == "shifted_fibonacci":
        return g.shifted_fibonacci_window(*a), np.array([[g.TAU]])
    if name == "base3":
        return g.base3_window(*a), np.array([[3.0]])
    if name == "chair":
        return g.chair_window(*a), 2.0 * np.eye(2)
    if name == "random":
        return g.random_window(*a), np.array([[g.TAU]])
    raise ValidationError(f"unknown builtin {name!r}")


def spec_window(spec: SystemSpec) -> TilingWindow:
    """The window described by a spec (placements, generator or builtin)."""
    from .generators import inflate
    if spec.builtin:
        w, _ = builtin_window(*spec.builtin)
    else:
        index = {n: i for i, n in enumerate(spec.names)}
        protos = [r for _, r in spec.prototiles]
        if spec.placements:
            src = spec.placements
            patch = Patch([index[n] for n, _ in src], np.array([v for _, v in src]), protos, names=spec.names)
        elif spec.seed:
            seed = Patch([index[n] for n, _ in spec.seed], np.array([v for _, v in spec.seed]),
                         protos, names=spec.names)
            rule = {index[j]: [(index[c], v) for c, v in ch] for j, ch in spec.rules.items()}
            patch = inflate(seed, spec.expansion, rule, spec.iterations)
        else:
            raise ValidationError("this spec file describes digits, not a window")
        if spec.ball is not None:
            w = TilingWindow(patch.sorted(), spec.ball[0], spec.ball[1])
        else:
            w = window_from_patch(patch.sorted())
    if "radius" in spec.config:
        w = TilingWindow(w.patch, w.center, min(w.radius, spec.config["radius"]))
    return w


def spec_expansion(spec: SystemSpec) -> np.ndarray:
    if spec.expansion is not None:
        return spec.expansion
    if spec.builtin:
        return builtin_window(*spec.builtin)[1]
    raise ValidationError("no expansion matrix")


def spec_digits(spec: SystemSpec) -> DigitSystem:
    if not spec.digits:
        raise ValidationError("this spec file has no digit sets")
    m, d = spec.m, spec.dimension
    index = {n: i for i, n in enumerate(spec.names)}
    cells = [[[] for _ in range(m)] for _ in range(m)]
    for a, b, v in spec.digits:
        cells[index[a]][index[b]].append(v)
    digits = [[np.array(c).reshape(-1, d) for c in row] for row in cells]
    return DigitSystem(spec.expansion, digits, k=spec.power, names=spec.names)


def spec_prototiles(spec: SystemSpec) -> list[Region]:
    return [r for _, r in spec.prototiles]


# ---------------------------------------------------------------------------
# windows and digit systems as files


def window_to_spec(w: TilingWindow) -> SystemSpec:
    names = list(w.names)
    p = w.patch
    return SystemSpec(
        w.dimension,
        prototiles=[(n, Region(r.boxes)) for n, r in zip(names, w.prototiles)],
        placements=[(names[lab], t) for lab, t in zip(p.labels, p.translations)],
        ball=(np.asarray(w.center, dtype=float), float(w.radius)))


def write_window(w: TilingWindow, path) -> None:
    Path(path).write_text(serialize_spec(window_to_spec(w)))


def read_window(path) -> TilingWindow:
    return spec_window(parse_spec(Path(path).read_text()))


def digits_to_spec(D: DigitSystem, prototiles: list[Region] | None = None) -> SystemSpec:
    d = D.dimension
    protos = prototiles or [Region.box(np.zeros(d), np.ones(d))] * D.m
    digits = [(D.names[i], D.names[j], v) for i in range(D.m) for j in range(D.m) for v in D.digits[i][j]]
    return SystemSpec(d, expansion=D.phi, power=D.k,
                      prototiles=[(n, Region(r.boxes)) for n, r in zip(D.names, protos)],
                      digits=digits)


def write_digits(D: DigitSystem, path, prototiles: list[Region] | None = None) -> None:
    Path(path).write_text(serialize_spec(digits_to_spec(D, prototiles)))


def read_digits(path) -> DigitSystem:
    return spec_digits(parse_spec(Path(path).read_text()))


# ---------------------------------------------------------------------------
# rasters and reports


def write_pgm(r: Raster, path) -> None:
    """Binary PGM (P5) of a 1D or 2D raster; row 0 is the top, i.e. the largest y."""
    occ = np.atleast_2d(r.occ) if r.occ.ndim == 1 else r.occ.T[::-1]
    if occ.ndim != 2:
        raise ValueError("PGM export needs a 1D or 2D raster")
    img = np.where(occ, 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        f.write(img.tobytes())


def read_pgm(path, origin, h: float, dimension: int) -> Raster:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ParseError("not a binary PGM", 1, 1)
    w, hgt = map(int, parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8)[: w * hgt].reshape(hgt, w) > 127
    occ = img[0] if dimension == 1 else img[::-1].T
    return Raster(np.asarray(origin, dtype=float), h, occ.copy())


def write_solution(sol: PrototileSolution, out_dir) -> Path:
    """Per-label geometry plus a JSON manifest; rasters go to PGM, exact boxes inline."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for j, F in enumerate(sol.F):
        name = sol.names[j] if sol.names else str(j)
        e = {"label": name, "volume": F.volume}
        if F.is_exact:
            e["boxes"] = F.boxes
        if F.raster is not None and F.raster.dimension <= 2:
            fname = f"prototile_{j:03d}.pgm"
            write_pgm(F.raster, out / fname)
            e.update(raster=fname, origin=F.raster.origin, h=F.raster.h)
        entries.append(e)
    manifest = {"hausdorff_error": sol.hausdorff_error, "iterations": sol.iterations,
                "contraction": sol.contraction, "mode": sol.mode, "h": sol.h,
                "digit_digest": sol.digest, "prototiles": entries}
    path = out / "solution.json"
    write_json(manifest, path)
    return path


def read_solution(path) -> PrototileSolution:
    path = Path(path)
    man = json.loads(path.read_text())
    F = []
    for e in man["prototiles"]:
        if "boxes" in e:
            F.append(Region(np.array(e["boxes"], dtype=float)))
        else:
            d = len(e["origin"])
            F.append(Region.from_raster(read_pgm(path.parent / e["raster"], e["origin"], e["h"], d)))
    return PrototileSolution(F, man["hausdorff_error"], man["iterations"], man["contraction"],
                             man["mode"], man["h"], names=[e["label"] for e in man["prototiles"]],
                             digest=man["digit_digest"])


def write_json(obj, path) -> None:
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def load_artifact(path):
    """A window, digit system or solution manifest, by content."""
    path = Path(path)
    if path.is_dir():
        path = path / "solution.json"
    if path.suffix == ".json":
        return read_solution(path)
    spec = parse_spec(path.read_text())
    return spec_digits(spec) if spec.digits else spec_window(spec)
