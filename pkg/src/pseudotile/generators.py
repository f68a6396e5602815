"""Test windows: Fibonacci, boundary-shifted Fibonacci, chair, base-3 and random strips."""
from __future__ import annotations

import numpy as np

from .geometry import Region
from .tiling import Patch, TilingWindow, window_from_patch

TAU = (1 + 5 ** 0.5) / 2

# rule[j] = list of (i, offset): a label-j tile at t inflates to label-i tiles at phi t + offset
Rule = dict


def inflate(patch: Patch, phi, rule: Rule, n: int = 1) -> Patch:
    """Apply an inflation rule n times."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    labels, trans = patch.labels, patch.translations
    for _ in range(n):
        new_l, new_t = [], []
        for j, subs in rule.items():
            sel = labels == j
            if not sel.any():
                continue
            base = trans[sel] @ phi.T
            for i, off in subs:
                new_l.append(np.full(base.shape[0], i, dtype=np.int64))
                new_t.append(base + np.asarray(off, dtype=float))
        labels = np.concatenate(new_l)
        trans = np.concatenate(new_t)
    return Patch(labels, trans, patch.prototiles, names=patch.names).sorted()


def fibonacci_rule() -> Rule:
    return {0: [(0, [0.0]), (1, [TAU])], 1: [(0, [0.0])]}


def fibonacci_prototiles() -> list[Region]:
    return [Region.interval(0.0, TAU), Region.interval(0.0, 1.0)]


def fibonacci_window(n: int = 13) -> TilingWindow:
    """One-sided Fibonacci strip: sigma^n(a) placed at 0 (a -> ab, b -> a; lengths tau, 1)."""
    seed = Patch([0], [[0.0]], fibonacci_prototiles(), names=["a", "b"])
    return window_from_patch(inflate(seed, [[TAU]], fibonacci_rule(), n))


def fibonacci_word(n: int) -> str:
    w = "a"
    for _ in range(n):
        w = "".join("ab" if c == "a" else "a" for c in w)
    return w


def fibonacci_two_sided(n: int = 7) -> TilingWindow:
    """Two-sided strip fixed by sigma^2 (a -> aba, b -> ab), seeded by b|a at the origin."""
    seed = Patch([1, 0], [[-1.0], [0.0]], fibonacci_prototiles(), names=["a", "b"])
    rule2 = {0: [(0, [0.0]), (1, [TAU]), (0, [TAU + 1])], 1: [(0, [0.0]), (1, [TAU])]}
    p = inflate(seed, [[TAU ** 2]], rule2, n)
    lo, hi, _ = p.flat_boxes
    r = min(-lo.min(), hi.max()) - 1e-9
    return TilingWindow(p, [0.0], r)


def shifted_fibonacci_window(n: int = 13, delta: float = 0.1) -> TilingWindow:
    """Fibonacci strip with every a|b boundary moved right by delta.

    Labels: A1 = an a followed by b (length tau + delta), A2 = an a followed
    by a (length tau), B (length 1 - delta). The result is mutually locally
    derivable from the Fibonacci strip but not self-similar.
    """
    word = fibonacci_word(n)
    lengths = {"a": TAU, "b": 1.0}
    starts = np.concatenate([[0.0], np.cumsum([lengths[c] for c in word])[:-1]])
    labels, trans = [], []
    for k in range(len(word) - 1):
        c, nxt = word[k], word[k + 1]
        if c == "a":
            labels.append(0 if nxt == "b" else 1)
            trans.append(starts[k])
        else:
            labels.append(2)
            trans.append(starts[k] + delta)
    protos = [Region.interval(0.0, TAU + delta), Region.interval(0.0, TAU), Region.interval(0.0, 1.0 - delta)]
    p = Patch(labels, np.array(trans)[:, None], protos, names=["A1", "A2", "B"])
    return window_from_patch(p)


def context_shifted_fibonacci(n: int = 13, delta: float = 0.3, context: str = "bab") -> TilingWindow:
    """Fibonacci strip with the boundary after each ``context`` occurrence moved right by delta.

    Tiles are labelled by length alone, so the label forgets which side was
    moved. With context 'bab' two equally labelled tiles get different
    images; a collar recoding restores the lost information.
    """
    word = fibonacci_word(n)
    lengths = {"a": TAU, "b": 1.0}
    b = np.concatenate([[0.0], np.cumsum([lengths[c] for c in word])])
    w = len(context)
    for k in range(w - 1, len(word) - 1):
        if word[k - w + 1:k + 1] == context:
            b[k + 1] += delta
    lens = np.round(np.diff(b)[:-1], 9)
    kinds = sorted(set(lens.tolist()))
    protos = [Region.interval(0.0, x) for x in kinds]
    p = Patch([kinds.index(x) for x in lens], b[:-2, None], protos, names=[f"len{x:.3f}" for x in kinds])
    return window_from_patch(p)


def base3_window(half: int = 60) -> TilingWindow:
    """Periodic unit tiling of [-half, half] (one label)."""
    t = np.arange(-half, half, dtype=float)[:, None]
    p = Patch(np.zeros(t.shape[0], dtype=np.int64), t, [Region.interval(0.0, 1.0)], names=["u"])
    return TilingWindow(p, [0.0], half - 1e-9)


def base3_rule() -> Rule:
    return {0: [(0, [0.0]), (0, [1.0]), (0, [2.0])]}


def random_window(n: int = 400, seed: int = 0, p_b: float = 0.4) -> TilingWindow:
    """i.i.d. a/b strip with Fibonacci tile lengths; not repetitive."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < p_b).astype(np.int64)
    lengths = np.where(labels == 0, TAU, 1.0)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    starts -= starts[n // 2]
    p = Patch(labels, starts[:, None], fibonacci_prototiles(), names=["a", "b"])
    return window_from_patch(p)


# chair: type t is the L-tromino missing corner t of its 2x2 box, corners in
# counter-clockwise order TR, TL, BL, BR; translation = lower-left of the box.
_MISSING = [(1, 1), (0, 1), (0, 0), (1, 0)]


def chair_prototiles() -> list[Region]:
    out = []
    for mx, my in _MISSING:
        cells = [(x, y) for x in range(2) for y in range(2) if (x, y) != (mx, my)]
        out.append(Region.from_cells(cells))
    return out


def _rot(v, t):
    x, y = v
    for _ in range(t % 4):
        x, y = -y, x
    return np.array([x, y], dtype=float)


def chair_rule() -> Rule:
    base = [(0, (0, 0)), (0, (1, 1)), (1, (2, 0)), (3, (0, 2))]
    rule = {}
    for t in range(4):
        subs = []
        for s, o in base:
            c = np.array(o, dtype=float) + 1.0 - 2.0
            ll = _rot(c, t) + 2.0 - 1.0
            subs.append(((s + t) % 4, ll))
        rule[t] = subs
    return rule


def chair_window(n: int = 6) -> TilingWindow:
    """Chair strip grown from a type-0 tile at the origin by n doublings."""
    protos = chair_prototiles()
    seed = Patch([0], [[0.0, 0.0]], protos, names=["TR", "TL", "BL", "BR"])
    p = inflate(seed, 2 * np.eye(2), chair_rule(), n)
    # largest disc in the L: tangent to both outer walls and the reentrant corner
    r = 2.0 - 2.0 ** 0.5
    scale = 2.0 ** n
    return TilingWindow(p, np.array([r, r]) * scale, r * scale - 1e-9)
