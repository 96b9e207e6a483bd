"""Line-oriented field-definition files.

Format (UTF-8, one directive per line, ``#`` starts a comment)::

    label <free text>            # optional
    dim <d>                      # required, before any component
    noise <n>                    # optional, default 0
    param <name> = <real>
    QD[<i>] = <expr>             # required for every i < d
    PD[<i>] = <expr>
    QS[<i>][<j>] = <expr>        # optional, default 0
    PS[<i>][<j>] = <expr>

Indices are 0-based. Expressions may use q0..q{d-1}, p0..p{d-1}, declared
params, and ``q``/``p`` when d = 1.
"""

from __future__ import annotations

import re
from pathlib import Path

from . import expr as ex
from .field import FieldError, StochasticField

FORMAT_VERSION = 1

_COMPONENT = re.compile(r"^(QD|PD|QS|PS)\s*\[\s*(\d+)\s*\](?:\s*\[\s*(\d+)\s*\])?\s*=\s*(.+)$")
_PARAM = re.compile(r"^param\s+([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(\S+)$")
_RESERVED = {"q", "p"} | set(ex.FUNCTIONS)


class FieldFileError(FieldError):
    def __init__(self, message: str, line: int | None = None, source: str = "<field>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


def parse_field_text(text: str, source: str = "<field>") -> StochasticField:
    d = None
    n = 0
    label = ""
    params: dict[str, float] = {}
    comps: dict[tuple, tuple[int, str]] = {}

    def fail(msg, lineno):
        raise FieldFileError(msg, lineno, source)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word = line.split(None, 1)[0]
        if word == "label":
            label = line[len("label"):].strip()
        elif word in ("dim", "noise"):
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                fail(f"expected '{word} <non-negative integer>'", lineno)
            if comps:
                fail(f"'{word}' must precede component definitions", lineno)
            if word == "dim":
                if d is not None:
                    fail("duplicate 'dim'", lineno)
                d = int(parts[1])
                if d < 1:
                    fail("dim must be >= 1", lineno)
            else:
                n = int(parts[1])
        elif word == "param":
            m = _PARAM.match(line)
            if not m:
                fail("expected 'param <name> = <real>'", lineno)
            name, value = m.groups()
            if name in params:
                fail(f"duplicate param {name!r}", lineno)
            if name in _RESERVED or re.fullmatch(r"[qp]\d+", name):
                fail(f"param name {name!r} is reserved", lineno)
            try:
                params[name] = float(value)
            except ValueError:
                fail(f"bad real {value!r}", lineno)
        else:
            m = _COMPONENT.match(line)
            if not m:
                fail(f"unrecognised directive {line!r}", lineno)
            if d is None:
                fail("'dim' must come before component definitions", lineno)
            kind, i, j, body = m.groups()
            i = int(i)
            stochastic = kind in ("QS", "PS")
            if stochastic != (j is not None):
                fail(f"{kind} takes {'two indices' if stochastic else 'one index'}", lineno)
            if i >= d:
                fail(f"{kind} index {i} out of range for dim {d}", lineno)
            key = (kind, i) if j is None else (kind, i, int(j))
            if j is not None and int(j) >= n:
                fail(f"{kind} channel index {j} out of range for noise {n}", lineno)
            if key in comps:
                fail(f"duplicate definition of {kind}{[k for k in key[1:]]}", lineno)
            comps[key] = (lineno, body)

    if d is None:
        raise FieldFileError("missing 'dim' directive", None, source)

    def get(key):
        if key not in comps:
            return None
        lineno, body = comps[key]
        try:
            e = ex.parse(body)
        except ex.ExprSyntaxError as err:
            fail(f"{err}", lineno)
        if d == 1:
            e = ex.rename(e, {"q": "q0", "p": "p0"})
        allowed = {f"q{k}" for k in range(d)} | {f"p{k}" for k in range(d)} | set(params)
        bad = ex.symbols(e) - allowed
        if bad:
            fail(f"undeclared symbol(s) {', '.join(sorted(bad))}", lineno)
        return ex.bind_params(e, params)

    qd, pd = [], []
    for kind, out in (("QD", qd), ("PD", pd)):
        for i in range(d):
            e = get((kind, i))
            if e is None:
                raise FieldFileError(f"missing {kind}[{i}]", None, source)
            out.append(e)
    qs = tuple(tuple(get(("QS", i, j)) or ex.ZERO for j in range(n)) for i in range(d))
    ps = tuple(tuple(get(("PS", i, j)) or ex.ZERO for j in range(n)) for i in range(d))
    return StochasticField(d, n, tuple(qd), tuple(pd), qs, ps, params, label)


def load_field(path) -> StochasticField:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise FieldFileError(f"cannot read file: {err.strerror}", None, str(path)) from err
    return parse_field_text(text, str(path))


def format_field(f: StochasticField) -> str:
    """Serialise ``f``; zero diffusion entries are omitted."""
    lines = []
    if f.label:
        lines.append(f"label {f.label}")
    lines.append(f"dim {f.d}")
    lines.append(f"noise {f.n}")
    for name, value in f.params.items():
        lines.append(f"param {name} = {value!r}")
    for name, e in f.components():
        if name[1] == "S" and e == ex.ZERO:
            continue
        lines.append(f"{name} = {ex.to_source(e)}")
    return "\n".join(lines) + "\n"
