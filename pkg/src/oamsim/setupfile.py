"""Parser and printer for the line-oriented setup format.

A setup file describes one source chain plus optional experiment blocks::

    # comment, blank lines allowed
    space 4
    crystal amp=1.0 pump_oam=0 alpha=[1.0]
    phase 0.7853981633974483rad     # or: phase 45deg
    spp +4
    crystal amp=1.0 pump_oam=0 alpha=[1.0]
    mirror
    crystal amp=1.0 pump_oam=0 alpha=[1.0]

    [experiment tomography main]
    rate=100000.0
    time=1.0
    noiseless=true

Rules: one stage or one ``key=value`` pair per line; values contain no
whitespace (list elements are comma-separated); angles take a mandatory
``rad``/``deg`` suffix; ``space`` may appear at most once and defaults to
truncation 4.  Stage lines must precede experiment blocks.  Unknown stage
keywords, unknown parameter keys and malformed values are rejected with
the line and column of the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .chain import (ChainConfig, ChainStage, Crystal, CrystalSpec,
                    DownconversionModeShifter, Mirror, PhaseShifter,
                    PumpModeShifter)
from .errors import SetupParseError
from .modes import ModeSpace

STAGE_KEYWORDS = ("space", "crystal", "spp", "mirror", "phase", "modeshift")
EXPERIMENT_KINDS = ("tomography", "phase-scan", "spiral-spectrum", "qhq",
                    "coherence")

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")
_HEADER_RE = re.compile(r"^\[\s*experiment\s+([a-z-]+)\s+(\S+)\s*\]$")
_PHASE_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(rad|deg)$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_RANGE_RE = re.compile(r"^([+-]?\d+)\.\.([+-]?\d+)$")


@dataclass(frozen=True)
class ExperimentSpec:
    """A named, typed parameter block for one CLI experiment kind."""

    kind: str
    name: str
    params: dict

    def get(self, key, default=None):
        return self.params.get(key, default)


@dataclass(frozen=True)
class SetupDocument:
    """Parsed setup file: a mode space, a stage list, experiment blocks."""

    space: ModeSpace
    stages: tuple[ChainStage, ...]
    experiments: tuple[ExperimentSpec, ...] = ()

    def chain(self) -> ChainConfig:
        return ChainConfig(self.stages, self.space)

    def experiment(self, name: str | None = None,
                   kind: str | None = None) -> ExperimentSpec | None:
        for spec in self.experiments:
            if name is not None and spec.name != name:
                continue
            if kind is not None and spec.kind != kind:
                continue
            return spec
        return None


class _Cursor:
    """Position-carrying token reader for one line."""

    def __init__(self, line: str, number: int):
        self.text = line
        self.number = number
        self.tokens = [(m.start() + 1, m.group(0))
                       for m in re.finditer(r"\S+", line)]
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: tuple[str, ...]):
        item = self.peek()
        if item is None:
            col = len(self.text) + 1
            raise SetupParseError("missing token", self.number, col, expected)
        self.pos += 1
        return item

    def done(self):
        item = self.peek()
        if item is not None:
            raise SetupParseError(f"unexpected trailing token {item[1]!r}",
                                  self.number, item[0])

    def error(self, message: str, column: int | None = None,
              expected: tuple[str, ...] = ()):
        if column is None:
            item = self.peek()
            column = item[0] if item else 1
        raise SetupParseError(message, self.number, column, expected)


def _parse_int(cursor: _Cursor, col: int, text: str, what: str) -> int:
    if not _INT_RE.match(text):
        cursor.error(f"{what} must be an integer, got {text!r}", col)
    return int(text)


def _parse_float(cursor: _Cursor, col: int, text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        cursor.error(f"{what} must be a number, got {text!r}", col)
    if not np.isfinite(value):
        cursor.error(f"{what} must be finite, got {text!r}", col)
    return value


def _parse_complex(cursor: _Cursor, col: int, text: str, what: str) -> complex:
    try:
        value = complex(text)
    except ValueError:
        cursor.error(f"{what} must be a real or complex number, got {text!r}", col)
    if not (np.isfinite(value.real) and np.isfinite(value.imag)):
        cursor.error(f"{what} must be finite, got {text!r}", col)
    return value


def _parse_bool(cursor: _Cursor, col: int, text: str, what: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    cursor.error(f"{what} must be true or false, got {text!r}", col)


def _parse_mode_range(cursor: _Cursor, col: int, text: str,
                      what: str) -> tuple[int, int]:
    match = _RANGE_RE.match(text)
    if not match:
        cursor.error(f"{what} must look like -2..2, got {text!r}", col)
    lo, hi = int(match.group(1), 10), int(match.group(2), 10)
    if lo > hi:
        cursor.error(f"{what} bounds are reversed: {text!r}", col)
    return lo, hi


def _split_key_value(cursor: _Cursor, col: int, token: str) -> tuple[str, str]:
    if "=" not in token:
        cursor.error(f"expected key=value, got {token!r}", col)
    key, _, value = token.partition("=")
    if not _NAME_RE.match(key):
        cursor.error(f"invalid key {key!r}", col)
    if not value:
        cursor.error(f"key {key!r} has no value", col)
    return key, value


def _parse_crystal(cursor: _Cursor) -> Crystal:
    seen: dict[str, object] = {}
    while cursor.peek() is not None:
        col, token = cursor.take(("amp=", "pump_oam=", "alpha="))
        key, value = _split_key_value(cursor, col, token)
        if key in seen:
            cursor.error(f"duplicate crystal key {key!r}", col)
        if key == "amp":
            amp = _parse_float(cursor, col, value, "amp")
            if amp < 0:
                cursor.error(f"amp must be >= 0, got {value}", col)
            seen[key] = amp
        elif key == "pump_oam":
            pump = _parse_int(cursor, col, value, "pump_oam")
            if pump % 2 != 0:
                cursor.error(f"pump_oam must be even, got {pump}", col)
            seen[key] = pump
        elif key == "alpha":
            if " " in value or not (value.startswith("[") and value.endswith("]")):
                cursor.error(
                    "alpha must be a bracketed, comma-separated list with no "
                    f"spaces, got {value!r}", col)
            body = value[1:-1]
            if not body:
                cursor.error("alpha list is empty", col)
            coeffs = tuple(_parse_complex(cursor, col, item, "alpha entry")
                           for item in body.split(","))
            if all(c == 0 for c in coeffs):
                cursor.error("alpha list has no nonzero entry", col)
            seen[key] = coeffs
        else:
            cursor.error(f"unknown crystal key {key!r}", col,
                         ("amp", "pump_oam", "alpha"))
    if "amp" not in seen:
        cursor.error("crystal line is missing amp=", 1, ("amp=<float>",))
    if "pump_oam" not in seen:
        cursor.error("crystal line is missing pump_oam=", 1, ("pump_oam=<int>",))
    spec = CrystalSpec(pump_amplitude=seen["amp"], pump_oam=seen["pump_oam"],
                       spiral_coefficients=seen.get("alpha", (1.0 + 0.0j,)))
    return Crystal(spec)


# Parameter schemas per experiment kind; each entry maps key -> (parser, doc).
_COMMON_KEYS = {
    "seed": ("int>=0", _parse_int),
    "rate": ("float>0", _parse_float),
    "time": ("float>0", _parse_float),
}
_SCHEMAS: dict[str, dict[str, tuple[str, object]]] = {
    "tomography": {**_COMMON_KEYS,
                   "gamma": ("float in [0,1]", _parse_float),
                   "noiseless": ("bool", _parse_bool),
                   "resamples": ("int>=10", _parse_int)},
    "phase-scan": {**_COMMON_KEYS,
                   "gamma": ("float in [0,1]", _parse_float),
                   "points": ("int>=8", _parse_int),
                   "shifter": ("int>=0", _parse_int),
                   "signal": ("int", _parse_int),
                   "idler": ("int", _parse_int),
                   "noiseless": ("bool", _parse_bool)},
    "spiral-spectrum": {"gamma": ("float in [0,1]", _parse_float),
                        "range": ("lo..hi", _parse_mode_range)},
    "qhq": {"input_h": ("complex", _parse_complex),
            "input_v": ("complex", _parse_complex),
            "target_deg": ("float", _parse_float)},
    "coherence": {"lpa": ("float>=0", _parse_float),
                  "lpb": ("float>=0", _parse_float),
                  "lspdc": ("float>=0", _parse_float),
                  "lcoh": ("float>=0", _parse_float)},
}
_BOUNDS = {
    "seed": lambda v: v >= 0,
    "rate": lambda v: v > 0,
    "time": lambda v: v > 0,
    "gamma": lambda v: 0.0 <= v <= 1.0,
    "points": lambda v: v >= 8,
    "resamples": lambda v: v >= 10,
    "shifter": lambda v: v >= 0,
    "lpa": lambda v: v >= 0,
    "lpb": lambda v: v >= 0,
    "lspdc": lambda v: v >= 0,
    "lcoh": lambda v: v >= 0,
}


def _validate_chain_semantics(space: ModeSpace,
                              stages: list[tuple[int, ChainStage]],
                              total_lines: int) -> None:
    """Re-walk the chain for positioned semantic diagnostics."""
    pump = 0
    in_flight: list[set[tuple[int, int]]] = []
    any_crystal = False
    for line_no, stage in stages:
        if isinstance(stage, PumpModeShifter):
            pump += stage.delta
        elif isinstance(stage, Mirror):
            pump = -pump
        elif isinstance(stage, Crystal):
            any_crystal = True
            effective = stage.spec.pump_oam + pump
            if effective % 2 != 0:
                raise SetupParseError(
                    f"effective pump OAM {effective} at this crystal is odd",
                    line_no, 1)
            m = effective // 2
            modes = set()
            for k, alpha in enumerate(stage.spec.spiral_coefficients):
                if alpha == 0:
                    continue
                for pair in {(m + k, m - k), (m - k, m + k)}:
                    if not (space.contains(pair[0]) and space.contains(pair[1])):
                        raise SetupParseError(
                            f"emission mode {pair} exceeds truncation "
                            f"+-{space.truncation}", line_no, 1)
                    modes.add(pair)
            in_flight.append(modes)
        elif isinstance(stage, DownconversionModeShifter):
            for modes in in_flight:
                shifted = {(a + stage.delta, b + stage.delta) for a, b in modes}
                for pair in shifted:
                    if not (space.contains(pair[0]) and space.contains(pair[1])):
                        raise SetupParseError(
                            f"mode shift pushes pair mode {pair} outside "
                            f"truncation +-{space.truncation}", line_no, 1)
                modes.clear()
                modes.update(shifted)
    if not any_crystal:
        raise SetupParseError("document defines no crystal stage",
                              total_lines + 1, 1)


def parse_setup(text: str) -> SetupDocument:
    """Parse setup text; raises :class:`SetupParseError` on any rejection."""
    space: ModeSpace | None = None
    staged: list[tuple[int, ChainStage]] = []
    experiments: list[ExperimentSpec] = []
    block: ExperimentSpec | None = None
    block_keys: dict[str, tuple[str, object]] | None = None

    lines = text.splitlines()
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        cursor = _Cursor(line, number)

        if line.lstrip().startswith("["):
            col = cursor.peek()[0]
            match = _HEADER_RE.match(line.strip())
            if not match:
                cursor.error("malformed experiment header", col,
                             ("[experiment <kind> <name>]",))
            kind, name = match.group(1), match.group(2)
            if kind not in EXPERIMENT_KINDS:
                cursor.error(f"unknown experiment kind {kind!r}", col,
                             EXPERIMENT_KINDS)
            if not _NAME_RE.match(name):
                cursor.error(f"invalid experiment name {name!r}", col)
            if any(e.name == name for e in experiments):
                cursor.error(f"duplicate experiment name {name!r}", col)
            block = ExperimentSpec(kind, name, {})
            block_keys = _SCHEMAS[kind]
            experiments.append(block)
            continue

        if block is not None:
            col, token = cursor.take(("key=value",))
            if token in STAGE_KEYWORDS:
                cursor.error("stage lines must come before experiment blocks",
                             col)
            key, value = _split_key_value(cursor, col, token)
            cursor.done()
            if key not in block_keys:
                cursor.error(f"unknown {block.kind} key {key!r}", col,
                             tuple(sorted(block_keys)))
            if key in block.params:
                cursor.error(f"duplicate key {key!r}", col)
            doc, parser = block_keys[key]
            parsed = parser(cursor, col, value, key)
            bound = _BOUNDS.get(key)
            if bound is not None and not bound(parsed):
                cursor.error(f"{key} out of range (expected {doc}), "
                             f"got {value}", col)
            block.params[key] = parsed
            continue

        col, keyword = cursor.take(STAGE_KEYWORDS)
        if keyword == "space":
            if space is not None:
                cursor.error("duplicate space line", col)
            vcol, vtext = cursor.take(("<int>",))
            truncation = _parse_int(cursor, vcol, vtext, "space truncation")
            if truncation < 0:
                cursor.error(f"space truncation must be >= 0, got {truncation}",
                             vcol)
            cursor.done()
            space = ModeSpace(truncation)
        elif keyword == "crystal":
            staged.append((number, _parse_crystal(cursor)))
        elif keyword == "spp":
            vcol, vtext = cursor.take(("<signed int>",))
            staged.append((number, PumpModeShifter(
                _parse_int(cursor, vcol, vtext, "spp shift"))))
            cursor.done()
        elif keyword == "mirror":
            cursor.done()
            staged.append((number, Mirror()))
        elif keyword == "phase":
            vcol, vtext = cursor.take(("<float>rad", "<float>deg"))
            match = _PHASE_RE.match(vtext)
            if not match:
                cursor.error(f"phase must be <float>rad or <float>deg, "
                             f"got {vtext!r}", vcol)
            value = float(match.group(1))
            if match.group(2) == "deg":
                value = float(np.deg2rad(value))
            staged.append((number, PhaseShifter(value)))
            cursor.done()
        elif keyword == "modeshift":
            vcol, vtext = cursor.take(("<signed int>",))
            staged.append((number, DownconversionModeShifter(
                _parse_int(cursor, vcol, vtext, "modeshift"))))
            cursor.done()
        else:
            cursor.error(f"unknown directive {keyword!r}", col,
                         STAGE_KEYWORDS + ("[experiment <kind> <name>]",))

    if space is None:
        space = ModeSpace()
    _validate_chain_semantics(space, staged, len(lines))
    return SetupDocument(space, tuple(stage for _, stage in staged),
                         tuple(experiments))


def parse_setup_file(path: str) -> SetupDocument:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_setup(handle.read())


def _format_complex(value: complex) -> str:
    if value.imag == 0:
        return repr(value.real)
    if value.real == 0:
        return f"{value.imag!r}j"
    sign = "+" if value.imag > 0 else "-"
    return f"{value.real!r}{sign}{abs(value.imag)!r}j"


def _format_param(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):  # mode range
        return f"{value[0]}..{value[1]}"
    if isinstance(value, complex):
        return _format_complex(value)
    return repr(value)


def format_setup(doc: SetupDocument) -> str:
    """Canonical text for a document; ``parse_setup`` inverts it exactly."""
    lines = [f"space {doc.space.truncation}"]
    for stage in doc.stages:
        if isinstance(stage, Crystal):
            alpha = ",".join(_format_complex(c)
                             for c in stage.spec.spiral_coefficients)
            lines.append(f"crystal amp={stage.spec.pump_amplitude!r} "
                         f"pump_oam={stage.spec.pump_oam} alpha=[{alpha}]")
        elif isinstance(stage, PumpModeShifter):
            lines.append(f"spp {stage.delta:+d}")
        elif isinstance(stage, Mirror):
            lines.append("mirror")
        elif isinstance(stage, PhaseShifter):
            lines.append(f"phase {stage.phi!r}rad")
        elif isinstance(stage, DownconversionModeShifter):
            lines.append(f"modeshift {stage.delta}")
        else:  # pragma: no cover - exhaustive over ChainStage
            raise TypeError(f"unknown stage {stage!r}")
    for spec in doc.experiments:
        lines.append("")
        lines.append(f"[experiment {spec.kind} {spec.name}]")
        for key in sorted(spec.params):
            lines.append(f"{key}={_format_param(spec.params[key])}")
    return "\n".join(lines) + "\n"


def write_setup(doc: SetupDocument, path: str) -> None:
    from ._util import atomic_write_text

    atomic_write_text(path, format_setup(doc))
