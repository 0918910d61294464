"""Input file loaders: observation lists and sequence alignments.

Alignments may be FASTA (headers starting '>') or relaxed PHYLIP (count
header, then one `name sequence` row per taxon).  Only A/C/G/T are accepted;
anything else is reported with its line and column.
"""

from __future__ import annotations

import numpy as np

from tsmc.coalescent import ALPHABET, SeqAlignment
from tsmc.gmm import GmmData

from .config import ConfigError

__all__ = ["load_alignment", "load_observations", "parse_alignment", "parse_observations"]

_CODES = {letter: code for code, letter in enumerate(ALPHABET)}
_CODES.update({letter.lower(): code for code, letter in enumerate(ALPHABET)})


def load_observations(path: str) -> GmmData:
    return parse_observations(_read(path), source=path)


def load_alignment(path: str) -> SeqAlignment:
    return parse_alignment(_read(path), source=path)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def parse_observations(text: str, *, source: str = "<string>") -> GmmData:
    values = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ConfigError(f"{source}: line {lineno}: not a number: '{line}'") from None
    if not values:
        raise ConfigError(f"{source}: no observations")
    return GmmData.from_observations(np.array(values))


def parse_alignment(text: str, *, source: str = "<string>") -> SeqAlignment:
    stripped = text.lstrip()
    if not stripped:
        raise ConfigError(f"{source}: empty alignment file")
    if stripped.startswith(">"):
        names, rows = _parse_fasta(text, source)
    else:
        names, rows = _parse_phylip(text, source)
    lengths = [len(r) for r in rows]
    for i in range(1, len(rows)):
        if lengths[i] != lengths[0]:
            raise ConfigError(
                f"{source}: record '{names[i]}' has {lengths[i]} sites "
                f"but record '{names[0]}' has {lengths[0]}"
            )
    if lengths[0] == 0:
        raise ConfigError(f"{source}: record '{names[0]}' is empty")
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise ConfigError(f"{source}: duplicate sequence name '{dup}'")
    letters = np.array(rows, dtype=np.int8)
    return SeqAlignment(names=tuple(names), letters=letters)


def _codes(raw_line: str, lineno: int, source: str, start_col: int = 0) -> list[int]:
    out = []
    for col, ch in enumerate(raw_line, start=1):
        if col <= start_col or ch.isspace():
            continue
        if ch not in _CODES:
            raise ConfigError(f"{source}: line {lineno}, column {col}: invalid symbol '{ch}'")
        out.append(_CODES[ch])
    return out


def _parse_fasta(text: str, source: str):
    names: list[str] = []
    rows: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            name = line[1:].strip()
            if not name:
                raise ConfigError(f"{source}: line {lineno}: record has no name")
            names.append(name)
            rows.append([])
        elif not names:
            raise ConfigError(f"{source}: line {lineno}: sequence before first '>' header")
        else:
            rows[-1].extend(_codes(raw, lineno, source))
    return names, rows


def _parse_phylip(text: str, source: str):
    lines = text.splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    lineno, header = body[0]
    parts = header.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ConfigError(f"{source}: line {lineno}: expected header '<taxa> <sites>'")
    t, n = int(parts[0]), int(parts[1])
    if len(body) - 1 != t:
        raise ConfigError(f"{source}: header promises {t} sequences, found {len(body) - 1}")
    names, rows = [], []
    for lineno, raw in body[1:]:
        name = raw.split()[0]
        names.append(name)
        rows.append(_codes(raw, lineno, source, start_col=raw.find(name) + len(name)))
        if len(rows[-1]) != n:
            raise ConfigError(
                f"{source}: line {lineno}: record '{name}' has {len(rows[-1])} sites, header promises {n}"
            )
    return names, rows
